#include <iostream>

#include <CLI11.hpp>

#include "nesslab/sweep.hpp"

int main(int argc, char** argv) {
    CLI::App app{"nesslab: steady-state and feedback sweeps"};
    app.set_version_flag("--version", std::string(NESSLAB_VERSION));
    std::string experiment, config_path, out;
    int workers = 0;
    std::vector<std::string> names;
    for (const auto& e : nesslab::experiments()) names.push_back(e.name);
    app.add_option("experiment", experiment, "experiment to run")->required()->check(CLI::IsMember(names));
    app.add_option("--config,-c", config_path, "JSON config file")->required();
    app.add_option("--out,-o", out, "CSV output path (summary goes next to it as .json)");
    app.add_option("--workers,-j", workers, "worker threads (overrides the config)")->check(CLI::PositiveNumber);
    bool check_only = false;
    app.add_flag("--check", check_only, "validate the config and exit");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    nesslab::SweepConfig cfg;
    try {
        cfg = nesslab::validate_config(config_path);
    } catch (const nesslab::ConfigError& e) {
        for (const auto& msg : e.errors) std::cerr << config_path << ": " << msg << "\n";
        return 1;
    }
    if (cfg.experiment != experiment) {
        std::cerr << config_path << ": experiment is " << cfg.experiment << ", not " << experiment << "\n";
        return 1;
    }
    if (out.empty()) out = cfg.output;
    if (out.empty()) {
        std::cerr << "no output path: set \"output\" in the config or pass --out\n";
        return 1;
    }
    if (check_only) {
        std::cout << cfg.to_json().dump(2) << "\n";
        return 0;
    }

    nesslab::SweepResult r;
    try {
        r = nesslab::run(cfg, workers > 0 ? std::optional<int>(workers) : std::nullopt);
        nesslab::write_outputs(cfg, r, out);
    } catch (const std::exception& e) {
        std::cerr << "nesslab: " << e.what() << "\n";
        return 1;
    }
    const auto summary = nesslab::summarize(cfg, r);
    std::cerr << experiment << ": " << r.rows.size() << " rows -> " << out << " " << summary["status_counts"].dump()
              << "\n";
    return r.all_ok() ? 0 : 2;
}
