#pragma once

// Time evolution and steady states of finite-dimensional Lindblad systems.

#include <Eigen/LU>
#include <Eigen/QR>

#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "models.hpp"
#include "ode.hpp"

namespace nesslab {

/// Hermitian, unit-trace, positive semidefinite matrix (checked on construction).
class DensityMatrix {
public:
    static constexpr double kHermTol = 1e-9;
    static constexpr double kTraceTol = 1e-9;
    static constexpr double kPosTol = 1e-8;

    explicit DensityMatrix(CMatrix m) : m_(std::move(m)) {
        if (m_.rows() == 0 || m_.rows() != m_.cols()) throw InvalidDimension("DensityMatrix: not square");
        if (!m_.allFinite()) throw InvalidState("DensityMatrix: non-finite entries");
        if (hermiticity_defect(m_) > kHermTol) throw InvalidState("DensityMatrix: not Hermitian");
        if (std::abs(m_.trace() - 1.0) > kTraceTol) throw InvalidState("DensityMatrix: trace != 1");
        m_ = 0.5 * (m_ + m_.adjoint()).eval();
        if (min_eigenvalue() < -kPosTol) throw InvalidState("DensityMatrix: negative eigenvalue");
    }

    DensityMatrix(const KetState& psi) : DensityMatrix(psi.projector()) {}  // NOLINT

    static DensityMatrix maximally_mixed(int dim) {
        return DensityMatrix(CMatrix::Identity(dim, dim) / static_cast<double>(dim));
    }

    /// Random full-rank state from a Ginibre matrix (deterministic for a given seed).
    static DensityMatrix random(int dim, std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> g;
        CMatrix x(dim, dim);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = cplx(g(rng), g(rng));
        CMatrix r = x * x.adjoint();
        return DensityMatrix(r / r.trace().real());
    }

    int dim() const { return static_cast<int>(m_.rows()); }
    const CMatrix& matrix() const { return m_; }
    cplx operator()(int i, int j) const { return m_(i, j); }

    double min_eigenvalue() const {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(m_, Eigen::EigenvaluesOnly);
        return es.eigenvalues()(0);
    }

    double purity() const { return (m_ * m_).trace().real(); }

    double expectation(const CMatrix& op) const { return (m_ * op).trace().real(); }

private:
    CMatrix m_;
};

/// 0.5 * || a - b ||_1
inline double trace_distance(const CMatrix& a, const CMatrix& b) {
    CMatrix d = a - b;
    d = 0.5 * (d + d.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<CMatrix> es(d, Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

inline double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
    return trace_distance(a.matrix(), b.matrix());
}

enum class SteadyStateMethod { integrate, nullspace };

inline std::string to_string(SteadyStateMethod m) {
    return m == SteadyStateMethod::integrate ? "integrate" : "nullspace";
}

struct SteadyStateReport {
    DensityMatrix rho_ss;
    double residual = 0.0;  // max |L vec(rho_ss)|
    SteadyStateMethod method = SteadyStateMethod::nullspace;
    long iterations = 0;
    double time = 0.0;      // integration time reached (integrate only)
};

struct EvolveOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    double dt_max = 0.1;
};

namespace detail {

inline CMatrix hermitize(const CMatrix& m) { return 0.5 * (m + m.adjoint()); }

template <class Generator>
CMatrix integrate_hermitian(const Generator& gen, CMatrix rho, double t_final, const EvolveOptions& o,
                            OdeStats& stats) {
    OdeOptions opt;
    opt.rtol = o.rtol;
    opt.atol = o.atol;
    opt.dt_max = o.dt_max;
    double t = 0.0;
    return dopri5<CMatrix>(gen, std::move(rho), t, t_final, opt, stats, [](double, CMatrix& y, const CMatrix&) {
        y = hermitize(y);
        return false;
    });
}

}  // namespace detail

/// rho(t_final) under an arbitrary generator (LindbladGenerator or SuperoperatorGenerator).
template <class Generator>
DensityMatrix evolve_with(const Generator& gen, const DensityMatrix& rho0, double t_final,
                          const EvolveOptions& opt = {}) {
    if (gen.dim() != rho0.dim()) throw InvalidDimension("evolve: dimension mismatch");
    if (!(t_final >= 0.0)) throw InvalidArgument("evolve: t_final must be >= 0");
    if (t_final == 0.0) return rho0;
    OdeStats stats;
    CMatrix rho = detail::integrate_hermitian(gen, rho0.matrix(), t_final, opt, stats);
    return DensityMatrix(rho);
}

inline DensityMatrix evolve(const DensityMatrix& rho0, const CMatrix& h, const std::vector<LindbladTerm>& terms,
                            double t_final, double dt_max = 0.1) {
    EvolveOptions opt;
    opt.dt_max = dt_max;
    return evolve_with(LindbladGenerator(h, terms), rho0, t_final, opt);
}

/// Evolves and records rho at each time in `times` (ascending, >= 0).
template <class Generator, class Visitor>
void evolve_along(const Generator& gen, const DensityMatrix& rho0, const std::vector<double>& times,
                  Visitor&& visit, const EvolveOptions& opt = {}) {
    CMatrix rho = rho0.matrix();
    double t = 0.0;
    for (double target : times) {
        if (target < t) throw InvalidArgument("evolve_along: times must be ascending");
        if (target > t) {
            OdeStats stats;
            rho = detail::integrate_hermitian(gen, std::move(rho), target - t, opt, stats);
            t = target;
        }
        visit(t, DensityMatrix(rho));
    }
}

struct IntegrateSteadyOptions {
    double tol = 1e-9;      // on max |rho_dot|
    double t_max = 5000.0;
    double dt_max = 0.5;
    // the step size is stability-limited near the fixed point, so tight
    // tolerances cost little and keep the residual floor well below tol
    double rtol = 1e-12;
    double atol = 1e-14;
};

/// Integrates until max |rho_dot| <= tol.
inline SteadyStateReport steady_state_integrate(const DensityMatrix& rho0, const CMatrix& h,
                                                const std::vector<LindbladTerm>& terms,
                                                const IntegrateSteadyOptions& o = {}) {
    double total_rate = 0.0;
    for (const auto& t : terms) total_rate += t.rate;
    if (!(total_rate > 0.0)) throw InvalidArgument("steady_state_integrate: needs a positive dissipation rate");
    const LindbladGenerator gen(h, terms);
    if (gen.dim() != rho0.dim()) throw InvalidDimension("steady_state_integrate: dimension mismatch");

    OdeOptions opt;
    opt.rtol = o.rtol;
    opt.atol = o.atol;
    opt.dt_max = o.dt_max;
    OdeStats stats;
    double t = 0.0;
    double residual = max_abs(gen(rho0.matrix()));
    bool converged = residual <= o.tol;
    CMatrix rho = rho0.matrix();
    if (!converged) {
        rho = dopri5<CMatrix>(gen, std::move(rho), t, o.t_max, opt, stats,
                              [&](double, CMatrix& y, const CMatrix& dy) {
                                  y = detail::hermitize(y);
                                  residual = max_abs(dy);
                                  converged = residual <= o.tol;
                                  return converged;
                              });
    }
    if (!converged) throw TimeoutError("steady_state_integrate: t_max reached before convergence", residual);
    return SteadyStateReport{DensityMatrix(rho), max_abs(gen(rho)), SteadyStateMethod::integrate,
                             stats.accepted, t};
}

struct NullSteadyOptions {
    int max_dim = 80;              // guard on the Hilbert-space dimension d (L is d^2 x d^2)
    double degeneracy_window = 1e-9;
    bool check_uniqueness = true;
    int block_size = 4;
    int iterations = 6;
    // Diagonal of a conserved involution (e.g. the parity operator). When set,
    // the solve is restricted to the same-eigenvalue blocks of rho.
    std::optional<RVector> symmetry;
};

namespace detail {

/// Eigenvalues of L nearest zero and the dominant vector of (L - sigma)^{-1},
/// by block inverse iteration with Rayleigh-Ritz on the inverse operator.
struct NearZeroSpectrum {
    std::vector<cplx> eigenvalues;  // ordered by |lambda|
    CVector null_vector;
};

inline NearZeroSpectrum near_zero_spectrum(const CMatrix& l, int block, int iterations, bool want_spectrum) {
    const Eigen::Index n = l.rows();
    const double shift = -1e-11;
    Eigen::PartialPivLU<CMatrix> lu(l - shift * CMatrix::Identity(n, n));

    const int k = want_spectrum ? static_cast<int>(std::min<Eigen::Index>(block, n)) : 1;
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> g;
    CMatrix q(n, k);
    for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = cplx(g(rng), g(rng));
    Eigen::HouseholderQR<CMatrix> qr0(q);
    q = qr0.householderQ() * CMatrix::Identity(n, k);

    CMatrix z;
    for (int it = 0; it < (want_spectrum ? iterations : 2); ++it) {
        z = lu.solve(q);
        Eigen::HouseholderQR<CMatrix> qr(z);
        q = qr.householderQ() * CMatrix::Identity(n, k);
    }
    // Ritz values of the inverse operator on span(q).
    const CMatrix hk = q.adjoint() * lu.solve(q);
    Eigen::ComplexEigenSolver<CMatrix> es(hk);
    NearZeroSpectrum out;
    std::vector<std::pair<double, int>> order;
    for (int i = 0; i < k; ++i) order.emplace_back(-std::abs(es.eigenvalues()(i)), i);
    std::sort(order.begin(), order.end());
    for (auto [neg_mag, i] : order) out.eigenvalues.push_back(shift + 1.0 / es.eigenvalues()(i));
    out.null_vector = q * es.eigenvectors().col(order.front().second);
    // one more inverse step sharpens the dominant vector
    out.null_vector = lu.solve(out.null_vector);
    return out;
}

}  // namespace detail

/// Steady state as the normalized null vector of the Liouvillian.
inline SteadyStateReport steady_state_null(const CMatrix& h, const std::vector<LindbladTerm>& terms,
                                           const NullSteadyOptions& o = {}) {
    check_terms(h, terms);
    const int d = static_cast<int>(h.rows());
    if (d > o.max_dim) throw CapacityError("steady_state_null: dimension exceeds dense guard");
    const CMatrix l = build_liouvillian(h, terms);
    std::vector<Eigen::Index> keep;
    if (o.symmetry) {
        const RVector& u = *o.symmetry;
        if (u.size() != d) throw InvalidDimension("steady_state_null: symmetry diagonal has wrong size");
        for (int j = 0; j < d; ++j)
            for (int i = 0; i < d; ++i)
                if (u(i) == u(j)) keep.push_back(static_cast<Eigen::Index>(j) * d + i);
    }
    const CMatrix l_sector = o.symmetry ? CMatrix(l(keep, keep)) : CMatrix();
    const auto spec = detail::near_zero_spectrum(o.symmetry ? l_sector : l, o.block_size, o.iterations,
                                                 o.check_uniqueness);

    if (o.check_uniqueness) {
        int mult = 0;
        for (const cplx& ev : spec.eigenvalues)
            if (std::abs(ev.real()) < o.degeneracy_window && std::abs(ev.imag()) < o.degeneracy_window) ++mult;
        if (mult > 1)
            throw NonUniqueSteadyState("steady_state_null: null space has dimension " + std::to_string(mult), mult);
    }
    CVector full = CVector::Zero(static_cast<Eigen::Index>(d) * d);
    if (o.symmetry)
        for (std::size_t k = 0; k < keep.size(); ++k) full(keep[k]) = spec.null_vector(static_cast<Eigen::Index>(k));
    else
        full = spec.null_vector;
    CMatrix rho = unvec(full, d);
    rho /= rho.trace();
    rho = detail::hermitize(rho);
    const double residual = (l * vec(rho)).cwiseAbs().maxCoeff();
    return SteadyStateReport{DensityMatrix(rho), residual, SteadyStateMethod::nullspace, 0, 0.0};
}

/// Number of numerically-null Liouvillian eigenvalues among the `block` nearest zero.
inline int null_space_dimension(const CMatrix& h, const std::vector<LindbladTerm>& terms,
                                double window = 1e-9, int block = 4) {
    const CMatrix l = build_liouvillian(h, terms);
    const auto spec = detail::near_zero_spectrum(l, block, 8, true);
    int mult = 0;
    for (const cplx& ev : spec.eigenvalues)
        if (std::abs(ev.real()) < window && std::abs(ev.imag()) < window) ++mult;
    return mult;
}

struct TruncationRow {
    int n_max = 0;
    double value = 0.0;
    double difference = 0.0;  // value - previous value (0 for the first row)
};

struct TruncationScan {
    std::vector<TruncationRow> rows;
    bool converged = false;
};

/// Evaluates `observable(n_max)` per truncation; converged iff the last
/// successive difference is within `tol`.
inline TruncationScan truncation_scan(const std::vector<int>& n_maxes,
                                      const std::function<double(int)>& observable, double tol) {
    if (n_maxes.size() < 2) throw InvalidArgument("truncation_scan: need at least two truncations");
    TruncationScan scan;
    for (std::size_t i = 0; i < n_maxes.size(); ++i) {
        const double v = observable(n_maxes[i]);
        const double diff = i == 0 ? 0.0 : v - scan.rows.back().value;
        scan.rows.push_back({n_maxes[i], v, diff});
    }
    scan.converged = std::abs(scan.rows.back().difference) <= tol;
    return scan;
}

}  // namespace nesslab
