#pragma once

// Time-delayed coherent feedback on the two-mode model, in the Heisenberg-Langevin
// picture for V = (a, a^dag, b, b^dag):
//   dV/dt = (A - B) V + B V(t - tau) - sqrt(2 Gamma) V_in.

#include <optional>
#include <string>
#include <vector>

#include "gaussian.hpp"
#include "quadrature.hpp"

namespace nesslab {

/// Linear delay system x' = (A - B) x + B x(t - tau) of any size.
struct DelaySystem {
    CMatrix A;
    CMatrix B;
    double tau = 0.0;

    int size() const { return static_cast<int>(A.rows()); }

    /// A - B + B e^{-L tau} - L I
    CMatrix characteristic(cplx lambda) const {
        CMatrix m = A - B + B * std::exp(-lambda * tau);
        m.diagonal().array() -= lambda;
        return m;
    }

    CMatrix characteristic_derivative(cplx lambda) const {
        CMatrix m = -tau * std::exp(-lambda * tau) * B;
        m.diagonal().array() -= 1.0;
        return m;
    }

    /// |det M(L)| / max(1, ||M(L)||_inf)^n
    double scaled_residual(cplx lambda) const {
        const CMatrix m = characteristic(lambda);
        const double norm = std::max(1.0, m.cwiseAbs().rowwise().sum().maxCoeff());
        return std::abs(m.determinant()) / std::pow(norm, size());
    }
};

struct DelayedLangevin {
    DelaySystem system;
    CMatrix Gamma;  // noise rates, diag(gamma, gamma, 0, 0)

    const CMatrix& A() const { return system.A; }
    const CMatrix& B() const { return system.B; }
    double tau() const { return system.tau; }
};

inline DelayedLangevin langevin_matrices(const RabiParams& p, double tau) {
    p.validate();
    if (!(tau >= 0.0) || !std::isfinite(tau)) throw InvalidArgument("langevin_matrices: tau must be finite and >= 0");
    const double w = p.omega, W = p.Omega, l1 = p.lambda1, l2 = p.lambda2, g = p.gamma;
    CMatrix a(4, 4);
    a << cplx(-g, -w), 0.0, cplx(0, -l1), cplx(0, -l2),
         0.0, cplx(-g, w), cplx(0, l2), cplx(0, l1),
         cplx(0, -l1), cplx(0, -l2), cplx(0, -W), 0.0,
         cplx(0, l2), cplx(0, l1), 0.0, cplx(0, W);
    CMatrix b = CMatrix::Zero(4, 4);
    b(0, 0) = b(1, 1) = g / 2.0;
    CMatrix gam = CMatrix::Zero(4, 4);
    gam(0, 0) = gam(1, 1) = g;
    return {{a, b, tau}, gam};
}

/// Maps (a, a^dag, b, b^dag) to (q_a, p_a, q_b, p_b).
inline Matrix4cd ladder_to_quadrature() {
    const double s = 1.0 / std::sqrt(2.0);
    Matrix4cd p = Matrix4cd::Zero();
    p(0, 0) = s;
    p(0, 1) = s;
    p(1, 0) = cplx(0, -s);
    p(1, 1) = cplx(0, s);
    p(2, 2) = s;
    p(2, 3) = s;
    p(3, 2) = cplx(0, -s);
    p(3, 3) = cplx(0, s);
    return p;
}

struct RootWindow {
    double re_min = -1.0, re_max = 1.0;
    double im_min = -1.0, im_max = 1.0;
};

struct RootScanOptions {
    double cell = 0.05;            // grid spacing
    double residual_tol = 1e-8;    // on DelaySystem::scaled_residual
    double dedup_tol = 1e-8;
    int max_newton = 60;
    int max_subdivision = 4;
};

struct RootScan {
    std::vector<cplx> roots;  // sorted by real part, descending
    double max_re = -INFINITY;
    RootWindow window;
    double grid = 0.0;
    std::optional<std::string> warning;
};

/// Window capturing six delay branches and the undelayed spectrum.
inline RootWindow default_root_window(const RabiParams& p, double tau) {
    RootWindow w;
    w.re_min = -5.0 * p.gamma - 2.0 * (p.lambda1 + p.lambda2);
    w.re_max = 1.0;
    double im = p.omega + p.Omega + 2.0 * (p.lambda1 + p.lambda2) + 1.0;
    if (tau > 0.0) im = std::max(im, std::min(6.0 * 2.0 * kPi / tau, 40.0));
    w.im_min = -im;
    w.im_max = im;
    return w;
}

namespace detail {

/// Phase change of det M along the segment z0 -> z1, refined until every
/// sub-step turns by less than pi/4.
inline double phase_change(const DelaySystem& s, cplx z0, cplx f0, cplx z1, cplx f1, int depth) {
    const double d = std::arg(f1 / f0);
    if (std::abs(d) < kPi / 4.0 || depth >= 14) return d;
    const cplx zm = 0.5 * (z0 + z1);
    const cplx fm = s.characteristic(zm).determinant();
    return phase_change(s, z0, f0, zm, fm, depth + 1) + phase_change(s, zm, fm, z1, f1, depth + 1);
}

inline int winding(const DelaySystem& s, double x0, double x1, double y0, double y1) {
    const std::array<cplx, 4> z{cplx(x0, y0), cplx(x1, y0), cplx(x1, y1), cplx(x0, y1)};
    std::array<cplx, 4> f;
    for (int i = 0; i < 4; ++i) f[i] = s.characteristic(z[i]).determinant();
    double total = 0.0;
    for (int i = 0; i < 4; ++i) total += phase_change(s, z[i], f[i], z[(i + 1) % 4], f[(i + 1) % 4], 0);
    return static_cast<int>(std::lround(total / (2.0 * kPi)));
}

inline std::optional<cplx> newton_root(const DelaySystem& s, cplx z, const RootScanOptions& o) {
    for (int it = 0; it < o.max_newton; ++it) {
        const CMatrix m = s.characteristic(z);
        Eigen::PartialPivLU<CMatrix> lu(m);
        const cplx tr = lu.solve(s.characteristic_derivative(z)).trace();
        if (!std::isfinite(tr.real()) || !std::isfinite(tr.imag()) || tr == 0.0) return std::nullopt;
        const cplx step = 1.0 / tr;
        z -= step;
        if (std::abs(step) < 1e-14 * (1.0 + std::abs(z))) break;
    }
    if (s.scaled_residual(z) > o.residual_tol) return std::nullopt;
    return z;
}

inline void scan_cell(const DelaySystem& s, double x0, double x1, double y0, double y1, int n, int depth,
                      const RootScanOptions& o, std::vector<cplx>& found) {
    const double hx = x1 - x0, hy = y1 - y0;
    auto inside = [&](cplx z) {
        return z.real() >= x0 - 1e-9 * hx && z.real() <= x1 + 1e-9 * hx && z.imag() >= y0 - 1e-9 * hy &&
               z.imag() <= y1 + 1e-9 * hy;
    };
    if (n == 1 || depth >= o.max_subdivision) {
        const std::array<cplx, 5> seeds{cplx(0.5 * (x0 + x1), 0.5 * (y0 + y1)), cplx(x0 + 0.25 * hx, y0 + 0.25 * hy),
                                        cplx(x1 - 0.25 * hx, y0 + 0.25 * hy), cplx(x0 + 0.25 * hx, y1 - 0.25 * hy),
                                        cplx(x1 - 0.25 * hx, y1 - 0.25 * hy)};
        int got = 0;
        for (const cplx z0 : seeds) {
            const auto r = newton_root(s, z0, o);
            if (!r || !inside(*r)) continue;
            bool dup = false;
            for (const cplx q : found) dup = dup || std::abs(q - *r) <= o.dedup_tol * (1.0 + std::abs(q));
            if (!dup) found.push_back(*r);
            if (++got >= n) break;
        }
        return;
    }
    const double xm = 0.5 * (x0 + x1), ym = 0.5 * (y0 + y1);
    const std::array<std::array<double, 4>, 4> quads{{{x0, xm, y0, ym}, {xm, x1, y0, ym}, {x0, xm, ym, y1}, {xm, x1, ym, y1}}};
    for (const auto& q : quads) {
        const int k = winding(s, q[0], q[1], q[2], q[3]);
        if (k > 0) scan_cell(s, q[0], q[1], q[2], q[3], k, depth + 1, o, found);
    }
}

}  // namespace detail

/// Zeros of det(A - B + B e^{-L tau} - L I) inside the window. At tau = 0 the
/// problem is polynomial and the roots are eig(A).
inline RootScan secular_roots(const DelaySystem& s, const RootWindow& w, const RootScanOptions& o = {}) {
    RootScan out;
    out.window = w;
    out.grid = o.cell;
    if (s.tau == 0.0) {
        Eigen::ComplexEigenSolver<CMatrix> es(s.A, false);
        for (int i = 0; i < es.eigenvalues().size(); ++i) out.roots.push_back(es.eigenvalues()(i));
    } else {
        // offset the grid so that symmetric roots do not sit on cell edges
        const double shift = 0.3819660112501051 * o.cell;
        const int nx = std::max(1, static_cast<int>(std::ceil((w.re_max - w.re_min) / o.cell)) + 1);
        const int ny = std::max(1, static_cast<int>(std::ceil((w.im_max - w.im_min) / o.cell)) + 1);
        const double x_start = w.re_min - shift, y_start = w.im_min - shift;
        // phases along shared edges: horizontal (x_k -> x_{k+1} at y_j), vertical (y_j -> y_{j+1} at x_k)
        std::vector<cplx> f((nx + 1) * (ny + 1));
        auto node = [&](int k, int j) { return cplx(x_start + k * o.cell, y_start + j * o.cell); };
        for (int j = 0; j <= ny; ++j)
            for (int k = 0; k <= nx; ++k) f[j * (nx + 1) + k] = s.characteristic(node(k, j)).determinant();
        auto fv = [&](int k, int j) { return f[j * (nx + 1) + k]; };
        std::vector<double> hor(nx * (ny + 1)), ver((nx + 1) * ny);
        for (int j = 0; j <= ny; ++j)
            for (int k = 0; k < nx; ++k)
                hor[j * nx + k] = detail::phase_change(s, node(k, j), fv(k, j), node(k + 1, j), fv(k + 1, j), 0);
        for (int j = 0; j < ny; ++j)
            for (int k = 0; k <= nx; ++k)
                ver[j * (nx + 1) + k] = detail::phase_change(s, node(k, j), fv(k, j), node(k, j + 1), fv(k, j + 1), 0);
        for (int j = 0; j < ny; ++j)
            for (int k = 0; k < nx; ++k) {
                const double total =
                    hor[j * nx + k] + ver[j * (nx + 1) + k + 1] - hor[(j + 1) * nx + k] - ver[j * (nx + 1) + k];
                const int n = static_cast<int>(std::lround(total / (2.0 * kPi)));
                if (n <= 0) continue;
                const cplx z0 = node(k, j);
                detail::scan_cell(s, z0.real(), z0.real() + o.cell, z0.imag(), z0.imag() + o.cell, n, 0, o,
                                  out.roots);
            }
    }
    std::sort(out.roots.begin(), out.roots.end(), [](cplx x, cplx y) {
        return x.real() != y.real() ? x.real() > y.real() : x.imag() < y.imag();
    });
    for (const cplx r : out.roots) out.max_re = std::max(out.max_re, r.real());
    if (out.roots.empty()) out.warning = "secular_roots: no root found in the window";
    return out;
}

inline RootScan secular_roots(const DelayedLangevin& d, const RootWindow& w, const RootScanOptions& o = {}) {
    return secular_roots(d.system, w, o);
}

struct SpectralCovarianceOptions {
    double abs_tol = 1e-8;        // on the change of the covariance when the cutoff doubles
    double k_initial = 64.0;
    double k_max = 1 << 16;
    double subtraction_width = 1.0;
};

struct SpectralCovariance {
    GaussianState state;
    bool physical = true;
    double uncertainty_margin = 0.0;  // min eig(V + i Omega/2)
    double max_re_root = 0.0;
    double cutoff = 0.0;
    double quadrature_error = 0.0;
};

/// Stationary covariance from
///   <V V^T> = (1/2pi) int T(nu) X T(-nu)^T dnu,  T(nu) = [-i nu I - A + B - B e^{i nu tau}]^{-1},
/// X = sqrt(2 Gamma) C sqrt(2 Gamma) with C_{a, a^dag} = 1 (vacuum input).
/// The X / nu^2 tail is subtracted analytically and the remainder is folded onto nu >= 0.
inline SpectralCovariance spectral_covariance(const DelayedLangevin& d, const RootScan& scan,
                                              const SpectralCovarianceOptions& o = {}) {
    if (scan.roots.empty()) throw InvalidArgument("spectral_covariance: empty root scan");
    if (!(scan.max_re < 0.0)) throw InstabilityError("spectral_covariance: delayed dynamics unstable", scan.max_re);
    const CMatrix& a = d.A();
    const CMatrix& b = d.B();
    const double tau = d.tau();
    CMatrix g = CMatrix::Zero(4, 4);
    for (int i = 0; i < 4; ++i) g(i, i) = std::sqrt(2.0 * d.Gamma(i, i).real());
    CMatrix c = CMatrix::Zero(4, 4);
    c(0, 1) = 1.0;
    const CMatrix x = g * c * g;
    const double cw = o.subtraction_width;
    const CMatrix base = a - b;
    auto transfer = [&](double nu) {
        CMatrix m = -base - b * std::exp(cplx(0.0, nu * tau));
        m.diagonal().array() += cplx(0.0, -nu);
        return CMatrix(m.inverse());
    };
    auto remainder = [&](double nu) {
        return CMatrix(transfer(nu) * x * transfer(-nu).transpose() - x / (nu * nu + cw * cw));
    };
    auto folded = [&](double nu) { return CMatrix(remainder(nu) + remainder(-nu)); };

    std::vector<double> breaks;
    for (const cplx r : scan.roots) breaks.push_back(std::abs(r.imag()));

    CMatrix total = kPi / cw * x;  // int X/(nu^2 + c^2)
    double lo = 0.0, k = o.k_initial, err = 0.0;
    bool converged = false;
    while (k <= o.k_max) {
        const auto part = integrate_adaptive(folded, lo, k, 0.1 * o.abs_tol * 2.0 * kPi, breaks);
        total += part.value;
        err += part.error;
        if (lo > 0.0 && part.value.cwiseAbs().maxCoeff() / (2.0 * kPi) < o.abs_tol) {
            converged = true;
            break;
        }
        lo = k;
        k *= 2.0;
    }
    if (!converged) throw TimeoutError("spectral_covariance: frequency cutoff did not converge", err);
    const CMatrix vv = total / (2.0 * kPi);
    const Matrix4cd p = ladder_to_quadrature();
    const Matrix4cd r = p * Matrix4cd(vv) * p.transpose();
    const Matrix4cd sym = 0.5 * (r + r.transpose());
    if (sym.imag().cwiseAbs().maxCoeff() > 1e-6)
        throw InvalidState("spectral_covariance: quadrature covariance is not real");
    const GaussianState state(Vector4d::Zero(), sym.real());
    SpectralCovariance out{state};
    out.uncertainty_margin = state.uncertainty_margin();
    out.physical = out.uncertainty_margin >= -1e-8;
    out.max_re_root = scan.max_re;
    out.cutoff = k;
    out.quadrature_error = err / (2.0 * kPi);
    return out;
}

inline SpectralCovariance spectral_covariance(const DelayedLangevin& d, const SpectralCovarianceOptions& o = {}) {
    RabiParams p;  // window only depends on rates and couplings; rebuilt from A
    p.omega = -d.A()(0, 0).imag();
    p.gamma = -d.A()(0, 0).real();
    p.Omega = -d.A()(2, 2).imag();
    p.lambda1 = -d.A()(0, 2).imag();
    p.lambda2 = -d.A()(0, 3).imag();
    return spectral_covariance(d, secular_roots(d, default_root_window(p, d.tau())), o);
}

enum class DelayStatus { ok, unstable, unphysical };

inline std::string to_string(DelayStatus s) {
    switch (s) {
        case DelayStatus::ok: return "ok";
        case DelayStatus::unstable: return "unstable";
        case DelayStatus::unphysical: return "unphysical";
    }
    return "?";
}

struct DelayedNegativity {
    DelayStatus status = DelayStatus::ok;
    std::optional<double> negativity;  // absent unless status == ok
    double baseline = 0.0;             // without the feedback loop
    double max_re_root = 0.0;
    double uncertainty_margin = 0.0;
};

inline DelayedNegativity delayed_negativity(const RabiParams& p, double tau, const SpectralCovarianceOptions& o = {}) {
    DelayedNegativity out;
    out.baseline = log_negativity_gaussian(steady_covariance(p));
    const DelayedLangevin d = langevin_matrices(p, tau);
    const RootScan scan = secular_roots(d, default_root_window(p, tau));
    out.max_re_root = scan.max_re;
    if (!(scan.max_re < 0.0)) {
        out.status = DelayStatus::unstable;
        return out;
    }
    const SpectralCovariance sc = spectral_covariance(d, scan, o);
    out.uncertainty_margin = sc.uncertainty_margin;
    if (!sc.physical) {
        out.status = DelayStatus::unphysical;
        return out;
    }
    out.negativity = log_negativity_gaussian(sc.state);
    return out;
}

}  // namespace nesslab
