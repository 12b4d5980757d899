#pragma once

// Diagnostics of density matrices: parity blocks, partial transpose and
// logarithmic negativity, photon statistics, Wigner functions, fidelity.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "lindblad.hpp"

namespace nesslab {

enum class Subsystem { A, B };

// ---- partial operations on a bipartite space d_A x d_B ----

inline void check_bipartite(const CMatrix& rho, int d_a, int d_b) {
    if (d_a < 1 || d_b < 1 || rho.rows() != static_cast<Eigen::Index>(d_a) * d_b || rho.cols() != rho.rows())
        throw InvalidDimension("bipartite dimensions do not match the state");
}

inline CMatrix partial_trace(const CMatrix& rho, int d_a, int d_b, Subsystem traced) {
    check_bipartite(rho, d_a, d_b);
    if (traced == Subsystem::B) {
        CMatrix out = CMatrix::Zero(d_a, d_a);
        for (int i = 0; i < d_a; ++i)
            for (int j = 0; j < d_a; ++j)
                for (int k = 0; k < d_b; ++k) out(i, j) += rho(i * d_b + k, j * d_b + k);
        return out;
    }
    CMatrix out = CMatrix::Zero(d_b, d_b);
    for (int i = 0; i < d_b; ++i)
        for (int j = 0; j < d_b; ++j)
            for (int k = 0; k < d_a; ++k) out(i, j) += rho(k * d_b + i, k * d_b + j);
    return out;
}

inline DensityMatrix partial_trace(const DensityMatrix& rho, int d_a, int d_b, Subsystem traced) {
    return DensityMatrix(partial_trace(rho.matrix(), d_a, d_b, traced));
}

inline CMatrix partial_transpose(const CMatrix& rho, int d_a, int d_b, Subsystem on) {
    check_bipartite(rho, d_a, d_b);
    CMatrix out(rho.rows(), rho.cols());
    for (int ia = 0; ia < d_a; ++ia)
        for (int ib = 0; ib < d_b; ++ib)
            for (int ja = 0; ja < d_a; ++ja)
                for (int jb = 0; jb < d_b; ++jb) {
                    const cplx v = rho(ia * d_b + ib, ja * d_b + jb);
                    if (on == Subsystem::A)
                        out(ja * d_b + ib, ia * d_b + jb) = v;
                    else
                        out(ia * d_b + jb, ja * d_b + ib) = v;
                }
    return out;
}

/// log2 of the trace norm of the partial transpose.
inline double log_negativity_discrete(const DensityMatrix& rho, int d_a, int d_b, Subsystem on = Subsystem::B) {
    CMatrix pt = partial_transpose(rho.matrix(), d_a, d_b, on);
    pt = 0.5 * (pt + pt.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<CMatrix> es(pt, Eigen::EigenvaluesOnly);
    return std::log2(es.eigenvalues().cwiseAbs().sum());
}

// ---- parity ----

struct ParityDecomposition {
    double weight_even = 0.0;
    double weight_odd = 0.0;
    double off_block_norm = 0.0;  // max |P+ rho P-|
    double theta = 0.0;           // weight_even = cos^2 theta
};

inline ParityDecomposition parity_decompose(const DensityMatrix& rho, const CMatrix& u) {
    if (u.rows() != rho.dim() || u.cols() != rho.dim())
        throw InvalidDimension("parity_decompose: operator dimension mismatch");
    const CMatrix id = CMatrix::Identity(rho.dim(), rho.dim());
    if (max_abs(u * u - id) > 1e-12) throw InvalidArgument("parity_decompose: operator is not an involution");
    const CMatrix p_even = 0.5 * (id + u);
    const CMatrix p_odd = 0.5 * (id - u);
    ParityDecomposition out;
    out.weight_even = std::clamp((p_even * rho.matrix()).trace().real(), 0.0, 1.0);
    out.weight_odd = std::clamp((p_odd * rho.matrix()).trace().real(), 0.0, 1.0);
    out.off_block_norm = max_abs(p_even * rho.matrix() * p_odd);
    out.theta = std::atan2(std::sqrt(out.weight_odd), std::sqrt(out.weight_even));
    return out;
}

// ---- photon statistics ----

struct PhotonStatistics {
    RVector distribution;  // P(n)
    CMatrix field;         // full single-mode density matrix, P(n, m) = field(n, m)
    double mean = 0.0;
    double variance = 0.0;
    double excess = 0.0;   // variance - mean; > 0 is super-Poissonian

    double coherence(int n, int m) const { return std::abs(field(n, m)); }
};

inline PhotonStatistics photon_statistics(const DensityMatrix& rho_field) {
    PhotonStatistics s;
    s.field = rho_field.matrix();
    const int d = rho_field.dim();
    s.distribution = s.field.diagonal().real();
    double m1 = 0.0;
    double m2 = 0.0;
    for (int n = 0; n < d; ++n) {
        m1 += n * s.distribution(n);
        m2 += static_cast<double>(n) * n * s.distribution(n);
    }
    s.mean = m1;
    s.variance = m2 - m1 * m1;
    s.excess = s.variance - s.mean;
    return s;
}

// ---- Wigner function ----

struct WignerGrid {
    std::vector<double> re_axis;
    std::vector<double> im_axis;
    RMatrix values;  // values(i_im, i_re)
    bool truncation_warning = false;

    double spacing_re() const { return re_axis.size() > 1 ? re_axis[1] - re_axis[0] : 0.0; }
    double spacing_im() const { return im_axis.size() > 1 ? im_axis[1] - im_axis[0] : 0.0; }
};

inline std::vector<double> linspace(double start, double stop, int count) {
    if (count < 1) throw InvalidArgument("linspace: count must be >= 1");
    std::vector<double> v(count);
    for (int i = 0; i < count; ++i)
        v[i] = count == 1 ? start : start + (stop - start) * i / (count - 1);
    return v;
}

namespace detail {

/// (2/pi) Tr[rho D(alpha) Pi D^dag(alpha)] from the closed-form Fock matrix
/// elements <n| D Pi D^dag |m> = (-1)^n sqrt(n!/m!) (2 alpha^*)^(m-n)
/// exp(-2|alpha|^2) L_n^(m-n)(4|alpha|^2), m >= n.
inline double wigner_point(const CMatrix& rho, cplx alpha) {
    const int d = static_cast<int>(rho.rows());
    const double x = 4.0 * std::norm(alpha);
    const double gauss = std::exp(-0.5 * x);
    const cplx two_conj = 2.0 * std::conj(alpha);
    double sum = 0.0;
    std::vector<double> lag(d);
    for (int k = 0; k < d; ++k) {
        // L_n^(k)(x) for n = 0 .. d-1-k
        const int len = d - k;
        lag[0] = 1.0;
        if (len > 1) lag[1] = 1.0 + k - x;
        for (int n = 1; n + 1 < len; ++n)
            lag[n + 1] = ((2.0 * n + 1.0 + k - x) * lag[n] - (n + k) * lag[n - 1]) / (n + 1.0);
        // prefactor sqrt(n!/(n+k)!) (2 alpha^*)^k built incrementally in n
        cplx pref = 1.0;
        for (int j = 1; j <= k; ++j) pref *= two_conj / std::sqrt(static_cast<double>(j));
        for (int n = 0; n < len; ++n) {
            if (n > 0) pref *= std::sqrt(static_cast<double>(n) / (n + k));
            const double sign = (n % 2 == 0) ? 1.0 : -1.0;
            const cplx elem = sign * pref * gauss * lag[n];  // <n| X |n+k>
            const cplx r = rho(n + k, n);
            sum += (k == 0) ? (r * elem).real() : 2.0 * (r * elem).real();
        }
    }
    return 2.0 / kPi * sum;
}

}  // namespace detail

inline WignerGrid wigner(const DensityMatrix& rho_field, const std::vector<double>& re_axis,
                         const std::vector<double>& im_axis) {
    WignerGrid w;
    w.re_axis = re_axis;
    w.im_axis = im_axis;
    w.values.resize(static_cast<Eigen::Index>(im_axis.size()), static_cast<Eigen::Index>(re_axis.size()));
    const int n_max = rho_field.dim() - 1;
    double amax = 0.0;
    for (std::size_t i = 0; i < im_axis.size(); ++i)
        for (std::size_t j = 0; j < re_axis.size(); ++j) {
            const cplx alpha(re_axis[j], im_axis[i]);
            amax = std::max(amax, std::abs(alpha));
            w.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                detail::wigner_point(rho_field.matrix(), alpha);
        }
    // grid reaches where the truncated state cannot represent displaced content
    w.truncation_warning = amax * amax + 3.0 * amax * std::sqrt(static_cast<double>(n_max)) > n_max;
    return w;
}

/// Integral of W over the grid (trapezoid rule).
inline double wigner_integral(const WignerGrid& w) {
    const auto nr = static_cast<Eigen::Index>(w.re_axis.size());
    const auto ni = static_cast<Eigen::Index>(w.im_axis.size());
    double s = 0.0;
    for (Eigen::Index i = 0; i < ni; ++i)
        for (Eigen::Index j = 0; j < nr; ++j) {
            const double wi = (i == 0 || i == ni - 1) ? 0.5 : 1.0;
            const double wj = (j == 0 || j == nr - 1) ? 0.5 : 1.0;
            s += wi * wj * w.values(i, j);
        }
    return s * w.spacing_re() * w.spacing_im();
}

struct WignerPeak {
    cplx alpha;
    double value = 0.0;
    double prominence = 0.0;
};

namespace detail {

inline double bilinear(const WignerGrid& w, double x, double y) {
    const double dx = w.spacing_re();
    const double dy = w.spacing_im();
    const auto nr = static_cast<Eigen::Index>(w.re_axis.size());
    const auto ni = static_cast<Eigen::Index>(w.im_axis.size());
    double fx = (x - w.re_axis.front()) / dx;
    double fy = (y - w.im_axis.front()) / dy;
    fx = std::clamp(fx, 0.0, static_cast<double>(nr - 1));
    fy = std::clamp(fy, 0.0, static_cast<double>(ni - 1));
    const auto j0 = std::min<Eigen::Index>(static_cast<Eigen::Index>(fx), nr - 2);
    const auto i0 = std::min<Eigen::Index>(static_cast<Eigen::Index>(fy), ni - 2);
    const double tx = fx - j0;
    const double ty = fy - i0;
    return (1 - tx) * (1 - ty) * w.values(i0, j0) + tx * (1 - ty) * w.values(i0, j0 + 1) +
           (1 - tx) * ty * w.values(i0 + 1, j0) + tx * ty * w.values(i0 + 1, j0 + 1);
}

/// Vertex of the parabola through (-1, fm), (0, f0), (1, fp), clamped to [-0.5, 0.5].
inline double parabola_offset(double fm, double f0, double fp) {
    const double den = fm - 2.0 * f0 + fp;
    if (den >= 0.0) return 0.0;
    return std::clamp(0.5 * (fm - fp) / den, -0.5, 0.5);
}

}  // namespace detail

/// Local maxima (8-neighbour test, parabolic sub-grid refinement). A maximum
/// is kept when it stands more than `min_prominence` above the lowest point
/// on the straight path to every higher maximum.
inline std::vector<WignerPeak> wigner_maxima(const WignerGrid& w, double min_prominence = 1e-4) {
    const auto nr = static_cast<Eigen::Index>(w.re_axis.size());
    const auto ni = static_cast<Eigen::Index>(w.im_axis.size());
    std::vector<WignerPeak> cand;
    if (nr < 3 || ni < 3) return cand;
    for (Eigen::Index i = 1; i + 1 < ni; ++i)
        for (Eigen::Index j = 1; j + 1 < nr; ++j) {
            const double v = w.values(i, j);
            bool is_max = true;
            for (int di = -1; di <= 1 && is_max; ++di)
                for (int dj = -1; dj <= 1; ++dj) {
                    if (di == 0 && dj == 0) continue;
                    const double u = w.values(i + di, j + dj);
                    // ties broken toward the lower index so plateaus report once
                    if (u > v || (u == v && (di < 0 || (di == 0 && dj < 0)))) {
                        is_max = false;
                        break;
                    }
                }
            if (!is_max) continue;
            const double ox = detail::parabola_offset(w.values(i, j - 1), v, w.values(i, j + 1));
            const double oy = detail::parabola_offset(w.values(i - 1, j), v, w.values(i + 1, j));
            const cplx alpha(w.re_axis[j] + ox * w.spacing_re(), w.im_axis[i] + oy * w.spacing_im());
            cand.push_back({alpha, v, 0.0});
        }

    std::vector<WignerPeak> out;
    for (const auto& c : cand) {
        double best_col = -INFINITY;  // highest saddle toward any higher peak
        bool has_higher = false;
        for (const auto& o : cand) {
            if (o.value <= c.value) continue;
            has_higher = true;
            constexpr int kSamples = 200;
            double lowest = INFINITY;
            for (int s = 0; s <= kSamples; ++s) {
                const cplx p = c.alpha + (o.alpha - c.alpha) * (static_cast<double>(s) / kSamples);
                lowest = std::min(lowest, detail::bilinear(w, p.real(), p.imag()));
            }
            best_col = std::max(best_col, lowest);
        }
        WignerPeak pk = c;
        pk.prominence = has_higher ? c.value - best_col : c.value - w.values.minCoeff();
        if (pk.prominence > min_prominence) out.push_back(pk);
    }
    std::sort(out.begin(), out.end(), [](const WignerPeak& a, const WignerPeak& b) { return a.value > b.value; });
    return out;
}

// ---- fidelity ----

namespace detail {

/// Eigenvalues at rounding level relative to the largest one are exact zeros
/// for the purpose of square roots.
inline double rounding_floor(const RVector& w) {
    return 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, w.cwiseAbs().maxCoeff()) * w.size();
}

}  // namespace detail

/// Principal square root of a PSD matrix; eigenvalues in [-1e-10, 0) are clamped.
inline CMatrix psd_sqrt(const CMatrix& m) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (m + m.adjoint()));
    RVector w = es.eigenvalues();
    const double floor = detail::rounding_floor(w);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        if (w(i) < -1e-10) throw InvalidState("psd_sqrt: matrix is not positive semidefinite");
        w(i) = w(i) <= floor ? 0.0 : std::sqrt(w(i));
    }
    return es.eigenvectors() * w.asDiagonal() * es.eigenvectors().adjoint();
}

/// Tr sqrt( sqrt(a) b sqrt(a) ).
inline double uhlmann_fidelity(const DensityMatrix& a, const DensityMatrix& b) {
    if (a.dim() != b.dim()) throw InvalidDimension("uhlmann_fidelity: dimension mismatch");
    const CMatrix sa = psd_sqrt(a.matrix());
    const CMatrix inner = sa * b.matrix() * sa;
    Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (inner + inner.adjoint()), Eigen::EigenvaluesOnly);
    double f = 0.0;
    const double floor = detail::rounding_floor(es.eigenvalues());
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        const double v = es.eigenvalues()(i);
        if (v < -1e-10) throw InvalidState("uhlmann_fidelity: inner matrix is not positive semidefinite");
        if (v > floor) f += std::sqrt(v);
    }
    return f;
}

/// sqrt(<psi| rho |psi>), the Uhlmann fidelity when one argument is pure.
inline double uhlmann_fidelity(const KetState& psi, const DensityMatrix& rho) {
    if (psi.dim() != rho.dim()) throw InvalidDimension("uhlmann_fidelity: dimension mismatch");
    const double v = (psi.amplitudes().adjoint() * rho.matrix() * psi.amplitudes())(0, 0).real();
    return std::sqrt(std::max(v, 0.0));
}

}  // namespace nesslab
