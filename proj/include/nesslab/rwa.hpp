#pragma once

// Rotating-wave closed forms for the two-mode model at omega = Omega:
// normal modes z+- = (a +- b)/sqrt 2 and NOON-state overlaps.

#include <vector>

#include "feedback.hpp"

namespace nesslab {

/// Energies of H = (omega + lambda1) z+^dag z+ + (omega - lambda1) z-^dag z-.
struct NormalModeSpectrum {
    double e_plus = 0.0;
    double e_minus = 0.0;

    double energy(int n_plus, int n_minus) const { return e_plus * n_plus + e_minus * n_minus; }
};

inline NormalModeSpectrum normal_mode_spectrum(double omega, double lambda1) {
    return {omega + lambda1, omega - lambda1};
}

/// |<Psi_N | Psi_N(t)>| for the antisymmetric NOON state under the RWA Hamiltonian.
inline double rwa_noon_fidelity(int n, double t, double omega, double lambda1) {
    (void)omega;  // a global phase e^{-i N omega t}
    const double x = lambda1 * t;
    switch (n) {
        case 1:
        case 2:
            return 1.0;
        case 3:
            return std::abs(3.0 * std::exp(cplx(0.0, -x)) + std::exp(cplx(0.0, 3.0 * x))) / 4.0;
        case 4:
            return std::abs(std::cos(2.0 * x));
        default:
            throw InvalidArgument("rwa_noon_fidelity: N must be 1..4");
    }
}

namespace detail {

inline double factorial(int n) {
    double f = 1.0;
    for (int k = 2; k <= n; ++k) f *= k;
    return f;
}

inline double binomial(int n, int k) { return factorial(n) / (factorial(k) * factorial(n - k)); }

}  // namespace detail

/// Rewrites a two-mode state in the z+ (x) z- Fock basis with the same cutoff.
/// Throws if more than `edge_tol` of the weight would land beyond the cutoff.
inline KetState normal_mode_transform(const KetState& psi, double edge_tol = 1e-12) {
    const int n_max = two_mode_cutoff(psi.dim());
    const int d = n_max + 1;
    const int big = 2 * n_max + 1;
    CMatrix out = CMatrix::Zero(big, big);  // (n_plus, n_minus)
    for (int na = 0; na <= n_max; ++na)
        for (int nb = 0; nb <= n_max; ++nb) {
            const cplx amp = psi[na * d + nb];
            if (amp == 0.0) continue;
            // a^dag^na b^dag^nb / sqrt(na! nb!) with a^dag = (z+ + z-)/sqrt2, b^dag = (z+ - z-)/sqrt2
            const double pref = std::pow(2.0, -0.5 * (na + nb)) / std::sqrt(detail::factorial(na) * detail::factorial(nb));
            for (int i = 0; i <= na; ++i)
                for (int j = 0; j <= nb; ++j) {
                    const int np = i + j;
                    const int nm = (na - i) + (nb - j);
                    const double sign = ((nb - j) % 2 == 0) ? 1.0 : -1.0;
                    const double c = pref * detail::binomial(na, i) * detail::binomial(nb, j) * sign *
                                     std::sqrt(detail::factorial(np) * detail::factorial(nm));
                    out(np, nm) += amp * c;
                }
        }
    const double inside = out.topLeftCorner(d, d).squaredNorm();
    if (out.squaredNorm() - inside > edge_tol) throw InvalidDimension("normal_mode_transform: weight beyond cutoff");
    CVector v(d * d);
    for (int np = 0; np <= n_max; ++np)
        for (int nm = 0; nm <= n_max; ++nm) v(np * d + nm) = out(np, nm);
    return KetState(std::move(v));
}

struct RwaErrorReport {
    std::vector<double> times;
    std::vector<double> exact;
    std::vector<double> rwa;
    double max_error = 0.0;
};

/// max_t |Phi_exact - Phi_RWA| for the NOON state N under the full H_nAD at gamma = 0.
inline RwaErrorReport rwa_error_check(int n, const RabiParams& p, const std::vector<double>& times, int n_max,
                                      const EvolveOptions& opt = {}) {
    if (n < 1 || n > 4) throw InvalidArgument("rwa_error_check: N must be 1..4");
    const KetState psi0 = noon_state(n, n_max);
    RabiParams closed = p;
    closed.gamma = 0.0;
    RwaErrorReport out;
    evolve_along(effective_generator(closed, 0.0, n_max), DensityMatrix(psi0), times,
                 [&](double t, const DensityMatrix& r) {
                     const double exact = uhlmann_fidelity(psi0, r);
                     const double approx = rwa_noon_fidelity(n, t, p.omega, p.lambda1);
                     out.times.push_back(t);
                     out.exact.push_back(exact);
                     out.rwa.push_back(approx);
                     out.max_error = std::max(out.max_error, std::abs(exact - approx));
                 }, opt);
    return out;
}

}  // namespace nesslab
