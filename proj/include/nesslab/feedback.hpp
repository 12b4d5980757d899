#pragma once

// Zero-delay coherent feedback on the two-mode model: effective damping,
// the cascaded source + driven cavity master equation, and fidelity traces.
//
// Dissipators in this file carry the (rate/2) L[x] convention:
// (g/2) L[x] rho = (g/2)(2 x rho x^dag - x^dag x rho - rho x^dag x).

#include <optional>
#include <vector>

#include "lindblad.hpp"
#include "measures.hpp"

namespace nesslab {

/// mu: loop gain, eta: loop efficiency, gamma_d: driven cavity decay,
/// Omega_d: driven cavity frequency.
struct FeedbackParams {
    double mu = -1.0;
    double eta = 1.0;
    double gamma_d = 10.0;
    double Omega_d = 1.0;

    void validate() const {
        for (double v : {mu, eta, gamma_d, Omega_d})
            if (!std::isfinite(v)) throw InvalidArgument("FeedbackParams: non-finite entry");
        if (eta < 0.0 || eta > 1.0) throw InvalidArgument("FeedbackParams: eta must lie in [0, 1]");
        if (!(gamma_d > 0.0)) throw InvalidArgument("FeedbackParams: gamma_d must be > 0");
    }
};

/// gamma (1 + eta mu (2 + mu)).
inline double effective_gamma(double gamma, double mu, double eta = 1.0) {
    if (eta < 0.0 || eta > 1.0) throw InvalidArgument("effective_gamma: eta must lie in [0, 1]");
    if (gamma < 0.0) throw InvalidArgument("effective_gamma: gamma must be >= 0");
    const double g = gamma * (1.0 + eta * mu * (2.0 + mu));
    if (g < -1e-15 * std::max(1.0, gamma)) throw InvalidArgument("effective_gamma: negative effective damping");
    return std::max(g, 0.0);
}

/// Fock cutoffs for a (x) b (x) c. The driven cavity keeps levels 0..n_max_c.
struct CascadeTruncations {
    int n_max_a = 4;
    int n_max_b = 4;
    int n_max_c = 2;
    int max_dim = 400;

    HilbertSpec spec() const { return HilbertSpec{n_max_a + 1, n_max_b + 1, n_max_c + 1}; }
    int dim() const { return spec().total(); }

    void validate() const {
        if (n_max_a < 1 || n_max_b < 1) throw InvalidDimension("CascadeTruncations: source cutoffs must be >= 1");
        if (n_max_c < 2) throw InvalidDimension("CascadeTruncations: driven cavity needs levels 0, 1, 2");
        if (dim() > max_dim) throw CapacityError("CascadeTruncations: dimension exceeds max_dim");
    }
};

/// Source (H_nAD, decay gamma) cascaded into a driven cavity c.
///   W' = -i[H_nAD + Omega_d c^dag c + H_int, W]
///        + sqrt(gamma gamma_d) ([a W, c^dag] + [c, W a^dag])
///        + (gamma/2) L[a] W + (gamma_d/2) L[c] W
/// with H_int = i mu sqrt(gamma gamma_d)/2 (a^dag c - c^dag a).
class CascadeGenerator {
public:
    CascadeGenerator(const RabiParams& p, const FeedbackParams& f, const CascadeTruncations& tr) {
        p.validate();
        f.validate();
        tr.validate();
        const HilbertSpec spec = tr.spec();
        a_ = embed(annihilation(tr.n_max_a), spec, 0);
        c_ = embed(annihilation(tr.n_max_c), spec, 2);
        const CMatrix h_src = tensor(build_nad_hamiltonian(p, tr.n_max_a, tr.n_max_b), identity(tr.n_max_c + 1));
        kappa_ = std::sqrt(p.gamma * f.gamma_d);
        h_ = h_src + f.Omega_d * c_.adjoint() * c_ +
             kI * (f.mu * kappa_ / 2.0) * (a_.adjoint() * c_ - c_.adjoint() * a_);
        gamma_ = p.gamma;
        gamma_d_ = f.gamma_d;
        k_ = -kI * h_ - kappa_ * c_.adjoint() * a_ - 0.5 * gamma_ * a_.adjoint() * a_ -
             0.5 * gamma_d_ * c_.adjoint() * c_;
        dims_ = {tr.n_max_a + 1, tr.n_max_b + 1, tr.n_max_c + 1};
        prepare();
    }

    int dim() const { return static_cast<int>(h_.rows()); }
    const CMatrix& hamiltonian() const { return h_; }
    const CMatrix& a() const { return a_; }
    const CMatrix& c() const { return c_; }

    /// W' for Hermitian W.
    CMatrix operator()(const CMatrix& w) const {
        CMatrix out = ks_ * w;
        out += out.adjoint().eval();
        const CMatrix aw = as_ * w;
        const CMatrix cw = cs_ * w;
        const CMatrix cross = kappa_ * (aw * cs_adj_);
        out += cross + cross.adjoint();
        out.noalias() += gamma_ * (aw * as_adj_);
        out.noalias() += gamma_d_ * (cw * cs_adj_);
        return out;
    }

    /// Same dynamics written in Lindblad form: one jump sqrt(gamma) a + sqrt(gamma_d) c
    /// and a Hamiltonian correction i (kappa/2)(a^dag c - c^dag a).
    std::pair<CMatrix, std::vector<LindbladTerm>> lindblad_form() const {
        const CMatrix h = h_ + kI * (kappa_ / 2.0) * (a_.adjoint() * c_ - c_.adjoint() * a_);
        const CMatrix j = std::sqrt(gamma_) * a_ + std::sqrt(gamma_d_) * c_;
        return {h, {{j, 0.5}}};
    }

    /// Traces out the driven cavity.
    DensityMatrix source_state(const DensityMatrix& w) const {
        return partial_trace(w, dims_[0] * dims_[1], dims_[2], Subsystem::B);
    }

private:
    void prepare() {
        ks_ = k_.sparseView();
        as_ = a_.sparseView();
        cs_ = c_.sparseView();
        as_adj_ = CMatrix(a_.adjoint()).sparseView();
        cs_adj_ = CMatrix(c_.adjoint()).sparseView();
    }

    using Sparse = Eigen::SparseMatrix<cplx>;
    CMatrix a_, c_, h_, k_;
    Sparse ks_, as_, cs_, as_adj_, cs_adj_;
    double kappa_ = 0.0, gamma_ = 0.0, gamma_d_ = 0.0;
    std::array<int, 3> dims_{};
};

/// Dense superoperator of the cascade (column-stacking vec).
inline CMatrix build_cascade_liouvillian(const RabiParams& p, const FeedbackParams& f, CascadeTruncations tr) {
    if (tr.max_dim > 60) tr.max_dim = 60;
    const CascadeGenerator gen(p, f, tr);
    const CMatrix& a = gen.a();
    const CMatrix& c = gen.c();
    const double kappa = std::sqrt(p.gamma * f.gamma_d);
    const CMatrix k = -kI * gen.hamiltonian() - kappa * c.adjoint() * a - 0.5 * p.gamma * a.adjoint() * a -
                      0.5 * f.gamma_d * c.adjoint() * c;
    return spre(k) + spost(k.adjoint()) + kappa * (sprepost(a, c.adjoint()) + sprepost(c, a.adjoint())) +
           p.gamma * sprepost(a, a.adjoint()) + f.gamma_d * sprepost(c, c.adjoint());
}

/// Driven cavity in vacuum attached to a source state.
inline DensityMatrix attach_driven_vacuum(const DensityMatrix& source, int n_max_c) {
    CMatrix vac = CMatrix::Zero(n_max_c + 1, n_max_c + 1);
    vac(0, 0) = 1.0;
    return DensityMatrix(tensor(source.matrix(), vac));
}

inline int two_mode_cutoff(int dim) {
    const int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(dim))));
    if (n * n != dim || n < 2) throw InvalidDimension("two-mode state: dimension is not (n_max+1)^2");
    return n - 1;
}

/// Generator -i[H_nAD, rho] + (gamma_eff/2) L[a] rho on a (x) b with equal cutoffs.
inline LindbladGenerator effective_generator(const RabiParams& p, double gamma_eff, int n_max) {
    if (gamma_eff < 0.0) throw InvalidArgument("effective_generator: gamma_eff must be >= 0");
    const HilbertSpec spec{n_max + 1, n_max + 1};
    return LindbladGenerator(build_nad_hamiltonian(p, n_max, n_max),
                             {{embed(annihilation(n_max), spec, 0), 0.5 * gamma_eff}});
}

inline DensityMatrix effective_evolution(const DensityMatrix& rho0, const RabiParams& p, double gamma_eff, double t,
                                         const EvolveOptions& opt = {}) {
    const int n_max = two_mode_cutoff(rho0.dim());
    return evolve_with(effective_generator(p, gamma_eff, n_max), rho0, t, opt);
}

/// (|N,0> - |0,N>)/sqrt 2; sign = +1 gives the symmetric combination.
inline KetState noon_state(int n, int n_max, int sign = -1) {
    if (n < 1) throw InvalidArgument("noon_state: N must be >= 1");
    if (n > n_max) throw InvalidDimension("noon_state: N exceeds the truncation");
    const int d = n_max + 1;
    CVector v = CVector::Zero(d * d);
    v(n * d) = 1.0 / std::sqrt(2.0);
    v(n) = (sign < 0 ? -1.0 : 1.0) / std::sqrt(2.0);
    return KetState(std::move(v));
}

/// (|alpha,0> + |0,alpha>) / sqrt(2 (1 + e^{-|alpha|^2})). Throws if the
/// truncated norm deviates from 1 by more than `norm_tol`.
inline KetState entangled_coherent_state(cplx alpha, int n_max, double norm_tol = 1e-9) {
    if (n_max < 1) throw InvalidDimension("entangled_coherent_state: n_max must be >= 1");
    const int d = n_max + 1;
    CVector coh(d);
    cplx term = std::exp(-0.5 * std::norm(alpha));
    coh(0) = term;
    for (int n = 1; n <= n_max; ++n) {
        term *= alpha / std::sqrt(static_cast<double>(n));
        coh(n) = term;
    }
    CVector vac = CVector::Zero(d);
    vac(0) = 1.0;
    CVector v = Eigen::kroneckerProduct(coh, vac).eval() + Eigen::kroneckerProduct(vac, coh).eval();
    v /= std::sqrt(2.0 * (1.0 + std::exp(-std::norm(alpha))));
    if (std::abs(v.norm() - 1.0) > norm_tol)
        throw InvalidDimension("entangled_coherent_state: truncation too small for alpha");
    return KetState(std::move(v));
}

inline constexpr double kClassicalFidelity = 2.0 / 3.0;

struct FidelityTrajectory {
    std::vector<double> times;
    std::vector<double> fidelity;
    std::optional<double> classical_crossing;  // first time Phi drops below 2/3, interpolated
};

/// Phi(t) = Tr sqrt(sqrt(rho0) rho(t) sqrt(rho0)) for pure rho0 under the effective model.
inline FidelityTrajectory fidelity_trajectory(const KetState& psi0, const RabiParams& p, double gamma_eff,
                                              const std::vector<double>& times, const EvolveOptions& opt = {}) {
    const int n_max = two_mode_cutoff(psi0.dim());
    FidelityTrajectory out;
    out.times = times;
    evolve_along(effective_generator(p, gamma_eff, n_max), DensityMatrix(psi0), times,
                 [&](double, const DensityMatrix& r) { out.fidelity.push_back(uhlmann_fidelity(psi0, r)); }, opt);
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (out.fidelity[i] >= kClassicalFidelity) continue;
        if (i == 0) {
            out.classical_crossing = times[0];
        } else {
            const double f0 = out.fidelity[i - 1], f1 = out.fidelity[i];
            out.classical_crossing = times[i - 1] + (times[i] - times[i - 1]) * (f0 - kClassicalFidelity) / (f0 - f1);
        }
        break;
    }
    return out;
}

struct CascadeComparison {
    std::vector<double> times;
    std::vector<double> trace_distance;
    std::vector<double> cascade_purity;
    double max_trace_distance = 0.0;
};

/// Source-cavity state from the full cascade versus the effective model with
/// gamma_eff = effective_gamma(gamma, mu, 1) at each time.
inline CascadeComparison compare_cascade_to_effective(const KetState& psi0, const RabiParams& p,
                                                      const FeedbackParams& f, int n_max_c,
                                                      const std::vector<double>& times,
                                                      const EvolveOptions& opt = {}) {
    const int n_max = two_mode_cutoff(psi0.dim());
    CascadeTruncations tr;
    tr.n_max_a = tr.n_max_b = n_max;
    tr.n_max_c = n_max_c;
    const CascadeGenerator cascade(p, f, tr);
    const double g_eff = effective_gamma(p.gamma, f.mu, f.eta);
    const DensityMatrix rho0(psi0);
    CascadeComparison out;
    std::vector<DensityMatrix> eff;
    evolve_along(effective_generator(p, g_eff, n_max), rho0, times,
                 [&](double, const DensityMatrix& r) { eff.push_back(r); }, opt);
    std::size_t k = 0;
    evolve_along(cascade, attach_driven_vacuum(rho0, n_max_c), times, [&](double t, const DensityMatrix& w) {
        const DensityMatrix src = cascade.source_state(w);
        out.times.push_back(t);
        out.trace_distance.push_back(nesslab::trace_distance(src, eff[k++]));
        out.cascade_purity.push_back(src.purity());
        out.max_trace_distance = std::max(out.max_trace_distance, out.trace_distance.back());
    }, opt);
    return out;
}

}  // namespace nesslab
