#pragma once

// Hamiltonians of the anisotropic Rabi / Dicke family and the vectorized
// Lindblad generator.
//
// Dissipator convention: a term {x, rate} contributes
//     rate * (2 x rho x^dag - x^dag x rho - rho x^dag x),
// so a field with rate gamma loses photons at 2*gamma. Callers pick `rate`
// to match the equation they reproduce (gamma for the single-cavity models,
// gamma/2 for the feedback models).
//
// vec() is column stacking: vec(A X B) = (B^T (x) A) vec(X).

#include <vector>

#include <Eigen/SparseCore>

#include "operators.hpp"

namespace nesslab {

/// omega: field frequency, Omega: atomic/second-mode splitting,
/// lambda1: co-rotating coupling, lambda2: counter-rotating coupling,
/// gamma: field decay rate. All frequencies are in units of omega.
struct RabiParams {
    double omega = 1.0;
    double Omega = 1.0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double gamma = 0.0;

    void validate() const {
        for (double v : {omega, Omega, lambda1, lambda2, gamma})
            if (!std::isfinite(v)) throw InvalidArgument("RabiParams: non-finite entry");
        if (gamma < 0.0) throw InvalidArgument("RabiParams: gamma must be >= 0");
        if (lambda1 < 0.0 || lambda2 < 0.0) throw InvalidArgument("RabiParams: couplings must be >= 0");
    }
};

struct LindbladTerm {
    CMatrix jump;
    double rate = 0.0;
};

/// omega a^dag a + (Omega/2) sigma_z + lambda1 (a^dag s- + s+ a) + lambda2 (a^dag s+ + s- a)
/// on |boson> (x) |qubit>.
inline CMatrix build_arm_hamiltonian(const RabiParams& p, int n_max) {
    p.validate();
    const HilbertSpec spec = HilbertSpec::boson_qubit(n_max);
    const CMatrix a = embed(annihilation(n_max), spec, 0);
    const CMatrix ad = a.adjoint();
    const CMatrix sz = embed(pauli(PauliAxis::z), spec, 1);
    const CMatrix sp = embed(pauli(PauliAxis::plus), spec, 1);
    const CMatrix sm = embed(pauli(PauliAxis::minus), spec, 1);
    CMatrix h = p.omega * ad * a + 0.5 * p.Omega * sz + p.lambda1 * (ad * sm + sp * a) +
                p.lambda2 * (ad * sp + sm * a);
    return h;
}

/// Plain Rabi model omega a^dag a + (Omega/2) sigma_z + lambda (a + a^dag) sigma_x.
inline CMatrix build_rabi_hamiltonian(double omega, double Omega, double lambda, int n_max) {
    const HilbertSpec spec = HilbertSpec::boson_qubit(n_max);
    const CMatrix a = embed(annihilation(n_max), spec, 0);
    const CMatrix sx = embed(pauli(PauliAxis::x), spec, 1);
    const CMatrix sz = embed(pauli(PauliAxis::z), spec, 1);
    return omega * a.adjoint() * a + 0.5 * Omega * sz + lambda * (a + a.adjoint()) * sx;
}

/// Linearized anisotropic Dicke model on |a> (x) |b>:
/// omega a^dag a + Omega b^dag b + lambda1 (a^dag b + b^dag a) + lambda2 (a^dag b^dag + b a).
inline CMatrix build_nad_hamiltonian(const RabiParams& p, int n_max_a, int n_max_b) {
    p.validate();
    const HilbertSpec spec{n_max_a + 1, n_max_b + 1};
    const CMatrix a = embed(annihilation(n_max_a), spec, 0);
    const CMatrix b = embed(annihilation(n_max_b), spec, 1);
    const CMatrix ad = a.adjoint();
    const CMatrix bd = b.adjoint();
    return p.omega * ad * a + p.Omega * bd * b + p.lambda1 * (ad * b + bd * a) +
           p.lambda2 * (ad * bd + b * a);
}

/// Finite-spin anisotropic Dicke model with the literal (Omega/2) S_z term.
/// For S = 1/2, S_z = sigma_z/2, so build_adm_hamiltonian with Omega doubled
/// reproduces build_arm_hamiltonian entrywise.
inline CMatrix build_adm_hamiltonian(const RabiParams& p, Spin s, int n_max) {
    p.validate();
    const HilbertSpec spec{n_max + 1, s.dim()};
    const CMatrix a = embed(annihilation(n_max), spec, 0);
    const CMatrix ad = a.adjoint();
    const CMatrix sz = embed(spin_z(s), spec, 1);
    const CMatrix sp = embed(spin_plus(s), spec, 1);
    const CMatrix sm = embed(spin_minus(s), spec, 1);
    return p.omega * ad * a + 0.5 * p.Omega * sz + p.lambda1 * (ad * sm + sp * a) +
           p.lambda2 * (ad * sp + sm * a);
}

/// Two-qubit form of the ARM with the boson truncated to {|0>, |1>}, written
/// with tau operators (tau+ = a^dag on that subspace, tau_z = 2 tau+ tau- - 1).
/// Basis is |boson> (x) |qubit>, boson |0> first, so the matrix lines up with
/// build_arm_hamiltonian(p, 1). The free-field term a^dag a = (tau_z + 1)/2
/// gives (omega/2) tau_z; the dropped constant is omega/2.
inline CMatrix build_two_qubit_arm(const RabiParams& p) {
    p.validate();
    CMatrix tp = CMatrix::Zero(2, 2);
    tp(1, 0) = 1.0;  // |0> -> |1>
    const CMatrix tm = tp.adjoint();
    const CMatrix tz = 2.0 * tp * tm - identity(2);
    const CMatrix tx = tp + tm;
    const CMatrix ty = -kI * (tp - tm);
    const CMatrix i2 = identity(2);
    return 0.5 * p.omega * tensor(tz, i2) + 0.5 * p.Omega * tensor(i2, pauli(PauliAxis::z)) +
           0.5 * (p.lambda1 + p.lambda2) * tensor(tx, pauli(PauliAxis::x)) +
           0.5 * (p.lambda1 - p.lambda2) * tensor(ty, pauli(PauliAxis::y));
}

// ---- superoperators -------------------------------------------------------

inline CVector vec(const CMatrix& m) {
    return Eigen::Map<const CVector>(m.data(), m.size());
}

inline CMatrix unvec(const CVector& v, int dim) {
    if (v.size() != static_cast<Eigen::Index>(dim) * dim)
        throw InvalidDimension("unvec: length is not dim^2");
    return Eigen::Map<const CMatrix>(v.data(), dim, dim);
}

/// Superoperator of X -> A X.
inline CMatrix spre(const CMatrix& a) { return tensor(identity(static_cast<int>(a.rows())), a); }

/// Superoperator of X -> X B.
inline CMatrix spost(const CMatrix& b) { return tensor(b.transpose(), identity(static_cast<int>(b.rows()))); }

/// Superoperator of X -> A X B.
inline CMatrix sprepost(const CMatrix& a, const CMatrix& b) { return tensor(b.transpose(), a); }

/// rate * (2 x X x^dag - x^dag x X - X x^dag x).
inline CMatrix dissipator(const CMatrix& x, double rate) {
    const CMatrix xdx = x.adjoint() * x;
    return rate * (2.0 * sprepost(x, x.adjoint()) - spre(xdx) - spost(xdx));
}

inline void check_terms(const CMatrix& h, const std::vector<LindbladTerm>& terms) {
    if (h.rows() != h.cols()) throw InvalidDimension("Hamiltonian is not square");
    for (const auto& t : terms) {
        if (t.jump.rows() != h.rows() || t.jump.cols() != h.cols())
            throw InvalidArgument("jump operator dimension does not match the Hamiltonian");
        if (!(t.rate >= 0.0) || !std::isfinite(t.rate))
            throw InvalidArgument("Lindblad rate must be finite and >= 0");
    }
}

/// L with vec(rho_dot) = L vec(rho) for rho_dot = -i[H, rho] + sum_k rate_k D[x_k] rho.
inline CMatrix build_liouvillian(const CMatrix& h, const std::vector<LindbladTerm>& terms) {
    check_terms(h, terms);
    if (!is_hermitian(h, 1e-10)) throw InvalidArgument("build_liouvillian: H is not Hermitian");
    CMatrix l = -kI * (spre(h) - spost(h));
    for (const auto& t : terms)
        if (t.rate > 0.0) l += dissipator(t.jump, t.rate);
    return l;
}

/// Generator applied in matrix form with sparse operators, O(d^2 nnz/row) per call.
class LindbladGenerator {
public:
    using Sparse = Eigen::SparseMatrix<cplx>;

    LindbladGenerator(CMatrix h, std::vector<LindbladTerm> terms) : h_(std::move(h)) {
        check_terms(h_, terms);
        // -i H_eff rho + h.c. with H_eff = H - i sum rate x^dag x.
        CMatrix heff = h_;
        for (auto& t : terms) {
            if (t.rate == 0.0) continue;
            heff -= kI * t.rate * (t.jump.adjoint() * t.jump);
            const CMatrix j = std::sqrt(2.0 * t.rate) * t.jump;
            jumps_.push_back(j.sparseView());
            jumps_adj_.push_back(Sparse(j.adjoint().sparseView()));
        }
        k_ = CMatrix(-kI * heff).sparseView();
    }

    int dim() const { return static_cast<int>(h_.rows()); }

    CMatrix operator()(const CMatrix& rho) const {
        CMatrix out = k_ * rho;
        out += out.adjoint().eval();
        for (std::size_t i = 0; i < jumps_.size(); ++i) {
            const CMatrix jr = jumps_[i] * rho;
            out.noalias() += jr * jumps_adj_[i];
        }
        return out;
    }

private:
    CMatrix h_;
    Sparse k_;
    std::vector<Sparse> jumps_, jumps_adj_;
};

/// Generator given as an explicit superoperator.
class SuperoperatorGenerator {
public:
    explicit SuperoperatorGenerator(CMatrix l) : l_(std::move(l)) {
        const auto n = l_.rows();
        dim_ = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
        if (l_.cols() != n || static_cast<Eigen::Index>(dim_) * dim_ != n)
            throw InvalidDimension("SuperoperatorGenerator: matrix is not d^2 x d^2");
    }

    int dim() const { return dim_; }
    const CMatrix& matrix() const { return l_; }

    CMatrix operator()(const CMatrix& rho) const { return unvec(l_ * vec(rho), dim_); }

private:
    CMatrix l_;
    int dim_;
};

}  // namespace nesslab
