#pragma once

// Dense operator algebra on truncated Fock spaces, qubits and finite spins.
//
// Basis conventions used throughout the library:
//   * composite spaces are ordered as written, first factor = slowest index
//     (Kronecker order), e.g. |boson> (x) |qubit>;
//   * the qubit factor lists |up> first, so sigma_z = diag(1, -1) and
//     sigma_plus |down> = |up>;
//   * a spin-S factor lists m = S, S-1, ..., -S.

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <complex>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "errors.hpp"

namespace nesslab {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

inline constexpr cplx kI{0.0, 1.0};
inline constexpr double kPi = 3.14159265358979323846;

/// Largest |M - M^dagger| entry.
inline double hermiticity_defect(const CMatrix& m) {
    if (m.rows() != m.cols()) return INFINITY;
    return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

inline bool is_hermitian(const CMatrix& m, double tol) {
    return hermiticity_defect(m) <= tol;
}

inline double max_abs(const CMatrix& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

/// Ordered list of subsystem dimensions.
class HilbertSpec {
public:
    HilbertSpec(std::initializer_list<int> dims) : HilbertSpec(std::vector<int>(dims)) {}
    explicit HilbertSpec(std::vector<int> dims) : factors_(std::move(dims)) {
        if (factors_.empty()) throw InvalidDimension("HilbertSpec: no factors");
        for (int d : factors_)
            if (d < 1) throw InvalidDimension("HilbertSpec: factor dimension < 1");
    }

    static HilbertSpec boson_qubit(int n_max) { return HilbertSpec{n_max + 1, 2}; }

    const std::vector<int>& factors() const { return factors_; }
    int factor(std::size_t i) const { return factors_.at(i); }
    std::size_t size() const { return factors_.size(); }
    int total() const {
        return std::accumulate(factors_.begin(), factors_.end(), 1, std::multiplies<>());
    }

    bool operator==(const HilbertSpec&) const = default;

private:
    std::vector<int> factors_;
};

/// Normalized state vector.
class KetState {
public:
    explicit KetState(CVector amplitudes) : amps_(std::move(amplitudes)) {
        if (amps_.size() == 0) throw InvalidDimension("KetState: empty vector");
        const double n = amps_.norm();
        if (!(n > 0.0) || !std::isfinite(n)) throw InvalidArgument("KetState: zero or non-finite norm");
        amps_ /= n;
    }

    /// Computational basis vector |index>.
    static KetState basis(int dim, int index) {
        if (index < 0 || index >= dim) throw InvalidDimension("KetState::basis: index out of range");
        CVector v = CVector::Zero(dim);
        v(index) = 1.0;
        return KetState(std::move(v));
    }

    int dim() const { return static_cast<int>(amps_.size()); }
    const CVector& amplitudes() const { return amps_; }
    cplx operator[](int i) const { return amps_(i); }
    CMatrix projector() const { return amps_ * amps_.adjoint(); }

private:
    CVector amps_;
};

inline CMatrix identity(int dim) { return CMatrix::Identity(dim, dim); }

/// Bosonic annihilation operator on {|0>, ..., |n_max>}.
inline CMatrix annihilation(int n_max) {
    if (n_max < 1) throw InvalidDimension("annihilation: n_max must be >= 1");
    CMatrix a = CMatrix::Zero(n_max + 1, n_max + 1);
    for (int n = 1; n <= n_max; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
    return a;
}

inline CMatrix creation(int n_max) { return annihilation(n_max).adjoint(); }

inline CMatrix number_operator(int n_max) {
    if (n_max < 1) throw InvalidDimension("number_operator: n_max must be >= 1");
    CMatrix n = CMatrix::Zero(n_max + 1, n_max + 1);
    for (int k = 0; k <= n_max; ++k) n(k, k) = k;
    return n;
}

enum class PauliAxis { x, y, z, plus, minus };

inline CMatrix pauli(PauliAxis axis) {
    CMatrix s = CMatrix::Zero(2, 2);
    switch (axis) {
        case PauliAxis::x: s(0, 1) = 1.0; s(1, 0) = 1.0; break;
        case PauliAxis::y: s(0, 1) = -kI; s(1, 0) = kI; break;
        case PauliAxis::z: s(0, 0) = 1.0; s(1, 1) = -1.0; break;
        case PauliAxis::plus: s(0, 1) = 1.0; break;   // |down> -> |up>
        case PauliAxis::minus: s(1, 0) = 1.0; break;
    }
    return s;
}

/// Spin quantum number stored as 2S so that half-integers are exact.
struct Spin {
    int twice;

    static Spin from_value(double s) {
        const double t = 2.0 * s;
        if (!(t >= 1.0) || std::abs(t - std::round(t)) > 1e-12)
            throw InvalidArgument("Spin: 2S must be a positive integer");
        return Spin{static_cast<int>(std::lround(t))};
    }
    double value() const { return 0.5 * twice; }
    int dim() const { return twice + 1; }
};

/// S_z with basis m = S, S-1, ..., -S.
inline CMatrix spin_z(Spin s) {
    CMatrix m = CMatrix::Zero(s.dim(), s.dim());
    for (int k = 0; k < s.dim(); ++k) m(k, k) = s.value() - k;
    return m;
}

inline CMatrix spin_plus(Spin s) {
    const double S = s.value();
    CMatrix m = CMatrix::Zero(s.dim(), s.dim());
    // S+ |S, mz> = sqrt(S(S+1) - mz(mz+1)) |S, mz+1>; index k <-> mz = S - k.
    for (int k = 1; k < s.dim(); ++k) {
        const double mz = S - k;
        m(k - 1, k) = std::sqrt(S * (S + 1.0) - mz * (mz + 1.0));
    }
    return m;
}

inline CMatrix spin_minus(Spin s) { return spin_plus(s).adjoint(); }

/// Kronecker product, A is the slow index.
inline CMatrix tensor(const CMatrix& a, const CMatrix& b) {
    return Eigen::kroneckerProduct(a, b).eval();
}

inline CMatrix tensor(std::initializer_list<CMatrix> ops) {
    if (ops.size() == 0) throw InvalidArgument("tensor: empty operand list");
    auto it = ops.begin();
    CMatrix out = *it++;
    for (; it != ops.end(); ++it) out = tensor(out, *it);
    return out;
}

/// Embed a single-factor operator into the full space described by `spec`.
inline CMatrix embed(const CMatrix& op, const HilbertSpec& spec, std::size_t slot) {
    if (slot >= spec.size()) throw InvalidArgument("embed: slot out of range");
    if (op.rows() != spec.factor(slot) || op.cols() != spec.factor(slot))
        throw InvalidDimension("embed: operator does not match factor dimension");
    CMatrix out = CMatrix::Identity(1, 1);
    for (std::size_t i = 0; i < spec.size(); ++i)
        out = tensor(out, i == slot ? op : identity(spec.factor(i)));
    return out;
}

/// exp(-i t K) for Hermitian K via eigendecomposition.
inline CMatrix expm_hermitian(const CMatrix& k, double t = 1.0) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(k);
    const RVector& w = es.eigenvalues();
    CVector phase(w.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) phase(i) = std::exp(-kI * (w(i) * t));
    return es.eigenvectors() * phase.asDiagonal() * es.eigenvectors().adjoint();
}

/// Displacement operator exp(alpha a^dagger - alpha^* a) on the truncated space.
/// The truncation is exact only well below n_max; callers choose n_max >> |alpha|^2.
inline CMatrix displacement(cplx alpha, int n_max) {
    if (!std::isfinite(alpha.real()) || !std::isfinite(alpha.imag()))
        throw InvalidArgument("displacement: non-finite alpha");
    const CMatrix a = annihilation(n_max);
    // alpha a^dag - alpha^* a = -i K with K Hermitian.
    const CMatrix k = kI * (alpha * a.adjoint() - std::conj(alpha) * a);
    return expm_hermitian(k);
}

/// Fock amplitudes of a coherent state, renormalized on the truncated space.
inline KetState coherent_state(cplx alpha, int n_max) {
    if (n_max < 1) throw InvalidDimension("coherent_state: n_max must be >= 1");
    CVector v(n_max + 1);
    cplx term = std::exp(-0.5 * std::norm(alpha));
    v(0) = term;
    for (int n = 1; n <= n_max; ++n) {
        term *= alpha / std::sqrt(static_cast<double>(n));
        v(n) = term;
    }
    return KetState(std::move(v));
}

/// exp[i pi (a^dag a + sigma+ sigma-)] on boson (x) qubit.
inline CMatrix parity_operator(const HilbertSpec& spec) {
    if (spec.size() != 2 || spec.factor(1) != 2 || spec.factor(0) < 2)
        throw InvalidArgument("parity_operator: expected boson (x) qubit space");
    const int nb = spec.factor(0);
    CMatrix u = CMatrix::Zero(2 * nb, 2 * nb);
    for (int n = 0; n < nb; ++n) {
        u(2 * n, 2 * n) = (n % 2 == 0) ? -1.0 : 1.0;      // |n, up>: (-1)^(n+1)
        u(2 * n + 1, 2 * n + 1) = (n % 2 == 0) ? 1.0 : -1.0;  // |n, down>: (-1)^n
    }
    return u;
}

/// Commutator [A, B].
inline CMatrix commutator(const CMatrix& a, const CMatrix& b) { return a * b - b * a; }

}  // namespace nesslab
