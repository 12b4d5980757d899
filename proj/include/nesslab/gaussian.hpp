#pragma once

// Gaussian treatment of the damped two-mode model
//   H = omega a^dag a + Omega b^dag b + lambda1 (a^dag b + b^dag a) + lambda2 (a^dag b^dag + b a)
// with photon loss gamma D[a] on mode a only. Quadratures R = (q_a, p_a, q_b, p_b),
// q = (a + a^dag)/sqrt2, p = (a - a^dag)/(i sqrt2), vacuum V = I/2.

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include <array>
#include <cmath>
#include <optional>

#include "models.hpp"

namespace nesslab {

using Matrix4d = Eigen::Matrix4d;
using Vector4d = Eigen::Vector4d;
using Matrix4cd = Eigen::Matrix4cd;

/// M and N of the characteristic-function equation
///   d chi/dt = z^T M z chi + z^T N grad chi,  z = (e_a, e_a^*, e_b, e_b^*).
struct ChiGenerators {
    Matrix4cd M;
    Matrix4cd N;
};

inline ChiGenerators chi_generators(const RabiParams& p) {
    p.validate();
    const double w = p.omega, W = p.Omega, l1 = p.lambda1, l2 = p.lambda2, g = p.gamma;
    ChiGenerators c;
    c.M.setZero();
    c.M(0, 2) = c.M(2, 0) = kI * l2 / 2.0;
    c.M(1, 3) = c.M(3, 1) = -kI * l2 / 2.0;
    c.N << kI * w - g, 0.0, kI * l1, -kI * l2,
           0.0, -kI * w - g, kI * l2, -kI * l1,
           kI * l1, -kI * l2, kI * W, 0.0,
           kI * l2, -kI * l1, 0.0, -kI * W;
    return c;
}

/// Real drift K and diffusion D with dR/dt = K R (+ noise), dV/dt = K V + V K^T + D.
inline Matrix4d quadrature_drift(const RabiParams& p) {
    p.validate();
    const double w = p.omega, W = p.Omega, l1 = p.lambda1, l2 = p.lambda2, g = p.gamma;
    Matrix4d k;
    k << -g, w, 0.0, l1 - l2,
         -w, -g, -(l1 + l2), 0.0,
         0.0, l1 - l2, 0.0, W,
         -(l1 + l2), 0.0, -W, 0.0;
    return k;
}

inline Matrix4d quadrature_diffusion(const RabiParams& p) {
    Matrix4d d = Matrix4d::Zero();
    d(0, 0) = d(1, 1) = p.gamma;
    return d;
}

/// Two-mode symplectic form diag(J, J), J = [[0, 1], [-1, 0]].
inline Matrix4d symplectic_form() {
    Matrix4d s = Matrix4d::Zero();
    s(0, 1) = s(2, 3) = 1.0;
    s(1, 0) = s(3, 2) = -1.0;
    return s;
}

class GaussianState {
public:
    static constexpr double kPhysTol = 1e-8;

    GaussianState() : GaussianState(Vector4d::Zero(), 0.5 * Matrix4d::Identity()) {}
    GaussianState(Vector4d mean, Matrix4d v) : mean_(std::move(mean)), v_(std::move(v)) {
        if (!mean_.allFinite() || !v_.allFinite()) throw InvalidState("GaussianState: non-finite entries");
        if ((v_ - v_.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, v_.cwiseAbs().maxCoeff()))
            throw InvalidState("GaussianState: covariance not symmetric");
        v_ = 0.5 * (v_ + v_.transpose()).eval();
    }

    static GaussianState vacuum() { return GaussianState(); }

    /// Two-mode squeezed vacuum with squeezing r.
    static GaussianState two_mode_squeezed(double r) {
        Matrix4d v = Matrix4d::Zero();
        const double c = std::cosh(2.0 * r), s = std::sinh(2.0 * r);
        v(0, 0) = v(1, 1) = v(2, 2) = v(3, 3) = c;
        v(0, 2) = v(2, 0) = s;
        v(1, 3) = v(3, 1) = -s;
        return GaussianState(Vector4d::Zero(), 0.5 * v);
    }

    const Vector4d& mean() const { return mean_; }
    const Matrix4d& covariance() const { return v_; }

    /// Smallest eigenvalue of V + (i/2) Omega; >= 0 for a physical state.
    double uncertainty_margin() const {
        const Matrix4cd m = v_.cast<cplx>() + 0.5 * kI * symplectic_form().cast<cplx>();
        Eigen::SelfAdjointEigenSolver<Matrix4cd> es(m, Eigen::EigenvaluesOnly);
        return es.eigenvalues()(0);
    }
    bool is_physical(double tol = kPhysTol) const { return uncertainty_margin() >= -tol; }

    /// <a^dag a>, <b^dag b>, <a b> including displacement.
    double photon_number_a() const { return 0.5 * (second(0, 0) + second(1, 1) - 1.0); }
    double photon_number_b() const { return 0.5 * (second(2, 2) + second(3, 3) - 1.0); }
    cplx correlation_ab() const {
        return 0.5 * cplx(second(0, 2) - second(1, 3), second(0, 3) + second(1, 2));
    }

private:
    double second(int i, int j) const { return v_(i, j) + mean_(i) * mean_(j); }

    Vector4d mean_;
    Matrix4d v_;
};

/// First and second moments at time t (exact exponential of the linear moment system).
inline GaussianState covariance_flow(const RabiParams& p, const GaussianState& g0, double t) {
    if (!(t >= 0.0)) throw InvalidArgument("covariance_flow: t must be >= 0");
    const Matrix4d k = quadrature_drift(p);
    const Matrix4d d = quadrature_diffusion(p);
    const Vector4d mean = (k * t).exp() * g0.mean();
    // vec(V)' = (I (x) K + K (x) I) vec(V) + vec(D), augmented to a homogeneous system
    Eigen::Matrix<double, 17, 17> aug = Eigen::Matrix<double, 17, 17>::Zero();
    const Matrix4d id = Matrix4d::Identity();
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            for (int c = 0; c < 4; ++c)
                for (int e = 0; e < 4; ++e)
                    aug(4 * b + a, 4 * e + c) = id(b, e) * k(a, c) + k(b, e) * id(a, c);
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) aug(4 * b + a, 16) = d(a, b);
    Eigen::Matrix<double, 17, 1> y;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) y(4 * b + a) = g0.covariance()(a, b);
    y(16) = 1.0;
    const Eigen::Matrix<double, 17, 1> yt = (aug * t).exp() * y;
    Matrix4d v;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) v(a, b) = yt(4 * b + a);
    return GaussianState(mean, 0.5 * (v + v.transpose()));
}

struct StabilityReport {
    double zeta = 0.0;
    std::optional<cplx> nu_plus;   // closed form, present only when Omega == omega
    std::optional<cplx> nu_minus;
    std::array<cplx, 4> eigenvalues_of_N{};
    double max_re_eig_N = 0.0;
    bool stable = false;
};

/// zeta = max Re(+-nu+, +-nu-) - gamma on resonance; the eigenvalues of N are
/// (-gamma +- nu+-)/2 there, so zeta = 2 max Re eig(N) in general.
inline StabilityReport stability_zeta(const RabiParams& p) {
    const ChiGenerators c = chi_generators(p);
    Eigen::ComplexEigenSolver<Matrix4cd> es(c.N, false);
    StabilityReport r;
    r.max_re_eig_N = -INFINITY;
    for (int i = 0; i < 4; ++i) {
        r.eigenvalues_of_N[i] = es.eigenvalues()(i);
        r.max_re_eig_N = std::max(r.max_re_eig_N, es.eigenvalues()(i).real());
    }
    r.zeta = 2.0 * r.max_re_eig_N;
    if (p.Omega == p.omega) {
        const double w = p.omega, g = p.gamma, l1 = p.lambda1, l2 = p.lambda2;
        const cplx inner = std::sqrt(cplx(4.0 * l1 * l1 * w * w - g * g * w * w, 0.0));
        const cplx base = l1 * l1 - l2 * l2 + w * w;
        r.nu_plus = std::sqrt(g * g - 4.0 * (base + inner));
        r.nu_minus = std::sqrt(g * g - 4.0 * (base - inner));
        const double max_re = std::max(std::abs(r.nu_plus->real()), std::abs(r.nu_minus->real()));
        const double zeta_closed = max_re - g;
        // roots of the characteristic polynomial; robust at exceptional points
        // where the eigensolver only resolves sqrt(eps)
        const double norm = 1.0 + c.N.cwiseAbs().rowwise().sum().maxCoeff();
        for (const cplx nu : {*r.nu_plus, -*r.nu_plus, *r.nu_minus, -*r.nu_minus}) {
            const cplx mu = 0.5 * (-g + nu);
            const cplx det = (c.N - mu * Matrix4cd::Identity()).determinant();
            if (std::abs(det) > 1e-9 * std::pow(norm, 4))
                throw InvalidState("stability_zeta: closed form and drift spectrum disagree");
        }
        r.zeta = zeta_closed;
    }
    r.stable = r.zeta < 0.0;
    return r;
}

/// zeta at or below this counts as stable (marginal, e.g. an undamped mode)
inline constexpr double kMarginalZeta = 1e-12;

/// Mean-field critical coupling sqrt(Omega (omega^2 + gamma^2) / omega) / 2.
inline double critical_coupling(const RabiParams& p) {
    p.validate();
    return 0.5 * std::sqrt(p.Omega * (p.omega * p.omega + p.gamma * p.gamma) / p.omega);
}

/// Smallest lambda1 (with lambda2 = ratio * lambda1) where zeta becomes
/// positive (marginal zeta = 0 at gamma = 0 counts as below), by bracketing and bisection. Returns +inf if no crossing below lambda_max.
inline double stability_boundary(RabiParams p, double ratio, double lambda_max = 10.0, double tol = 1e-13) {
    auto zeta_at = [&](double l1) {
        p.lambda1 = l1;
        p.lambda2 = ratio * l1;
        return stability_zeta(p).zeta;
    };
    double lo = 0.0, hi = 0.0;
    const double step = lambda_max / 2000.0;
    bool found = false;
    for (int i = 1; i <= 2000; ++i) {
        hi = i * step;
        if (zeta_at(hi) > kMarginalZeta) {
            lo = hi - step;
            found = true;
            break;
        }
    }
    if (!found) return INFINITY;
    while (hi - lo > tol * std::max(1.0, hi)) {
        const double mid = 0.5 * (lo + hi);
        (zeta_at(mid) > kMarginalZeta ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Solves K V + V K^T + D = 0 by Kronecker linearization.
inline Matrix4d solve_lyapunov(const Matrix4d& k, const Matrix4d& d) {
    Eigen::Matrix<double, 16, 16> a;
    const Matrix4d id = Matrix4d::Identity();
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            for (int m = 0; m < 4; ++m)
                for (int n = 0; n < 4; ++n) a(4 * j + i, 4 * n + m) = id(j, n) * k(i, m) + k(j, n) * id(i, m);
    Eigen::Matrix<double, 16, 1> rhs;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) rhs(4 * j + i) = -d(i, j);
    const Eigen::Matrix<double, 16, 1> x = a.fullPivLu().solve(rhs);
    Matrix4d v;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) v(i, j) = x(4 * j + i);
    return 0.5 * (v + v.transpose());
}

inline double lyapunov_residual(const Matrix4d& k, const Matrix4d& d, const Matrix4d& v) {
    return (k * v + v * k.transpose() + d).cwiseAbs().maxCoeff();
}

/// Steady state of the damped two-mode model (zero mean).
inline GaussianState steady_covariance(const RabiParams& p) {
    const StabilityReport s = stability_zeta(p);
    if (!s.stable) throw InstabilityError("steady_covariance: parameters are not stable", s.zeta);
    const Matrix4d k = quadrature_drift(p);
    const Matrix4d d = quadrature_diffusion(p);
    return GaussianState(Vector4d::Zero(), solve_lyapunov(k, d));
}

/// Smallest symplectic eigenvalue of the partially transposed state.
inline double symplectic_nu_minus(const GaussianState& g) {
    const Matrix4d& v = g.covariance();
    const double det_a = v.block<2, 2>(0, 0).determinant();
    const double det_b = v.block<2, 2>(2, 2).determinant();
    const double det_c = v.block<2, 2>(0, 2).determinant();
    const double sigma = det_a + det_b - 2.0 * det_c;
    const double det_v = v.determinant();
    const double disc = std::max(sigma * sigma - 4.0 * det_v, 0.0);
    return std::sqrt(std::max(0.5 * sigma - 0.5 * std::sqrt(disc), 0.0));
}

/// max(0, -ln(2 nu_-)), natural log.
inline double log_negativity_gaussian(const GaussianState& g) {
    if (!g.is_physical()) throw InvalidState("log_negativity_gaussian: covariance violates the uncertainty relation");
    return std::max(0.0, -std::log(2.0 * symplectic_nu_minus(g)));
}

}  // namespace nesslab
