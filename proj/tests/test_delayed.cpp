#include <gtest/gtest.h>

#include "nesslab/delayed.hpp"

using namespace nesslab;

namespace {

RabiParams fig_params(double ratio) {
    RabiParams p;
    p.lambda1 = 0.1;
    p.lambda2 = ratio * 0.1;
    p.gamma = 0.1;
    return p;
}

// Lambert W on branch k by Halley iteration from the asymptotic seed.
cplx lambert_w(cplx z, int k) {
    const cplx l1 = std::log(z) + cplx(0.0, 2.0 * kPi * k);
    cplx w = (k == 0 && std::abs(z) < 1.0) ? z : l1 - std::log(l1);
    for (int it = 0; it < 100; ++it) {
        const cplx ew = std::exp(w);
        const cplx f = w * ew - z;
        const cplx step = f / (ew * (w + 1.0) - (w + 2.0) * f / (2.0 * w + 2.0));
        w -= step;
        if (std::abs(step) < 1e-15 * (1.0 + std::abs(w))) break;
    }
    return w;
}

bool contains(const std::vector<cplx>& roots, cplx r, double tol) {
    for (const cplx q : roots)
        if (std::abs(q - r) <= tol) return true;
    return false;
}

}  // namespace

TEST(Langevin, Matrices) {
    RabiParams p = fig_params(1.0);
    p.gamma = 0.0;
    const auto d = langevin_matrices(p, 2.0);
    EXPECT_EQ(d.B().cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(d.Gamma.cwiseAbs().maxCoeff(), 0.0);
    const auto e = langevin_matrices(fig_params(1.0), 2.0);
    EXPECT_EQ(e.B()(0, 0), cplx(0.05));
    EXPECT_EQ(e.B()(1, 1), cplx(0.05));
    EXPECT_EQ(e.B().bottomRightCorner(2, 2).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_THROW(langevin_matrices(p, -1.0), InvalidArgument);
}

TEST(Langevin, UncoupledSpectrum) {
    RabiParams p;
    p.omega = 1.3;
    p.Omega = 0.7;
    p.gamma = 0.2;
    const auto d = langevin_matrices(p, 0.0);
    EXPECT_EQ(d.A()(0, 0), cplx(-0.2, -1.3));
    EXPECT_EQ(d.A()(1, 1), cplx(-0.2, 1.3));
    EXPECT_EQ(d.A()(2, 2), cplx(0.0, -0.7));
    EXPECT_EQ(d.A()(3, 3), cplx(0.0, 0.7));
    EXPECT_EQ((d.A() - CMatrix(d.A().diagonal().asDiagonal())).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Langevin, AgreesWithQuadratureDrift) {
    RabiParams p = fig_params(1.7);
    p.omega = 1.2;
    p.Omega = 0.9;
    const auto d = langevin_matrices(p, 0.0);
    const Matrix4cd P = ladder_to_quadrature();
    const Matrix4cd k = P * Matrix4cd(d.A()) * P.inverse();
    EXPECT_LE(k.imag().cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LE((k.real() - quadrature_drift(p)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(SecularRoots, ZeroDelayGivesDriftSpectrum) {
    const RabiParams p = fig_params(2.0);
    const auto scan = secular_roots(langevin_matrices(p, 0.0), default_root_window(p, 0.0));
    ASSERT_EQ(scan.roots.size(), 4u);
    Eigen::EigenSolver<Matrix4d> es(quadrature_drift(p));
    for (int i = 0; i < 4; ++i) EXPECT_TRUE(contains(scan.roots, es.eigenvalues()(i), 1e-10)) << es.eigenvalues()(i);
}

TEST(SecularRoots, ScalarLambertOracle) {
    // x' = -a x - b x + b x(t - tau): (L + a + b) tau e^{(L + a + b) tau} = b tau e^{(a + b) tau}
    const double a = 0.3, b = 0.2, tau = 2.0;
    DelaySystem s{CMatrix::Constant(1, 1, -a), CMatrix::Constant(1, 1, b), tau};
    RootWindow w{-3.0, 1.0, -20.0, 20.0};
    const auto scan = secular_roots(s, w);
    const cplx z = b * tau * std::exp((a + b) * tau);
    int inside = 0;
    for (int k = -8; k <= 8; ++k) {
        const cplx r = lambert_w(z, k) / tau - a - b;
        if (r.real() < w.re_min || r.real() > w.re_max || r.imag() < w.im_min || r.imag() > w.im_max) continue;
        ++inside;
        EXPECT_TRUE(contains(scan.roots, r, 1e-8)) << "branch " << k << " root " << r;
    }
    EXPECT_GE(inside, 5);
    EXPECT_EQ(static_cast<int>(scan.roots.size()), inside);
}

TEST(SecularRoots, ResidualsAndConjugatePairs) {
    for (double tau : {0.7, 5.0, 23.0}) {
        const RabiParams p = fig_params(1.0);
        const auto d = langevin_matrices(p, tau);
        const auto scan = secular_roots(d, default_root_window(p, tau));
        ASSERT_FALSE(scan.roots.empty());
        for (const cplx r : scan.roots) {
            EXPECT_LE(d.system.scaled_residual(r), 1e-8);
            EXPECT_TRUE(contains(scan.roots, std::conj(r), 1e-7)) << tau << " " << r;
        }
    }
}

TEST(SecularRoots, EmptyWindowWarns) {
    const RabiParams p = fig_params(1.0);
    const auto scan = secular_roots(langevin_matrices(p, 3.0), RootWindow{0.5, 1.0, -1.0, 1.0});
    EXPECT_TRUE(scan.roots.empty());
    EXPECT_TRUE(scan.warning.has_value());
}

TEST(SecularRoots, FeedbackKeepsStability) {
    for (double ratio : {0.0, 1.0, 2.0}) {
        const RabiParams p = fig_params(ratio);
        for (double tau = 0.0; tau <= 30.0; tau += 1.5) {
            const auto scan = secular_roots(langevin_matrices(p, tau), default_root_window(p, tau));
            EXPECT_LT(scan.max_re, 0.0) << ratio << " " << tau;
        }
    }
}

TEST(Quadrature, LorentzianMatrix) {
    const double w = 1e-3;
    auto f = [&](double x) {
        CMatrix m(2, 2);
        m << w / ((x - 0.3) * (x - 0.3) + w * w), 1.0, cplx(0.0, x), std::exp(-x);
        return m;
    };
    const auto r = integrate_adaptive(f, 0.0, 2.0, 1e-11, {0.3});
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.value(0, 0).real(), std::atan(1.7 / w) + std::atan(0.3 / w), 1e-9);
    EXPECT_NEAR(r.value(0, 1).real(), 2.0, 1e-12);
    EXPECT_NEAR(r.value(1, 0).imag(), 2.0, 1e-12);
    EXPECT_NEAR(r.value(1, 1).real(), 1.0 - std::exp(-2.0), 1e-12);
}

TEST(SpectralCovariance, ZeroDelayMatchesLyapunov) {
    for (double ratio : {0.0, 1.0, 2.0}) {
        const RabiParams p = fig_params(ratio);
        const auto sc = spectral_covariance(langevin_matrices(p, 0.0));
        EXPECT_LE((sc.state.covariance() - steady_covariance(p).covariance()).cwiseAbs().maxCoeff(), 1e-8) << ratio;
        EXPECT_TRUE(sc.physical);
    }
}

TEST(SpectralCovariance, SymmetricAndFlaggedConsistently) {
    for (double tau : {0.05, 1.0}) {
        const auto sc = spectral_covariance(langevin_matrices(fig_params(2.0), tau));
        const Matrix4d v = sc.state.covariance();
        EXPECT_LE((v - v.transpose()).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_EQ(sc.physical, sc.uncertainty_margin >= -1e-8);
    }
}

TEST(SpectralCovariance, UnstableRejected) {
    RabiParams p = fig_params(1.0);
    p.lambda1 = p.lambda2 = 0.8;
    const auto d = langevin_matrices(p, 1.0);
    EXPECT_THROW(spectral_covariance(d), InstabilityError);
}

TEST(DelayedNegativity, ZeroDelayIsBaseline) {
    const auto r = delayed_negativity(fig_params(2.0), 0.0);
    ASSERT_EQ(r.status, DelayStatus::ok);
    EXPECT_NEAR(*r.negativity, r.baseline, 1e-8);
}

TEST(DelayedNegativity, ShortDelayRaisesEntanglement) {
    bool raised = false;
    for (double tau = 0.0; tau <= 0.12; tau += 0.02) {
        const auto r = delayed_negativity(fig_params(2.0), tau);
        if (r.status == DelayStatus::ok && *r.negativity > r.baseline + 1e-6) raised = true;
    }
    EXPECT_TRUE(raised);
}

TEST(DelayedNegativity, UnphysicalWindowFlagged) {
    const auto r = delayed_negativity(fig_params(2.0), 5.0);
    EXPECT_EQ(r.status, DelayStatus::unphysical);
    EXPECT_FALSE(r.negativity.has_value());
    EXPECT_LT(r.uncertainty_margin, -1e-8);
}

TEST(DelayedNegativity, IncreasesWithRatio) {
    double prev = -1.0;
    for (double ratio : {0.5, 1.0, 1.5, 2.0}) {
        const auto r = delayed_negativity(fig_params(ratio), 0.01);
        ASSERT_EQ(r.status, DelayStatus::ok) << ratio;
        EXPECT_GT(*r.negativity, prev);
        prev = *r.negativity;
    }
}

TEST(DelayedNegativity, ContinuousInDelay) {
    std::optional<double> prev;
    for (double tau = 0.0; tau <= 0.12; tau += 0.01) {
        const auto r = delayed_negativity(fig_params(2.0), tau);
        if (r.status != DelayStatus::ok) {
            prev.reset();
            continue;
        }
        if (prev) EXPECT_LT(std::abs(*r.negativity - *prev), 0.05);
        prev = r.negativity;
    }
}
