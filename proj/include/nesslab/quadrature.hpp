#pragma once

// Globally adaptive Gauss-Kronrod (7/15) quadrature for matrix-valued integrands.

#include <algorithm>
#include <queue>
#include <vector>

#include "operators.hpp"

namespace nesslab {

struct QuadratureResult {
    CMatrix value;
    double error = 0.0;     // sum of panel error estimates (max-abs entry)
    int panels = 0;
    bool converged = false;
};

namespace detail {

inline constexpr std::array<double, 8> kKronrodNodes{
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851, 0.864864423359769072789712788640926,
    0.741531185599394439863864773280788, 0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights{
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204, 0.104790010322250183839876322541518,
    0.140653259715525918745189590510238, 0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kGaussWeights{
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780, 0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

struct Panel {
    double a, b;
    CMatrix value;
    double error;
    bool operator<(const Panel& o) const { return error < o.error; }
};

template <class F>
Panel gk15(const F& f, double a, double b) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    const CMatrix fc = f(c);
    CMatrix k = kKronrodWeights[7] * fc;
    CMatrix g = kGaussWeights[3] * fc;
    for (int i = 0; i < 7; ++i) {
        const CMatrix s = f(c - h * kKronrodNodes[i]) + f(c + h * kKronrodNodes[i]);
        k += kKronrodWeights[i] * s;
        if (i % 2 == 1) g += kGaussWeights[i / 2] * s;
    }
    k *= h;
    g *= h;
    return {a, b, k, (k - g).cwiseAbs().maxCoeff()};
}

}  // namespace detail

/// Integrates f over [a, b], splitting first at `breaks` (those inside the
/// interval), then bisecting the worst panel until the summed error is below abs_tol.
template <class F>
QuadratureResult integrate_adaptive(const F& f, double a, double b, double abs_tol, std::vector<double> breaks = {},
                                    int max_panels = 200000) {
    QuadratureResult out;
    breaks.erase(std::remove_if(breaks.begin(), breaks.end(), [&](double x) { return !(x > a && x < b); }),
                 breaks.end());
    breaks.push_back(a);
    breaks.push_back(b);
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

    std::priority_queue<detail::Panel> heap;
    double err = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        auto p = detail::gk15(f, breaks[i], breaks[i + 1]);
        err += p.error;
        heap.push(std::move(p));
    }
    while (err > abs_tol && static_cast<int>(heap.size()) < max_panels) {
        detail::Panel worst = heap.top();
        heap.pop();
        const double m = 0.5 * (worst.a + worst.b);
        if (!(m > worst.a && m < worst.b)) {  // cannot split further
            heap.push(std::move(worst));
            break;
        }
        auto l = detail::gk15(f, worst.a, m);
        auto r = detail::gk15(f, m, worst.b);
        err += l.error + r.error - worst.error;
        heap.push(std::move(l));
        heap.push(std::move(r));
    }
    // sum in a fixed order so results do not depend on heap internals
    std::vector<detail::Panel> panels;
    panels.reserve(heap.size());
    while (!heap.empty()) {
        panels.push_back(heap.top());
        heap.pop();
    }
    std::sort(panels.begin(), panels.end(), [](const auto& x, const auto& y) { return x.a < y.a; });
    out.value = CMatrix::Zero(panels.front().value.rows(), panels.front().value.cols());
    out.error = 0.0;
    for (const auto& p : panels) {
        out.value += p.value;
        out.error += p.error;
    }
    out.panels = static_cast<int>(panels.size());
    out.converged = out.error <= abs_tol;
    return out;
}

}  // namespace nesslab
