#pragma once

// Globally adaptive Gauss-Kronrod quadrature with an absolute error target.
//
// The panel rule (21-point Kronrod extension of 10-point Gauss) comes from
// Boost.Math; the driver here bisects the panel with the largest error
// estimate until the summed estimate meets the target. Boost's own adaptive
// driver measures error relative to the integral value, which never
// terminates for integrals that vanish (zeros of f0 are the point of the
// exercise).

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "errors.hpp"

namespace cyclepersist {

struct QuadratureOptions {
    double tol = 1e-9;       ///< absolute target, relative to max(1, L1 norm of the integrand)
    int max_depth = 30;      ///< bisection depth limit per initial panel
    std::size_t max_panels = 200000;
};

struct QuadratureResult {
    double value;
    double error;  ///< estimated absolute error
    double l1;     ///< estimated integral of |f|
    std::size_t panels;
};

namespace detail {

struct Panel {
    double a, b, value, error, l1;
    int depth;
    bool operator<(const Panel& o) const { return error < o.error; }
};

template <class F>
Panel gk_panel(F& f, double a, double b, int depth) {
    using GK = boost::math::quadrature::gauss_kronrod<double, 21>;
    double err = 0.0, l1 = 0.0;
    const double v = GK::integrate(f, a, b, 0, 0.0, &err, &l1);
    if (!std::isfinite(v)) throw NumericalError("non-finite integrand");
    return {a, b, v, err, l1, depth};
}

}  // namespace detail

/// Integrates f over consecutive panels given by sorted breakpoints
/// (at least two). `what` names the integral in error messages.
template <class F>
QuadratureResult integrate_adaptive(F&& f, const std::vector<double>& breaks, const QuadratureOptions& opt = {},
                                    const std::string& what = "integral") {
    std::priority_queue<detail::Panel> heap;
    double value = 0.0, error = 0.0, l1 = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        if (!(breaks[i + 1] > breaks[i])) continue;
        heap.push(detail::gk_panel(f, breaks[i], breaks[i + 1], 0));
    }
    auto totals = [&] {
        value = error = l1 = 0.0;
        auto copy = heap;
        std::vector<double> vals;
        while (!copy.empty()) {
            const auto& p = copy.top();
            vals.push_back(p.value);
            error += p.error;
            l1 += p.l1;
            copy.pop();
        }
        // sorted summation for a deterministic, order-independent total
        std::sort(vals.begin(), vals.end(), [](double x, double y) { return std::abs(x) < std::abs(y); });
        for (double v : vals) value += v;
    };
    totals();
    if (heap.empty()) return {0.0, 0.0, 0.0, 0};

    while (error > opt.tol * std::max(1.0, l1)) {
        detail::Panel worst = heap.top();
        if (worst.depth >= opt.max_depth || heap.size() >= opt.max_panels) {
            throw NumericalError(what + ": quadrature did not converge (error estimate " + std::to_string(error) +
                                 " after depth " + std::to_string(worst.depth) + ")");
        }
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        const detail::Panel left = detail::gk_panel(f, worst.a, mid, worst.depth + 1);
        const detail::Panel right = detail::gk_panel(f, mid, worst.b, worst.depth + 1);
        error += left.error + right.error - worst.error;
        l1 += left.l1 + right.l1 - worst.l1;
        heap.push(left);
        heap.push(right);
        if (error < 0.0) totals();
    }
    const std::size_t n = heap.size();
    totals();
    return {value, error, l1, n};
}

/// Sorted, de-duplicated breakpoints: [a, b] split into at least `min_panels`
/// equal panels, plus the given interior points, with no panel longer than max_len.
inline std::vector<double> make_breaks(double a, double b, std::vector<double> interior, int min_panels = 1,
                                       double max_len = 0.0) {
    std::vector<double> pts{a, b};
    int n = std::max(1, min_panels);
    if (max_len > 0.0) n = std::max(n, static_cast<int>(std::ceil((b - a) / max_len)));
    for (int i = 1; i < n; ++i) pts.push_back(a + (b - a) * i / n);
    for (double p : interior) {
        if (p > a && p < b) pts.push_back(p);
    }
    std::sort(pts.begin(), pts.end());
    std::vector<double> out;
    for (double p : pts) {
        if (out.empty() || p - out.back() > 1e-14 * std::max(1.0, std::abs(p))) out.push_back(p);
    }
    if (out.back() != b) out.back() = b;
    return out;
}

}  // namespace cyclepersist
