#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "kplane/estimate.hpp"
#include "kplane/errors.hpp"

namespace kplane {

namespace detail {

// 8-point Gauss-Legendre rule on (-1,1).
inline constexpr std::array<double, 8> kGl8Nodes = {
    -0.9602898564975362316835609, -0.7966664774136267395915539,
    -0.5255324099163289858177390, -0.1834346424956498049394761,
    0.1834346424956498049394761,  0.5255324099163289858177390,
    0.7966664774136267395915539,  0.9602898564975362316835609};

inline constexpr std::array<double, 8> kGl8Weights = {
    0.1012285362903762591525314, 0.2223810344533744705443560,
    0.3137066458778872873379622, 0.3626837833783619829651504,
    0.3626837833783619829651504, 0.3137066458778872873379622,
    0.2223810344533744705443560, 0.1012285362903762591525314};

} // namespace detail

/// Nodes and weights of a quadrature rule on the whole real line.
struct AxisRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Composite Gauss-Legendre rule over (-inf, inf) built from the rational map
/// t = scale*u/(1-u) on each half line (u in (0,1), uniform panels).  The map
/// turns algebraic tails t^{-d}, d >= 2, into smooth bounded integrands, so
/// no truncation is needed; nodes cluster near 0 and spread as a power law.
inline AxisRule real_line_rule(int points, double scale = 2.0) {
    if (scale <= 0.0) throw ParameterError("real_line_rule: scale must be positive");
    int panels_per_half = points / 16;
    if (panels_per_half < 2) panels_per_half = 2;
    AxisRule rule;
    rule.nodes.reserve(static_cast<std::size_t>(panels_per_half) * 16);
    rule.weights.reserve(static_cast<std::size_t>(panels_per_half) * 16);
    const double du = 1.0 / panels_per_half;
    for (int side = 0; side < 2; ++side) {
        const double sign = side == 0 ? -1.0 : 1.0;
        for (int p = 0; p < panels_per_half; ++p) {
            const double u0 = p * du, u1 = (p + 1) * du;
            const double mid = 0.5 * (u0 + u1), half = 0.5 * (u1 - u0);
            for (int q = 0; q < 8; ++q) {
                const double u = mid + half * detail::kGl8Nodes[q];
                const double one_minus = 1.0 - u;
                const double t = scale * u / one_minus;
                const double jac = scale / (one_minus * one_minus);
                rule.nodes.push_back(sign * t);
                rule.weights.push_back(half * detail::kGl8Weights[q] * jac);
            }
        }
    }
    return rule;
}

/// Tensor-product integral of f over R^k using the same axis rule on every
/// axis.  k is small (1..3) in every use here.
template <class F>
double tensor_integrate(const F& f, int k, const AxisRule& axis) {
    const std::size_t m = axis.nodes.size();
    std::vector<std::size_t> idx(k, 0);
    std::vector<double> x(k);
    double total = 0.0;
    while (true) {
        double w = 1.0;
        for (int d = 0; d < k; ++d) {
            x[d] = axis.nodes[idx[d]];
            w *= axis.weights[idx[d]];
        }
        total += w * f(std::span<const double>(x));
        int d = k - 1;
        while (d >= 0 && ++idx[d] == m) {
            idx[d] = 0;
            --d;
        }
        if (d < 0) break;
    }
    return total;
}

/// Integral over R^k with a refinement-difference error proxy: the fine rule
/// uses `points` nodes per axis, the proxy compares against half as many.
template <class F>
Estimate tensor_integrate_est(const F& f, int k, int points_per_axis, double scale = 2.0) {
    const AxisRule fine = real_line_rule(points_per_axis, scale);
    const AxisRule coarse = real_line_rule(points_per_axis / 2, scale);
    Estimate e;
    e.value = tensor_integrate(f, k, fine);
    const double coarse_value = tensor_integrate(f, k, coarse);
    e.std_err = std::fabs(e.value - coarse_value);
    e.samples = 1;
    for (int d = 0; d < k; ++d) e.samples *= fine.nodes.size();
    return e;
}

} // namespace kplane
