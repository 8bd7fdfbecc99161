#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "kplane/errors.hpp"
#include "kplane/estimate.hpp"
#include "kplane/fields.hpp"
#include "kplane/geometry.hpp"
#include "kplane/quadrature.hpp"

namespace kplane {

/// Graph-parameterized plane: x' -> (x', A^T x' + b) with A a k x (n-k)
/// matrix (rows live in R^{n-k}, like b).
struct MatrixPlane {
    Matrix A;
    Vec b;
    int k() const { return A.rows(); }
    int m() const { return A.cols(); }
};

struct TransformConfig {
    int points = 4096;      // total evaluation budget along the plane
    double map_scale = 2.0; // scale of the rational node map
    bool error_proxy = true;
};

struct McConfig {
    std::uint64_t samples = 200000; // outer Monte Carlo draws
    std::uint64_t seed = 1;
    int workers = 1;
    double offset_radius = 30.0; // truncation radius for plane offsets
    int inner_points = 96;       // quadrature budget per axis inside the outer loop
    double map_scale = 2.0;
    std::uint64_t inner_samples = 768; // line draws per plane in elliptic averages
};

namespace detail {

inline int points_per_axis(int total, int k) {
    const int per = static_cast<int>(std::floor(std::pow(static_cast<double>(total), 1.0 / k)));
    return std::max(32, per);
}

// Exact line integral through an indicator shape (k = 1 fast path).
inline double chord_through_shape(const IndicatorShape& s, std::span<const double> origin,
                                  std::span<const double> dir) {
    const int n = s.dim();
    if (s.type == IndicatorShape::Type::box) {
        double t0 = -1e300, t1 = 1e300;
        for (int a = 0; a < n; ++a) {
            if (std::fabs(dir[a]) < 1e-14) {
                if (origin[a] < s.lo[a] || origin[a] > s.hi[a]) return 0.0;
                continue;
            }
            double u0 = (s.lo[a] - origin[a]) / dir[a];
            double u1 = (s.hi[a] - origin[a]) / dir[a];
            if (u0 > u1) std::swap(u0, u1);
            t0 = std::max(t0, u0);
            t1 = std::min(t1, u1);
        }
        return std::max(0.0, t1 - t0);
    }
    const Vec d = sub(origin, s.center);
    const double alpha = dot(dir, d);
    const double disc = alpha * alpha - (norm_squared(d) - s.radius * s.radius);
    return disc > 0.0 ? 2.0 * std::sqrt(disc) : 0.0;
}

inline double plane_integral(const Field& f, const AffinePlane& plane, const AxisRule& rule) {
    const int k = plane.frame.k;
    if (k == 1 && f.kind == FieldKind::indicator)
        return chord_through_shape(*f.shape, plane.offset, plane.frame.basis[0]);
    Vec x(f.n);
    const auto integrand = [&](std::span<const double> t) {
        for (int a = 0; a < f.n; ++a) x[a] = plane.offset[a];
        for (int j = 0; j < k; ++j) axpy(t[j], plane.frame.basis[j], x);
        return f(x);
    };
    return tensor_integrate(integrand, k, rule);
}

inline void check_line_integrable(const Field& f, int k) {
    if (f.kind == FieldKind::analytic && f.decay <= static_cast<double>(k))
        throw DivergenceError("transform: declared decay too weak along a k-plane");
}

} // namespace detail

/// Integral of f over the affine plane (frame coordinates quadrature, or an
/// exact chord for indicator shapes on lines).
inline Estimate kplane_transform(const Field& f, const AffinePlane& plane,
                                 const TransformConfig& cfg = {}) {
    if (f.n != plane.frame.n) throw DimensionError("kplane_transform: dimension mismatch");
    const int k = plane.frame.k;
    detail::check_line_integrable(f, k);
    if (k == 1 && f.kind == FieldKind::indicator) {
        const double v = detail::chord_through_shape(*f.shape, plane.offset, plane.frame.basis[0]);
        return Estimate{v, 0.0, 1, 0};
    }
    const int per_axis = detail::points_per_axis(cfg.points, k);
    const AxisRule fine = real_line_rule(per_axis, cfg.map_scale);
    Estimate e;
    e.value = detail::plane_integral(f, plane, fine);
    if (cfg.error_proxy) {
        const AxisRule coarse = real_line_rule(per_axis / 2, cfg.map_scale);
        e.std_err = std::fabs(e.value - detail::plane_integral(f, plane, coarse));
    }
    e.samples = 1;
    for (int a = 0; a < k; ++a) e.samples *= fine.nodes.size();
    return e;
}

/// L^{n+1} norm of the k-plane transform over the affine Grassmannian:
/// Haar frames outside, importance-weighted ball offsets, quadrature inside.
inline Estimate lq_transform_norm(const Field& f, int n, int k, const McConfig& cfg = {}) {
    if (f.n != n) throw DimensionError("lq_transform_norm: dimension mismatch");
    if (k < 1 || k > n - 1) throw DimensionError("lq_transform_norm: need 1 <= k <= n-1");
    detail::check_line_integrable(f, k);
    if (f.kind == FieldKind::analytic && (f.decay - k) * (n + 1.0) <= n - k)
        throw DivergenceError("lq_transform_norm: transform decays too slowly in the offset");
    const double q = n + 1.0;
    const AxisRule rule = real_line_rule(detail::points_per_axis(cfg.inner_points, 1), cfg.map_scale);
    Accumulator acc = run_chunks(cfg.samples, cfg.workers, [&](std::uint64_t chunk, std::uint64_t count, Accumulator& a) {
        RandomStream rng(cfg.seed, chunk);
        for (std::uint64_t i = 0; i < count; ++i) {
            const PlaneSample ps = sample_affine_plane(n, k, cfg.offset_radius, rng);
            const double t = detail::plane_integral(f, ps.plane, rule);
            a.add(ps.weight * std::pow(std::fabs(t), q));
        }
    });
    return pow_of(acc.estimate(cfg.seed), 1.0 / q);
}

/// Integral of f over the graph {(x', A^T x' + b)}.
inline Estimate sharp_transform(const Field& f, const MatrixPlane& mp,
                                const TransformConfig& cfg = {}) {
    const int k = mp.k(), m = mp.m();
    if (f.n != k + m) throw DimensionError("sharp_transform: dimension mismatch");
    detail::check_line_integrable(f, k);
    if (k == 1 && f.kind == FieldKind::indicator && f.shape->type == IndicatorShape::Type::box) {
        // one-dimensional section of a box: exact interval intersection
        const IndicatorShape& s = *f.shape;
        double t0 = s.lo[0], t1 = s.hi[0];
        for (int j = 0; j < m; ++j) {
            const double aj = mp.A(0, j), bj = mp.b[j];
            if (std::fabs(aj) < 1e-14) {
                if (bj < s.lo[1 + j] || bj > s.hi[1 + j]) return Estimate{0.0, 0.0, 1, 0};
                continue;
            }
            double u0 = (s.lo[1 + j] - bj) / aj, u1 = (s.hi[1 + j] - bj) / aj;
            if (u0 > u1) std::swap(u0, u1);
            t0 = std::max(t0, u0);
            t1 = std::min(t1, u1);
        }
        return Estimate{std::max(0.0, t1 - t0), 0.0, 1, 0};
    }
    Vec x(f.n);
    const auto integrand = [&](std::span<const double> t) {
        for (int a = 0; a < k; ++a) x[a] = t[a];
        for (int j = 0; j < m; ++j) {
            double v = mp.b[j];
            for (int a = 0; a < k; ++a) v += mp.A(a, j) * t[a];
            x[k + j] = v;
        }
        return f(x);
    };
    const int per_axis = detail::points_per_axis(cfg.points, k);
    Estimate e;
    const AxisRule fine = real_line_rule(per_axis, cfg.map_scale);
    e.value = tensor_integrate(integrand, k, fine);
    if (cfg.error_proxy) {
        const AxisRule coarse = real_line_rule(per_axis / 2, cfg.map_scale);
        e.std_err = std::fabs(e.value - tensor_integrate(integrand, k, coarse));
    }
    e.samples = 1;
    for (int a = 0; a < k; ++a) e.samples *= fine.nodes.size();
    return e;
}

/// L^{n+1} norm of the graph transform over all (A,b), by heavy-tailed
/// importance sampling of the (k+1)(n-k) matrix coordinates.
inline Estimate lq_sharp_norm(const Field& f, int n, int k, const McConfig& cfg = {}) {
    if (f.n != n) throw DimensionError("lq_sharp_norm: dimension mismatch");
    detail::check_line_integrable(f, k);
    const int m = n - k;
    const int dim = (k + 1) * m;
    const double q = n + 1.0;
    const TransformConfig inner{cfg.inner_points, cfg.map_scale, false};
    Accumulator acc = run_chunks(cfg.samples, cfg.workers, [&](std::uint64_t chunk, std::uint64_t count, Accumulator& a) {
        RandomStream rng(cfg.seed, chunk);
        MatrixPlane mp;
        mp.A = Matrix(k, m);
        mp.b.resize(m);
        for (std::uint64_t i = 0; i < count; ++i) {
            const Vec z = rng.heavy_point(dim);
            for (int r = 0; r < k; ++r)
                for (int c = 0; c < m; ++c) mp.A(r, c) = z[r * m + c];
            for (int c = 0; c < m; ++c) mp.b[c] = z[k * m + c];
            const double g = heavy_density(dim, norm(z));
            const double t = sharp_transform(f, mp, inner).value;
            a.add(std::pow(std::fabs(t), q) / g);
        }
    });
    return pow_of(acc.estimate(cfg.seed), 1.0 / q);
}

// ---------------------------------------------------------------------------
// Elliptic realization
// ---------------------------------------------------------------------------

/// Function on the open northern hemisphere of the unit sphere in R^{n+1}
/// (each point names the line it spans).
struct HemisphereFn {
    int ambient = 0; // n+1
    std::function<double(std::span<const double>)> eval;
    double operator()(std::span<const double> theta) const { return eval(theta); }
};

/// Fold a unit vector to the representative with positive last coordinate.
inline Vec fold_to_hemisphere(Vec v) {
    if (v.back() < 0.0)
        for (auto& x : v) x = -x;
    return v;
}

/// Central-projection lift: F(theta) = theta_last^{-(k+1)} f(theta'/theta_last).
inline HemisphereFn elliptic_lift(const Field& f, int n, int k) {
    if (f.n != n) throw DimensionError("elliptic_lift: dimension mismatch");
    const double expo = k + 1.0;
    auto base = f.eval;
    HemisphereFn lifted;
    lifted.ambient = n + 1;
    lifted.eval = [base, n, expo](std::span<const double> theta) -> double {
        const double last = theta[n];
        if (last <= 0.0) throw ParameterError("elliptic_lift: point on the equator");
        Vec x(n);
        for (int a = 0; a < n; ++a) x[a] = theta[a] / last;
        return std::pow(last, -expo) * base(x);
    };
    return lifted;
}

/// Average of F over Haar-random lines inside the subspace spanned by the
/// frame (a probability measure, so constants map to themselves).
inline Estimate elliptic_transform(const HemisphereFn& F, const OrthonormalFrame& pi,
                                   std::uint64_t samples, RandomStream& rng) {
    if (pi.n != F.ambient) throw DimensionError("elliptic_transform: ambient mismatch");
    Accumulator acc;
    Vec coeff(pi.k);
    for (std::uint64_t i = 0; i < samples; ++i) {
        rng.normal_fill(coeff);
        Vec theta = pi.point(coeff);
        const double len = norm(theta);
        if (len < 1e-12) continue;
        for (auto& x : theta) x /= len;
        theta = fold_to_hemisphere(std::move(theta));
        if (theta.back() == 0.0) continue; // null set
        acc.add(F(theta));
    }
    return acc.estimate(rng.seed());
}

struct EllipticReport {
    Estimate f_norm;        // ||f||_p on R^n
    Estimate lifted_norm;   // c_n^{1/p} ||F||_p on the hemisphere
    Estimate transform_norm;          // ||T f||_{n+1}
    Estimate elliptic_transform_norm; // ||T^E F||_{n+1}
    double hemisphere_area = 0.0;     // c_n
    double norm_match = 0.0;          // lifted_norm / f_norm, should be 1
    double norm_match_sigma = 0.0;
    double composite_constant = 0.0; // ||T^E F|| / ||T f||, f-independent
    double composite_sigma = 0.0;
    std::uint64_t seed = 0;
};

/// Check both halves of the Euclidean/elliptic correspondence: the lifted
/// L^p norms match after the hemisphere-area factor, and the transform norms
/// are proportional with an f-independent constant.
inline EllipticReport elliptic_norm_check(const Field& f, int n, int k, const McConfig& cfg = {}) {
    const double p = (n + 1.0) / (k + 1.0);
    const double q = n + 1.0;
    EllipticReport rep;
    rep.seed = cfg.seed;
    rep.hemisphere_area = 0.5 * unit_sphere_area(n + 1);
    const HemisphereFn F = elliptic_lift(f, n, k);

    rep.f_norm = lp_norm(f, p, NormConfig{cfg.samples, cfg.seed, cfg.workers});

    {
        Accumulator acc = run_chunks(cfg.samples, cfg.workers, [&](std::uint64_t chunk, std::uint64_t count, Accumulator& a) {
            RandomStream rng(cfg.seed, chunk + 7000);
            for (std::uint64_t i = 0; i < count; ++i) {
                const Vec theta = fold_to_hemisphere(rng.unit_vector(n + 1));
                a.add(std::pow(std::fabs(F(theta)), p));
            }
        });
        Estimate e = pow_of(acc.estimate(cfg.seed), 1.0 / p);
        e.value *= std::pow(rep.hemisphere_area, 1.0 / p);
        e.std_err *= std::pow(rep.hemisphere_area, 1.0 / p);
        rep.lifted_norm = e;
    }

    rep.transform_norm = lq_transform_norm(f, n, k, cfg);

    {
        // E[(T^E F)^{n+1}] without power bias: product of n+1 independent
        // group means of F over lines in the sampled subspace.
        const int groups = n + 1;
        const std::uint64_t group_size = std::max<std::uint64_t>(8, cfg.inner_samples / groups);
        const std::uint64_t outer = std::max<std::uint64_t>(64, cfg.samples / (groups * group_size));
        Accumulator acc = run_chunks(outer, cfg.workers, [&](std::uint64_t chunk, std::uint64_t count, Accumulator& a) {
            RandomStream rng(cfg.seed, chunk + 9000);
            for (std::uint64_t i = 0; i < count; ++i) {
                const OrthonormalFrame pi = sample_grassmannian(n + 1, k + 1, rng);
                double prod = 1.0;
                for (int gidx = 0; gidx < groups; ++gidx)
                    prod *= elliptic_transform(F, pi, group_size, rng).value;
                a.add(prod);
            }
        });
        rep.elliptic_transform_norm = pow_of(acc.estimate(cfg.seed), 1.0 / q);
    }

    const Estimate match = ratio_of(rep.lifted_norm, rep.f_norm);
    rep.norm_match = match.value;
    rep.norm_match_sigma = match.std_err;
    const Estimate comp = ratio_of(rep.elliptic_transform_norm, rep.transform_norm);
    rep.composite_constant = comp.value;
    rep.composite_sigma = comp.std_err;
    return rep;
}

/// The hemisphere reflection intertwining with the inversion symmetry:
/// RF(theta) = F(sgn(t1) t_last, sgn(t1) t2, ..., sgn(t1) t_{n}, |t1|).
inline HemisphereFn apply_R(const HemisphereFn& F) {
    auto base = F.eval;
    const int ambient = F.ambient;
    HemisphereFn out;
    out.ambient = ambient;
    out.eval = [base, ambient](std::span<const double> theta) {
        const double sign = theta[0] < 0.0 ? -1.0 : 1.0;
        Vec swapped(ambient);
        swapped[0] = sign * theta[ambient - 1];
        for (int a = 1; a + 1 < ambient; ++a) swapped[a] = sign * theta[a];
        swapped[ambient - 1] = std::fabs(theta[0]);
        return base(swapped);
    };
    return out;
}

using MatrixPlaneFn = std::function<double(const MatrixPlane&)>;

/// Swap the first row of A with b: the graph-side avatar of the inversion.
inline MatrixPlaneFn apply_R_sharp(MatrixPlaneFn G) {
    return [G = std::move(G)](const MatrixPlane& mp) {
        MatrixPlane swapped = mp;
        for (int j = 0; j < mp.m(); ++j) {
            swapped.A(0, j) = mp.b[j];
            swapped.b[j] = mp.A(0, j);
        }
        return G(swapped);
    };
}

} // namespace kplane
