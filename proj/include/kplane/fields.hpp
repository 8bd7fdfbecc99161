#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <vector>

#include "kplane/errors.hpp"
#include "kplane/estimate.hpp"
#include "kplane/linalg.hpp"
#include "kplane/rng.hpp"

namespace kplane {

/// Invertible affine endomorphism of R^n with its Jacobian determinant.
struct AffineMap {
    Matrix linear;
    Vec translation;
    double jacobian = 1.0; // |det linear|, always > 0

    static AffineMap make(Matrix m, Vec t) {
        AffineMap a;
        a.jacobian = std::fabs(m.det());
        if (a.jacobian <= 0.0) throw SingularMatrixError("AffineMap: linear part is singular");
        a.linear = std::move(m);
        a.translation = std::move(t);
        return a;
    }

    static AffineMap identity_map(int n) { return make(Matrix::identity(n), Vec(n, 0.0)); }

    static AffineMap scaling(int n, double s) {
        Matrix m = Matrix::identity(n);
        for (int i = 0; i < n; ++i) m(i, i) = s;
        return make(std::move(m), Vec(n, 0.0));
    }

    static AffineMap translation_only(Vec t) {
        const int n = static_cast<int>(t.size());
        return make(Matrix::identity(n), std::move(t));
    }

    int dim() const { return linear.rows(); }

    Vec operator()(std::span<const double> x) const {
        Vec y = linear.apply(x);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += translation[i];
        return y;
    }

    AffineMap inverse() const {
        Matrix inv = linear.inverse();
        Vec t = inv.apply(translation);
        for (auto& v : t) v = -v;
        return make(std::move(inv), std::move(t));
    }

    /// (this o inner)(x) = this(inner(x))
    AffineMap compose(const AffineMap& inner) const {
        Matrix m = linear.multiply(inner.linear);
        Vec t = linear.apply(inner.translation);
        for (std::size_t i = 0; i < t.size(); ++i) t[i] += translation[i];
        return make(std::move(m), std::move(t));
    }
};

/// Uniform lattice of cells over an axis-aligned box.  Values are cell
/// constants; evaluation outside the box is 0.  Axis 0 varies slowest.
struct GridData {
    int n = 0;
    std::vector<int> dims;
    double h = 0.0;
    Vec lo;
    std::vector<double> values;

    std::size_t size() const { return values.size(); }

    double extent(int axis) const { return dims[axis] * h; }

    Vec hi() const {
        Vec r(lo);
        for (int i = 0; i < n; ++i) r[i] += extent(i);
        return r;
    }

    Vec box_center() const {
        Vec c(lo);
        for (int i = 0; i < n; ++i) c[i] += 0.5 * extent(i);
        return c;
    }

    double cell_volume() const { return std::pow(h, n); }

    std::size_t flat(std::span<const int> idx) const {
        std::size_t f = 0;
        for (int a = 0; a < n; ++a) f = f * dims[a] + idx[a];
        return f;
    }

    void unflat(std::size_t f, std::span<int> idx) const {
        for (int a = n - 1; a >= 0; --a) {
            idx[a] = static_cast<int>(f % dims[a]);
            f /= dims[a];
        }
    }

    Vec cell_center(std::size_t f) const {
        std::vector<int> idx(n);
        unflat(f, idx);
        Vec c(n);
        for (int a = 0; a < n; ++a) c[a] = lo[a] + (idx[a] + 0.5) * h;
        return c;
    }

    double value_at(std::span<const double> x) const {
        std::size_t f = 0;
        for (int a = 0; a < n; ++a) {
            const double u = (x[a] - lo[a]) / h;
            if (u < 0.0 || u >= dims[a]) return 0.0;
            f = f * dims[a] + static_cast<std::size_t>(u);
        }
        return values[f];
    }
};

enum class FieldKind { analytic, grid, indicator };

struct IndicatorShape {
    enum class Type { box, ball } type = Type::box;
    Vec lo, hi;     // box
    Vec center;     // ball
    double radius = 0.0;

    int dim() const { return type == Type::box ? static_cast<int>(lo.size()) : static_cast<int>(center.size()); }

    bool contains(std::span<const double> x) const {
        if (type == Type::box) {
            for (std::size_t i = 0; i < lo.size(); ++i)
                if (x[i] < lo[i] || x[i] > hi[i]) return false;
            return true;
        }
        Vec d = sub(x, center);
        return norm_squared(d) <= radius * radius;
    }

    double volume() const {
        if (type == Type::box) {
            double v = 1.0;
            for (std::size_t i = 0; i < lo.size(); ++i) v *= hi[i] - lo[i];
            return v;
        }
        return unit_ball_volume(dim()) * std::pow(radius, dim());
    }
};

/// Closed-form geometry of one v-slice superlevel set, when the field knows
/// it: an ellipsoid center + axes and the radius of the equal-volume ball.
struct SliceGeometry {
    bool nonempty = false;
    Vec center;
    double radius = 0.0; // radius of the ball with the slice's measure
    Matrix axes;         // ellipsoid = center + axes * (unit ball)
};

/// Nonnegative function on R^n.  Analytic fields carry a decay bound
/// f(x) <= amplitude * (1+|x|)^{-decay}; grid and indicator fields are
/// compactly supported.  Immutable after construction.
struct Field {
    int n = 0;
    FieldKind kind = FieldKind::analytic;
    std::function<double(std::span<const double>)> eval;
    double decay_amplitude = 1.0;
    double decay = 0.0;
    std::shared_ptr<const GridData> grid_data;
    std::shared_ptr<const IndicatorShape> shape;
    std::function<SliceGeometry(std::span<const double>, double)> slice_hook;

    double operator()(std::span<const double> x) const { return eval(x); }

    const GridData& grid() const {
        if (!grid_data) throw ParameterError("field has no grid representation");
        return *grid_data;
    }
};

inline Field make_analytic_field(int n, std::function<double(std::span<const double>)> eval,
                                 double amplitude, double decay) {
    Field f;
    f.n = n;
    f.kind = FieldKind::analytic;
    f.eval = std::move(eval);
    f.decay_amplitude = amplitude;
    f.decay = decay;
    return f;
}

inline Field make_grid_field(GridData g) {
    Field f;
    f.n = g.n;
    f.kind = FieldKind::grid;
    auto data = std::make_shared<const GridData>(std::move(g));
    f.grid_data = data;
    f.eval = [data](std::span<const double> x) { return data->value_at(x); };
    f.decay = 1e9; // compact support
    f.decay_amplitude = *std::max_element(data->values.begin(), data->values.end());
    return f;
}

inline Field make_indicator_field(IndicatorShape s) {
    Field f;
    f.n = s.dim();
    f.kind = FieldKind::indicator;
    auto shape = std::make_shared<const IndicatorShape>(std::move(s));
    f.shape = shape;
    f.eval = [shape](std::span<const double> x) { return shape->contains(x) ? 1.0 : 0.0; };
    f.decay = 1e9;
    f.decay_amplitude = 1.0;
    return f;
}

inline Field indicator_box_field(Vec lo, Vec hi) {
    IndicatorShape s;
    s.type = IndicatorShape::Type::box;
    s.lo = std::move(lo);
    s.hi = std::move(hi);
    return make_indicator_field(std::move(s));
}

inline Field indicator_ball_field(Vec center, double radius) {
    IndicatorShape s;
    s.type = IndicatorShape::Type::ball;
    s.center = std::move(center);
    s.radius = radius;
    return make_indicator_field(std::move(s));
}

/// The profile c * (1 + |phi(x)|^2)^{-(k+1)/2}; decay exponent k+1.  Slice
/// superlevel sets are ellipsoids in v with affine centers, and the field
/// carries that geometry in closed form.
inline Field extremizer_field(int n, int k, const AffineMap& phi, double c) {
    if (k < 1 || k > n - 1) throw DimensionError("extremizer_field: need 1 <= k <= n-1");
    if (c <= 0.0) throw ParameterError("extremizer_field: amplitude must be positive");
    const int m = n - k;
    const double expo = 0.5 * (k + 1);
    const Matrix mat = phi.linear;
    const Vec t = phi.translation;

    // Quadratic form |Mx+t|^2 split over x = (x', v).
    const Matrix gram = mat.transpose().multiply(mat);
    Matrix qb(m, m), qq(k, m), qp(k, k);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) qb(i, j) = gram(k + i, k + j);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < m; ++j) qq(i, j) = gram(i, k + j);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) qp(i, j) = gram(i, j);
    Vec w = mat.transpose().apply(t);
    Vec wp(w.begin(), w.begin() + k), wv(w.begin() + k, w.end());
    const double t2 = norm_squared(t);
    const Matrix qb_inv = qb.inverse();
    const double det_b = qb.det();
    const Matrix b_inv_chol = qb_inv.cholesky();

    Field f;
    f.n = n;
    f.kind = FieldKind::analytic;
    f.decay = k + 1.0;
    {
        // crude but valid bound through the smallest singular value
        const double smin_bound = std::max(1e-12, std::fabs(mat.det()) / std::max(1.0, std::pow(mat.frobenius(), n - 1)));
        const double kappa = std::max(1.0, 1.0 / smin_bound) * (1.0 + norm(t));
        f.decay_amplitude = c * std::pow(kappa, k + 1.0);
    }
    AffineMap phi_copy = phi;
    f.eval = [phi_copy, c, expo](std::span<const double> x) {
        const Vec y = phi_copy(x);
        return c * std::pow(1.0 + norm_squared(y), -expo);
    };
    f.slice_hook = [=](std::span<const double> xp, double s) -> SliceGeometry {
        SliceGeometry geom;
        if (s <= 0.0 || s >= c) return geom;
        const double r2 = std::pow(c / s, 2.0 / (k + 1)) - 1.0;
        Vec lin(m, 0.0);
        for (int i = 0; i < m; ++i) {
            double acc = wv[i];
            for (int j = 0; j < k; ++j) acc += qq(j, i) * xp[j];
            lin[i] = acc;
        }
        Vec center = qb_inv.apply(lin);
        for (auto& v : center) v = -v;
        double constant = t2;
        for (int i = 0; i < k; ++i) {
            constant += 2.0 * wp[i] * xp[i];
            for (int j = 0; j < k; ++j) constant += xp[i] * qp(i, j) * xp[j];
        }
        const Vec bc = qb.apply(center);
        const double height = r2 - constant + dot(center, bc);
        if (height <= 0.0) return geom;
        geom.nonempty = true;
        geom.center = std::move(center);
        geom.radius = std::sqrt(height) * std::pow(det_b, -0.5 / m);
        geom.axes = b_inv_chol;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) geom.axes(i, j) *= std::sqrt(height);
        return geom;
    };
    return f;
}

inline Field standard_extremizer(int n, int k, double c = 1.0) {
    return extremizer_field(n, k, AffineMap::identity_map(n), c);
}

inline Field gaussian_field(int n, double width = 1.0) {
    Field f;
    f.n = n;
    f.kind = FieldKind::analytic;
    const double inv2 = 1.0 / (width * width);
    f.eval = [inv2](std::span<const double> x) { return std::exp(-norm_squared(x) * inv2); };
    f.decay = 64.0; // dominated by any polynomial decay of interest here
    f.decay_amplitude = 1e30;
    return f;
}

inline Field field_scale(const Field& f, double c) {
    if (c < 0.0) throw ParameterError("field_scale: fields are nonnegative");
    if (f.kind == FieldKind::grid) {
        GridData g = f.grid();
        for (auto& v : g.values) v *= c;
        return make_grid_field(std::move(g));
    }
    Field r = f;
    auto base = f.eval;
    r.eval = [base, c](std::span<const double> x) { return c * base(x); };
    r.decay_amplitude *= c;
    r.kind = f.kind == FieldKind::indicator ? FieldKind::analytic : f.kind;
    r.shape.reset();
    if (f.slice_hook && f.kind == FieldKind::analytic) {
        // rescaling the amplitude rescales the level in the hook
        auto hook = f.slice_hook;
        r.slice_hook = [hook, c](std::span<const double> xp, double s) { return hook(xp, s / c); };
    }
    return r;
}

inline Field field_sum(const Field& a, const Field& b, double ca = 1.0, double cb = 1.0) {
    if (a.n != b.n) throw DimensionError("field_sum: dimension mismatch");
    if (a.kind == FieldKind::grid && b.kind == FieldKind::grid) {
        const GridData &ga = a.grid(), &gb = b.grid();
        if (ga.dims == gb.dims && std::fabs(ga.h - gb.h) < 1e-12 && ga.lo == gb.lo) {
            GridData g = ga;
            for (std::size_t i = 0; i < g.values.size(); ++i)
                g.values[i] = ca * ga.values[i] + cb * gb.values[i];
            return make_grid_field(std::move(g));
        }
    }
    auto ea = a.eval, eb = b.eval;
    Field r = make_analytic_field(
        a.n, [ea, eb, ca, cb](std::span<const double> x) { return ca * ea(x) + cb * eb(x); },
        ca * a.decay_amplitude + cb * b.decay_amplitude, std::min(a.decay, b.decay));
    return r;
}

// ---------------------------------------------------------------------------
// L^p norms
// ---------------------------------------------------------------------------

struct NormConfig {
    std::uint64_t samples = 200000;
    std::uint64_t seed = 1;
    int workers = 1;
};

/// (integral of f^p)^{1/p}.  Exact on grid and indicator fields; heavy-tail
/// importance sampling on analytic fields (proposal (1+|x|)^{-(n+1)}, which
/// matches the slowest decay this artifact integrates).
inline Estimate lp_norm(const Field& f, double p, const NormConfig& cfg = {}) {
    if (p < 1.0) throw ParameterError("lp_norm: p >= 1 required");
    if (f.kind == FieldKind::grid) {
        const GridData& g = f.grid();
        double acc = 0.0;
        for (double v : g.values) acc += std::pow(std::fabs(v), p);
        acc *= g.cell_volume();
        return Estimate{std::pow(acc, 1.0 / p), 0.0, g.size(), cfg.seed};
    }
    if (f.kind == FieldKind::indicator) {
        return Estimate{std::pow(f.shape->volume(), 1.0 / p), 0.0, 1, cfg.seed};
    }
    if (f.decay * p <= f.n)
        throw DivergenceError("lp_norm: declared decay too weak for integrability");
    const int n = f.n;
    Accumulator acc = run_chunks(cfg.samples, cfg.workers, [&](std::uint64_t chunk, std::uint64_t count, Accumulator& a) {
        RandomStream rng(cfg.seed, chunk);
        for (std::uint64_t i = 0; i < count; ++i) {
            const Vec x = rng.heavy_point(n);
            const double g = heavy_density(n, norm(x));
            const double v = f(x);
            a.add(std::pow(std::fabs(v), p) / g);
        }
    });
    return pow_of(acc.estimate(cfg.seed), 1.0 / p);
}

// ---------------------------------------------------------------------------
// Slice superlevel radii
// ---------------------------------------------------------------------------

struct SliceConfig {
    std::uint64_t samples = 200000;
    std::uint64_t seed = 1;
};

/// Radius of the ball in R^{n-k} whose volume is |{v : f(x',v) > s}|.
inline double slice_radius(const Field& f, std::span<const double> x_prime, double s,
                           const SliceConfig& cfg = {}) {
    if (s <= 0.0) throw ParameterError("slice_radius: threshold must be positive");
    const int k = static_cast<int>(x_prime.size());
    const int m = f.n - k;
    if (m < 1) throw DimensionError("slice_radius: no v coordinates left");
    if (f.slice_hook) {
        const SliceGeometry geom = f.slice_hook(x_prime, s);
        return geom.nonempty ? geom.radius : 0.0;
    }
    if (f.kind == FieldKind::grid) {
        const GridData& g = f.grid();
        std::size_t base = 0;
        for (int a = 0; a < k; ++a) {
            const double u = (x_prime[a] - g.lo[a]) / g.h;
            if (u < 0.0 || u >= g.dims[a]) return 0.0;
            base = base * g.dims[a] + static_cast<std::size_t>(u);
        }
        std::size_t block = 1;
        for (int a = k; a < g.n; ++a) block *= g.dims[a];
        std::size_t count = 0;
        for (std::size_t i = 0; i < block; ++i)
            if (g.values[base * block + i] > s) ++count;
        const double vol = static_cast<double>(count) * std::pow(g.h, m);
        return std::pow(vol / unit_ball_volume(m), 1.0 / m);
    }
    // sampled superlevel volume
    RandomStream rng(cfg.seed);
    Accumulator acc;
    Vec x(f.n);
    for (int a = 0; a < k; ++a) x[a] = x_prime[a];
    for (std::uint64_t i = 0; i < cfg.samples; ++i) {
        const Vec v = rng.heavy_point(m);
        for (int a = 0; a < m; ++a) x[k + a] = v[a];
        const double g = heavy_density(m, norm(v));
        acc.add(f(x) > s ? 1.0 / g : 0.0);
    }
    return std::pow(std::max(0.0, acc.mean()) / unit_ball_volume(m), 1.0 / m);
}

// ---------------------------------------------------------------------------
// Rearrangement
// ---------------------------------------------------------------------------

namespace detail {

/// Cell visit order for a box of the given dims, radially outward from the
/// box center, ties broken by flat index so the placement is deterministic.
inline std::vector<std::uint32_t> radial_cell_order(const std::vector<int>& dims, double h) {
    std::size_t total = 1;
    for (int d : dims) total *= d;
    std::vector<double> dist2(total);
    const int m = static_cast<int>(dims.size());
    std::vector<int> idx(m, 0);
    for (std::size_t f = 0; f < total; ++f) {
        double d2 = 0.0;
        for (int a = 0; a < m; ++a) {
            const double c = (idx[a] + 0.5 - 0.5 * dims[a]) * h;
            d2 += c * c;
        }
        dist2[f] = d2;
        int a = m - 1;
        while (a >= 0 && ++idx[a] == dims[a]) {
            idx[a] = 0;
            --a;
        }
    }
    std::vector<std::uint32_t> order(total);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return dist2[a] < dist2[b]; });
    return order;
}

/// Rearrange the trailing n-fixed axes of every slab onto the radial cell
/// order, largest values innermost.  The rearranged axes are re-centered at
/// the origin; the value multiset of every slab is preserved exactly.
inline GridData rearrange_grid(const GridData& g, int fixed) {
    std::vector<int> vdims(g.dims.begin() + fixed, g.dims.end());
    const std::vector<std::uint32_t> order = radial_cell_order(vdims, g.h);
    std::size_t slabs = 1;
    for (int a = 0; a < fixed; ++a) slabs *= g.dims[a];
    const std::size_t block = order.size();

    GridData out = g;
    for (int a = fixed; a < g.n; ++a) out.lo[a] = -0.5 * g.dims[a] * g.h;
    std::vector<double> slab(block);
    for (std::size_t s = 0; s < slabs; ++s) {
        const std::size_t base = s * block;
        std::copy(g.values.begin() + base, g.values.begin() + base + block, slab.begin());
        std::sort(slab.begin(), slab.end(), std::greater<>());
        for (std::size_t r = 0; r < block; ++r) out.values[base + order[r]] = slab[r];
    }
    return out;
}

} // namespace detail

/// Symmetric nonincreasing rearrangement in the v coordinates of each
/// x'-slice (grid fields).
inline Field slice_rearrange(const Field& f, int k) {
    if (f.kind != FieldKind::grid) throw ParameterError("slice_rearrange: grid fields only");
    if (k < 1 || k >= f.n) throw DimensionError("slice_rearrange: need 1 <= k < n");
    return make_grid_field(detail::rearrange_grid(f.grid(), k));
}

/// Symmetric nonincreasing rearrangement over all of R^n.  Grid fields are
/// re-sorted cell-exactly; indicator shapes map to the centered ball of
/// equal volume.
inline Field full_rearrange(const Field& f) {
    if (f.kind == FieldKind::grid) return make_grid_field(detail::rearrange_grid(f.grid(), 0));
    if (f.kind == FieldKind::indicator) {
        const double vol = f.shape->volume();
        const int n = f.n;
        return indicator_ball_field(Vec(n, 0.0), std::pow(vol / unit_ball_volume(n), 1.0 / n));
    }
    throw ParameterError("full_rearrange: analytic fields are not rearranged in closed form");
}

// ---------------------------------------------------------------------------
// Symmetries
// ---------------------------------------------------------------------------

namespace detail {

/// Resample an evaluator onto a grid with the given box, forcing cubic cells
/// by expanding per-axis extents to the largest one.
inline GridData resample_to_grid(const std::function<double(std::span<const double>)>& eval, int n,
                                 Vec lo, Vec hi, const std::vector<int>& dims) {
    double h = 0.0;
    for (int a = 0; a < n; ++a) h = std::max(h, (hi[a] - lo[a]) / dims[a]);
    GridData g;
    g.n = n;
    g.dims = dims;
    g.h = h;
    g.lo.resize(n);
    for (int a = 0; a < n; ++a) {
        const double c = 0.5 * (lo[a] + hi[a]);
        g.lo[a] = c - 0.5 * dims[a] * h;
    }
    std::size_t total = 1;
    for (int d : dims) total *= d;
    g.values.resize(total);
    for (std::size_t f = 0; f < total; ++f) g.values[f] = eval(g.cell_center(f));
    return g;
}

} // namespace detail

/// |J_phi|^{1/p} * (f o phi): the norm-preserving affine symmetry action.
/// Grid fields are resampled over the pre-image box; other kinds compose
/// evaluators exactly.
inline Field apply_affine_symmetry(const Field& f, const AffineMap& phi, double p) {
    const double factor = std::pow(phi.jacobian, 1.0 / p);
    if (f.kind == FieldKind::grid) {
        const GridData& g = f.grid();
        const AffineMap inv = phi.inverse();
        Vec lo(f.n, 1e300), hi(f.n, -1e300);
        const Vec ghi = g.hi();
        for (std::size_t corner = 0; corner < (std::size_t(1) << f.n); ++corner) {
            Vec c(f.n);
            for (int a = 0; a < f.n; ++a) c[a] = (corner >> a) & 1 ? ghi[a] : g.lo[a];
            const Vec pre = inv(c);
            for (int a = 0; a < f.n; ++a) {
                lo[a] = std::min(lo[a], pre[a]);
                hi[a] = std::max(hi[a], pre[a]);
            }
        }
        auto base = f.eval;
        AffineMap phi_copy = phi;
        auto eval = [base, phi_copy, factor](std::span<const double> x) {
            return factor * base(phi_copy(x));
        };
        return make_grid_field(detail::resample_to_grid(eval, f.n, lo, hi, g.dims));
    }
    auto base = f.eval;
    AffineMap phi_copy = phi;
    Field r = make_analytic_field(
        f.n,
        [base, phi_copy, factor](std::span<const double> x) { return factor * base(phi_copy(x)); },
        f.decay_amplitude, f.decay);
    // amplitude bound under the affine change, through the smallest singular value
    const double smin = std::max(1e-12, std::fabs(phi.linear.det()) /
                                            std::max(1.0, std::pow(phi.linear.frobenius(), f.n - 1)));
    const double kappa = std::max(1.0, 1.0 / smin) * (1.0 + norm(phi.translation));
    r.decay_amplitude = factor * f.decay_amplitude * std::pow(kappa, f.decay > 1e8 ? 0.0 : f.decay);
    return r;
}

namespace detail {

inline Vec j_map_point(std::span<const double> x) {
    const double s = x[0];
    Vec y(x.size());
    const double inv = 1.0 / s;
    y[0] = inv;
    for (std::size_t a = 1; a < x.size(); ++a) y[a] = x[a] * inv;
    return y;
}

} // namespace detail

/// The inversion symmetry Jf(s,y) = |s|^{-k-1} f(1/s, y/s); an involution off
/// the null set {s=0}, where the value is defined as 0.  Grid fields are
/// resampled with the weight; cells meeting {s=0} are zeroed.
inline Field apply_J(const Field& f, int k) {
    if (f.n < 2) throw DimensionError("apply_J: n >= 2 required");
    const double expo = k + 1.0;
    auto base = f.eval;
    auto eval = [base, expo](std::span<const double> x) -> double {
        const double s = x[0];
        if (s == 0.0) return 0.0;
        return std::pow(std::fabs(s), -expo) * base(detail::j_map_point(x));
    };
    if (f.kind != FieldKind::grid) {
        Field r = make_analytic_field(f.n, eval, f.decay_amplitude * std::pow(2.0, expo),
                                      std::min(f.decay, expo));
        return r;
    }
    const GridData& g = f.grid();
    const double s0 = g.lo[0], s1 = g.lo[0] + g.extent(0);
    Vec lo(f.n), hi(f.n);
    if (s0 > 0.5 * g.h || s1 < -0.5 * g.h) {
        // box stays on one side of {s=0}: the image box is exact
        lo[0] = 1.0 / s1;
        hi[0] = 1.0 / s0;
        if (lo[0] > hi[0]) std::swap(lo[0], hi[0]);
        for (int a = 1; a < f.n; ++a) {
            const double c0 = g.lo[a], c1 = g.lo[a] + g.extent(a);
            double mn = 1e300, mx = -1e300;
            for (double sv : {lo[0], hi[0]})
                for (double cv : {c0, c1}) {
                    mn = std::min(mn, cv * sv);
                    mx = std::max(mx, cv * sv);
                }
            lo[a] = mn;
            hi[a] = mx;
        }
    } else {
        // support meets {s=0}: the image is unbounded, keep the original box
        lo = g.lo;
        hi = g.hi();
    }
    GridData out = detail::resample_to_grid(eval, f.n, lo, hi, g.dims);
    // zero every cell whose s-extent contains 0
    std::size_t block = 1;
    for (int a = 1; a < f.n; ++a) block *= out.dims[a];
    for (int i0 = 0; i0 < out.dims[0]; ++i0) {
        const double a0 = out.lo[0] + i0 * out.h, a1 = a0 + out.h;
        if (a0 <= 0.0 && a1 >= 0.0)
            std::fill(out.values.begin() + i0 * block, out.values.begin() + (i0 + 1) * block, 0.0);
    }
    return make_grid_field(std::move(out));
}

// ---------------------------------------------------------------------------
// Layer cake
// ---------------------------------------------------------------------------

struct LayerSlice {
    double height = 0.0; // thickness of this layer's threshold bin
    GridData mask;       // 0/1 cells on a shared geometry
};

/// f = sum_i height_i * mask_i for nested masks (each contained in the
/// previous); the finite-bin form of the layer cake integral.
inline Field layer_cake_reconstruct(const std::vector<LayerSlice>& slices) {
    if (slices.empty()) throw ParameterError("layer_cake_reconstruct: no slices");
    const GridData& first = slices.front().mask;
    for (const auto& s : slices) {
        if (s.height <= 0.0) throw ParameterError("layer_cake_reconstruct: heights must be positive");
        if (s.mask.dims != first.dims || std::fabs(s.mask.h - first.h) > 1e-12 || s.mask.lo != first.lo)
            throw ConsistencyError("layer_cake_reconstruct: slices on different grids");
    }
    for (std::size_t i = 0; i + 1 < slices.size(); ++i)
        for (std::size_t c = 0; c < first.size(); ++c)
            if (slices[i + 1].mask.values[c] > 0.5 && slices[i].mask.values[c] <= 0.5)
                throw ConsistencyError("layer_cake_reconstruct: slices are not nested");
    GridData out = first;
    std::fill(out.values.begin(), out.values.end(), 0.0);
    for (const auto& s : slices)
        for (std::size_t c = 0; c < out.size(); ++c)
            if (s.mask.values[c] > 0.5) out.values[c] += s.height;
    return make_grid_field(std::move(out));
}

inline GridData threshold_mask(const GridData& g, double s) {
    GridData m = g;
    for (auto& v : m.values) v = v > s ? 1.0 : 0.0;
    return m;
}

/// Dyadic superlevel decomposition of a grid field into `count` equal bins of
/// its maximum; reconstructing gives the field back to within one bin.
inline std::vector<LayerSlice> superlevel_layers(const GridData& g, int count) {
    const double top = *std::max_element(g.values.begin(), g.values.end());
    std::vector<LayerSlice> out;
    out.reserve(count);
    // thresholds rise with j, so the masks come out already nested decreasing
    for (int j = 1; j <= count; ++j)
        out.push_back(LayerSlice{top / count, threshold_mask(g, (j - 0.5) * top / count)});
    return out;
}

} // namespace kplane
