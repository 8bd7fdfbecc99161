#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "kplane/errors.hpp"
#include "kplane/estimate.hpp"
#include "kplane/fields.hpp"
#include "kplane/geometry.hpp"
#include "kplane/transforms.hpp"

namespace kplane {

/// A measurable set with finite volume used by the multilinear probes.
/// Membership is tested exactly (no grid quantization), which is what the
/// equality-case probes need.
class IndicatorSet {
public:
    enum class Kind { empty, full, ball, ellipsoid, boxes, mask };

    static IndicatorSet empty_set(int dim) { return IndicatorSet(Kind::empty, dim); }
    static IndicatorSet full_space(int dim) { return IndicatorSet(Kind::full, dim); }

    static IndicatorSet ball(Vec center, double radius) {
        IndicatorSet s(Kind::ball, static_cast<int>(center.size()));
        if (radius < 0.0) throw ParameterError("IndicatorSet::ball: negative radius");
        s.center_ = std::move(center);
        s.radius_ = radius;
        return s;
    }

    /// Ellipsoid {center + axes u : |u| <= 1}; axes invertible.
    static IndicatorSet ellipsoid(Vec center, Matrix axes) {
        IndicatorSet s(Kind::ellipsoid, static_cast<int>(center.size()));
        s.center_ = std::move(center);
        s.axes_inv_ = axes.inverse();
        s.axes_det_ = std::fabs(axes.det());
        s.axes_ = std::move(axes);
        return s;
    }

    /// Finite union of pairwise-disjoint boxes.
    static IndicatorSet boxes(std::vector<std::pair<Vec, Vec>> parts) {
        if (parts.empty()) throw ParameterError("IndicatorSet::boxes: no parts");
        IndicatorSet s(Kind::boxes, static_cast<int>(parts.front().first.size()));
        s.boxes_ = std::move(parts);
        return s;
    }

    static IndicatorSet mask(GridData zero_one) {
        IndicatorSet s(Kind::mask, zero_one.n);
        s.mask_ = std::make_shared<const GridData>(std::move(zero_one));
        return s;
    }

    Kind kind() const { return kind_; }
    int dim() const { return dim_; }

    bool contains(std::span<const double> x) const {
        switch (kind_) {
        case Kind::empty: return false;
        case Kind::full: return true;
        case Kind::ball: {
            double d2 = 0.0;
            for (int a = 0; a < dim_; ++a) {
                const double d = x[a] - center_[a];
                d2 += d * d;
            }
            return d2 <= radius_ * radius_;
        }
        case Kind::ellipsoid: {
            Vec d(dim_);
            for (int a = 0; a < dim_; ++a) d[a] = x[a] - center_[a];
            return norm_squared(axes_inv_.apply(d)) <= 1.0;
        }
        case Kind::boxes:
            for (const auto& [lo, hi] : boxes_) {
                bool in = true;
                for (int a = 0; a < dim_ && in; ++a) in = x[a] >= lo[a] && x[a] <= hi[a];
                if (in) return true;
            }
            return false;
        case Kind::mask: return mask_->value_at(x) > 0.5;
        }
        return false;
    }

    double volume() const {
        switch (kind_) {
        case Kind::empty: return 0.0;
        case Kind::full: return std::numeric_limits<double>::infinity();
        case Kind::ball: return unit_ball_volume(dim_) * std::pow(radius_, dim_);
        case Kind::ellipsoid: return unit_ball_volume(dim_) * axes_det_;
        case Kind::boxes: {
            double v = 0.0;
            for (const auto& [lo, hi] : boxes_) {
                double part = 1.0;
                for (int a = 0; a < dim_; ++a) part *= hi[a] - lo[a];
                v += part;
            }
            return v;
        }
        case Kind::mask: {
            double count = 0.0;
            for (double v : mask_->values)
                if (v > 0.5) count += 1.0;
            return count * mask_->cell_volume();
        }
        }
        return 0.0;
    }

    /// Radius of the centered ball with this set's volume.
    double star_radius() const {
        if (kind_ == Kind::full) return std::numeric_limits<double>::infinity();
        return std::pow(volume() / unit_ball_volume(dim_), 1.0 / dim_);
    }

    bool star_contains(std::span<const double> x) const {
        if (kind_ == Kind::full) return true;
        const double r = star_radius();
        return norm_squared(x) <= r * r;
    }

    std::pair<Vec, Vec> bounds() const {
        switch (kind_) {
        case Kind::empty: return {Vec(dim_, 0.0), Vec(dim_, 0.0)};
        case Kind::full: throw ParameterError("IndicatorSet: full space has no bounds");
        case Kind::ball: {
            Vec lo(center_), hi(center_);
            for (int a = 0; a < dim_; ++a) {
                lo[a] -= radius_;
                hi[a] += radius_;
            }
            return {lo, hi};
        }
        case Kind::ellipsoid: {
            Vec lo(center_), hi(center_);
            for (int a = 0; a < dim_; ++a) {
                double ext = 0.0;
                for (int j = 0; j < dim_; ++j) ext += axes_(a, j) * axes_(a, j);
                ext = std::sqrt(ext);
                lo[a] -= ext;
                hi[a] += ext;
            }
            return {lo, hi};
        }
        case Kind::boxes: {
            Vec lo(dim_, 1e300), hi(dim_, -1e300);
            for (const auto& [l, h] : boxes_)
                for (int a = 0; a < dim_; ++a) {
                    lo[a] = std::min(lo[a], l[a]);
                    hi[a] = std::max(hi[a], h[a]);
                }
            return {lo, hi};
        }
        case Kind::mask: return {mask_->lo, mask_->hi()};
        }
        return {Vec(dim_, 0.0), Vec(dim_, 0.0)};
    }

    IndicatorSet translated(const Vec& t) const {
        IndicatorSet s = *this;
        switch (kind_) {
        case Kind::empty:
        case Kind::full: return s;
        case Kind::ball:
        case Kind::ellipsoid: s.center_ = add(center_, t); return s;
        case Kind::boxes:
            for (auto& [lo, hi] : s.boxes_) {
                lo = add(lo, t);
                hi = add(hi, t);
            }
            return s;
        case Kind::mask: throw ParameterError("IndicatorSet: cannot translate a grid mask");
        }
        return s;
    }

    /// a*E about the origin; a may be negative (reflection + dilation).
    IndicatorSet scaled(double a) const {
        if (a == 0.0) throw ParameterError("IndicatorSet: zero scaling");
        IndicatorSet s = *this;
        switch (kind_) {
        case Kind::empty:
        case Kind::full: return s;
        case Kind::ball:
            s.center_ = scaled_vec(center_, a);
            s.radius_ = radius_ * std::fabs(a);
            return s;
        case Kind::ellipsoid: {
            s.center_ = scaled_vec(center_, a);
            Matrix ax = axes_;
            for (int i = 0; i < dim_; ++i)
                for (int j = 0; j < dim_; ++j) ax(i, j) *= a;
            return ellipsoid(s.center_, ax);
        }
        case Kind::boxes:
            for (auto& [lo, hi] : s.boxes_) {
                lo = scaled_vec(lo, a);
                hi = scaled_vec(hi, a);
                for (int c = 0; c < dim_; ++c)
                    if (lo[c] > hi[c]) std::swap(lo[c], hi[c]);
            }
            return s;
        case Kind::mask: throw ParameterError("IndicatorSet: cannot scale a grid mask");
        }
        return s;
    }

private:
    IndicatorSet(Kind k, int d) : kind_(k), dim_(d) {}

    static Vec scaled_vec(const Vec& v, double a) {
        Vec r = v;
        for (auto& x : r) x *= a;
        return r;
    }

    Kind kind_;
    int dim_;
    Vec center_;
    double radius_ = 0.0;
    Matrix axes_, axes_inv_;
    double axes_det_ = 0.0;
    std::vector<std::pair<Vec, Vec>> boxes_;
    std::shared_ptr<const GridData> mask_;
};

/// Nonnegative function on R^m carried together with its symmetric
/// nonincreasing rearrangement, for use as one factor of the multilinear
/// form.
class SliceFn {
public:
    static SliceFn from_set(IndicatorSet e) {
        SliceFn f;
        f.set_ = std::make_shared<const IndicatorSet>(std::move(e));
        return f;
    }

    static SliceFn from_grid(GridData g) {
        SliceFn f;
        auto star = detail::rearrange_grid(g, 0);
        f.grid_ = std::make_shared<const GridData>(std::move(g));
        f.star_grid_ = std::make_shared<const GridData>(std::move(star));
        return f;
    }

    int dim() const { return set_ ? set_->dim() : grid_->n; }

    double operator()(std::span<const double> v) const {
        if (set_) return set_->contains(v) ? 1.0 : 0.0;
        return grid_->value_at(v);
    }

    double star(std::span<const double> v) const {
        if (set_) return set_->star_contains(v) ? 1.0 : 0.0;
        return star_grid_->value_at(v);
    }

    bool full_space() const { return set_ && set_->kind() == IndicatorSet::Kind::full; }

    /// Box covering the supports of both the function and its rearrangement.
    std::pair<Vec, Vec> sample_bounds() const {
        if (set_) {
            auto [lo, hi] = set_->bounds();
            const double rho = set_->star_radius();
            for (std::size_t a = 0; a < lo.size(); ++a) {
                lo[a] = std::min(lo[a], -rho);
                hi[a] = std::max(hi[a], rho);
            }
            return {lo, hi};
        }
        Vec lo = grid_->lo, hi = grid_->hi();
        const Vec slo = star_grid_->lo, shi = star_grid_->hi();
        for (std::size_t a = 0; a < lo.size(); ++a) {
            lo[a] = std::min(lo[a], slo[a]);
            hi[a] = std::max(hi[a], shi[a]);
        }
        return {lo, hi};
    }

private:
    std::shared_ptr<const IndicatorSet> set_;
    std::shared_ptr<const GridData> grid_, star_grid_;
};

struct TxConfig {
    std::uint64_t samples = 200000;
    std::uint64_t seed = 1;
    int workers = 1;
};

struct TxPair {
    Estimate plain;
    Estimate star;
    Estimate gap; // star - plain, estimated on shared points
};

namespace detail {

/// Shared-point estimator of the multilinear form on F and on the
/// rearranged family.  Free variables v_0..v_k are drawn uniformly from
/// boxes covering each factor; constrained factors are evaluated at the
/// coefficient combinations.  The gap uses the same draws on both sides, so
/// identical families give an exactly zero gap.
inline TxPair tx_pair_impl(const std::vector<SliceFn>& F, const CoefficientMatrix& cm,
                           const TxConfig& cfg) {
    const int k = cm.k, n = cm.n;
    if (static_cast<int>(F.size()) != n + 1)
        throw DimensionError("multilinear form: need n+1 factors");
    const int m = F.front().dim();
    std::vector<std::pair<Vec, Vec>> prop(k + 1);
    double prop_volume = 1.0;
    for (int j = 0; j <= k; ++j) {
        if (F[j].full_space()) throw ParameterError("multilinear form: free factor cannot be full space");
        prop[j] = F[j].sample_bounds();
        for (int a = 0; a < m; ++a) prop_volume *= prop[j].second[a] - prop[j].first[a];
    }
    if (prop_volume <= 0.0) {
        Estimate z{0.0, 0.0, cfg.samples, cfg.seed};
        return TxPair{z, z, z};
    }

    std::vector<Accumulator> acc_plain(std::max(1, cfg.workers)), acc_star(acc_plain.size()), acc_gap(acc_plain.size());
    const int workers = static_cast<int>(acc_plain.size());
    auto body = [&](int w, std::uint64_t count) {
        RandomStream rng(cfg.seed, static_cast<std::uint64_t>(w));
        std::vector<Vec> v(k + 1, Vec(m));
        Vec combo(m);
        for (std::uint64_t it = 0; it < count; ++it) {
            for (int j = 0; j <= k; ++j)
                for (int a = 0; a < m; ++a) v[j][a] = rng.uniform(prop[j].first[a], prop[j].second[a]);
            double plain = 1.0, star = 1.0;
            for (int i = 0; i <= n && (plain > 0.0 || star > 0.0); ++i) {
                std::span<const double> arg;
                if (i <= k) {
                    arg = v[i];
                } else {
                    std::fill(combo.begin(), combo.end(), 0.0);
                    for (int j = 0; j <= k; ++j) axpy(cm.b[i][j], v[j], combo);
                    arg = combo;
                }
                plain *= F[i](arg);
                star *= F[i].star(arg);
            }
            acc_plain[w].add(prop_volume * plain);
            acc_star[w].add(prop_volume * star);
            acc_gap[w].add(prop_volume * (star - plain));
        }
    };
    if (workers == 1) {
        body(0, cfg.samples);
    } else {
        std::vector<std::thread> pool;
        const std::uint64_t base = cfg.samples / workers, extra = cfg.samples % workers;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back(body, w, base + (static_cast<std::uint64_t>(w) < extra ? 1 : 0));
        for (auto& t : pool) t.join();
    }
    Accumulator plain, star, gap;
    for (int w = 0; w < workers; ++w) {
        plain.merge(acc_plain[w]);
        star.merge(acc_star[w]);
        gap.merge(acc_gap[w]);
    }
    return TxPair{plain.estimate(cfg.seed), star.estimate(cfg.seed), gap.estimate(cfg.seed)};
}

} // namespace detail

/// The multilinear form: integral over (v_0..v_k) of the product of
/// F_i(sum_j b[i][j] v_j); rows 0..k of b are deltas, so those factors see
/// v_i directly.
inline Estimate multilinear_form_tx(const std::vector<SliceFn>& F, const CoefficientMatrix& b,
                                    const TxConfig& cfg = {}, bool rearranged = false) {
    const TxPair pair = detail::tx_pair_impl(F, b, cfg);
    return rearranged ? pair.star : pair.plain;
}

inline Estimate multilinear_form_tx(const std::vector<IndicatorSet>& E, const CoefficientMatrix& b,
                                    const TxConfig& cfg = {}, bool rearranged = false) {
    std::vector<SliceFn> F;
    F.reserve(E.size());
    for (const auto& e : E) F.push_back(SliceFn::from_set(e));
    return multilinear_form_tx(F, b, cfg, rearranged);
}

/// Tx(F_0*,...,F_n*) - Tx(F_0,...,F_n); nonnegative up to statistical error
/// by the rearrangement inequality for multilinear forms.
inline TxPair bll_gap(const std::vector<SliceFn>& F, const CoefficientMatrix& b,
                      const TxConfig& cfg = {}) {
    return detail::tx_pair_impl(F, b, cfg);
}

inline TxPair bll_gap(const std::vector<IndicatorSet>& E, const CoefficientMatrix& b,
                      const TxConfig& cfg = {}) {
    std::vector<SliceFn> F;
    F.reserve(E.size());
    for (const auto& e : E) F.push_back(SliceFn::from_set(e));
    return detail::tx_pair_impl(F, b, cfg);
}

// ---------------------------------------------------------------------------
// Exact one-dimensional oracle (interval unions)
// ---------------------------------------------------------------------------

using Interval = std::pair<double, double>;
using Intervals = std::vector<Interval>;

inline Intervals normalize_intervals(Intervals v) {
    Intervals out;
    for (auto& iv : v) {
        if (iv.first > iv.second) std::swap(iv.first, iv.second);
        if (iv.second > iv.first) out.push_back(iv);
    }
    std::sort(out.begin(), out.end());
    Intervals merged;
    for (const auto& iv : out) {
        if (!merged.empty() && iv.first <= merged.back().second)
            merged.back().second = std::max(merged.back().second, iv.second);
        else
            merged.push_back(iv);
    }
    return merged;
}

inline double intervals_length(const Intervals& v) {
    double s = 0.0;
    for (const auto& iv : v) s += iv.second - iv.first;
    return s;
}

inline Intervals scale_intervals(const Intervals& v, double c) {
    Intervals out;
    out.reserve(v.size());
    for (const auto& iv : v) out.push_back({iv.first * c, iv.second * c});
    return normalize_intervals(std::move(out));
}

inline Intervals translate_intervals(const Intervals& v, double t) {
    Intervals out;
    out.reserve(v.size());
    for (const auto& iv : v) out.push_back({iv.first + t, iv.second + t});
    return out;
}

inline double overlap_length(const Intervals& a, const Intervals& b) {
    double s = 0.0;
    for (const auto& ia : a)
        for (const auto& ib : b)
            s += std::max(0.0, std::min(ia.second, ib.second) - std::max(ia.first, ib.first));
    return s;
}

inline bool intervals_contain(const Intervals& v, double x) {
    for (const auto& iv : v)
        if (x >= iv.first && x <= iv.second) return true;
    return false;
}

/// Exact integral over w in W of |P cap (Q + w)|.  The overlap is piecewise
/// linear in w with breakpoints at endpoint differences, so trapezoids on the
/// breakpoint partition are exact.
inline double correlation_integral(const Intervals& w_dom, const Intervals& p, const Intervals& q) {
    std::vector<double> brk;
    for (const auto& ip : p)
        for (const auto& iq : q)
            for (double pe : {ip.first, ip.second})
                for (double qe : {iq.first, iq.second}) brk.push_back(pe - qe);
    for (const auto& iw : w_dom) {
        brk.push_back(iw.first);
        brk.push_back(iw.second);
    }
    std::sort(brk.begin(), brk.end());
    brk.erase(std::unique(brk.begin(), brk.end()), brk.end());
    const auto phi = [&](double w) { return overlap_length(p, translate_intervals(q, w)); };
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < brk.size(); ++i) {
        const double a = brk[i], b = brk[i + 1];
        if (!(b > a)) continue;
        if (!intervals_contain(w_dom, 0.5 * (a + b))) continue;
        total += 0.5 * (phi(a) + phi(b)) * (b - a);
    }
    return total;
}

/// Exact Tx for interval-union factors at k=1: integral of
/// 1_{E0}(v0) 1_{E1}(v1) 1_{E2}(c0 v0 + c1 v1).
inline double tx_intervals_exact(const Intervals& e0, const Intervals& e1, const Intervals& e2,
                                 double c0, double c1) {
    if (c0 == 0.0 || c1 == 0.0) throw ParameterError("tx_intervals_exact: zero coefficient");
    const Intervals w_dom = scale_intervals(e0, -c0);
    const Intervals p = scale_intervals(e1, c1);
    return correlation_integral(w_dom, p, normalize_intervals(e2)) / std::fabs(c0 * c1);
}

/// Exact triple-set convolution form: integral of
/// 1_{E1}(x1) 1_{E2}(x2) 1_{E0}(x1 - x2).
inline double indicator_i_exact(const Intervals& e0, const Intervals& e1, const Intervals& e2) {
    return correlation_integral(normalize_intervals(e1), normalize_intervals(e2),
                                scale_intervals(e0, -1.0));
}

// ---------------------------------------------------------------------------
// The convolution-style indicator functional in any dimension
// ---------------------------------------------------------------------------

/// Monte Carlo estimate of
///   I(E_0..E_m) = int prod_i 1_{E_i}(x_i) * 1_{E_0}(x_1 - sum_{i>=2} x_i).
inline Estimate indicator_form_i(const std::vector<IndicatorSet>& e, const TxConfig& cfg = {}) {
    if (e.size() < 2) throw DimensionError("indicator_form_i: need at least E_0, E_1");
    const int m = static_cast<int>(e.size()) - 1;
    const int d = e.front().dim();
    for (const auto& s : e)
        if (s.kind() == IndicatorSet::Kind::empty) return Estimate{0.0, 0.0, cfg.samples, cfg.seed};
    double prop_volume = 1.0;
    std::vector<std::pair<Vec, Vec>> prop(m);
    for (int i = 1; i <= m; ++i) {
        prop[i - 1] = e[i].bounds();
        for (int a = 0; a < d; ++a) prop_volume *= prop[i - 1].second[a] - prop[i - 1].first[a];
    }
    Accumulator acc = run_chunks(cfg.samples, cfg.workers, [&](std::uint64_t chunk, std::uint64_t count, Accumulator& a) {
        RandomStream rng(cfg.seed, chunk);
        std::vector<Vec> x(m, Vec(d));
        Vec arg(d);
        for (std::uint64_t it = 0; it < count; ++it) {
            double val = 1.0;
            for (int i = 0; i < m; ++i) {
                for (int c = 0; c < d; ++c) x[i][c] = rng.uniform(prop[i].first[c], prop[i].second[c]);
                if (!e[i + 1].contains(x[i])) {
                    val = 0.0;
                    break;
                }
            }
            if (val > 0.0) {
                arg = x[0];
                for (int i = 1; i < m; ++i)
                    for (int c = 0; c < d; ++c) arg[c] -= x[i][c];
                if (!e[0].contains(arg)) val = 0.0;
            }
            a.add(prop_volume * val);
        }
    });
    return acc.estimate(cfg.seed);
}

// ---------------------------------------------------------------------------
// Admissibility and permissibility
// ---------------------------------------------------------------------------

/// Generalized strict triangle condition: every radius is smaller than the
/// sum of the others.
inline bool strict_admissibility(std::span<const double> rho) {
    double total = 0.0;
    for (double r : rho) {
        if (r <= 0.0) throw ParameterError("strict_admissibility: radii must be positive");
        total += r;
    }
    for (double r : rho)
        if (!(total - r > r)) return false;
    return true;
}

struct PermissibilityReport {
    bool permissible = false;
    bool triangle_clause = false;   // the weighted triangle conditions, i in [0, k+1]
    bool domination_clause = false; // the trailing domination conditions, i in [k+2, n]
    std::vector<std::string> failures;
};

/// Weighted admissibility of a radius family with respect to interpolation
/// coefficients: the first k+2 radii (weighted by |b[k+1][j]|, with weight 1
/// on entry k+1) satisfy the strict triangle condition, and every trailing
/// radius strictly dominates its weighted combination.
inline PermissibilityReport permissibility(std::span<const double> rho, const CoefficientMatrix& cm) {
    const int k = cm.k, n = cm.n;
    if (static_cast<int>(rho.size()) != n + 1)
        throw DimensionError("permissibility: need n+1 radii");
    for (double r : rho)
        if (r <= 0.0) throw ParameterError("permissibility: radii must be positive");
    PermissibilityReport rep;
    rep.triangle_clause = true;
    rep.domination_clause = true;
    Vec c(k + 2, 1.0); // weight on entry k+1 is 1
    for (int j = 0; j <= k; ++j) c[j] = std::fabs(cm.b[k + 1][j]);
    for (int i = 0; i <= k + 1; ++i) {
        double sum = 0.0;
        for (int j = 0; j <= k + 1; ++j)
            if (j != i) sum += c[j] * rho[j];
        if (!(sum > c[i] * rho[i])) {
            rep.triangle_clause = false;
            rep.failures.push_back("triangle clause fails at i=" + std::to_string(i));
        }
    }
    for (int i = k + 2; i <= n; ++i) {
        double sum = 0.0;
        for (int j = 0; j <= k; ++j) sum += std::fabs(cm.b[i][j]) * rho[j];
        if (!(sum < rho[i])) {
            rep.domination_clause = false;
            rep.failures.push_back("domination clause fails at i=" + std::to_string(i));
        }
    }
    rep.permissible = rep.triangle_clause && rep.domination_clause;
    return rep;
}

/// Assemble a coefficient matrix from explicit rows: `row_k1` is row k+1 and
/// `tail` holds rows k+2..n; rows 0..k are deltas.
inline CoefficientMatrix coefficients_from_rows(int k, const Vec& row_k1, const std::vector<Vec>& tail = {}) {
    if (static_cast<int>(row_k1.size()) != k + 1)
        throw DimensionError("coefficients_from_rows: row k+1 needs k+1 entries");
    CoefficientMatrix cm;
    cm.k = k;
    cm.n = k + 1 + static_cast<int>(tail.size());
    cm.b.assign(cm.n + 1, Vec(k + 1, 0.0));
    for (int i = 0; i <= k; ++i) cm.b[i][i] = 1.0;
    cm.b[k + 1] = row_k1;
    for (std::size_t r = 0; r < tail.size(); ++r) {
        if (static_cast<int>(tail[r].size()) != k + 1)
            throw DimensionError("coefficients_from_rows: tail rows need k+1 entries");
        cm.b[k + 2 + r] = tail[r];
    }
    return cm;
}

// ---------------------------------------------------------------------------
// Redundancy of trailing factors and the equality-case probe
// ---------------------------------------------------------------------------

struct RedundancyReport {
    Estimate full_form;      // Tx on all rearranged factors
    Estimate truncated_form; // trailing factors replaced by full space
    double gap = 0.0;
    double gap_sigma = 0.0;
    bool permissible = false;
};

/// Under the domination clause the trailing rearranged factors are
/// identically 1 on the reachable combinations, so dropping them changes
/// nothing; without it a strict gap appears.
inline RedundancyReport redundancy_check(const std::vector<IndicatorSet>& e, const CoefficientMatrix& cm,
                                         const TxConfig& cfg = {}) {
    const int k = cm.k, n = cm.n;
    if (static_cast<int>(e.size()) != n + 1) throw DimensionError("redundancy_check: need n+1 sets");
    Vec rho(n + 1);
    for (int i = 0; i <= n; ++i) rho[i] = e[i].star_radius();
    RedundancyReport rep;
    rep.permissible = permissibility(rho, cm).permissible;

    std::vector<SliceFn> star_all, star_cut;
    for (int i = 0; i <= n; ++i) {
        star_all.push_back(SliceFn::from_set(e[i].kind() == IndicatorSet::Kind::full
                                                 ? e[i]
                                                 : IndicatorSet::ball(Vec(e[i].dim(), 0.0), rho[i])));
        star_cut.push_back(i <= k + 1 ? star_all.back() : SliceFn::from_set(IndicatorSet::full_space(e[i].dim())));
    }
    // shared draws: evaluate both products per sample through the pair engine
    // by treating the truncated family as the "rearranged" side
    const int m = e.front().dim();
    std::vector<std::pair<Vec, Vec>> prop(k + 1);
    double prop_volume = 1.0;
    for (int j = 0; j <= k; ++j) {
        prop[j] = star_all[j].sample_bounds();
        for (int a = 0; a < m; ++a) prop_volume *= prop[j].second[a] - prop[j].first[a];
    }
    Accumulator acc_full, acc_cut, acc_gap;
    RandomStream rng(cfg.seed);
    std::vector<Vec> v(k + 1, Vec(m));
    Vec combo(m);
    for (std::uint64_t it = 0; it < cfg.samples; ++it) {
        for (int j = 0; j <= k; ++j)
            for (int a = 0; a < m; ++a) v[j][a] = rng.uniform(prop[j].first[a], prop[j].second[a]);
        double val_full = 1.0, val_cut = 1.0;
        for (int i = 0; i <= n && (val_full > 0.0 || val_cut > 0.0); ++i) {
            std::span<const double> arg;
            if (i <= k) {
                arg = v[i];
            } else {
                std::fill(combo.begin(), combo.end(), 0.0);
                for (int j = 0; j <= k; ++j) axpy(cm.b[i][j], v[j], combo);
                arg = combo;
            }
            val_full *= star_all[i](arg);
            val_cut *= star_cut[i](arg);
        }
        acc_full.add(prop_volume * val_full);
        acc_cut.add(prop_volume * val_cut);
        acc_gap.add(prop_volume * (val_cut - val_full));
    }
    rep.full_form = acc_full.estimate(cfg.seed);
    rep.truncated_form = acc_cut.estimate(cfg.seed);
    rep.gap = acc_gap.mean();
    rep.gap_sigma = acc_gap.std_err_of_mean();
    return rep;
}

struct BurchardReport {
    Estimate tx_plain;
    Estimate tx_star;
    double normalized_gap = 0.0; // (star - plain)/star
    double normalized_sigma = 0.0;
    bool permissible = false;
};

/// Normalized rearrangement gap of an indicator family.  Families of the
/// form b[k+1][i] E_i = beta_i + alpha_i E (one shared centered ellipsoid,
/// compatible centers) sit at equality; perturbing any set off the family
/// opens a strict gap.
inline BurchardReport burchard_equality_probe(const std::vector<IndicatorSet>& e,
                                              const CoefficientMatrix& cm, const TxConfig& cfg = {}) {
    Vec rho(e.size());
    for (std::size_t i = 0; i < e.size(); ++i) rho[i] = e[i].star_radius();
    BurchardReport rep;
    rep.permissible = permissibility(rho, cm).permissible;
    const TxPair pair = bll_gap(e, cm, cfg);
    rep.tx_plain = pair.plain;
    rep.tx_star = pair.star;
    if (pair.star.value > 0.0) {
        rep.normalized_gap = pair.gap.value / pair.star.value;
        rep.normalized_sigma = pair.gap.std_err / pair.star.value;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// The transform-norm identity
// ---------------------------------------------------------------------------

struct DruryConfig {
    std::uint64_t samples = 400000;
    std::uint64_t seed = 1;
    int workers = 1;
    double volume_threshold = 0.001; // reject anchor draws below this |vol_k|
    McConfig norm;                   // outer-norm estimator settings
};

struct DruryReport {
    Estimate transform_power; // ||T f||_{n+1}^{n+1}
    Estimate sliced_integral; // the multilinear side with the vol^{k-n} weight
    double constant = 0.0;    // transform_power / sliced_integral
    double constant_sigma = 0.0;
    double rejection_fraction = 0.0;
    std::uint64_t samples = 0;
    std::uint64_t seed = 0;
};

/// Estimate both sides of the multilinear identity for the transform norm.
/// Anchor points are drawn from a fixed heavy-tailed product proposal, which
/// keeps the importance ratio bounded for every admissible decay (a Gaussian
/// proposal has infinite variance against the polynomially-decaying profile
/// family); configurations with |vol_k| below the threshold are rejected
/// (counted, contributing zero) so the singular weight has bounded variance.
inline DruryReport drury_identity_check(const Field& f, int n, int k, const DruryConfig& cfg = {}) {
    if (f.n != n) throw DimensionError("drury_identity_check: dimension mismatch");
    const int m = n - k;
    DruryReport rep;
    rep.seed = cfg.seed;
    rep.samples = cfg.samples;

    McConfig norm_cfg = cfg.norm;
    norm_cfg.seed = cfg.seed;
    rep.transform_power = pow_of(lq_transform_norm(f, n, k, norm_cfg), n + 1.0);

    std::vector<Accumulator> acc(std::max(1, cfg.workers));
    std::vector<std::uint64_t> rejected(acc.size(), 0);
    const int workers = static_cast<int>(acc.size());
    auto body = [&](int w, std::uint64_t count) {
        RandomStream rng(cfg.seed, static_cast<std::uint64_t>(w) + 40);
        std::vector<Vec> pts(n + 1, Vec(k));
        std::vector<Vec> vs(k + 1, Vec(m));
        Vec x(n), combo(m);
        for (std::uint64_t it = 0; it < count; ++it) {
            double wx = 1.0;
            for (auto& pt : pts) {
                pt = rng.heavy_point(k);
                wx /= heavy_density(k, norm(pt));
            }
            const std::vector<Vec> anchors(pts.begin(), pts.begin() + k + 1);
            const double vol = simplex_volume(Simplex{anchors});
            if (vol < cfg.volume_threshold) {
                ++rejected[w];
                acc[w].add(0.0);
                continue;
            }
            const std::vector<Vec> extras(pts.begin() + k + 1, pts.end());
            const CoefficientMatrix cm = drury_coefficients(anchors, extras);
            double wv = 1.0;
            for (auto& v : vs) {
                v = rng.heavy_point(m);
                wv /= heavy_density(m, norm(v));
            }
            double prod = 1.0;
            for (int i = 0; i <= n && prod > 0.0; ++i) {
                for (int a = 0; a < k; ++a) x[a] = pts[i][a];
                if (i <= k) {
                    for (int a = 0; a < m; ++a) x[k + a] = vs[i][a];
                } else {
                    std::fill(combo.begin(), combo.end(), 0.0);
                    for (int j = 0; j <= k; ++j) axpy(cm.b[i][j], vs[j], combo);
                    for (int a = 0; a < m; ++a) x[k + a] = combo[a];
                }
                prod *= f(x);
            }
            acc[w].add(std::pow(vol, k - n) * prod * wv * wx);
        }
    };
    if (workers == 1) {
        body(0, cfg.samples);
    } else {
        std::vector<std::thread> pool;
        const std::uint64_t base = cfg.samples / workers, extra = cfg.samples % workers;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back(body, w, base + (static_cast<std::uint64_t>(w) < extra ? 1 : 0));
        for (auto& t : pool) t.join();
    }
    Accumulator total;
    std::uint64_t rej = 0;
    for (int w = 0; w < workers; ++w) {
        total.merge(acc[w]);
        rej += rejected[w];
    }
    rep.sliced_integral = total.estimate(cfg.seed);
    rep.rejection_fraction = static_cast<double>(rej) / static_cast<double>(cfg.samples);
    if (rep.sliced_integral.value != 0.0) {
        const Estimate c = ratio_of(rep.transform_power, rep.sliced_integral);
        rep.constant = c.value;
        rep.constant_sigma = c.std_err;
    }
    return rep;
}

} // namespace kplane
