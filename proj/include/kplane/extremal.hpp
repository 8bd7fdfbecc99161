#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kplane/errors.hpp"
#include "kplane/estimate.hpp"
#include "kplane/fields.hpp"
#include "kplane/geometry.hpp"
#include "kplane/quadrature.hpp"
#include "kplane/transforms.hpp"

namespace kplane {

struct RatioConfig {
    std::uint64_t transform_samples = 200000;
    std::uint64_t norm_samples = 300000;
    std::uint64_t seed = 1;
    int workers = 1;
    double offset_radius = 30.0;
    int inner_points = 96;
    double map_scale = 2.0;
    int batches = 64; // batch count for correlated-difference errors

    McConfig mc() const {
        McConfig m;
        m.samples = transform_samples;
        m.seed = seed;
        m.workers = workers;
        m.offset_radius = offset_radius;
        m.inner_points = inner_points;
        m.map_scale = map_scale;
        return m;
    }
};

struct RatioReport {
    Estimate numerator;   // ||T f||_{n+1}
    Estimate denominator; // ||f||_p
    double value = 0.0;
    double sigma = 0.0;
};

/// The objective of the extremal problem: ||T f||_{n+1} / ||f||_p at the
/// endpoint exponents p = (n+1)/(k+1), q = n+1.
inline RatioReport transform_ratio(const Field& f, int n, int k, const RatioConfig& cfg = {}) {
    const double p = (n + 1.0) / (k + 1.0);
    RatioReport rep;
    rep.denominator = lp_norm(f, p, NormConfig{cfg.norm_samples, cfg.seed, cfg.workers});
    if (!(rep.denominator.value > 0.0))
        throw ParameterError("transform_ratio: zero field has no ratio");
    rep.numerator = lq_transform_norm(f, n, k, cfg.mc());
    const Estimate r = ratio_of(rep.numerator, rep.denominator);
    rep.value = r.value;
    rep.sigma = r.std_err;
    return rep;
}

struct CorrelatedRatios {
    std::vector<RatioReport> ratios;
    std::vector<double> diff;       // ratio_i - ratio_0
    std::vector<double> diff_sigma; // batch-spread error of the difference
};

/// Ratios of several fields evaluated on shared planes and shared norm
/// sample points (common random numbers), so small differences are resolved
/// far below the marginal noise.  Difference errors come from batch spread.
inline CorrelatedRatios correlated_ratios(std::span<const Field> fields, int n, int k,
                                          const RatioConfig& cfg = {}) {
    const double p = (n + 1.0) / (k + 1.0);
    const double q = n + 1.0;
    const int nf = static_cast<int>(fields.size());
    const int nb = std::max(2, cfg.batches);
    const AxisRule rule = real_line_rule(std::max(32, cfg.inner_points), cfg.map_scale);

    std::vector<std::vector<double>> num_batch(nf, std::vector<double>(nb, 0.0));
    std::vector<std::vector<double>> den_batch(nf, std::vector<double>(nb, 0.0));
    std::vector<Accumulator> num_acc(nf), den_acc(nf);
    std::vector<bool> exact_norm(nf);
    std::vector<double> exact_value(nf, 0.0);
    for (int j = 0; j < nf; ++j) {
        exact_norm[j] = fields[j].kind != FieldKind::analytic;
        if (exact_norm[j]) exact_value[j] = lp_norm(fields[j], p).value;
    }

    const std::uint64_t t_per_batch = std::max<std::uint64_t>(1, cfg.transform_samples / nb);
    const std::uint64_t n_per_batch = std::max<std::uint64_t>(1, cfg.norm_samples / nb);
    for (int bi = 0; bi < nb; ++bi) {
        RandomStream rng(cfg.seed, static_cast<std::uint64_t>(bi) + 1);
        for (std::uint64_t s = 0; s < t_per_batch; ++s) {
            const PlaneSample ps = sample_affine_plane(n, k, cfg.offset_radius, rng);
            for (int j = 0; j < nf; ++j) {
                const double t = detail::plane_integral(fields[j], ps.plane, rule);
                const double val = ps.weight * std::pow(std::fabs(t), q);
                num_batch[j][bi] += val;
                num_acc[j].add(val);
            }
        }
        for (std::uint64_t s = 0; s < n_per_batch; ++s) {
            const Vec x = rng.heavy_point(n);
            const double g = heavy_density(n, norm(x));
            for (int j = 0; j < nf; ++j) {
                if (exact_norm[j]) continue;
                const double val = std::pow(fields[j](x), p) / g;
                den_batch[j][bi] += val;
                den_acc[j].add(val);
            }
        }
    }

    CorrelatedRatios out;
    out.ratios.resize(nf);
    out.diff.assign(nf, 0.0);
    out.diff_sigma.assign(nf, 0.0);
    for (int j = 0; j < nf; ++j) {
        RatioReport rep;
        rep.numerator = pow_of(num_acc[j].estimate(cfg.seed), 1.0 / q);
        rep.denominator = exact_norm[j] ? Estimate{exact_value[j], 0.0, 1, cfg.seed}
                                        : pow_of(den_acc[j].estimate(cfg.seed), 1.0 / p);
        if (!(rep.denominator.value > 0.0)) throw ParameterError("correlated_ratios: zero field");
        const Estimate r = ratio_of(rep.numerator, rep.denominator);
        rep.value = r.value;
        rep.sigma = r.std_err;
        out.ratios[j] = rep;
    }
    const auto batch_ratio = [&](int j, int bi) {
        const double num = std::pow(num_batch[j][bi] / t_per_batch, 1.0 / q);
        const double den = exact_norm[j] ? exact_value[j] : std::pow(den_batch[j][bi] / n_per_batch, 1.0 / p);
        return num / den;
    };
    for (int j = 1; j < nf; ++j) {
        Accumulator d;
        for (int bi = 0; bi < nb; ++bi) d.add(batch_ratio(j, bi) - batch_ratio(0, bi));
        out.diff[j] = out.ratios[j].value - out.ratios[0].value;
        out.diff_sigma[j] = d.std_err_of_mean();
    }
    return out;
}

struct PerturbationOutcome {
    double diff = 0.0;  // ratio(f + eps*g) - ratio(f)
    double sigma = 0.0; // correlated error of the difference
    RatioReport perturbed;
};

/// Ratio differences against a family of perturbation directions, with
/// common random numbers across the pair so order-eps^2 effects are visible.
/// For an extremizer every difference is nonpositive up to noise.
inline std::vector<PerturbationOutcome> perturbation_test(const Field& f, std::span<const Field> bumps,
                                                          double eps, int n, int k,
                                                          const RatioConfig& cfg = {}) {
    std::vector<Field> family;
    family.push_back(f);
    for (const auto& g : bumps) family.push_back(field_sum(f, g, 1.0, eps));
    const CorrelatedRatios cr = correlated_ratios(family, n, k, cfg);
    std::vector<PerturbationOutcome> out(bumps.size());
    for (std::size_t j = 0; j < bumps.size(); ++j) {
        out[j].diff = cr.diff[j + 1];
        out[j].sigma = cr.diff_sigma[j + 1];
        out[j].perturbed = cr.ratios[j + 1];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Distance to the radial profile, modulo the affine orbit
// ---------------------------------------------------------------------------

namespace detail {

inline double grid_lp_distance(const GridData& a, std::span<const double> bvals, double p) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        acc += std::pow(std::fabs(a.values[i] - bvals[i]), p);
    return std::pow(acc * a.cell_volume(), 1.0 / p);
}

} // namespace detail

/// L^p distance from a grid field to the closest member of the radial
/// profile family (1+|lambda x|^2)^{-(k+1)/2}, after normalizing the field's
/// affine frame: translate by the mass centroid, whiten (volume-preserving)
/// by the covariance of the superlevel set at the median positive height,
/// then fit the dilation.  Both sides are L^p-normalized on the grid.
inline double radial_profile_distance(const GridData& g, int n, int k, double p) {
    GridData f = g;
    double total = 0.0;
    for (double v : f.values) total += v;
    if (total <= 0.0) throw IterationError("radial_profile_distance: zero field");

    Vec centroid(n, 0.0);
    for (std::size_t c = 0; c < f.size(); ++c) {
        if (f.values[c] == 0.0) continue;
        const Vec x = f.cell_center(c);
        axpy(f.values[c], x, centroid);
    }
    for (auto& v : centroid) v /= total;

    // covariance of the superlevel set at the median positive value
    Vec positives;
    double top = 0.0;
    for (double v : f.values) {
        top = std::max(top, v);
        if (v > 0.0) positives.push_back(v);
    }
    std::sort(positives.begin(), positives.end());
    const double median = positives[positives.size() / 2];
    Matrix cov(n, n);
    Vec level_mean(n, 0.0);
    std::size_t level_count = 0;
    for (std::size_t c = 0; c < f.size(); ++c)
        if (f.values[c] > median) {
            axpy(1.0, f.cell_center(c), level_mean);
            ++level_count;
        }
    Matrix whiten = Matrix::identity(n);
    if (level_count > static_cast<std::size_t>(n + 1)) {
        for (auto& v : level_mean) v /= static_cast<double>(level_count);
        for (std::size_t c = 0; c < f.size(); ++c)
            if (f.values[c] > median) {
                const Vec d = sub(f.cell_center(c), level_mean);
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) cov(i, j) += d[i] * d[j];
            }
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) cov(i, j) /= static_cast<double>(level_count);
        bool ok = true;
        Matrix l(n, n);
        try {
            l = cov.cholesky();
        } catch (const SingularMatrixError&) {
            ok = false;
        }
        if (ok) {
            // volume-preserving whitening: unit determinant
            const double scale = std::pow(std::fabs(l.det()), 1.0 / n);
            whiten = l;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) whiten(i, j) /= scale;
        }
    }

    // resample the normalized field on a centered grid
    GridData canon = f;
    for (int a = 0; a < n; ++a) canon.lo[a] = -0.5 * f.dims[a] * f.h;
    for (std::size_t c = 0; c < canon.size(); ++c) {
        const Vec y = canon.cell_center(c);
        Vec x = whiten.apply(y);
        for (int a = 0; a < n; ++a) x[a] += centroid[a];
        canon.values[c] = f.value_at(x);
    }
    double canon_norm = 0.0;
    for (double v : canon.values) canon_norm += std::pow(v, p);
    canon_norm = std::pow(canon_norm * canon.cell_volume(), 1.0 / p);
    if (canon_norm <= 0.0) throw IterationError("radial_profile_distance: normalization collapsed");
    for (auto& v : canon.values) v /= canon_norm;

    const double expo = 0.5 * (k + 1);
    std::vector<double> r2(canon.size());
    for (std::size_t c = 0; c < canon.size(); ++c) r2[c] = norm_squared(canon.cell_center(c));
    std::vector<double> ref(canon.size());
    const auto distance_at = [&](double log_lambda) {
        const double lam2 = std::exp(2.0 * log_lambda);
        double ref_norm = 0.0;
        for (std::size_t c = 0; c < canon.size(); ++c) {
            ref[c] = std::pow(1.0 + lam2 * r2[c], -expo);
            ref_norm += std::pow(ref[c], p);
        }
        ref_norm = std::pow(ref_norm * canon.cell_volume(), 1.0 / p);
        for (auto& v : ref) v /= ref_norm;
        return detail::grid_lp_distance(canon, ref, p);
    };
    // golden-section over the dilation
    double a = -2.0, b = 2.0;
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c1 = b - gr * (b - a), c2 = a + gr * (b - a);
    double f1 = distance_at(c1), f2 = distance_at(c2);
    for (int it = 0; it < 48; ++it) {
        if (f1 < f2) {
            b = c2;
            c2 = c1;
            f2 = f1;
            c1 = b - gr * (b - a);
            f1 = distance_at(c1);
        } else {
            a = c1;
            c1 = c2;
            f1 = f2;
            c2 = a + gr * (b - a);
            f2 = distance_at(c2);
        }
    }
    return std::min(f1, f2);
}

// ---------------------------------------------------------------------------
// Competing-symmetries style iteration
// ---------------------------------------------------------------------------

enum class SymmetrizeOp { rearrange, invert, affine_normalize };

inline std::vector<SymmetrizeOp> parse_schedule(const std::string& csv) {
    std::vector<SymmetrizeOp> out;
    std::size_t pos = 0;
    while (pos <= csv.size()) {
        std::size_t comma = csv.find(',', pos);
        if (comma == std::string::npos) comma = csv.size();
        const std::string tok = csv.substr(pos, comma - pos);
        if (tok == "rearrange")
            out.push_back(SymmetrizeOp::rearrange);
        else if (tok == "J" || tok == "invert")
            out.push_back(SymmetrizeOp::invert);
        else if (tok == "affine-normalize")
            out.push_back(SymmetrizeOp::affine_normalize);
        else if (!tok.empty())
            throw ParameterError("unknown schedule step: " + tok);
        pos = comma + 1;
        if (comma == csv.size()) break;
    }
    if (out.empty()) throw ParameterError("empty symmetrization schedule");
    return out;
}

inline const char* symmetrize_tag(SymmetrizeOp op) {
    switch (op) {
    case SymmetrizeOp::rearrange: return "rearrange";
    case SymmetrizeOp::invert: return "J";
    case SymmetrizeOp::affine_normalize: return "affine-normalize";
    }
    return "?";
}

struct TraceRow {
    int step = 0;
    std::string tag;
    double ratio = 0.0;
    double ratio_sigma = 0.0;
    double distance = 0.0;
};

struct SymmetrizeResult {
    std::vector<TraceRow> trace;
    Field final_field;
};

namespace detail {

inline Field affine_normalize_grid(const Field& f, int n) {
    // translate the centroid to the origin; shape whitening is left to the
    // distance functional, translation alone keeps mass on the grid
    const GridData& g = f.grid();
    double total = 0.0;
    Vec centroid(n, 0.0);
    for (std::size_t c = 0; c < g.size(); ++c) {
        total += g.values[c];
        axpy(g.values[c], g.cell_center(c), centroid);
    }
    if (total <= 0.0) throw IterationError("affine normalization of a zero field");
    for (auto& v : centroid) v /= total;
    GridData out = g;
    for (int a = 0; a < n; ++a) out.lo[a] = -0.5 * g.dims[a] * g.h;
    for (std::size_t c = 0; c < out.size(); ++c) {
        Vec x = out.cell_center(c);
        for (int a = 0; a < n; ++a) x[a] += centroid[a];
        out.values[c] = g.value_at(x);
    }
    return make_grid_field(std::move(out));
}

} // namespace detail

/// Alternate the schedule's operations from the start field, renormalizing
/// ||f||_p = 1 after every step; the trace records the ratio (common seed
/// across steps) and the affine-normalized distance to the radial profile.
/// Rearrangement steps never decrease the ratio; the inversion supplies the
/// mixing that drags mass toward the profile's tails.
inline SymmetrizeResult symmetrize_iterate(const Field& start, int steps,
                                           std::span<const SymmetrizeOp> schedule, int n, int k,
                                           const RatioConfig& cfg = {}) {
    if (start.kind != FieldKind::grid)
        throw ParameterError("symmetrize_iterate: start field must be a grid");
    if (schedule.empty()) throw ParameterError("symmetrize_iterate: empty schedule");
    const double p = (n + 1.0) / (k + 1.0);

    const auto renormalize = [&](Field f) {
        const double nrm = lp_norm(f, p).value;
        if (!(nrm > 0.0)) throw IterationError("symmetrize_iterate: field collapsed to zero");
        return field_scale(f, 1.0 / nrm);
    };
    const auto measure = [&](const Field& f, int step, const char* tag) {
        TraceRow row;
        row.step = step;
        row.tag = tag;
        const Estimate num = lq_transform_norm(f, n, k, cfg.mc());
        const double den = lp_norm(f, p).value;
        row.ratio = num.value / den;
        row.ratio_sigma = num.std_err / den;
        row.distance = radial_profile_distance(f.grid(), n, k, p);
        return row;
    };

    SymmetrizeResult res;
    Field current = renormalize(start);
    res.trace.push_back(measure(current, 0, "init"));
    for (int step = 1; step <= steps; ++step) {
        const SymmetrizeOp op = schedule[(step - 1) % schedule.size()];
        switch (op) {
        case SymmetrizeOp::rearrange: current = full_rearrange(current); break;
        case SymmetrizeOp::invert: current = apply_J(current, k); break;
        case SymmetrizeOp::affine_normalize: current = detail::affine_normalize_grid(current, n); break;
        }
        current = renormalize(current);
        res.trace.push_back(measure(current, step, symmetrize_tag(op)));
    }
    res.final_field = current;
    return res;
}

// ---------------------------------------------------------------------------
// Slice geometry probes
// ---------------------------------------------------------------------------

struct SliceFitConfig {
    std::uint64_t samples = 100000;
    std::uint64_t seed = 1;
    Vec box_lo, box_hi; // optional explicit sampling box in v
    double box_pad = 1.6;
};

struct SliceFitReport {
    Vec center;
    Matrix axes; // fitted ellipsoid = center + axes * unit ball
    double volume = 0.0;
    double sym_diff_fraction = 0.0;
    std::uint64_t members = 0;
};

namespace detail {

inline std::pair<Vec, Vec> slice_sampling_box(const Field& f, std::span<const double> xp, double s,
                                              const SliceFitConfig& cfg) {
    if (!cfg.box_lo.empty()) return {cfg.box_lo, cfg.box_hi};
    const int k = static_cast<int>(xp.size());
    const int m = f.n - k;
    if (f.slice_hook) {
        const SliceGeometry geom = f.slice_hook(xp, s);
        if (!geom.nonempty) throw EmptySliceError("slice superlevel set is empty");
        Vec lo(m), hi(m);
        for (int a = 0; a < m; ++a) {
            double ext = 0.0;
            for (int j = 0; j < m; ++j) ext += geom.axes(a, j) * geom.axes(a, j);
            ext = cfg.box_pad * std::sqrt(ext);
            lo[a] = geom.center[a] - ext;
            hi[a] = geom.center[a] + ext;
        }
        return {lo, hi};
    }
    if (f.kind == FieldKind::grid) {
        const GridData& g = f.grid();
        Vec lo(m), hi(m);
        const Vec ghi = g.hi();
        for (int a = 0; a < m; ++a) {
            lo[a] = g.lo[k + a];
            hi[a] = ghi[k + a];
        }
        return {lo, hi};
    }
    throw ParameterError("ellipsoid_slice_fit: provide a sampling box for this field");
}

} // namespace detail

/// Second-moment ellipsoid fit of one v-slice superlevel set, with a
/// volume-matching rescale, plus the sampled symmetric-difference fraction
/// between the set and the fit.  Exact ellipsoidal slices fit to sampling
/// accuracy; anything else leaves a visible residual.
inline SliceFitReport ellipsoid_slice_fit(const Field& f, std::span<const double> x_prime, double s,
                                          const SliceFitConfig& cfg = {}) {
    const int k = static_cast<int>(x_prime.size());
    const int m = f.n - k;
    const auto [lo, hi] = detail::slice_sampling_box(f, x_prime, s, cfg);
    double box_volume = 1.0;
    for (int a = 0; a < m; ++a) box_volume *= hi[a] - lo[a];

    RandomStream rng(cfg.seed);
    Vec x(f.n);
    for (int a = 0; a < k; ++a) x[a] = x_prime[a];
    Vec mean(m, 0.0);
    Matrix second(m, m);
    std::uint64_t members = 0;
    std::vector<Vec> kept;
    kept.reserve(1024);
    for (std::uint64_t it = 0; it < cfg.samples; ++it) {
        Vec v(m);
        for (int a = 0; a < m; ++a) {
            v[a] = rng.uniform(lo[a], hi[a]);
            x[k + a] = v[a];
        }
        if (f(x) > s) {
            ++members;
            axpy(1.0, v, mean);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j) second(i, j) += v[i] * v[j];
        }
    }
    if (members == 0) throw EmptySliceError("ellipsoid_slice_fit: no superlevel mass in the box");
    for (auto& v : mean) v /= static_cast<double>(members);
    Matrix cov(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            cov(i, j) = second(i, j) / static_cast<double>(members) - mean[i] * mean[j];

    // a uniform ellipsoid has covariance (axes axes^T)/(m+2)
    Matrix scaled_cov = cov;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) scaled_cov(i, j) *= (m + 2.0);
    Matrix axes = scaled_cov.cholesky();
    const double measured_volume = box_volume * static_cast<double>(members) / static_cast<double>(cfg.samples);
    const double fit_volume = unit_ball_volume(m) * std::fabs(axes.det());
    const double rescale = std::pow(measured_volume / fit_volume, 1.0 / m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) axes(i, j) *= rescale;

    SliceFitReport rep;
    rep.center = mean;
    rep.axes = axes;
    rep.volume = measured_volume;
    rep.members = members;

    const Matrix axes_inv = axes.inverse();
    RandomStream rng2 = rng.substream(1);
    std::uint64_t mismatched = 0;
    for (std::uint64_t it = 0; it < cfg.samples; ++it) {
        Vec v(m);
        for (int a = 0; a < m; ++a) {
            v[a] = rng2.uniform(lo[a], hi[a]);
            x[k + a] = v[a];
        }
        const bool in_set = f(x) > s;
        const bool in_fit = norm_squared(axes_inv.apply(sub(v, mean))) <= 1.0;
        if (in_set != in_fit) ++mismatched;
    }
    rep.sym_diff_fraction = (box_volume * static_cast<double>(mismatched) / static_cast<double>(cfg.samples)) /
                            std::max(1e-300, measured_volume);
    return rep;
}

struct SharedGeometryReport {
    double shape_dispersion = 0.0;    // RMS deviation of det-normalized shapes
    double center_residual = 0.0;     // affine-fit residual / center spread
    double center_residual_abs = 0.0; // RMS affine-fit residual
    double center_spread = 0.0;       // RMS spread of fitted centers
    double max_sym_diff = 0.0;        // worst per-slice ellipticity defect
    double mean_sym_diff = 0.0;
    std::vector<Vec> xprimes;
    std::vector<Vec> centers;
    std::vector<double> scales;
    int slices_used = 0;
};

/// Fit every requested slice, then test the shared-geometry structure: all
/// slice ellipsoids share one shape up to scale, and the centers depend
/// affinely on x'.
inline SharedGeometryReport shared_geometry_check(const Field& f, std::span<const Vec> xprimes,
                                                  std::span<const double> thresholds,
                                                  const SliceFitConfig& cfg = {}) {
    if (xprimes.empty() || thresholds.empty())
        throw ParameterError("shared_geometry_check: need slices and thresholds");
    const int k = static_cast<int>(xprimes.front().size());
    const int m = f.n - k;
    SharedGeometryReport rep;
    std::vector<Matrix> shapes;
    SliceFitConfig fit_cfg = cfg;
    std::uint64_t salt = 0;
    for (std::size_t i = 0; i < xprimes.size(); ++i) {
        const double s = thresholds[i % thresholds.size()];
        fit_cfg.seed = cfg.seed + (++salt);
        try {
            const SliceFitReport fit = ellipsoid_slice_fit(f, xprimes[i], s, fit_cfg);
            Matrix shape = fit.axes.multiply(fit.axes.transpose());
            const double d = shape.det();
            const double nrm = std::pow(std::fabs(d), 1.0 / m);
            for (int r = 0; r < m; ++r)
                for (int c = 0; c < m; ++c) shape(r, c) /= nrm;
            shapes.push_back(shape);
            rep.centers.push_back(fit.center);
            rep.xprimes.push_back(xprimes[i]);
            rep.scales.push_back(std::pow(std::fabs(fit.axes.det()), 1.0 / m));
            rep.max_sym_diff = std::max(rep.max_sym_diff, fit.sym_diff_fraction);
            rep.mean_sym_diff += fit.sym_diff_fraction;
        } catch (const EmptySliceError&) {
            continue; // empty slices carry no geometry
        }
    }
    rep.slices_used = static_cast<int>(shapes.size());
    if (rep.slices_used < 2) throw EmptySliceError("shared_geometry_check: too few nonempty slices");
    rep.mean_sym_diff /= rep.slices_used;

    Matrix mean_shape(m, m);
    for (const auto& s : shapes)
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < m; ++c) mean_shape(r, c) += s(r, c) / shapes.size();
    double disp = 0.0;
    for (const auto& s : shapes) {
        double d2 = 0.0;
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < m; ++c) d2 += (s(r, c) - mean_shape(r, c)) * (s(r, c) - mean_shape(r, c));
        disp += d2;
    }
    rep.shape_dispersion = std::sqrt(disp / shapes.size()) / std::max(1e-300, mean_shape.frobenius());

    // least-squares affine fit x' -> center
    const int params = k + 1;
    Matrix gram(params, params);
    std::vector<Vec> rhs(m, Vec(params, 0.0));
    for (std::size_t i = 0; i < rep.centers.size(); ++i) {
        Vec u(params, 1.0);
        for (int a = 0; a < k; ++a) u[a] = rep.xprimes[i][a];
        for (int r = 0; r < params; ++r) {
            for (int c = 0; c < params; ++c) gram(r, c) += u[r] * u[c];
            for (int d = 0; d < m; ++d) rhs[d][r] += u[r] * rep.centers[i][d];
        }
    }
    std::vector<Vec> coeff(m);
    for (int d = 0; d < m; ++d) coeff[d] = solve(gram, rhs[d]);
    Vec center_mean(m, 0.0);
    for (const auto& c : rep.centers) axpy(1.0 / rep.centers.size(), c, center_mean);
    double resid = 0.0, spread = 0.0;
    for (std::size_t i = 0; i < rep.centers.size(); ++i) {
        Vec u(params, 1.0);
        for (int a = 0; a < k; ++a) u[a] = rep.xprimes[i][a];
        for (int d = 0; d < m; ++d) {
            const double pred = dot(coeff[d], u);
            resid += (rep.centers[i][d] - pred) * (rep.centers[i][d] - pred);
            spread += (rep.centers[i][d] - center_mean[d]) * (rep.centers[i][d] - center_mean[d]);
        }
    }
    rep.center_residual_abs = std::sqrt(resid / rep.centers.size());
    rep.center_spread = std::sqrt(spread / rep.centers.size());
    rep.center_residual = rep.center_residual_abs / std::max(1e-300, rep.center_spread);
    return rep;
}

// ---------------------------------------------------------------------------
// Almost-Lebesgue convexity probe
// ---------------------------------------------------------------------------

struct ConvexityConfig {
    int pairs = 4000;
    int segment_samples = 64;
    double segment_tolerance = 0.05; // pair passes when this fraction may miss
    std::uint64_t seed = 1;
};

/// Fraction of member pairs whose connecting segment stays in the set:
/// sampled points never see null sets, so sets that are convex off a null
/// set score 1.
inline double almost_convexity_probe(const std::function<bool(std::span<const double>)>& member,
                                     const std::pair<Vec, Vec>& box, int dim,
                                     const ConvexityConfig& cfg = {}) {
    RandomStream rng(cfg.seed);
    const auto draw_member = [&]() {
        Vec x(dim);
        for (std::uint64_t attempt = 0; attempt < 4000000; ++attempt) {
            for (int a = 0; a < dim; ++a) x[a] = rng.uniform(box.first[a], box.second[a]);
            if (member(x)) return x;
        }
        throw ParameterError("almost_convexity_probe: set occupies too little of the box");
    };
    int passed = 0;
    Vec z(dim);
    for (int pr = 0; pr < cfg.pairs; ++pr) {
        const Vec a = draw_member(), b = draw_member();
        int inside = 0;
        for (int sseg = 0; sseg < cfg.segment_samples; ++sseg) {
            const double t = rng.u01();
            for (int c = 0; c < dim; ++c) z[c] = a[c] + t * (b[c] - a[c]);
            if (member(z)) ++inside;
        }
        if (inside >= (1.0 - cfg.segment_tolerance) * cfg.segment_samples) ++passed;
    }
    return static_cast<double>(passed) / cfg.pairs;
}

// ---------------------------------------------------------------------------
// Scaled skew reflections
// ---------------------------------------------------------------------------

/// Compose phi^{-1} psi^{-1} L^{-1} R L psi phi where psi shears v by an
/// affine gamma(x'), L acts on the v block, and R negates the last
/// coordinate.  Always an involution; with gamma and L matched to a field's
/// slice geometry it fixes the field.
inline AffineMap scaled_skew_reflection(const AffineMap& phi, const Matrix& gamma_linear,
                                        const Vec& gamma_offset, const Matrix& l_map, int n, int k) {
    const int m = n - k;
    if (gamma_linear.rows() != m || gamma_linear.cols() != k)
        throw DimensionError("scaled_skew_reflection: gamma must map R^k to R^{n-k}");
    if (l_map.rows() != m || l_map.cols() != m)
        throw DimensionError("scaled_skew_reflection: L must act on R^{n-k}");
    if (phi.dim() != n) throw DimensionError("scaled_skew_reflection: phi must act on R^n");

    Matrix psi_lin = Matrix::identity(n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < k; ++j) psi_lin(k + i, j) = gamma_linear(i, j);
    Vec psi_t(n, 0.0);
    for (int i = 0; i < m; ++i) psi_t[k + i] = gamma_offset[i];
    const AffineMap psi = AffineMap::make(std::move(psi_lin), std::move(psi_t));

    Matrix l_lin = Matrix::identity(n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) l_lin(k + i, k + j) = l_map(i, j);
    const AffineMap l_full = AffineMap::make(std::move(l_lin), Vec(n, 0.0));

    Matrix r_lin = Matrix::identity(n);
    r_lin(n - 1, n - 1) = -1.0;
    const AffineMap reflect = AffineMap::make(std::move(r_lin), Vec(n, 0.0));

    AffineMap composite = psi.compose(phi);
    composite = l_full.compose(composite);
    composite = reflect.compose(composite);
    composite = l_full.inverse().compose(composite);
    composite = psi.inverse().compose(composite);
    composite = phi.inverse().compose(composite);
    return composite;
}

} // namespace kplane
