// Command-line front end: every estimator in the library behind one binary
// with reproducible seeding and machine-readable reports.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "kplane/kplane.hpp"

using json = nlohmann::ordered_json;
using namespace kplane;

namespace {

struct CommonOpts {
    int n = 2;
    int k = 1;
    std::string samples = "200000"; // accepts scientific notation, e.g. 1e6
    std::uint64_t seed = 1;
    int workers = 1;
    std::string out;
    std::string field_spec = "builtin:extremizer";
};

std::uint64_t parse_count(const std::string& s) {
    const double v = std::stod(s);
    if (!(v >= 1.0) || v > 4e18) throw ParameterError("sample count out of range: " + s);
    return static_cast<std::uint64_t>(v);
}

void add_common(CLI::App* cmd, CommonOpts& o, bool with_field = true) {
    cmd->add_option("--n", o.n, "ambient dimension");
    cmd->add_option("--k", o.k, "plane dimension");
    cmd->add_option("--samples", o.samples, "sample budget (accepts 1e6 style)");
    cmd->add_option("--seed", o.seed, "random seed");
    cmd->add_option("--workers", o.workers, "worker count for Monte Carlo loops");
    cmd->add_option("--out", o.out, "output path (default stdout)");
    if (with_field) cmd->add_option("--field", o.field_spec, "field spec (builtin:...|file:path)");
}

void validate(const CommonOpts& o) {
    if (o.k < 1 || o.k > o.n - 1) throw ParameterError("need 1 <= k <= n-1");
    if (o.workers < 1) throw ParameterError("workers must be positive");
}

json params_json(const CommonOpts& o, const char* subcommand) {
    json p;
    p["subcommand"] = subcommand;
    p["n"] = o.n;
    p["k"] = o.k;
    p["samples"] = parse_count(o.samples);
    p["seed"] = o.seed;
    p["workers"] = o.workers;
    p["field"] = o.field_spec;
    return p;
}

json estimate_json(const Estimate& e) {
    json j;
    j["value"] = e.value;
    j["stderr"] = e.std_err;
    j["samples"] = e.samples;
    j["seed"] = e.seed;
    return j;
}

int emit(const json& report, const std::string& out) {
    double v = report.contains("value") ? report["value"].get<double>() : 0.0;
    if (!std::isfinite(v)) return 1;
    const std::string text = report.dump(2) + "\n";
    if (out.empty()) {
        std::cout << text;
    } else {
        std::ofstream f(out);
        if (!f) throw ParameterError("cannot open output: " + out);
        f << text;
    }
    return 0;
}

IndicatorSet parse_set_json(const json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "ball")
        return IndicatorSet::ball(j.at("center").get<Vec>(), j.at("radius").get<double>());
    if (type == "box")
        return IndicatorSet::boxes({{j.at("lo").get<Vec>(), j.at("hi").get<Vec>()}});
    if (type == "boxes") {
        std::vector<std::pair<Vec, Vec>> parts;
        for (const auto& b : j.at("parts")) parts.push_back({b.at("lo").get<Vec>(), b.at("hi").get<Vec>()});
        return IndicatorSet::boxes(std::move(parts));
    }
    if (type == "ellipsoid") {
        const Vec center = j.at("center").get<Vec>();
        const auto rows = j.at("axes").get<std::vector<Vec>>();
        Matrix axes(static_cast<int>(rows.size()), static_cast<int>(rows.size()));
        for (std::size_t r = 0; r < rows.size(); ++r)
            for (std::size_t c = 0; c < rows.size(); ++c) axes(static_cast<int>(r), static_cast<int>(c)) = rows[r][c];
        return IndicatorSet::ellipsoid(center, axes);
    }
    if (type == "full") return IndicatorSet::full_space(j.at("dim").get<int>());
    if (type == "empty") return IndicatorSet::empty_set(j.at("dim").get<int>());
    throw ParameterError("unknown set type: " + type);
}

struct SetProblem {
    std::vector<IndicatorSet> sets;
    CoefficientMatrix coefficients;
};

SetProblem parse_problem(const std::string& path_or_inline) {
    json j;
    if (!path_or_inline.empty() && path_or_inline.front() == '{') {
        j = json::parse(path_or_inline);
    } else {
        std::ifstream f(path_or_inline);
        if (!f) throw ParameterError("cannot open problem spec: " + path_or_inline);
        f >> j;
    }
    SetProblem p;
    const auto& cj = j.at("coefficients");
    const int k = cj.at("k").get<int>();
    std::vector<Vec> tail;
    if (cj.contains("tail")) tail = cj.at("tail").get<std::vector<Vec>>();
    p.coefficients = coefficients_from_rows(k, cj.at("row").get<Vec>(), tail);
    for (const auto& sj : j.at("sets")) p.sets.push_back(parse_set_json(sj));
    return p;
}

Vec parse_csv(const std::string& s) {
    Vec out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        std::size_t comma = s.find(',', pos);
        if (comma == std::string::npos) comma = s.size();
        const std::string tok = s.substr(pos, comma - pos);
        if (!tok.empty()) out.push_back(std::stod(tok));
        pos = comma + 1;
        if (comma == s.size()) break;
    }
    return out;
}

std::vector<Vec> parse_rows(const std::string& s) {
    std::vector<Vec> rows;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        std::size_t semi = s.find(';', pos);
        if (semi == std::string::npos) semi = s.size();
        const std::string tok = s.substr(pos, semi - pos);
        if (!tok.empty()) rows.push_back(parse_csv(tok));
        pos = semi + 1;
        if (semi == s.size()) break;
    }
    return rows;
}

} // namespace

int run(int argc, char** argv) {
    CLI::App app{"numerical laboratory for the k-plane transform endpoint inequality"};
    app.require_subcommand(1);

    // transform -------------------------------------------------------------
    CommonOpts t_opts;
    std::uint64_t t_plane_seed = 0;
    double t_offset = 0.0;
    auto* t_cmd = app.add_subcommand("transform", "integrate a field over one affine plane");
    add_common(t_cmd, t_opts);
    t_cmd->add_option("--plane-seed", t_plane_seed, "seed selecting the Haar-random plane");
    t_cmd->add_option("--offset", t_offset, "offset along the first complement direction");

    // norm / sharp-norm -----------------------------------------------------
    CommonOpts n_opts, s_opts;
    double n_offset_radius = 30.0;
    int n_inner = 96, s_inner = 256;
    auto* n_cmd = app.add_subcommand("norm", "L^{n+1} norm of the plane transform");
    add_common(n_cmd, n_opts);
    n_cmd->add_option("--offset-radius", n_offset_radius, "offset truncation radius");
    n_cmd->add_option("--inner-points", n_inner, "quadrature budget per plane");
    auto* s_cmd = app.add_subcommand("sharp-norm", "L^{n+1} norm of the graph transform");
    add_common(s_cmd, s_opts);
    s_cmd->add_option("--inner-points", s_inner, "quadrature budget per graph");

    // elliptic-check ----------------------------------------------------------
    CommonOpts e_opts;
    int e_inner = 96;
    std::uint64_t e_inner_samples = 768;
    auto* e_cmd = app.add_subcommand("elliptic-check", "hemisphere lift norm correspondence");
    add_common(e_cmd, e_opts);
    e_cmd->add_option("--inner-points", e_inner, "quadrature budget per plane");
    e_cmd->add_option("--inner-samples", e_inner_samples, "line draws per sampled subspace");

    // drury-check -------------------------------------------------------------
    CommonOpts d_opts;
    double d_threshold = 0.001;
    auto* d_cmd = app.add_subcommand("drury-check", "multilinear identity for the transform norm");
    add_common(d_cmd, d_opts);
    d_cmd->add_option("--vol-threshold", d_threshold, "anchor volume rejection threshold");

    // bll-gap / burchard-probe -------------------------------------------------
    CommonOpts bll_opts, bur_opts;
    std::string bll_spec, bur_spec;
    auto* bll_cmd = app.add_subcommand("bll-gap", "rearrangement gap of the multilinear form");
    add_common(bll_cmd, bll_opts, false);
    bll_cmd->add_option("--spec", bll_spec, "JSON problem spec (path or inline)")->required();
    auto* bur_cmd = app.add_subcommand("burchard-probe", "equality-case probe for indicator families");
    add_common(bur_cmd, bur_opts, false);
    bur_cmd->add_option("--spec", bur_spec, "JSON problem spec (path or inline)")->required();

    // permissible ---------------------------------------------------------------
    CommonOpts p_opts;
    std::string p_radii, p_coeffs, p_tail;
    auto* p_cmd = app.add_subcommand("permissible", "weighted admissibility of a radius family");
    add_common(p_cmd, p_opts, false);
    p_cmd->add_option("--radii", p_radii, "comma-separated radii")->required();
    p_cmd->add_option("--coeffs", p_coeffs, "row k+1 of the coefficient matrix")->required();
    p_cmd->add_option("--tail-coeffs", p_tail, "semicolon-separated trailing rows");

    // ratio ----------------------------------------------------------------------
    CommonOpts r_opts;
    double r_offset_radius = 30.0;
    int r_inner = 96;
    auto* r_cmd = app.add_subcommand("ratio", "transform-norm to field-norm ratio");
    add_common(r_cmd, r_opts);
    r_cmd->add_option("--offset-radius", r_offset_radius, "offset truncation radius");
    r_cmd->add_option("--inner-points", r_inner, "quadrature budget per plane");

    // perturb ----------------------------------------------------------------------
    CommonOpts pt_opts;
    double pt_eps = 0.1;
    std::string pt_centers = "0,0.8,-1.5";
    auto* pt_cmd = app.add_subcommand("perturb", "ratio response to bump perturbations");
    add_common(pt_cmd, pt_opts);
    pt_cmd->add_option("--eps", pt_eps, "perturbation size");
    pt_cmd->add_option("--bump-centers", pt_centers, "first-axis centers of the Gaussian bumps");

    // symmetrize ----------------------------------------------------------------------
    CommonOpts sy_opts;
    int sy_steps = 20, sy_cells = 121;
    double sy_extent = 12.0;
    std::string sy_schedule = "rearrange,J";
    auto* sy_cmd = app.add_subcommand("symmetrize", "alternating symmetrization trace (CSV)");
    add_common(sy_cmd, sy_opts);
    sy_cmd->add_option("--steps", sy_steps, "iteration steps");
    sy_cmd->add_option("--schedule", sy_schedule, "comma-separated step tags");
    sy_cmd->add_option("--grid-cells", sy_cells, "cells per axis for the working grid");
    sy_cmd->add_option("--grid-extent", sy_extent, "half-width of the working grid");

    // slice-fit -------------------------------------------------------------------------
    CommonOpts sf_opts;
    std::string sf_xprime = "0", sf_box;
    double sf_s = 0.5;
    auto* sf_cmd = app.add_subcommand("slice-fit", "moment ellipsoid fit of one slice superlevel set");
    add_common(sf_cmd, sf_opts);
    sf_cmd->add_option("--xprime", sf_xprime, "slice coordinates (comma separated)");
    sf_cmd->add_option("--s", sf_s, "superlevel threshold");
    sf_cmd->add_option("--box", sf_box, "sampling box lo1,hi1,lo2,hi2,... in v");

    // convexity-probe ----------------------------------------------------------------------
    CommonOpts cv_opts;
    std::string cv_set, cv_box;
    double cv_s = 0.5;
    int cv_pairs = 4000, cv_segments = 64;
    auto* cv_cmd = app.add_subcommand("convexity-probe", "segment membership fraction of a set");
    add_common(cv_cmd, cv_opts);
    cv_cmd->add_option("--set", cv_set, "JSON set spec (path or inline); overrides --field");
    cv_cmd->add_option("--s", cv_s, "superlevel threshold when probing a field");
    cv_cmd->add_option("--box", cv_box, "sampling box lo1,hi1,...");
    cv_cmd->add_option("--pairs", cv_pairs, "member pairs to draw");
    cv_cmd->add_option("--segments", cv_segments, "samples per segment");

    // rearrange ---------------------------------------------------------------------------
    CommonOpts re_opts;
    std::string re_mode = "full", re_grid_out;
    int re_cells = 121;
    double re_extent = 12.0;
    auto* re_cmd = app.add_subcommand("rearrange", "symmetric nonincreasing rearrangement of a grid field");
    add_common(re_cmd, re_opts);
    re_cmd->add_option("--mode", re_mode, "full or slice");
    re_cmd->add_option("--grid-cells", re_cells, "cells per axis when sampling a builtin field");
    re_cmd->add_option("--grid-extent", re_extent, "half-width when sampling a builtin field");
    re_cmd->add_option("--out-grid", re_grid_out, "path for the rearranged grid (binary)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << app.help() << "error: " << e.what() << "\n";
        return 2;
    }

    if (t_cmd->parsed()) {
        validate(t_opts);
        const Field f = parse_field_spec(t_opts.field_spec, t_opts.n, t_opts.k);
        RandomStream rng(t_plane_seed);
        const OrthonormalFrame frame = sample_grassmannian(t_opts.n, t_opts.k, rng);
        AffinePlane plane{frame, scaled(frame.complement_basis[0], t_offset)};
        TransformConfig cfg;
        cfg.points = static_cast<int>(parse_count(t_opts.samples));
        Estimate e = kplane_transform(f, plane, cfg);
        e.seed = t_opts.seed;
        json rep = estimate_json(e);
        rep["params"] = params_json(t_opts, "transform");
        rep["params"]["plane_seed"] = t_plane_seed;
        rep["params"]["offset"] = t_offset;
        return emit(rep, t_opts.out);
    }
    if (n_cmd->parsed()) {
        validate(n_opts);
        const Field f = parse_field_spec(n_opts.field_spec, n_opts.n, n_opts.k);
        McConfig cfg;
        cfg.samples = parse_count(n_opts.samples);
        cfg.seed = n_opts.seed;
        cfg.workers = n_opts.workers;
        cfg.offset_radius = n_offset_radius;
        cfg.inner_points = n_inner;
        json rep = estimate_json(lq_transform_norm(f, n_opts.n, n_opts.k, cfg));
        rep["params"] = params_json(n_opts, "norm");
        rep["params"]["offset_radius"] = n_offset_radius;
        rep["params"]["inner_points"] = n_inner;
        return emit(rep, n_opts.out);
    }
    if (s_cmd->parsed()) {
        validate(s_opts);
        const Field f = parse_field_spec(s_opts.field_spec, s_opts.n, s_opts.k);
        McConfig cfg;
        cfg.samples = parse_count(s_opts.samples);
        cfg.seed = s_opts.seed;
        cfg.workers = s_opts.workers;
        cfg.inner_points = s_inner;
        json rep = estimate_json(lq_sharp_norm(f, s_opts.n, s_opts.k, cfg));
        rep["params"] = params_json(s_opts, "sharp-norm");
        rep["params"]["inner_points"] = s_inner;
        return emit(rep, s_opts.out);
    }
    if (e_cmd->parsed()) {
        validate(e_opts);
        const Field f = parse_field_spec(e_opts.field_spec, e_opts.n, e_opts.k);
        McConfig cfg;
        cfg.samples = parse_count(e_opts.samples);
        cfg.seed = e_opts.seed;
        cfg.workers = e_opts.workers;
        cfg.inner_points = e_inner;
        cfg.inner_samples = e_inner_samples;
        const EllipticReport r = elliptic_norm_check(f, e_opts.n, e_opts.k, cfg);
        json rep;
        rep["value"] = r.composite_constant;
        rep["stderr"] = r.composite_sigma;
        rep["norm_match"] = r.norm_match;
        rep["norm_match_stderr"] = r.norm_match_sigma;
        rep["hemisphere_area"] = r.hemisphere_area;
        rep["field_norm"] = estimate_json(r.f_norm);
        rep["lifted_norm"] = estimate_json(r.lifted_norm);
        rep["transform_norm"] = estimate_json(r.transform_norm);
        rep["elliptic_transform_norm"] = estimate_json(r.elliptic_transform_norm);
        rep["samples"] = cfg.samples;
        rep["seed"] = cfg.seed;
        rep["params"] = params_json(e_opts, "elliptic-check");
        return emit(rep, e_opts.out);
    }
    if (d_cmd->parsed()) {
        validate(d_opts);
        const Field f = parse_field_spec(d_opts.field_spec, d_opts.n, d_opts.k);
        DruryConfig cfg;
        cfg.samples = parse_count(d_opts.samples);
        cfg.seed = d_opts.seed;
        cfg.workers = d_opts.workers;
        cfg.volume_threshold = d_threshold;
        cfg.norm.samples = cfg.samples / 2;
        const DruryReport r = drury_identity_check(f, d_opts.n, d_opts.k, cfg);
        json rep;
        rep["value"] = r.constant;
        rep["stderr"] = r.constant_sigma;
        rep["transform_power"] = estimate_json(r.transform_power);
        rep["sliced_integral"] = estimate_json(r.sliced_integral);
        rep["rejection_fraction"] = r.rejection_fraction;
        rep["samples"] = r.samples;
        rep["seed"] = r.seed;
        rep["params"] = params_json(d_opts, "drury-check");
        rep["params"]["vol_threshold"] = d_threshold;
        return emit(rep, d_opts.out);
    }
    if (bll_cmd->parsed()) {
        const SetProblem p = parse_problem(bll_spec);
        TxConfig cfg;
        cfg.samples = parse_count(bll_opts.samples);
        cfg.seed = bll_opts.seed;
        cfg.workers = bll_opts.workers;
        const TxPair pair = bll_gap(p.sets, p.coefficients, cfg);
        json rep;
        rep["value"] = pair.gap.value;
        rep["stderr"] = pair.gap.std_err;
        rep["plain"] = estimate_json(pair.plain);
        rep["rearranged"] = estimate_json(pair.star);
        rep["samples"] = cfg.samples;
        rep["seed"] = cfg.seed;
        rep["params"] = params_json(bll_opts, "bll-gap");
        rep["params"]["spec"] = bll_spec;
        return emit(rep, bll_opts.out);
    }
    if (bur_cmd->parsed()) {
        const SetProblem p = parse_problem(bur_spec);
        TxConfig cfg;
        cfg.samples = parse_count(bur_opts.samples);
        cfg.seed = bur_opts.seed;
        cfg.workers = bur_opts.workers;
        const BurchardReport r = burchard_equality_probe(p.sets, p.coefficients, cfg);
        json rep;
        rep["value"] = r.normalized_gap;
        rep["stderr"] = r.normalized_sigma;
        rep["permissible"] = r.permissible;
        rep["plain"] = estimate_json(r.tx_plain);
        rep["rearranged"] = estimate_json(r.tx_star);
        rep["samples"] = cfg.samples;
        rep["seed"] = cfg.seed;
        rep["params"] = params_json(bur_opts, "burchard-probe");
        rep["params"]["spec"] = bur_spec;
        return emit(rep, bur_opts.out);
    }
    if (p_cmd->parsed()) {
        const Vec radii = parse_csv(p_radii);
        const Vec row = parse_csv(p_coeffs);
        const std::vector<Vec> tail = p_tail.empty() ? std::vector<Vec>{} : parse_rows(p_tail);
        const CoefficientMatrix cm = coefficients_from_rows(static_cast<int>(row.size()) - 1, row, tail);
        const PermissibilityReport r = permissibility(radii, cm);
        json rep;
        rep["value"] = r.permissible ? 1.0 : 0.0;
        rep["permissible"] = r.permissible;
        rep["triangle_clause"] = r.triangle_clause;
        rep["domination_clause"] = r.domination_clause;
        rep["failures"] = r.failures;
        rep["params"] = params_json(p_opts, "permissible");
        rep["params"]["radii"] = p_radii;
        rep["params"]["coeffs"] = p_coeffs;
        rep["params"]["tail_coeffs"] = p_tail;
        return emit(rep, p_opts.out);
    }
    if (r_cmd->parsed()) {
        validate(r_opts);
        const Field f = parse_field_spec(r_opts.field_spec, r_opts.n, r_opts.k);
        RatioConfig cfg;
        cfg.transform_samples = parse_count(r_opts.samples);
        cfg.norm_samples = cfg.transform_samples;
        cfg.seed = r_opts.seed;
        cfg.workers = r_opts.workers;
        cfg.offset_radius = r_offset_radius;
        cfg.inner_points = r_inner;
        const RatioReport r = transform_ratio(f, r_opts.n, r_opts.k, cfg);
        json rep;
        rep["value"] = r.value;
        rep["stderr"] = r.sigma;
        rep["numerator"] = estimate_json(r.numerator);
        rep["denominator"] = estimate_json(r.denominator);
        rep["samples"] = cfg.transform_samples;
        rep["seed"] = cfg.seed;
        rep["params"] = params_json(r_opts, "ratio");
        rep["params"]["offset_radius"] = r_offset_radius;
        rep["params"]["inner_points"] = r_inner;
        return emit(rep, r_opts.out);
    }
    if (pt_cmd->parsed()) {
        validate(pt_opts);
        const Field f = parse_field_spec(pt_opts.field_spec, pt_opts.n, pt_opts.k);
        RatioConfig cfg;
        cfg.transform_samples = parse_count(pt_opts.samples);
        cfg.norm_samples = cfg.transform_samples;
        cfg.seed = pt_opts.seed;
        cfg.workers = pt_opts.workers;
        std::vector<Field> bumps;
        const Vec centers = parse_csv(pt_centers);
        for (double cx : centers) {
            bumps.push_back(make_analytic_field(
                pt_opts.n,
                [cx](std::span<const double> x) {
                    double d2 = (x[0] - cx) * (x[0] - cx);
                    for (std::size_t a = 1; a < x.size(); ++a) d2 += x[a] * x[a];
                    return std::exp(-2.0 * d2);
                },
                1.0, 64.0));
        }
        const auto outcomes = perturbation_test(f, bumps, pt_eps, pt_opts.n, pt_opts.k, cfg);
        json rep;
        double worst = -1e300;
        json list = json::array();
        for (std::size_t i = 0; i < outcomes.size(); ++i) {
            json o;
            o["bump_center"] = centers[i];
            o["diff"] = outcomes[i].diff;
            o["stderr"] = outcomes[i].sigma;
            o["perturbed_ratio"] = outcomes[i].perturbed.value;
            list.push_back(o);
            worst = std::max(worst, outcomes[i].diff);
        }
        rep["value"] = worst; // largest ratio gain over the bump family
        rep["eps"] = pt_eps;
        rep["perturbations"] = list;
        rep["samples"] = cfg.transform_samples;
        rep["seed"] = cfg.seed;
        rep["params"] = params_json(pt_opts, "perturb");
        rep["params"]["bump_centers"] = pt_centers;
        return emit(rep, pt_opts.out);
    }
    if (sy_cmd->parsed()) {
        validate(sy_opts);
        const Field f = parse_field_spec(sy_opts.field_spec, sy_opts.n, sy_opts.k);
        Field start = f;
        if (f.kind != FieldKind::grid) {
            const Vec lo(sy_opts.n, -sy_extent), hi(sy_opts.n, sy_extent);
            start = make_grid_field(sample_to_grid(f, lo, hi, sy_cells));
        }
        RatioConfig cfg;
        cfg.transform_samples = parse_count(sy_opts.samples);
        cfg.norm_samples = cfg.transform_samples;
        cfg.seed = sy_opts.seed;
        cfg.workers = sy_opts.workers;
        cfg.inner_points = 64;
        const auto schedule = parse_schedule(sy_schedule);
        const SymmetrizeResult res = symmetrize_iterate(start, sy_steps, schedule, sy_opts.n, sy_opts.k, cfg);
        std::string csv = "step,tag,ratio,stderr,distance\n";
        char line[160];
        for (const auto& row : res.trace) {
            std::snprintf(line, sizeof line, "%d,%s,%.9g,%.9g,%.9g\n", row.step, row.tag.c_str(),
                          row.ratio, row.ratio_sigma, row.distance);
            csv += line;
        }
        if (sy_opts.out.empty()) {
            std::cout << csv;
        } else {
            std::ofstream out(sy_opts.out);
            if (!out) throw ParameterError("cannot open output: " + sy_opts.out);
            out << csv;
        }
        return 0;
    }
    if (sf_cmd->parsed()) {
        validate(sf_opts);
        const Field f = parse_field_spec(sf_opts.field_spec, sf_opts.n, sf_opts.k);
        SliceFitConfig cfg;
        cfg.samples = parse_count(sf_opts.samples);
        cfg.seed = sf_opts.seed;
        if (!sf_box.empty()) {
            const Vec nums = parse_csv(sf_box);
            for (std::size_t i = 0; i + 1 < nums.size(); i += 2) {
                cfg.box_lo.push_back(nums[i]);
                cfg.box_hi.push_back(nums[i + 1]);
            }
        }
        const Vec xp = parse_csv(sf_xprime);
        const SliceFitReport r = ellipsoid_slice_fit(f, xp, sf_s, cfg);
        json rep;
        rep["value"] = r.sym_diff_fraction;
        rep["center"] = r.center;
        json axes = json::array();
        for (int i = 0; i < r.axes.rows(); ++i) {
            Vec row(r.axes.cols());
            for (int j = 0; j < r.axes.cols(); ++j) row[j] = r.axes(i, j);
            axes.push_back(row);
        }
        rep["axes"] = axes;
        rep["volume"] = r.volume;
        rep["members"] = r.members;
        rep["samples"] = cfg.samples;
        rep["seed"] = cfg.seed;
        rep["params"] = params_json(sf_opts, "slice-fit");
        rep["params"]["xprime"] = sf_xprime;
        rep["params"]["s"] = sf_s;
        return emit(rep, sf_opts.out);
    }
    if (cv_cmd->parsed()) {
        ConvexityConfig cfg;
        cfg.pairs = cv_pairs;
        cfg.segment_samples = cv_segments;
        cfg.seed = cv_opts.seed;
        double fraction = 0.0;
        if (!cv_set.empty()) {
            json sj;
            if (cv_set.front() == '{') {
                sj = json::parse(cv_set);
            } else {
                std::ifstream in(cv_set);
                if (!in) throw ParameterError("cannot open set spec: " + cv_set);
                in >> sj;
            }
            const IndicatorSet set = parse_set_json(sj);
            const auto [lo, hi] = set.bounds();
            fraction = almost_convexity_probe(
                [&](std::span<const double> x) { return set.contains(x); }, {lo, hi}, set.dim(), cfg);
        } else {
            validate(cv_opts);
            const Field f = parse_field_spec(cv_opts.field_spec, cv_opts.n, cv_opts.k);
            if (cv_box.empty()) throw ParameterError("convexity-probe on a field needs --box");
            const Vec nums = parse_csv(cv_box);
            Vec lo, hi;
            for (std::size_t i = 0; i + 1 < nums.size(); i += 2) {
                lo.push_back(nums[i]);
                hi.push_back(nums[i + 1]);
            }
            fraction = almost_convexity_probe(
                [&](std::span<const double> x) { return f(x) > cv_s; }, {lo, hi}, cv_opts.n, cfg);
        }
        json rep;
        rep["value"] = fraction;
        rep["pairs"] = cv_pairs;
        rep["segments"] = cv_segments;
        rep["seed"] = cfg.seed;
        rep["params"] = params_json(cv_opts, "convexity-probe");
        rep["params"]["set"] = cv_set;
        rep["params"]["s"] = cv_s;
        return emit(rep, cv_opts.out);
    }
    if (re_cmd->parsed()) {
        validate(re_opts);
        const Field f = parse_field_spec(re_opts.field_spec, re_opts.n, re_opts.k);
        Field grid = f;
        if (f.kind != FieldKind::grid) {
            const Vec lo(re_opts.n, -re_extent), hi(re_opts.n, re_extent);
            grid = make_grid_field(sample_to_grid(f, lo, hi, re_cells));
        }
        const Field out_field = re_mode == "slice" ? slice_rearrange(grid, re_opts.k) : full_rearrange(grid);
        if (!re_grid_out.empty()) write_grid_binary(out_field.grid(), re_grid_out);
        json rep;
        rep["value"] = lp_norm(out_field, (re_opts.n + 1.0) / (re_opts.k + 1.0)).value;
        rep["mode"] = re_mode;
        rep["cells"] = out_field.grid().size();
        rep["grid_out"] = re_grid_out;
        rep["seed"] = re_opts.seed;
        rep["params"] = params_json(re_opts, "rearrange");
        return emit(rep, re_opts.out);
    }
    return 2;
}

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return 1;
    } catch (const IterationError& e) {
        std::cerr << "iteration failed: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
