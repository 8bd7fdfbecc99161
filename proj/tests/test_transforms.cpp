#include "doctest.h"

#include <cmath>
#include <vector>

#include "kplane/transforms.hpp"

using namespace kplane;

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

AffinePlane axis_line(int n, const Vec& offset) {
    // line spanned by e_1, shifted inside its complement
    AffinePlane p;
    p.frame.n = n;
    p.frame.k = 1;
    p.frame.basis = {Vec(n, 0.0)};
    p.frame.basis[0][0] = 1.0;
    for (int a = 1; a < n; ++a) {
        Vec c(n, 0.0);
        c[a] = 1.0;
        p.frame.complement_basis.push_back(c);
    }
    p.offset = offset;
    return p;
}

} // namespace

TEST_CASE("plane transform: Gaussian line-integral oracles") {
    const Field f = gaussian_field(2);
    RandomStream rng(3);
    const OrthonormalFrame frame = sample_grassmannian(2, 1, rng);

    AffinePlane through_origin{frame, Vec{0.0, 0.0}};
    const Estimate a = kplane_transform(f, through_origin, TransformConfig{100000});
    CHECK(std::fabs(a.value - std::sqrt(kPi)) < 1e-8);

    AffinePlane offset_plane{frame, scaled(frame.complement_basis[0], 1.0)};
    const Estimate b = kplane_transform(f, offset_plane, TransformConfig{100000});
    CHECK(std::fabs(b.value - std::sqrt(kPi) / std::exp(1.0)) < 1e-8);

    // standard profile at offset s: pi (1+s^2)^{-1/2}
    const Field ex = standard_extremizer(2, 1);
    for (double s : {0.0, 0.7, 2.5}) {
        AffinePlane pl{frame, scaled(frame.complement_basis[0], s)};
        const Estimate c = kplane_transform(ex, pl, TransformConfig{100000});
        CHECK(c.value == doctest::Approx(kPi / std::sqrt(1.0 + s * s)).epsilon(1e-6));
    }
}

TEST_CASE("plane transform: linearity on shared nodes, positivity, divergence") {
    const Field f = gaussian_field(2);
    const Field g = standard_extremizer(2, 1);
    const Field combo = field_sum(f, g, 0.7, 1.3);
    RandomStream rng(5);
    for (int i = 0; i < 10; ++i) {
        const PlaneSample ps = sample_affine_plane(2, 1, 2.0, rng);
        const TransformConfig cfg{2048, 2.0, false};
        const double tf = kplane_transform(f, ps.plane, cfg).value;
        const double tg = kplane_transform(g, ps.plane, cfg).value;
        const double tc = kplane_transform(combo, ps.plane, cfg).value;
        CHECK(tc == doctest::Approx(0.7 * tf + 1.3 * tg).epsilon(1e-12));
        CHECK(tf >= 0.0);
        CHECK(tg >= 0.0);
    }
    const Field slow = make_analytic_field(2, [](std::span<const double>) { return 1.0; }, 1.0, 0.5);
    CHECK_THROWS_AS(kplane_transform(slow, axis_line(2, Vec{0.0, 0.0})), DivergenceError);
}

TEST_CASE("plane transform: exact chords through indicator shapes") {
    const Field disk = indicator_ball_field({0.0, 0.0}, 1.0);
    const Estimate center = kplane_transform(disk, axis_line(2, Vec{0.0, 0.0}));
    CHECK(center.value == doctest::Approx(2.0));
    CHECK(center.std_err == 0.0);
    const Estimate half = kplane_transform(disk, axis_line(2, Vec{0.0, 0.5}));
    CHECK(half.value == doctest::Approx(2.0 * std::sqrt(0.75)));
    const Estimate miss = kplane_transform(disk, axis_line(2, Vec{0.0, 2.0}));
    CHECK(miss.value == 0.0);

    const Field box = indicator_box_field({0.0, 0.0}, {1.0, 1.0});
    CHECK(kplane_transform(box, axis_line(2, Vec{0.0, 0.5})).value == doctest::Approx(1.0));
}

TEST_CASE("transform norm: closed form for the standard profile") {
    const Field f = standard_extremizer(2, 1);
    McConfig cfg;
    cfg.samples = 300000;
    cfg.seed = 7;
    const Estimate e = lq_transform_norm(f, 2, 1, cfg);
    const double expect = std::pow(2.0 * kPi * kPi * kPi, 1.0 / 3.0);
    CHECK(std::fabs(e.value - expect) < 3.0 * e.std_err + 0.01);
    CHECK(e.std_err < 0.01 * expect);

    // homogeneity: same seed, scaled field, exactly scaled estimate
    const Estimate e2 = lq_transform_norm(field_scale(f, 2.5), 2, 1, cfg);
    CHECK(e2.value == doctest::Approx(2.5 * e.value).epsilon(1e-12));

    const Field zero = make_analytic_field(2, [](std::span<const double>) { return 0.0; }, 1.0, 5.0);
    CHECK(lq_transform_norm(zero, 2, 1, cfg).value == 0.0);
}

TEST_CASE("transform norm: Gaussian oracle and affine covariance") {
    const Field f = gaussian_field(2);
    McConfig cfg;
    cfg.samples = 300000;
    cfg.seed = 11;
    const Estimate e = lq_transform_norm(f, 2, 1, cfg);
    const double expect = std::pow(kPi * kPi / std::sqrt(3.0), 1.0 / 3.0);
    CHECK(std::fabs(e.value - expect) < 3.0 * e.std_err + 0.01);

    // composing with an invertible affine map leaves the norm alone
    Matrix lin(2, 2);
    lin(0, 0) = 1.4;
    lin(0, 1) = 0.3;
    lin(1, 0) = -0.2;
    lin(1, 1) = 0.8;
    const AffineMap phi = AffineMap::make(lin, Vec{0.4, -0.6});
    const Field moved = apply_affine_symmetry(f, phi, 1.5);
    McConfig cfg2 = cfg;
    cfg2.seed = 12;
    const Estimate e2 = lq_transform_norm(moved, 2, 1, cfg2);
    CHECK(std::fabs(e2.value - e.value) < 3.0 * std::hypot(e.std_err, e2.std_err) + 0.01);
}

TEST_CASE("graph transform: box sections and the Gaussian closed form") {
    const Field box = indicator_box_field({0.0, 0.0}, {1.0, 1.0});
    MatrixPlane mp;
    mp.A = Matrix(1, 1);
    mp.b = Vec{0.5};

    mp.A(0, 0) = 0.0;
    CHECK(sharp_transform(box, mp).value == doctest::Approx(1.0));
    mp.A(0, 0) = 1.0;
    CHECK(sharp_transform(box, mp).value == doctest::Approx(0.5));
    mp.A(0, 0) = 0.0;
    mp.b[0] = 2.0;
    CHECK(sharp_transform(box, mp).value == doctest::Approx(0.0));

    // Gaussian: integral of exp(-x^2 - (Ax+b)^2) dx
    const Field f = gaussian_field(2);
    for (double a : {0.0, 0.8, -1.7}) {
        for (double b : {0.0, 0.5, 2.0}) {
            mp.A(0, 0) = a;
            mp.b[0] = b;
            const double expect = std::sqrt(kPi / (1.0 + a * a)) * std::exp(-b * b / (1.0 + a * a));
            CHECK(sharp_transform(f, mp, TransformConfig{8192}).value ==
                  doctest::Approx(expect).epsilon(1e-9));
        }
    }
}

TEST_CASE("graph transform norm: closed forms and the shared constant") {
    // For the standard profile, the graph transform is pi (1+A^2+b^2)^{-1/2},
    // so the cubed norm integrates to 2 pi^4; for the Gaussian, pi^3/sqrt(3).
    McConfig cfg;
    cfg.samples = 200000;
    cfg.seed = 13;
    cfg.inner_points = 512;
    const Field ex = standard_extremizer(2, 1);
    const Estimate se = lq_sharp_norm(ex, 2, 1, cfg);
    const double expect_ex = std::pow(2.0 * std::pow(kPi, 4.0), 1.0 / 3.0);
    CHECK(std::fabs(se.value - expect_ex) < 3.0 * se.std_err + 0.02);

    const Field gs = gaussian_field(2);
    McConfig cfg2 = cfg;
    cfg2.seed = 14;
    const Estimate sg = lq_sharp_norm(gs, 2, 1, cfg2);
    const double expect_gs = std::pow(std::pow(kPi, 3.0) / std::sqrt(3.0), 1.0 / 3.0);
    CHECK(std::fabs(sg.value - expect_gs) < 3.0 * sg.std_err + 0.02);

    // the ratio ||T f|| / ||T-sharp f|| is pi^{-1/3} for both fields
    McConfig tcfg;
    tcfg.samples = 300000;
    tcfg.seed = 15;
    const Estimate te = lq_transform_norm(ex, 2, 1, tcfg);
    const Estimate tg = lq_transform_norm(gs, 2, 1, tcfg);
    const Estimate r1 = ratio_of(te, se), r2 = ratio_of(tg, sg);
    const double shared = std::pow(kPi, -1.0 / 3.0);
    CHECK(std::fabs(r1.value - shared) < 3.0 * r1.std_err + 0.01);
    CHECK(std::fabs(r2.value - shared) < 3.0 * r2.std_err + 0.01);
    CHECK(std::fabs(r1.value - r2.value) < 3.0 * std::hypot(r1.std_err, r2.std_err) + 0.01);

    CHECK(lq_sharp_norm(field_scale(ex, 3.0), 2, 1, cfg).value ==
          doctest::Approx(3.0 * se.value).epsilon(1e-12));

    const Field zero = make_analytic_field(2, [](std::span<const double>) { return 0.0; }, 1.0, 5.0);
    CHECK(lq_sharp_norm(zero, 2, 1, cfg).value == 0.0);
}

TEST_CASE("elliptic lift: the standard profile lifts to the constant 1") {
    const Field f = standard_extremizer(2, 1);
    const HemisphereFn F = elliptic_lift(f, 2, 1);
    RandomStream rng(17);
    for (int i = 0; i < 100; ++i) {
        const Vec theta = fold_to_hemisphere(rng.unit_vector(3));
        CHECK(std::fabs(F(theta) - 1.0) < 1e-12);
    }
    // general family: the lift is c |L theta|^{-(k+1)} for the lifted linear map
    Matrix lin(2, 2);
    lin(0, 0) = 2.0;
    lin(1, 1) = 0.5;
    lin(0, 1) = 0.3;
    const AffineMap phi = AffineMap::make(lin, Vec{0.2, -0.1});
    const Field g = extremizer_field(2, 1, phi, 1.7);
    const HemisphereFn G = elliptic_lift(g, 2, 1);
    for (int i = 0; i < 50; ++i) {
        const Vec theta = fold_to_hemisphere(rng.unit_vector(3));
        Vec lx(3, 0.0);
        lx[0] = 2.0 * theta[0] + 0.3 * theta[1] + 0.2 * theta[2];
        lx[1] = 0.5 * theta[1] - 0.1 * theta[2];
        lx[2] = theta[2];
        CHECK(G(theta) == doctest::Approx(1.7 * std::pow(norm_squared(lx), -1.0)).epsilon(1e-10));
    }
    const Field zero = make_analytic_field(2, [](std::span<const double>) { return 0.0; }, 1.0, 5.0);
    const HemisphereFn Z = elliptic_lift(zero, 2, 1);
    CHECK(Z(fold_to_hemisphere(rng.unit_vector(3))) == 0.0);
}

TEST_CASE("elliptic transform: probability average, constants fixed") {
    HemisphereFn one;
    one.ambient = 3;
    one.eval = [](std::span<const double>) { return 1.0; };
    RandomStream rng(19);
    const OrthonormalFrame pi2 = sample_grassmannian(3, 2, rng);
    CHECK(elliptic_transform(one, pi2, 200, rng).value == doctest::Approx(1.0));

    HemisphereFn c;
    c.ambient = 3;
    c.eval = [](std::span<const double>) { return 3.7; };
    CHECK(elliptic_transform(c, pi2, 200, rng).value == doctest::Approx(3.7));

    const HemisphereFn lift = elliptic_lift(standard_extremizer(2, 1), 2, 1);
    CHECK(elliptic_transform(lift, pi2, 500, rng).value == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("elliptic correspondence: norms match and the constant is shared") {
    McConfig cfg;
    cfg.samples = 150000;
    cfg.seed = 23;
    const EllipticReport gauss = elliptic_norm_check(gaussian_field(2), 2, 1, cfg);
    // c_2 is half the area of the unit sphere in R^3
    CHECK(gauss.hemisphere_area == doctest::Approx(2.0 * kPi));
    CHECK(std::fabs(gauss.norm_match - 1.0) < 3.0 * gauss.norm_match_sigma + 0.01);

    McConfig cfg2 = cfg;
    cfg2.seed = 24;
    const EllipticReport ex = elliptic_norm_check(standard_extremizer(2, 1), 2, 1, cfg2);
    CHECK(std::fabs(ex.norm_match - 1.0) < 3.0 * ex.norm_match_sigma + 0.01);
    // the lift of the standard profile is 1, so its elliptic transform norm is 1
    CHECK(ex.elliptic_transform_norm.value == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::fabs(gauss.composite_constant - ex.composite_constant) <
          3.0 * std::hypot(gauss.composite_sigma, ex.composite_sigma) + 0.01);
}

TEST_CASE("hemisphere reflection R and the lift intertwine with J") {
    HemisphereFn one;
    one.ambient = 3;
    one.eval = [](std::span<const double>) { return 1.0; };
    RandomStream rng(29);
    const HemisphereFn rone = apply_R(one);
    CHECK(rone(fold_to_hemisphere(rng.unit_vector(3))) == 1.0);

    const Field f = gaussian_field(2);
    const HemisphereFn lifted = elliptic_lift(f, 2, 1);
    const HemisphereFn rr = apply_R(apply_R(lifted));
    const HemisphereFn lift_j = elliptic_lift(apply_J(f, 1), 2, 1);
    const HemisphereFn r_lift = apply_R(lifted);
    for (int i = 0; i < 100; ++i) {
        Vec theta = fold_to_hemisphere(rng.unit_vector(3));
        if (std::fabs(theta[0]) < 1e-6) continue;
        CHECK(rr(theta) == doctest::Approx(lifted(theta)).epsilon(1e-12));
        CHECK(lift_j(theta) == doctest::Approx(r_lift(theta)).epsilon(1e-9));
    }
}

TEST_CASE("graph-side reflection intertwines with J") {
    const Field f = gaussian_field(2);
    const Field jf = apply_J(f, 1);
    const TransformConfig cfg{16384, 2.0, false};
    MatrixPlaneFn tf = [&](const MatrixPlane& mp) { return sharp_transform(f, mp, cfg).value; };
    const MatrixPlaneFn rtf = apply_R_sharp(tf);

    RandomStream rng(31);
    MatrixPlane mp;
    mp.A = Matrix(1, 1);
    mp.b = Vec{0.0};
    for (int i = 0; i < 25; ++i) {
        mp.A(0, 0) = rng.uniform(-2.0, 2.0);
        mp.b[0] = rng.uniform(-2.0, 2.0);
        const double lhs = sharp_transform(jf, mp, cfg).value;
        const double rhs = rtf(mp);
        CHECK(std::fabs(lhs - rhs) < 1e-6);
    }

    // applying the swap twice is the identity; constants are unchanged
    MatrixPlaneFn constant = [](const MatrixPlane&) { return 4.2; };
    const MatrixPlaneFn swapped = apply_R_sharp(constant);
    const MatrixPlaneFn twice = apply_R_sharp(apply_R_sharp(tf));
    mp.A(0, 0) = 0.37;
    mp.b[0] = -1.21;
    CHECK(swapped(mp) == 4.2);
    CHECK(twice(mp) == doctest::Approx(tf(mp)).epsilon(1e-12));
}

TEST_CASE("endpoint inequality: the profile ratio dominates test fields") {
    McConfig cfg;
    cfg.samples = 150000;
    cfg.seed = 37;
    const double p = 1.5;
    const double best = std::pow(kPi / 2.0, 1.0 / 3.0);
    const Field fields[] = {gaussian_field(2), indicator_ball_field({0.3, 0.0}, 1.0),
                            indicator_box_field({-1.0, -0.5}, {1.0, 0.5})};
    for (const Field& f : fields) {
        const Estimate num = lq_transform_norm(f, 2, 1, cfg);
        const Estimate den = lp_norm(f, p, NormConfig{300000, cfg.seed});
        const Estimate ratio = ratio_of(num, den);
        CHECK(ratio.value <= best + 3.0 * ratio.std_err + 0.01);
    }
}
