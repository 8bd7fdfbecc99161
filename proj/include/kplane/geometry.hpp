#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "kplane/errors.hpp"
#include "kplane/linalg.hpp"
#include "kplane/rng.hpp"

namespace kplane {

/// Orthonormal frame for a k-dimensional subspace of R^n together with an
/// orthonormal basis of its orthogonal complement.
struct OrthonormalFrame {
    int n = 0;
    int k = 0;
    std::vector<Vec> basis;            // k vectors spanning the subspace
    std::vector<Vec> complement_basis; // n-k vectors spanning the complement

    /// Embed subspace coordinates t in R^k as a point of R^n.
    Vec point(std::span<const double> t) const {
        Vec x(n, 0.0);
        for (int j = 0; j < k; ++j) axpy(t[j], basis[j], x);
        return x;
    }

    /// Embed complement coordinates c in R^{n-k} as a point of R^n.
    Vec complement_point(std::span<const double> c) const {
        Vec x(n, 0.0);
        for (int j = 0; j < n - k; ++j) axpy(c[j], complement_basis[j], x);
        return x;
    }
};

/// Affine k-plane: subspace frame translated by an offset lying in the
/// orthogonal complement of the frame.
struct AffinePlane {
    OrthonormalFrame frame;
    Vec offset; // in R^n, orthogonal to every frame basis vector
};

struct Simplex {
    std::vector<Vec> vertices;
};

/// Barycentric-style interpolation coefficients: row i expresses sample
/// point i as an affine combination of the k+1 anchor points.  Rows 0..k are
/// the Kronecker delta by construction.
struct CoefficientMatrix {
    int n = 0;
    int k = 0;
    std::vector<Vec> b;           // (n+1) rows x (k+1) columns
    std::vector<Vec> base_points; // the n+1 points that generated the rows
};

namespace detail {

// Modified Gram-Schmidt with one re-orthogonalization pass.
inline bool orthonormalize(std::vector<Vec>& vs) {
    for (std::size_t i = 0; i < vs.size(); ++i) {
        for (int pass = 0; pass < 2; ++pass)
            for (std::size_t j = 0; j < i; ++j) axpy(-dot(vs[i], vs[j]), vs[j], vs[i]);
        const double len = norm(vs[i]);
        if (len < 1e-12) return false;
        for (auto& x : vs[i]) x /= len;
    }
    return true;
}

} // namespace detail

/// Haar-distributed orthonormal frame on the Grassmannian of k-planes in R^n.
/// Orthonormalizing i.i.d. Gaussian vectors commutes with rotations, which is
/// exactly the defining invariance.
inline OrthonormalFrame sample_grassmannian(int n, int k, RandomStream& rng) {
    if (k < 1 || k > n - 1) throw DimensionError("sample_grassmannian: need 1 <= k <= n-1");
    std::vector<Vec> vs(n, Vec(n));
    bool ok = false;
    while (!ok) {
        for (auto& v : vs) rng.normal_fill(v);
        ok = detail::orthonormalize(vs);
    }
    OrthonormalFrame frame;
    frame.n = n;
    frame.k = k;
    frame.basis.assign(vs.begin(), vs.begin() + k);
    frame.complement_basis.assign(vs.begin() + k, vs.end());
    return frame;
}

/// Haar-distributed rotation of R^n (orthonormalized Gaussian matrix, rows as
/// an orthonormal set).
inline Matrix random_rotation(int n, RandomStream& rng) {
    std::vector<Vec> vs(n, Vec(n));
    bool ok = false;
    while (!ok) {
        for (auto& v : vs) rng.normal_fill(v);
        ok = detail::orthonormalize(vs);
    }
    Matrix q(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) q(i, j) = vs[i][j];
    if (q.det() < 0)
        for (int j = 0; j < n; ++j) q(n - 1, j) = -q(n - 1, j);
    return q;
}

struct PlaneSample {
    AffinePlane plane;
    double weight; // volume of the offset ball, the importance weight of the draw
};

/// Random affine k-plane: Haar frame plus an offset drawn uniformly from the
/// radius-R ball inside the orthogonal complement.  Lebesgue measure on the
/// complement is infinite, so the truncated draw carries its ball volume as
/// an importance weight.
inline PlaneSample sample_affine_plane(int n, int k, double offset_radius, RandomStream& rng) {
    if (offset_radius <= 0.0) throw ParameterError("sample_affine_plane: offset_radius must be positive");
    PlaneSample s;
    s.plane.frame = sample_grassmannian(n, k, rng);
    const int m = n - k;
    const Vec c = rng.ball_point(m, offset_radius);
    s.plane.offset = s.plane.frame.complement_point(c);
    s.weight = unit_ball_volume(m) * std::pow(offset_radius, m);
    return s;
}

/// Signed m-volume of an (m+1)-vertex simplex in R^m: det of edge vectors
/// over m!.
inline double simplex_volume_signed(const Simplex& s) {
    const int m = static_cast<int>(s.vertices.size()) - 1;
    if (m < 0) throw ParameterError("simplex_volume_signed: no vertices");
    if (m == 0) return 1.0;
    const int ambient = static_cast<int>(s.vertices[0].size());
    if (ambient != m) throw DimensionError("simplex_volume_signed: defined only when ambient dim equals simplex dim");
    Matrix e(m, m);
    for (int i = 0; i < m; ++i) {
        const Vec d = sub(s.vertices[i + 1], s.vertices[0]);
        for (int j = 0; j < m; ++j) e(i, j) = d[j];
    }
    double f = 1.0;
    for (int i = 2; i <= m; ++i) f *= i;
    return e.det() / f;
}

/// Unsigned m-volume; Gram determinant when the ambient dimension exceeds the
/// simplex dimension.  Degenerate simplices return 0.
inline double simplex_volume(const Simplex& s) {
    const int m = static_cast<int>(s.vertices.size()) - 1;
    if (m < 0) throw ParameterError("simplex_volume: no vertices");
    if (m == 0) return 1.0;
    const int ambient = static_cast<int>(s.vertices[0].size());
    if (ambient < m) throw DimensionError("simplex_volume: more vertices than ambient dimension allows");
    if (ambient == m) return std::fabs(simplex_volume_signed(s));
    std::vector<Vec> edges(m);
    for (int i = 0; i < m; ++i) edges[i] = sub(s.vertices[i + 1], s.vertices[0]);
    Matrix gram(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) gram(i, j) = dot(edges[i], edges[j]);
    const double g = gram.det();
    if (g <= 0.0) return 0.0;
    double f = 1.0;
    for (int i = 2; i <= m; ++i) f *= i;
    return std::sqrt(g) / f;
}

namespace detail {

// Signed k-volume of points v_0..v_k in R^k.
inline double signed_volume_points(const std::vector<Vec>& pts) {
    Simplex s{pts};
    return simplex_volume_signed(s);
}

} // namespace detail

/// Interpolation coefficients of the extra points with respect to the anchor
/// simplex, as signed-volume (Cramer) ratios.  The sign matters: for points
/// outside the anchor simplex the affine identity A(x_i) = sum_j b[i][j] v_j
/// only holds with signed coordinates.  Rows 0..k are delta_{ij}.
inline CoefficientMatrix drury_coefficients(const std::vector<Vec>& anchors, const std::vector<Vec>& extras) {
    if (anchors.empty()) throw ParameterError("drury_coefficients: no anchors");
    const int k = static_cast<int>(anchors.size()) - 1;
    const int n = k + static_cast<int>(extras.size());
    for (const auto& a : anchors)
        if (static_cast<int>(a.size()) != k) throw DimensionError("drury_coefficients: anchors must live in R^k");
    const double denom = detail::signed_volume_points(anchors);
    double scale = 0.0;
    for (int j = 1; j <= k; ++j) scale = std::max(scale, norm(sub(anchors[j], anchors[0])));
    if (std::fabs(denom) < 1e-12 * std::max(1e-30, std::pow(scale, k)))
        throw SingularAnchorError("drury_coefficients: degenerate anchor simplex");

    CoefficientMatrix cm;
    cm.n = n;
    cm.k = k;
    cm.base_points = anchors;
    cm.base_points.insert(cm.base_points.end(), extras.begin(), extras.end());
    cm.b.assign(n + 1, Vec(k + 1, 0.0));
    for (int i = 0; i <= k; ++i) cm.b[i][i] = 1.0;
    std::vector<Vec> work = anchors;
    for (int e = 0; e < static_cast<int>(extras.size()); ++e) {
        const int i = k + 1 + e;
        for (int j = 0; j <= k; ++j) {
            work[j] = extras[e];
            cm.b[i][j] = detail::signed_volume_points(work) / denom;
            work[j] = anchors[j];
        }
    }
    return cm;
}

/// k+1 unit vectors at the vertices of a regular k-simplex centered at the
/// origin: omitting any one vertex leaves a simplex of the same volume, and
/// the centroid has equal interpolation weight 1/(k+1) on all of them.
inline std::vector<Vec> regular_simplex_directions(int k) {
    if (k < 1) throw DimensionError("regular_simplex_directions: k >= 1 required");
    // Vertices e_i - centroid of the standard simplex in R^{k+1}, expressed in
    // an orthonormal basis of the hyperplane {sum x = 0}, then normalized.
    std::vector<Vec> plane_basis(k, Vec(k + 1, 0.0));
    for (int j = 0; j < k; ++j) {
        plane_basis[j][j] = 1.0;
        plane_basis[j][k] = -1.0;
    }
    detail::orthonormalize(plane_basis);
    std::vector<Vec> dirs(k + 1, Vec(k, 0.0));
    for (int i = 0; i <= k; ++i) {
        Vec v(k + 1, -1.0 / (k + 1));
        v[i] += 1.0;
        for (int j = 0; j < k; ++j) dirs[i][j] = dot(v, plane_basis[j]);
        const double len = norm(dirs[i]);
        for (auto& x : dirs[i]) x /= len;
    }
    return dirs;
}

} // namespace kplane
