#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "kplane/errors.hpp"

namespace kplane {

using Vec = std::vector<double>;

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm_squared(std::span<const double> a) { return dot(a, a); }

inline double norm(std::span<const double> a) { return std::sqrt(norm_squared(a)); }

inline Vec add(std::span<const double> a, std::span<const double> b) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

inline Vec sub(std::span<const double> a, std::span<const double> b) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline Vec scaled(std::span<const double> a, double c) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = c * a[i];
    return r;
}

inline void axpy(double a, std::span<const double> x, Vec& y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

/// Small dense row-major matrix; everything here runs at desk-scale
/// dimensions, so plain O(n^3) routines are fine.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols, double fill = 0.0) : rows_(rows), cols_(cols), a_(static_cast<std::size_t>(rows) * cols, fill) {}

    static Matrix identity(int n) {
        Matrix m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static Matrix diagonal(std::span<const double> d) {
        Matrix m(static_cast<int>(d.size()), static_cast<int>(d.size()));
        for (std::size_t i = 0; i < d.size(); ++i) m(static_cast<int>(i), static_cast<int>(i)) = d[i];
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    double& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * cols_ + j]; }

    Vec apply(std::span<const double> x) const {
        Vec y(rows_, 0.0);
        for (int i = 0; i < rows_; ++i) {
            double s = 0.0;
            for (int j = 0; j < cols_; ++j) s += (*this)(i, j) * x[j];
            y[i] = s;
        }
        return y;
    }

    Matrix multiply(const Matrix& rhs) const {
        Matrix r(rows_, rhs.cols_);
        for (int i = 0; i < rows_; ++i)
            for (int l = 0; l < cols_; ++l) {
                const double av = (*this)(i, l);
                if (av == 0.0) continue;
                for (int j = 0; j < rhs.cols_; ++j) r(i, j) += av * rhs(l, j);
            }
        return r;
    }

    Matrix transpose() const {
        Matrix t(cols_, rows_);
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    double frobenius() const {
        double s = 0.0;
        for (double v : a_) s += v * v;
        return std::sqrt(s);
    }

    /// Signed determinant by LU with partial pivoting.
    double det() const {
        if (rows_ != cols_) throw DimensionError("det: matrix not square");
        const int n = rows_;
        Matrix lu = *this;
        double d = 1.0;
        for (int c = 0; c < n; ++c) {
            int piv = c;
            double best = std::fabs(lu(c, c));
            for (int r = c + 1; r < n; ++r)
                if (std::fabs(lu(r, c)) > best) {
                    best = std::fabs(lu(r, c));
                    piv = r;
                }
            if (best == 0.0) return 0.0;
            if (piv != c) {
                for (int j = 0; j < n; ++j) std::swap(lu(piv, j), lu(c, j));
                d = -d;
            }
            d *= lu(c, c);
            for (int r = c + 1; r < n; ++r) {
                const double f = lu(r, c) / lu(c, c);
                for (int j = c; j < n; ++j) lu(r, j) -= f * lu(c, j);
            }
        }
        return d;
    }

    Matrix inverse() const {
        if (rows_ != cols_) throw DimensionError("inverse: matrix not square");
        const int n = rows_;
        Matrix aug = *this;
        Matrix inv = identity(n);
        for (int c = 0; c < n; ++c) {
            int piv = c;
            double best = std::fabs(aug(c, c));
            for (int r = c + 1; r < n; ++r)
                if (std::fabs(aug(r, c)) > best) {
                    best = std::fabs(aug(r, c));
                    piv = r;
                }
            if (best < 1e-300) throw SingularMatrixError("inverse: singular matrix");
            if (piv != c)
                for (int j = 0; j < n; ++j) {
                    std::swap(aug(piv, j), aug(c, j));
                    std::swap(inv(piv, j), inv(c, j));
                }
            const double s = 1.0 / aug(c, c);
            for (int j = 0; j < n; ++j) {
                aug(c, j) *= s;
                inv(c, j) *= s;
            }
            for (int r = 0; r < n; ++r) {
                if (r == c) continue;
                const double f = aug(r, c);
                if (f == 0.0) continue;
                for (int j = 0; j < n; ++j) {
                    aug(r, j) -= f * aug(c, j);
                    inv(r, j) -= f * inv(c, j);
                }
            }
        }
        return inv;
    }

    /// Cholesky factor L with L*L^T = this; requires symmetric positive definite.
    Matrix cholesky() const {
        if (rows_ != cols_) throw DimensionError("cholesky: matrix not square");
        const int n = rows_;
        Matrix l(n, n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j <= i; ++j) {
                double s = (*this)(i, j);
                for (int m = 0; m < j; ++m) s -= l(i, m) * l(j, m);
                if (i == j) {
                    if (s <= 0.0) throw SingularMatrixError("cholesky: matrix not positive definite");
                    l(i, i) = std::sqrt(s);
                } else {
                    l(i, j) = s / l(j, j);
                }
            }
        }
        return l;
    }

private:
    int rows_ = 0, cols_ = 0;
    std::vector<double> a_;
};

inline Vec solve(const Matrix& a, std::span<const double> b) {
    Matrix inv = a.inverse();
    return inv.apply(b);
}

/// Volume of the unit ball in R^m.
inline double unit_ball_volume(int m) {
    if (m == 0) return 1.0;
    return std::pow(3.141592653589793238462643383279502884, 0.5 * m) / std::tgamma(0.5 * m + 1.0);
}

/// Surface area of the unit sphere S^{m-1} in R^m.
inline double unit_sphere_area(int m) {
    return 2.0 * std::pow(3.141592653589793238462643383279502884, 0.5 * m) / std::tgamma(0.5 * m);
}

/// Density at radius r of the heavy-tailed proposal from RandomStream::heavy_point.
inline double heavy_density(int m, double r) {
    return m * std::pow(1.0 + r, -(m + 1.0)) / unit_sphere_area(m);
}

} // namespace kplane
