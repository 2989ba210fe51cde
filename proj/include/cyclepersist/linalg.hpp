#pragma once

// Fixed-size 2-vectors and 2x2 matrices used throughout the planar toolkit.

#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <utility>

namespace cyclepersist {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    constexpr Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
    constexpr Vec2& operator*=(double s) { x *= s; y *= s; return *this; }
    friend constexpr Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
    friend constexpr Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
    friend constexpr Vec2 operator-(const Vec2& a) { return {-a.x, -a.y}; }
    friend constexpr Vec2 operator*(double s, Vec2 a) { return a *= s; }
    friend constexpr Vec2 operator*(Vec2 a, double s) { return a *= s; }
    friend constexpr Vec2 operator/(Vec2 a, double s) { return {a.x / s, a.y / s}; }
    friend constexpr bool operator==(const Vec2&, const Vec2&) = default;
};

constexpr double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Vec2& a) { return std::hypot(a.x, a.y); }
inline bool is_finite(const Vec2& a) { return std::isfinite(a.x) && std::isfinite(a.y); }

/// a rotated by pi/2 clockwise: (x, y) -> (y, -x).
constexpr Vec2 perp(const Vec2& a) { return {a.y, -a.x}; }

/// Row-major 2x2 matrix.
struct Mat2 {
    double a11 = 0.0, a12 = 0.0;
    double a21 = 0.0, a22 = 0.0;

    static constexpr Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
    static constexpr Mat2 from_columns(const Vec2& c1, const Vec2& c2) {
        return {c1.x, c2.x, c1.y, c2.y};
    }

    constexpr Vec2 col1() const { return {a11, a21}; }
    constexpr Vec2 col2() const { return {a12, a22}; }
    constexpr double trace() const { return a11 + a22; }
    constexpr double det() const { return a11 * a22 - a12 * a21; }
    constexpr Mat2 transpose() const { return {a11, a21, a12, a22}; }

    Mat2 inverse() const {
        const double d = det();
        return {a22 / d, -a12 / d, -a21 / d, a11 / d};
    }

    double max_abs() const {
        return std::max(std::max(std::abs(a11), std::abs(a12)),
                        std::max(std::abs(a21), std::abs(a22)));
    }

    friend constexpr Vec2 operator*(const Mat2& m, const Vec2& v) {
        return {m.a11 * v.x + m.a12 * v.y, m.a21 * v.x + m.a22 * v.y};
    }
    friend constexpr Mat2 operator*(const Mat2& m, const Mat2& n) {
        return {m.a11 * n.a11 + m.a12 * n.a21, m.a11 * n.a12 + m.a12 * n.a22,
                m.a21 * n.a11 + m.a22 * n.a21, m.a21 * n.a12 + m.a22 * n.a22};
    }
    friend constexpr Mat2 operator-(const Mat2& m, const Mat2& n) {
        return {m.a11 - n.a11, m.a12 - n.a12, m.a21 - n.a21, m.a22 - n.a22};
    }
    friend constexpr Mat2 operator+(const Mat2& m, const Mat2& n) {
        return {m.a11 + n.a11, m.a12 + n.a12, m.a21 + n.a21, m.a22 + n.a22};
    }
    friend constexpr Mat2 operator*(double s, const Mat2& m) {
        return {s * m.a11, s * m.a12, s * m.a21, s * m.a22};
    }
};

inline bool is_finite(const Mat2& m) {
    return std::isfinite(m.a11) && std::isfinite(m.a12) && std::isfinite(m.a21) &&
           std::isfinite(m.a22);
}

struct RealEigen {
    double value;
    Vec2 vector;  // unit length
};

/// Real eigenpairs of a 2x2 matrix, ordered by decreasing |value|.
/// Returns nullopt when the spectrum is complex.
///
/// The smaller eigenvalue is taken as det/larger, which keeps full relative
/// accuracy when the two magnitudes are far apart.
inline std::optional<std::pair<RealEigen, RealEigen>> real_eigen(const Mat2& m) {
    const double half_tr = 0.5 * m.trace();
    const double disc = half_tr * half_tr - m.det();
    if (disc < 0.0) return std::nullopt;
    const double root = std::sqrt(disc);
    const double big = half_tr >= 0.0 ? half_tr + root : half_tr - root;
    const double small = big != 0.0 ? m.det() / big : 0.0;

    auto vector_for = [&m](double lambda) {
        // Null vector of (m - lambda I); pick the better-conditioned row.
        const Vec2 r1{m.a11 - lambda, m.a12};
        const Vec2 r2{m.a21, m.a22 - lambda};
        const Vec2 row = norm(r1) >= norm(r2) ? r1 : r2;
        Vec2 v{-row.y, row.x};
        const double n = norm(v);
        if (n == 0.0) return Vec2{1.0, 0.0};
        return v / n;
    };
    return std::pair{RealEigen{big, vector_for(big)}, RealEigen{small, vector_for(small)}};
}

}  // namespace cyclepersist
