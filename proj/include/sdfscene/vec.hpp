// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>

namespace sdfscene {

// Small fixed-size linear algebra templated over the scalar type so the same
// geometry code runs on plain doubles and on tape-recorded values.

template <typename T>
struct Vec3 {
    T x{}, y{}, z{};

    Vec3() = default;
    Vec3(T x_, T y_, T z_) : x(std::move(x_)), y(std::move(y_)), z(std::move(z_)) {}

    T& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    const T& operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

    friend Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
    template <typename S>
    friend Vec3 operator*(const Vec3& a, const S& s) { return {a.x * s, a.y * s, a.z * s}; }
    template <typename S>
    friend Vec3 operator*(const S& s, const Vec3& a) { return {a.x * s, a.y * s, a.z * s}; }
    Vec3& operator+=(const Vec3& b) { x = x + b.x; y = y + b.y; z = z + b.z; return *this; }
};

using Vec3d = Vec3<double>;

template <typename T>
T dot(const Vec3<T>& a, const Vec3<T>& b) {
    return a.x * b.x + a.y * b.y + a.z * b.z;
}

inline Vec3d cross(const Vec3d& a, const Vec3d& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3d& a) { return std::sqrt(dot(a, a)); }

inline Vec3d normalized(const Vec3d& a) {
    const double n = norm(a);
    return {a.x / n, a.y / n, a.z / n};
}

template <typename T>
struct Mat3 {
    // Row-major.
    std::array<T, 9> m{};

    static Mat3 identity() {
        Mat3 r;
        r.m = {T(1), T(0), T(0), T(0), T(1), T(0), T(0), T(0), T(1)};
        return r;
    }

    T& operator()(int r, int c) { return m[static_cast<size_t>(3 * r + c)]; }
    const T& operator()(int r, int c) const { return m[static_cast<size_t>(3 * r + c)]; }

    Mat3 transposed() const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                r(i, j) = (*this)(j, i);
        return r;
    }

    friend Vec3<T> operator*(const Mat3& a, const Vec3<T>& v) {
        return {a(0, 0) * v.x + a(0, 1) * v.y + a(0, 2) * v.z,
                a(1, 0) * v.x + a(1, 1) * v.y + a(1, 2) * v.z,
                a(2, 0) * v.x + a(2, 1) * v.y + a(2, 2) * v.z};
    }

    friend Mat3 operator*(const Mat3& a, const Mat3& b) {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                r(i, j) = a(i, 0) * b(0, j) + a(i, 1) * b(1, j) + a(i, 2) * b(2, j);
        return r;
    }

    template <typename S>
    friend Mat3 operator*(const S& s, const Mat3& a) {
        Mat3 r;
        for (int i = 0; i < 9; ++i) r.m[static_cast<size_t>(i)] = s * a.m[static_cast<size_t>(i)];
        return r;
    }
};

using Mat3d = Mat3<double>;

// Homogeneous transform with implicit bottom row (0, 0, 0, 1).
template <typename T>
struct Transform4 {
    Mat3<T> linear = Mat3<T>::identity();
    Vec3<T> translation{T(0), T(0), T(0)};

    static Transform4 identity() { return {}; }

    Vec3<T> apply(const Vec3<T>& p) const { return linear * p + translation; }

    // this ∘ other: applies `other` first.
    Transform4 compose(const Transform4& other) const {
        Transform4 r;
        r.linear = linear * other.linear;
        r.translation = linear * other.translation + translation;
        return r;
    }
};

using Transform4d = Transform4<double>;

// Inverse for rigid transforms (orthonormal linear part).
inline Transform4d rigid_inverse(const Transform4d& t) {
    Transform4d r;
    r.linear = t.linear.transposed();
    r.translation = -(r.linear * t.translation);
    return r;
}

} // namespace sdfscene
