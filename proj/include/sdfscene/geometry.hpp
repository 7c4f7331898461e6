// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sdfscene/autodiff.hpp"
#include "sdfscene/vec.hpp"

#include <limits>

namespace sdfscene {

// World frame: +z up, ground plane z = 0. Object rotations are about the
// vertical axis, encoded as an unnormalized (cos, sin) pair; object scale is
// kept bounded through a logistic squash of an unconstrained parameter.

template <typename T>
struct ExtrinsicsT {
    Vec3<T> position{T(0), T(0), T(0)};
    T rot_cos{1.0};
    T rot_sin{0.0};
    T raw_scale{0.0};
    double scale_min = 0.625;
    double scale_max = 1.25;
};

using ObjectExtrinsics = ExtrinsicsT<double>;

inline double angle_from_two_param(double z_cos, double z_sin) {
    if (z_cos == 0.0 && z_sin == 0.0) throw DomainError("angle_from_two_param: degenerate (0, 0) pair");
    return std::atan2(z_sin, z_cos);
}

template <typename T>
T squash_scale(const T& raw, double s_min, double s_max) {
    if (s_min >= s_max) throw DomainError("squash_scale: s_min must be below s_max");
    return T(s_min) + T(s_max - s_min) * logistic(raw);
}

template <typename T>
T squashed_scale(const ExtrinsicsT<T>& e) {
    return squash_scale(e.raw_scale, e.scale_min, e.scale_max);
}

// Rotation about +z from the unnormalized pair; invariant under positive
// rescaling of the pair.
template <typename T>
Mat3<T> rotation_from_pair(const T& z_cos, const T& z_sin) {
    const T n = sqrt(z_cos * z_cos + z_sin * z_sin);
    const T c = z_cos / n; // division throws on the degenerate (0, 0) pair
    const T s = z_sin / n;
    Mat3<T> r = Mat3<T>::identity();
    r(0, 0) = c;
    r(0, 1) = -s;
    r(1, 0) = s;
    r(1, 1) = c;
    return r;
}

// T_w^o = [ s R^T  -R^T p ; 0 1 ]: world points into scaled object coordinates.
template <typename T>
Transform4<T> world_to_object(const ExtrinsicsT<T>& e) {
    const T s = squashed_scale(e);
    const Mat3<T> rt = rotation_from_pair(e.rot_cos, e.rot_sin).transposed();
    Transform4<T> t;
    t.linear = s * rt;
    t.translation = -(rt * e.position);
    return t;
}

template <typename T>
Transform4<T> lift_transform(const Transform4d& t) {
    Transform4<T> r;
    for (int i = 0; i < 9; ++i) r.linear.m[static_cast<size_t>(i)] = T(t.linear.m[static_cast<size_t>(i)]);
    r.translation = Vec3<T>(T(t.translation.x), T(t.translation.y), T(t.translation.z));
    return r;
}

// Inverse of a transform whose linear part is scale * orthonormal.
template <typename T>
Transform4<T> inverse_scaled_rigid(const Transform4<T>& t, const T& scale) {
    Transform4<T> r;
    const T inv_s2 = T(1.0) / (scale * scale);
    r.linear = inv_s2 * t.linear.transposed();
    r.translation = -(r.linear * t.translation);
    return r;
}

struct CameraModel {
    Transform4d cam_to_world = Transform4d::identity(); // T_c^w
    int width = 64;
    int height = 64;
    double vfov = 0.7853981633974483; // radians

    double tan_half_fov() const { return std::tan(0.5 * vfov); }
    // Normalized-coordinate step per pixel (square pixels, vertical fov).
    double pixel_scale() const { return 2.0 * tan_half_fov() / static_cast<double>(height); }
};

CameraModel make_lookat_camera(const Vec3d& eye, const Vec3d& target, const Vec3d& up, double vfov,
                               int width, int height);

// The generator default: eye (0,-8,6) looking at the origin, 45 deg vertical
// fov at 64x64. Covers the whole object placement range.
CameraModel default_camera(int width = 64, int height = 64);

// Normalized image coordinates: the camera-frame point at depth d along the
// pixel's ray is (d*ux, d*uy, d).
struct PixelRay {
    double ux = 0.0;
    double uy = 0.0;
};

PixelRay pixel_to_ray(const CameraModel& cam, double px, double py);

// Camera -> object composition T_c^o = T_w^o T_c^w.
template <typename T>
Transform4<T> camera_to_object(const ExtrinsicsT<T>& e, const CameraModel& cam) {
    return world_to_object(e).compose(lift_transform<T>(cam.cam_to_world));
}

struct GroundPlane {}; // implicit z = 0, up +z

// Camera depth at which the pixel ray crosses the ground plane, +inf when the
// ray never reaches it in front of the camera.
double ground_depth(const CameraModel& cam, const PixelRay& ray);

} // namespace sdfscene
