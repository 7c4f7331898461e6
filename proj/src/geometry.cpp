// SPDX-License-Identifier: Apache-2.0
#include "sdfscene/geometry.hpp"

#include <stdexcept>

namespace sdfscene {

CameraModel make_lookat_camera(const Vec3d& eye, const Vec3d& target, const Vec3d& up, double vfov,
                               int width, int height) {
    if (width < 1 || height < 1) throw std::invalid_argument("camera: image size must be at least 1x1");
    if (!(vfov > 0.0) || !(vfov < 3.141592653589793)) throw std::invalid_argument("camera: fov out of (0, pi)");
    const Vec3d forward = normalized(target - eye);
    const Vec3d right_raw = cross(forward, up);
    if (norm(right_raw) < 1e-12) throw std::invalid_argument("camera: view direction parallel to up");
    const Vec3d right = normalized(right_raw);
    const Vec3d down = cross(forward, right);

    CameraModel cam;
    cam.width = width;
    cam.height = height;
    cam.vfov = vfov;
    // Columns: camera x (right), y (image down), z (forward) in world frame.
    cam.cam_to_world.linear(0, 0) = right.x;
    cam.cam_to_world.linear(1, 0) = right.y;
    cam.cam_to_world.linear(2, 0) = right.z;
    cam.cam_to_world.linear(0, 1) = down.x;
    cam.cam_to_world.linear(1, 1) = down.y;
    cam.cam_to_world.linear(2, 1) = down.z;
    cam.cam_to_world.linear(0, 2) = forward.x;
    cam.cam_to_world.linear(1, 2) = forward.y;
    cam.cam_to_world.linear(2, 2) = forward.z;
    cam.cam_to_world.translation = eye;
    return cam;
}

CameraModel default_camera(int width, int height) {
    return make_lookat_camera({0.0, -8.0, 6.0}, {0.0, 0.0, 0.0}, {0.0, 0.0, 1.0},
                              0.7853981633974483, width, height);
}

PixelRay pixel_to_ray(const CameraModel& cam, double px, double py) {
    if (px < 0.0 || px > static_cast<double>(cam.width) || py < 0.0 ||
        py > static_cast<double>(cam.height))
        throw std::out_of_range("pixel_to_ray: pixel outside image bounds");
    const double k = cam.pixel_scale();
    return PixelRay{(px - 0.5 * cam.width) * k, (py - 0.5 * cam.height) * k};
}

double ground_depth(const CameraModel& cam, const PixelRay& ray) {
    const Mat3d& l = cam.cam_to_world.linear;
    // World z component of the (unnormalized) ray direction (ux, uy, 1).
    const double dz = l(2, 0) * ray.ux + l(2, 1) * ray.uy + l(2, 2);
    const double ez = cam.cam_to_world.translation.z;
    if (dz >= -1e-12) return std::numeric_limits<double>::infinity();
    const double d = -ez / dz;
    return d > 0.0 ? d : std::numeric_limits<double>::infinity();
}

} // namespace sdfscene
