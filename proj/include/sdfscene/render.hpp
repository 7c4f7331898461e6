// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sdfscene/geometry.hpp"
#include "sdfscene/image.hpp"
#include "sdfscene/scene.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace sdfscene {

struct RayMarchConfig {
    int steps = 12;     // equidistant samples per ray, >= 2
    double far = 12.0;  // miss depth, also the depth clip
    bool use_bbox_interval = true;
    double fallback_near = 0.1; // marched interval when the box interval is off
    int threads = 1;            // double-path rendering only

    void validate() const {
        if (steps < 2) throw std::invalid_argument("ray march: need at least 2 steps");
        if (!(far > 0.0)) throw std::invalid_argument("ray march: far must be positive");
    }
};

template <typename T>
struct ObjectRenderT {
    Image<Vec3<T>> color; // meaningful where mask = 1
    Image<T> depth;       // far where mask = 0
    ImageMask mask;
    int x0 = 0, y0 = 0, x1 = -1, y1 = -1; // marched pixel rect, inclusive; empty if x1 < x0
};
using ObjectRender = ObjectRenderT<double>;

template <typename T>
struct SceneRenderT {
    Image<Vec3<T>> color;
    Image<T> depth;
    ImageIndex winner; // -1 background, else slot index
    std::vector<ImageMask> masks;
    ImageMask background_mask;
};
using SceneRender = SceneRenderT<double>;

struct RoiRect {
    int x0 = 0, y0 = 0, x1 = -1, y1 = -1;
    bool empty() const { return x1 < x0 || y1 < y0; }
};

template <typename T>
struct DepthInterval {
    T t_near{0.0};
    T t_far{0.0};
    bool valid = false;
};

namespace detail {

template <typename T>
void march_branch_note(uint64_t bits) {
    if constexpr (std::is_same_v<T, DiffValue>) {
        if (Tape* t = Tape::active()) t->note_branch(bits);
    } else {
        (void)bits;
    }
}

// Bounding cube of the slot's shape in (scaled) object coordinates.
template <typename T>
Vec3<T> bounding_half_extents(const SlotLatentT<T>& slot) {
    if (slot.shape_rep == ShapeRep::Analytic) return slot.axis_scales() * kBoundingHalfExtent;
    return {T(kBoundingHalfExtent), T(kBoundingHalfExtent), T(kBoundingHalfExtent)};
}

inline void parallel_rows(int y0, int y1, int threads, const std::function<void(int)>& body) {
    const int n = y1 - y0 + 1;
    if (threads <= 1 || n < 4) {
        for (int y = y0; y <= y1; ++y) body(y);
        return;
    }
    const int workers = std::min(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (int y = y0 + w; y <= y1; y += workers) body(y);
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace detail

// Projects the corners of the slot's bounding cube; returns the covering pixel
// rectangle (clamped, one pixel of margin) and the conservative camera-depth
// interval spanned by the corners. Behind-camera objects yield an empty rect.
template <typename T>
std::pair<RoiRect, DepthInterval<T>> project_bbox_roi(const SlotLatentT<T>& slot,
                                                      const CameraModel& cam,
                                                      const RayMarchConfig& cfg) {
    const T scale = squashed_scale(slot.ext);
    const Transform4<T> cam_to_obj = camera_to_object(slot.ext, cam);
    const Transform4<T> obj_to_cam = inverse_scaled_rigid(cam_to_obj, scale);
    const Vec3<T> he = detail::bounding_half_extents(slot);

    RoiRect rect;
    DepthInterval<T> interval;
    T z_min(0.0), z_max(0.0);
    double px_min = 0.0, px_max = 0.0, py_min = 0.0, py_max = 0.0;
    int behind = 0;
    const double k = cam.pixel_scale();
    bool first = true;
    for (int cix = 0; cix < 8; ++cix) {
        const Vec3<T> corner{(cix & 1) ? he.x : -he.x, (cix & 2) ? he.y : -he.y,
                             (cix & 4) ? he.z : -he.z};
        const Vec3<T> pc = obj_to_cam.apply(corner);
        if (first) {
            z_min = pc.z;
            z_max = pc.z;
            first = false;
        } else {
            z_min = min(z_min, pc.z);
            z_max = max(z_max, pc.z);
        }
        const double zv = value_of(pc.z);
        if (zv <= 1e-6) {
            ++behind;
            continue;
        }
        const double px = value_of(pc.x) / zv / k + 0.5 * cam.width;
        const double py = value_of(pc.y) / zv / k + 0.5 * cam.height;
        if (behind == cix) { // first projectable corner
            px_min = px_max = px;
            py_min = py_max = py;
        } else {
            px_min = std::min(px_min, px);
            px_max = std::max(px_max, px);
            py_min = std::min(py_min, py);
            py_max = std::max(py_max, py);
        }
    }

    if (behind == 8) return {rect, interval}; // fully behind the camera

    if (behind > 0) {
        // Box straddles the image plane: march the whole image conservatively.
        rect = RoiRect{0, 0, cam.width - 1, cam.height - 1};
        interval.t_near = T(cfg.fallback_near);
        interval.t_far = T(cfg.far);
        interval.valid = true;
        return {rect, interval};
    }

    rect.x0 = std::max(0, static_cast<int>(std::floor(px_min)) - 1);
    rect.y0 = std::max(0, static_cast<int>(std::floor(py_min)) - 1);
    rect.x1 = std::min(cam.width - 1, static_cast<int>(std::ceil(px_max)));
    rect.y1 = std::min(cam.height - 1, static_cast<int>(std::ceil(py_max)));
    if (px_max < 0.0 || px_min > cam.width || py_max < 0.0 || py_min > cam.height)
        rect = RoiRect{}; // outside the frustum

    interval.t_near = max(z_min, T(1e-4));
    interval.t_far = min(z_max, T(cfg.far));
    interval.valid = value_of(interval.t_near) < value_of(interval.t_far);
    if (!interval.valid) rect = RoiRect{};
    return {rect, interval};
}

template <typename T>
struct MarchResult {
    bool hit = false;
    T depth{0.0}; // = far on miss
};

// Equidistant sampling over [t_near, t_far]; the surface depth interpolates
// linearly between the first sample pair whose SDF changes sign from positive.
// A ray already inside at the first sample hits at t_near. The choice of pair
// is a discrete decision: gradients flow through the interpolation only.
template <typename T, typename SdfAlongRay>
MarchResult<T> ray_march_zero_crossing(const SdfAlongRay& sdf, const T& t_near, const T& t_far,
                                       const RayMarchConfig& cfg) {
    const int n = cfg.steps;
    const T delta = (t_far - t_near) / T(static_cast<double>(n - 1));
    T d_prev = t_near;
    T phi_prev = sdf(t_near);
    if (value_of(phi_prev) <= 0.0) {
        detail::march_branch_note<T>(0xA11CE);
        return {true, t_near};
    }
    for (int j = 1; j < n; ++j) {
        const T d_j = t_near + delta * T(static_cast<double>(j));
        const T phi_j = sdf(d_j);
        if (value_of(phi_prev) > 0.0 && value_of(phi_j) <= 0.0) {
            detail::march_branch_note<T>(0xB000 + static_cast<uint64_t>(j));
            const T d_star = d_prev + delta * phi_prev / (phi_prev - phi_j);
            return {true, d_star};
        }
        d_prev = d_j;
        phi_prev = phi_j;
    }
    detail::march_branch_note<T>(0x3155);
    return {false, T(cfg.far)};
}

// Object-wise differentiable render f(z_i) -> (I_i, D_i, M_i).
template <typename T>
ObjectRenderT<T> render_object(const SlotLatentT<T>& slot, const FieldSet& fields,
                               const CameraModel& cam, const RayMarchConfig& cfg) {
    cfg.validate();
    ObjectRenderT<T> out;
    out.color = Image<Vec3<T>>(cam.width, cam.height, Vec3<T>{T(0.0), T(0.0), T(0.0)});
    out.depth = Image<T>(cam.width, cam.height, T(cfg.far));
    out.mask = ImageMask(cam.width, cam.height, 0);

    auto [rect, interval] = project_bbox_roi(slot, cam, cfg);
    if (rect.empty()) return out;
    out.x0 = rect.x0;
    out.y0 = rect.y0;
    out.x1 = rect.x1;
    out.y1 = rect.y1;

    T t_near = interval.t_near;
    T t_far = interval.t_far;
    if (!cfg.use_bbox_interval) {
        t_near = T(cfg.fallback_near);
        t_far = T(cfg.far);
    }

    const T scale = squashed_scale(slot.ext);
    const Transform4<T> cam_to_obj = camera_to_object(slot.ext, cam);
    // Texture is evaluated at the object-frame hit point.
    const bool constant_tex = slot.texture_rep == TextureRep::Constant;
    Vec3<T> const_color{T(0.0), T(0.0), T(0.0)};
    if (constant_tex) const_color = slot.constant_color();
    (void)scale;

    const auto shade_row = [&](int y) {
        for (int x = rect.x0; x <= rect.x1; ++x) {
            const PixelRay ray = pixel_to_ray(cam, x + 0.5, y + 0.5);
            const Vec3<T> dir_obj =
                cam_to_obj.linear * Vec3<T>{T(ray.ux), T(ray.uy), T(1.0)};
            const Vec3<T>& base = cam_to_obj.translation;
            const auto sdf_at = [&](const T& d) {
                return eval_slot_sdf(slot, fields, base + dir_obj * d);
            };
            const MarchResult<T> m = ray_march_zero_crossing(sdf_at, t_near, t_far, cfg);
            if (!m.hit) continue;
            out.depth.at(x, y) = m.depth;
            out.mask.at(x, y) = 1;
            if (constant_tex)
                out.color.at(x, y) = const_color;
            else
                out.color.at(x, y) = eval_slot_texture(slot, fields, base + dir_obj * m.depth);
        }
    };

    if constexpr (std::is_same_v<T, double>) {
        detail::parallel_rows(rect.y0, rect.y1, cfg.threads, shade_row);
    } else {
        for (int y = rect.y0; y <= rect.y1; ++y) shade_row(y);
    }
    return out;
}

// Z-buffer composition over the uniform-color ground-plane background. The
// background depth is the analytic ray/plane intersection clipped at far. An
// object wins a pixel only with a depth strictly below the incumbent; ties
// between objects go to the lowest slot index.
template <typename T>
SceneRenderT<T> compose_scene(std::span<const ObjectRenderT<T>> renders, const Vec3<T>& bg_color,
                              const CameraModel& cam, const RayMarchConfig& cfg) {
    const int w = cam.width, h = cam.height;
    for (const auto& r : renders)
        if (!r.depth.same_size(w, h)) throw std::invalid_argument("compose: size mismatch");

    SceneRenderT<T> out;
    out.color = Image<Vec3<T>>(w, h, bg_color);
    out.depth = Image<T>(w, h, T(cfg.far));
    out.winner = ImageIndex(w, h, -1);
    out.background_mask = ImageMask(w, h, 1);
    out.masks.assign(renders.size(), ImageMask(w, h, 0));

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const PixelRay ray = pixel_to_ray(cam, x + 0.5, y + 0.5);
            const double plane = std::min(ground_depth(cam, ray), cfg.far);
            T best(plane);
            int winner = -1;
            for (size_t i = 0; i < renders.size(); ++i) {
                if (!renders[i].mask.at(x, y)) continue;
                const T& d = renders[i].depth.at(x, y);
                if (value_of(d) < value_of(best)) {
                    best = d;
                    winner = static_cast<int>(i);
                }
            }
            detail::march_branch_note<T>(0xC0DE0000u + static_cast<uint64_t>(winner + 1));
            if (winner >= 0) {
                out.color.at(x, y) = renders[static_cast<size_t>(winner)].color.at(x, y);
                out.depth.at(x, y) = best;
                out.winner.at(x, y) = winner;
                out.masks[static_cast<size_t>(winner)].at(x, y) = 1;
                out.background_mask.at(x, y) = 0;
            } else {
                out.depth.at(x, y) = best;
            }
        }
    }
    return out;
}

template <typename T>
SceneRenderT<T> render_scene(const SceneLatentT<T>& scene, const FieldSet& fields,
                             const CameraModel& cam, const RayMarchConfig& cfg) {
    std::vector<ObjectRenderT<T>> renders;
    renders.reserve(scene.slots.size());
    for (const auto& slot : scene.slots) renders.push_back(render_object(slot, fields, cam, cfg));
    return compose_scene(std::span<const ObjectRenderT<T>>(renders), scene.background_color(), cam,
                         cfg);
}

// Ground-truth style plain render with the instance-id mask image
// (0 background, slot i + 1).
struct RenderedViews {
    ImageRgb rgb;
    ImageDepth depth;
    ImageMask ids;
};

RenderedViews render_views(const SceneDoc& doc, const FieldSet& fields, const RayMarchConfig& cfg);

} // namespace sdfscene
