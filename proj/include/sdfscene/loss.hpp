// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sdfscene/render.hpp"

#include <cstdint>
#include <string>

namespace sdfscene {

struct LossWeights {
    double image = 1.0;
    double depth = 0.1; // 0.05 is the composed-models preset
    double ground = 0.01;
    double shape_start = 0.025; // decays linearly to shape_end
    double shape_end = 0.0025;
    double in_view = 0.005;
    double intersection = 0.001;
    bool in_view_y_axis = true; // apply the visibility hinge to y as well as x
    int intersection_samples = 10;
};

struct BlurSchedule {
    int kernel = 16;
    double sigma_start = 16.0 / 3.0;
    double sigma_end = 0.5;
};

inline double blur_sigma_at(const BlurSchedule& s, int64_t step, int64_t decay_steps) {
    if (step <= 0) return s.sigma_start;
    if (step >= decay_steps) return s.sigma_end;
    const double f = static_cast<double>(step) / static_cast<double>(decay_steps);
    return s.sigma_start + (s.sigma_end - s.sigma_start) * f;
}

inline double lambda_shape_at(const LossWeights& w, int64_t step, int64_t decay_steps) {
    if (step <= 0) return w.shape_start;
    if (step >= decay_steps) return w.shape_end;
    const double f = static_cast<double>(step) / static_cast<double>(decay_steps);
    return w.shape_start + (w.shape_end - w.shape_start) * f;
}

// Sampled, normalized Gaussian. Even lengths center on a half sample, which
// shifts both operands of a matched loss identically.
struct BlurKernel {
    std::vector<double> w;
    int offset0 = 0; // displacement of the first tap
};

BlurKernel make_blur_kernel(int length, double sigma);

namespace detail {

template <typename T>
T kernel_dot_row(const Image<T>& img, const BlurKernel& k, int x, int y, bool horizontal) {
    const int limit = horizontal ? img.width : img.height;
    if constexpr (std::is_same_v<T, double>) {
        double acc = 0.0;
        for (size_t i = 0; i < k.w.size(); ++i) {
            int t = (horizontal ? x : y) + k.offset0 + static_cast<int>(i);
            t = std::clamp(t, 0, limit - 1); // replicate padding
            acc += k.w[i] * (horizontal ? img.at(t, y) : img.at(x, t));
        }
        return acc;
    } else {
        Tape& tape = detail::need_tape();
        FusedAccum acc(tape);
        for (size_t i = 0; i < k.w.size(); ++i) {
            int t = (horizontal ? x : y) + k.offset0 + static_cast<int>(i);
            t = std::clamp(t, 0, limit - 1);
            acc.add(horizontal ? img.at(t, y) : img.at(x, t), k.w[i]);
        }
        return acc.done();
    }
}

} // namespace detail

// Separable convolution with replicate boundary padding.
template <typename T>
Image<T> gaussian_blur(const Image<T>& img, double sigma, int kernel_length) {
    const BlurKernel k = make_blur_kernel(kernel_length, sigma);
    Image<T> tmp(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            tmp.at(x, y) = detail::kernel_dot_row(img, k, x, y, true);
    Image<T> out(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            out.at(x, y) = detail::kernel_dot_row(tmp, k, x, y, false);
    return out;
}

template <typename T>
Image<Vec3<T>> gaussian_blur_rgb(const Image<Vec3<T>>& img, double sigma, int kernel_length) {
    Image<T> ch(img.width, img.height);
    Image<Vec3<T>> out(img.width, img.height);
    for (int c = 0; c < 3; ++c) {
        for (size_t i = 0; i < img.pixels.size(); ++i) ch.pixels[i] = img.pixels[i][c];
        Image<T> blurred = gaussian_blur(ch, sigma, kernel_length);
        for (size_t i = 0; i < img.pixels.size(); ++i) out.pixels[i][c] = blurred.pixels[i];
    }
    return out;
}

// L_I: mean over pixels of the squared RGB norm of the blurred difference.
template <typename T>
T loss_image(const Image<Vec3<T>>& pred, const ImageRgb& target, double sigma, int kernel_length) {
    if (!pred.same_size(target.width, target.height))
        throw std::invalid_argument("loss_image: dimension mismatch");
    const Image<Vec3<T>> gp = gaussian_blur_rgb(pred, sigma, kernel_length);
    const ImageRgb gt = gaussian_blur_rgb(target, sigma, kernel_length);
    T acc(0.0);
    for (size_t i = 0; i < gp.pixels.size(); ++i) {
        const Vec3<T>& p = gp.pixels[i];
        const Vec3d& t = gt.pixels[i];
        acc += sq(p.x - T(t.x)) + sq(p.y - T(t.y)) + sq(p.z - T(t.z));
    }
    return acc / T(static_cast<double>(gp.pixels.size()));
}

// L_D: mean absolute blurred-depth difference (unsquared norm).
template <typename T>
T loss_depth(const Image<T>& pred, const ImageDepth& target, double sigma, int kernel_length) {
    if (!pred.same_size(target.width, target.height))
        throw std::invalid_argument("loss_depth: dimension mismatch");
    const Image<T> gp = gaussian_blur(pred, sigma, kernel_length);
    const ImageDepth gt = gaussian_blur(target, sigma, kernel_length);
    T acc(0.0);
    for (size_t i = 0; i < gp.pixels.size(); ++i) acc += abs(gp.pixels[i] - T(gt.pixels[i]));
    return acc / T(static_cast<double>(gp.pixels.size()));
}

// L_gr: hinge on the position's world z plus hinge on the SDF at the position's
// ground projection, summed over objects.
template <typename T>
T loss_ground(const SceneLatentT<T>& scene, const FieldSet& fields) {
    T acc(0.0);
    for (const auto& slot : scene.slots) {
        acc += relu(-slot.ext.position.z);
        const Transform4<T> w2o = world_to_object(slot.ext);
        const Vec3<T> projected{slot.ext.position.x, slot.ext.position.y, T(0.0)};
        const T phi = eval_slot_sdf(slot, fields, w2o.apply(projected));
        acc += relu(-phi);
    }
    return acc;
}

// L_sh: squared norms of the shape codes (analytic slots contribute nothing).
template <typename T>
T loss_shape_reg(const SceneLatentT<T>& scene) {
    T acc(0.0);
    for (const auto& slot : scene.slots) {
        if (slot.shape_rep != ShapeRep::Code) continue;
        for (const T& c : slot.shape_code) acc += sq(c);
    }
    return acc;
}

// L_p: hinge pushing the projected object center inside the image; centers
// behind the camera pay the full width (and height) penalty.
template <typename T>
T loss_in_view(const SceneLatentT<T>& scene, const CameraModel& cam, bool include_y) {
    const Transform4d world_to_cam = rigid_inverse(cam.cam_to_world);
    const Transform4<T> w2c = lift_transform<T>(world_to_cam);
    const double k = cam.pixel_scale();
    const double w = cam.width, h = cam.height;
    T acc(0.0);
    for (const auto& slot : scene.slots) {
        const Vec3<T> pc = w2c.apply(world_center(slot.ext));
        if (value_of(pc.z) <= 1e-6) {
            acc += T(include_y ? w + h : w);
            continue;
        }
        const T px = pc.x / pc.z / T(k) + T(0.5 * w);
        acc += relu(-min(px, T(w) - px));
        if (include_y) {
            const T py = pc.y / pc.z / T(k) + T(0.5 * h);
            acc += relu(-min(py, T(h) - py));
        }
    }
    return acc;
}

// Pairwise slot term of L_int: mean hinge of the negated SDF sum over K points
// spread evenly strictly between the two world centers.
template <typename T>
T slot_pair_intersection(const SlotLatentT<T>& a, const SlotLatentT<T>& b, const FieldSet& fields,
                         int samples) {
    if (samples < 1) throw std::invalid_argument("loss_intersection: need K >= 1");
    const Vec3<T> ca = world_center(a.ext);
    const Vec3<T> cb = world_center(b.ext);
    const Transform4<T> w2o_a = world_to_object(a.ext);
    const Transform4<T> w2o_b = world_to_object(b.ext);
    T acc(0.0);
    for (int k = 1; k <= samples; ++k) {
        const double f = static_cast<double>(k) / static_cast<double>(samples + 1);
        const Vec3<T> x = ca + (cb - ca) * T(f);
        const T phi_a = eval_slot_sdf(a, fields, w2o_a.apply(x));
        const T phi_b = eval_slot_sdf(b, fields, w2o_b.apply(x));
        acc += relu(-(phi_a + phi_b));
    }
    return acc / T(static_cast<double>(samples));
}

template <typename T>
T loss_intersection(const SceneLatentT<T>& scene, const FieldSet& fields, int samples) {
    T acc(0.0);
    for (size_t i = 0; i < scene.slots.size(); ++i)
        for (size_t j = 0; j < i; ++j)
            acc += slot_pair_intersection(scene.slots[i], scene.slots[j], fields, samples);
    return acc;
}

struct LossConfig {
    LossWeights weights;
    BlurSchedule blur;
    int64_t step = 0;
    int64_t blur_decay_steps = 250000;
    int64_t lambda_decay_steps = 500000;
};

template <typename T>
struct LossTerms {
    T image{0.0}, depth{0.0}, ground{0.0}, shape_reg{0.0}, in_view{0.0}, intersection{0.0};
    T total{0.0};
    double sigma = 0.0;
    double lambda_shape = 0.0;
};

// Renders the scene and evaluates every enabled term; terms with zero weight
// are skipped entirely.
template <typename T>
LossTerms<T> eval_losses(const SceneLatentT<T>& scene, const FieldSet& fields,
                         const ImageRgb& target_rgb, const ImageDepth& target_depth,
                         const CameraModel& cam, const RayMarchConfig& rmc, const LossConfig& lc) {
    LossTerms<T> r;
    r.sigma = blur_sigma_at(lc.blur, lc.step, lc.blur_decay_steps);
    r.lambda_shape = lambda_shape_at(lc.weights, lc.step, lc.lambda_decay_steps);
    const LossWeights& w = lc.weights;
    if (w.image > 0.0 || w.depth > 0.0) {
        const SceneRenderT<T> sr = render_scene(scene, fields, cam, rmc);
        if (w.image > 0.0) r.image = loss_image(sr.color, target_rgb, r.sigma, lc.blur.kernel);
        if (w.depth > 0.0) r.depth = loss_depth(sr.depth, target_depth, r.sigma, lc.blur.kernel);
    }
    if (w.ground > 0.0) r.ground = loss_ground(scene, fields);
    if (r.lambda_shape > 0.0) r.shape_reg = loss_shape_reg(scene);
    if (w.in_view > 0.0) r.in_view = loss_in_view(scene, cam, w.in_view_y_axis);
    if (w.intersection > 0.0)
        r.intersection = loss_intersection(scene, fields, w.intersection_samples);
    r.total = T(w.image) * r.image + T(w.depth) * r.depth + T(w.ground) * r.ground +
              T(r.lambda_shape) * r.shape_reg + T(w.in_view) * r.in_view +
              T(w.intersection) * r.intersection;
    return r;
}

struct LossReport {
    double image = 0, depth = 0, ground = 0, shape_reg = 0, in_view = 0, intersection = 0;
    double total = 0;
    double sigma = 0, lambda_shape = 0;
    std::vector<double> gradient; // over the flatten order of the scene latent
};

// One tape evaluation: term values plus the gradient over all scene latents.
LossReport total_loss(const SceneLatent& scene, const FieldSet& fields, const ImageRgb& target_rgb,
                      const ImageDepth& target_depth, const CameraModel& cam,
                      const RayMarchConfig& rmc, const LossConfig& lc);

// One line of the loss log (line-delimited JSON).
std::string loss_log_line(int64_t step, const LossReport& report);

} // namespace sdfscene
