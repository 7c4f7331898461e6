// SPDX-License-Identifier: Apache-2.0
#include "sdfscene/fit.hpp"

#include <algorithm>
#include <cmath>

namespace sdfscene {

namespace {

// Flat-vector span [begin, end) of each slot, following the flatten order.
std::vector<std::pair<size_t, size_t>> slot_spans(const SceneLatent& scene) {
    std::vector<std::pair<size_t, size_t>> spans;
    size_t pos = 3; // background
    for (const auto& s : scene.slots) {
        size_t n = 6;
        n += s.shape_rep == ShapeRep::Analytic ? 3 : s.shape_code.size();
        n += s.texture_rep == TextureRep::Constant ? 3 : s.texture_code.size();
        spans.emplace_back(pos, pos + n);
        pos += n;
    }
    return spans;
}

double clamp01_logit(double v) { return logit(std::clamp(v, 0.02, 0.98)); }

SlotLatent make_slot_template(const FitConfig& cfg) {
    SlotLatent s;
    s.shape_rep = cfg.shape_rep;
    s.kind = cfg.slot_kind;
    s.axis_min = cfg.axis_min;
    s.axis_max = cfg.axis_max;
    if (cfg.shape_rep == ShapeRep::Code)
        s.shape_code.assign(static_cast<size_t>(cfg.shape_code_dim), 0.0);
    s.texture_rep = cfg.texture_rep;
    if (cfg.texture_rep == TextureRep::Code)
        s.texture_code.assign(static_cast<size_t>(cfg.texture_code_dim), 0.0);
    s.ext.scale_min = cfg.scale_min;
    s.ext.scale_max = cfg.scale_max;
    return s;
}

// Latent z of a shape resting on the ground; 0.4 * a_z independent of scale.
double rest_position_z(const SlotLatent& s) {
    if (s.shape_rep == ShapeRep::Analytic)
        return kShapeHalfExtent * squash_scale(s.raw_axis.z, s.axis_min, s.axis_max);
    return kShapeHalfExtent;
}

// Out-of-view parking spot for surplus slots, well right of the frustum.
void park_slot(SlotLatent& s) {
    s.ext.raw_scale = 4.0; // near s_max: smallest world footprint
    const double scale = squashed_scale(s.ext);
    s.ext.position = Vec3d{6.0 * scale, 0.0, rest_position_z(s)};
}

void keep_rotation_pair_regular(SceneLatent& scene) {
    for (auto& s : scene.slots) {
        const double n = std::hypot(s.ext.rot_cos, s.ext.rot_sin);
        if (n >= 0.1) continue;
        // Rescale away from the degenerate origin; the encoded angle is
        // invariant under positive rescaling.
        if (n == 0.0) {
            s.ext.rot_cos = 1.0;
            s.ext.rot_sin = 0.0;
        } else {
            s.ext.rot_cos /= n;
            s.ext.rot_sin /= n;
        }
    }
}

} // namespace

SlotSeed init_next_slot(const ImageRgb& target_rgb, const ImageDepth& target_depth,
                        const SceneRender& current, const CameraModel& cam, const FitConfig& cfg) {
    if (!target_rgb.same_size(cam.width, cam.height) ||
        !target_depth.same_size(cam.width, cam.height) ||
        !current.color.same_size(cam.width, cam.height))
        throw std::invalid_argument("init_next_slot: dimension mismatch");

    // Residual magnitude, moderately blurred so the peak lands inside the
    // largest unexplained blob rather than on a mask edge.
    ImageDepth residual(cam.width, cam.height);
    for (size_t i = 0; i < residual.pixels.size(); ++i) {
        const Vec3d dc = target_rgb.pixels[i] - current.color.pixels[i];
        const double dd = std::abs(target_depth.pixels[i] - current.depth.pixels[i]);
        residual.pixels[i] = norm(dc) + cfg.weights.depth * dd;
    }
    const ImageDepth blurred = gaussian_blur(residual, 2.0, cfg.blur.kernel);

    int best_x = 0, best_y = 0;
    double best = -1.0;
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x)
            if (blurred.at(x, y) > best) {
                best = blurred.at(x, y);
                best_x = x;
                best_y = y;
            }

    SlotSeed seed;
    seed.peak_residual = best;
    if (best < cfg.explained_threshold) {
        seed.fully_explained = true;
        return seed;
    }

    // Back-project the peak through the target depth, then drop to the ground.
    const PixelRay ray = pixel_to_ray(cam, best_x + 0.5, best_y + 0.5);
    const double d = target_depth.at(best_x, best_y);
    const Vec3d world = cam.cam_to_world.apply(Vec3d{d * ray.ux, d * ray.uy, d});

    SlotLatent tmpl = make_slot_template(cfg);
    const double s_mid = squash_scale(0.0, cfg.scale_min, cfg.scale_max);
    seed.ext = tmpl.ext;
    seed.ext.position = Vec3d{world.x * s_mid, world.y * s_mid, rest_position_z(tmpl)};

    // Mean target color in a small window around the peak.
    Vec3d sum{0, 0, 0};
    int n = 0;
    for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
            const int x = best_x + dx, y = best_y + dy;
            if (x < 0 || y < 0 || x >= cam.width || y >= cam.height) continue;
            sum += target_rgb.at(x, y);
            ++n;
        }
    seed.color = sum * (1.0 / n);
    return seed;
}

FitResult fit_scene(const ImageRgb& target_rgb, const ImageDepth& target_depth,
                    const CameraModel& cam, const FitConfig& cfg, const FieldSet& fields,
                    const SnapshotFn& snapshot) {
    cfg.validate();
    if (!target_rgb.same_size(cam.width, cam.height) ||
        !target_depth.same_size(cam.width, cam.height))
        throw std::invalid_argument("fit_scene: target dimensions disagree with the camera");

    FitResult result;
    SceneLatent scene;
    std::vector<bool> frozen;

    Vec3d mean{0, 0, 0};
    for (const Vec3d& p : target_rgb.pixels) mean += p;
    mean = mean * (1.0 / static_cast<double>(target_rgb.pixels.size()));
    scene.raw_background =
        Vec3d{clamp01_logit(mean.x), clamp01_logit(mean.y), clamp01_logit(mean.z)};

    LossConfig lc;
    lc.weights = cfg.weights;
    lc.blur = cfg.blur;
    // Schedules re-scale to the fit budget, keeping their endpoint values.
    lc.blur_decay_steps = cfg.total_steps();
    lc.lambda_decay_steps = cfg.total_steps();

    AdamConfig adam_cfg;
    adam_cfg.lr = cfg.lr;

    int64_t global_step = 0;
    double best_loss = std::numeric_limits<double>::infinity();
    std::vector<double> best_flat;

    const auto run_steps = [&](int steps, bool track_best) {
        std::vector<double> flat = flatten(scene);
        AdamState adam(flat.size());
        const auto spans = slot_spans(scene);
        for (int it = 0; it < steps; ++it) {
            lc.step = global_step;
            LossReport rep = total_loss(scene, fields, target_rgb, target_depth, cam, cfg.march, lc);
            if (track_best && rep.total < best_loss) {
                best_loss = rep.total;
                best_flat = flat;
            }
            for (size_t i = 0; i < scene.slots.size(); ++i) {
                if (!frozen[i]) continue;
                for (size_t k = spans[i].first; k < spans[i].second; ++k) rep.gradient[k] = 0.0;
            }
            adam.step(flat, rep.gradient, adam_cfg);
            unflatten(scene, flat);
            keep_rotation_pair_regular(scene);
            flat = flatten(scene);
            rep.gradient.clear();
            rep.gradient.shrink_to_fit();
            result.history.push_back(LossPoint{global_step, std::move(rep)});
            ++global_step;
        }
    };

    for (int phase = 0; phase < cfg.slots; ++phase) {
        const SceneRender current = render_scene(scene, fields, cam, cfg.march);
        const SlotSeed seed = init_next_slot(target_rgb, target_depth, current, cam, cfg);
        SlotLatent slot = make_slot_template(cfg);
        if (seed.fully_explained) {
            park_slot(slot);
            scene.slots.push_back(slot);
            frozen.push_back(true);
        } else {
            slot.ext = seed.ext;
            slot.raw_color = Vec3d{clamp01_logit(seed.color.x), clamp01_logit(seed.color.y),
                                   clamp01_logit(seed.color.z)};
            scene.slots.push_back(slot);
            frozen.push_back(false);
        }
        // Best-so-far retention runs over the full-slot-set stretch of the fit.
        run_steps(cfg.steps_per_phase, phase == cfg.slots - 1);
        if (snapshot) snapshot(phase, scene);
    }

    run_steps(cfg.final_steps, true);

    if (!best_flat.empty()) unflatten(scene, best_flat);
    result.scene = scene;
    result.best_loss = best_loss;
    if (snapshot) snapshot(cfg.slots, scene);
    return result;
}

SceneLatent apply_edit(const SceneLatent& scene, const SceneEdit& edit) {
    SceneLatent out = scene;
    const auto check = [&](int i) {
        if (i < 0 || static_cast<size_t>(i) >= out.slots.size())
            throw std::out_of_range("apply_edit: slot index out of range");
    };
    std::visit(
        [&](const auto& e) {
            using E = std::decay_t<decltype(e)>;
            if constexpr (std::is_same_v<E, EditSwapPositions>) {
                check(e.a);
                check(e.b);
                // Objects trade places on the ground; each keeps its height.
                auto& pa = out.slots[static_cast<size_t>(e.a)].ext.position;
                auto& pb = out.slots[static_cast<size_t>(e.b)].ext.position;
                std::swap(pa.x, pb.x);
                std::swap(pa.y, pb.y);
            } else if constexpr (std::is_same_v<E, EditRemove>) {
                check(e.index);
                out.slots.erase(out.slots.begin() + e.index);
            } else if constexpr (std::is_same_v<E, EditSetShapeKind>) {
                check(e.index);
                auto& s = out.slots[static_cast<size_t>(e.index)];
                s.shape_rep = ShapeRep::Analytic;
                s.kind = e.kind;
            } else if constexpr (std::is_same_v<E, EditSetShapeCode>) {
                check(e.index);
                auto& s = out.slots[static_cast<size_t>(e.index)];
                if (e.code.empty()) throw std::invalid_argument("apply_edit: empty shape code");
                s.shape_rep = ShapeRep::Code;
                s.shape_code = e.code;
            } else if constexpr (std::is_same_v<E, EditSetTexture>) {
                check(e.index);
                auto& s = out.slots[static_cast<size_t>(e.index)];
                s.texture_rep = TextureRep::Constant;
                s.raw_color =
                    Vec3d{clamp01_logit(e.rgb.x), clamp01_logit(e.rgb.y), clamp01_logit(e.rgb.z)};
            } else if constexpr (std::is_same_v<E, EditSetPose>) {
                check(e.index);
                auto& s = out.slots[static_cast<size_t>(e.index)];
                s.ext.position = e.position;
                s.ext.rot_cos = std::cos(e.theta);
                s.ext.rot_sin = std::sin(e.theta);
                if (e.scale) {
                    if (!(*e.scale > s.ext.scale_min) || !(*e.scale < s.ext.scale_max))
                        throw std::invalid_argument("apply_edit: scale outside the slot bounds");
                    const double f =
                        (*e.scale - s.ext.scale_min) / (s.ext.scale_max - s.ext.scale_min);
                    s.ext.raw_scale = logit(f);
                }
            }
        },
        edit);
    return out;
}

std::optional<SceneLatent> sample_valid_pose(const SceneLatent& scene, int slot,
                                             const PoseSampleRange& range, Rng& rng,
                                             const FieldSet& fields, int intersection_samples) {
    if (slot < 0 || static_cast<size_t>(slot) >= scene.slots.size())
        throw std::out_of_range("sample_valid_pose: slot index out of range");
    SceneLatent candidate = scene;
    auto& s = candidate.slots[static_cast<size_t>(slot)];
    for (int attempt = 0; attempt < range.max_attempts; ++attempt) {
        s.ext.position.x = rng.uniform(range.position_min, range.position_max);
        s.ext.position.y = rng.uniform(range.position_min, range.position_max);
        const double theta = rng.uniform(-3.141592653589793, 3.141592653589793);
        s.ext.rot_cos = std::cos(theta);
        s.ext.rot_sin = std::sin(theta);

        if (s.ext.position.z < 0.0) continue;
        const Transform4d w2o = world_to_object(s.ext);
        const Vec3d proj{s.ext.position.x, s.ext.position.y, 0.0};
        if (eval_slot_sdf(s, fields, w2o.apply(proj)) < 0.0) continue;

        bool collides = false;
        for (size_t j = 0; j < candidate.slots.size(); ++j) {
            if (static_cast<int>(j) == slot) continue;
            if (slot_pair_intersection(s, candidate.slots[j], fields, intersection_samples) > 0.0) {
                collides = true;
                break;
            }
        }
        if (!collides) return candidate;
    }
    return std::nullopt;
}

} // namespace sdfscene
