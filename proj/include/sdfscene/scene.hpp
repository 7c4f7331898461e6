// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sdfscene/autodiff.hpp"
#include "sdfscene/geometry.hpp"
#include "sdfscene/shape.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sdfscene {

// A scene latent is the unit of optimization: per-object shape, texture and
// extrinsics parameters plus a background color. All bounded quantities are
// stored pre-squash so the flat parameter vector is unconstrained.

enum class ShapeRep : uint8_t { Analytic = 0, Code = 1 };
enum class TextureRep : uint8_t { Constant = 0, Code = 1 };

inline double logit(double p) { return std::log(p / (1.0 - p)); }

template <typename T>
struct SlotLatentT {
    // Shape: an analytic primitive with squashed per-axis stretch, or a code
    // evaluated through the latent-conditioned SDF field.
    ShapeRep shape_rep = ShapeRep::Analytic;
    PrimitiveKind kind = PrimitiveKind::Box;
    Vec3<T> raw_axis{T(0.0), T(0.0), T(0.0)};
    double axis_min = 0.7;
    double axis_max = 1.3;
    std::vector<T> shape_code;

    // Texture: uniform color (logistic-squashed) or a texture-field code.
    TextureRep texture_rep = TextureRep::Constant;
    Vec3<T> raw_color{T(0.0), T(0.0), T(0.0)};
    std::vector<T> texture_code;

    ExtrinsicsT<T> ext;

    Vec3<T> axis_scales() const {
        return {squash_scale(raw_axis.x, axis_min, axis_max),
                squash_scale(raw_axis.y, axis_min, axis_max),
                squash_scale(raw_axis.z, axis_min, axis_max)};
    }
    Vec3<T> constant_color() const {
        return {logistic(raw_color.x), logistic(raw_color.y), logistic(raw_color.z)};
    }
};

template <typename T>
struct SceneLatentT {
    std::vector<SlotLatentT<T>> slots;
    Vec3<T> raw_background{T(0.0), T(0.0), T(0.0)};

    Vec3<T> background_color() const {
        return {logistic(raw_background.x), logistic(raw_background.y), logistic(raw_background.z)};
    }
};

using SlotLatent = SlotLatentT<double>;
using SceneLatent = SceneLatentT<double>;

// Flat parameter order: background(3); per slot shape (3 raw axis | D_sh code),
// texture (3 raw color | D_tex code), extrinsics (position xyz, cos, sin, raw scale).
size_t latent_dim(const SceneLatent& scene);
std::vector<double> flatten(const SceneLatent& scene);
void unflatten(SceneLatent& scene, std::span<const double> flat);

// Leaves every parameter on the tape; handles follow the flatten order.
SceneLatentT<DiffValue> lift(const SceneLatent& scene, Tape& tape, std::vector<int32_t>& handles);

// World-frame center of the shape (origin of the scaled object frame).
template <typename T>
Vec3<T> world_center(const ExtrinsicsT<T>& e) {
    const T inv_s = T(1.0) / squashed_scale(e);
    return e.position * inv_s;
}

// Resolves code-mode slots; analytic slots ignore it.
struct FieldSet {
    const FieldParams* sdf = nullptr;
    const FieldParams* texture = nullptr;
};

template <typename T>
T eval_slot_sdf(const SlotLatentT<T>& slot, const FieldSet& fields, const Vec3<T>& x_obj) {
    if (slot.shape_rep == ShapeRep::Analytic)
        return eval_analytic_sdf(slot.kind, slot.axis_scales(), x_obj);
    if (!fields.sdf) throw std::invalid_argument("slot sdf: code slot without an SDF field");
    return field_eval_sdf(*fields.sdf, std::span<const T>(slot.shape_code), x_obj);
}

template <typename T>
Vec3<T> eval_slot_texture(const SlotLatentT<T>& slot, const FieldSet& fields, const Vec3<T>& x_obj) {
    if (slot.texture_rep == TextureRep::Constant) return slot.constant_color();
    if (!fields.texture) throw std::invalid_argument("slot texture: code slot without a texture field");
    return field_eval_rgb(*fields.texture, std::span<const T>(slot.texture_code), x_obj);
}

// ---- scene document (camera + latent), versioned JSON text -------------------

struct SceneDoc {
    CameraModel camera;
    SceneLatent latent;
};

std::string scene_to_json(const SceneDoc& doc);
SceneDoc scene_from_json(const std::string& text);
void write_scene(const std::string& path, const SceneDoc& doc);
SceneDoc read_scene(const std::string& path);

} // namespace sdfscene
