// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sdfscene/loss.hpp"
#include "sdfscene/optim.hpp"
#include "sdfscene/rng.hpp"

#include <functional>
#include <optional>
#include <variant>

namespace sdfscene {

// Analysis-by-synthesis: the encoder network is replaced by gradient descent
// on the scene latent against an RGB-D target. Slots are brought in one at a
// time, seeded from the unexplained residual, then refined jointly.

struct FitConfig {
    int slots = 1;
    int steps_per_phase = 350;
    int final_steps = 500;
    double lr = 1e-2; // fit-mode Adam rate; 1e-4 is the encoder-training preset
    uint64_t seed = 0;

    RayMarchConfig march;
    LossWeights weights;
    BlurSchedule blur;

    // New-slot template.
    ShapeRep shape_rep = ShapeRep::Analytic;
    PrimitiveKind slot_kind = PrimitiveKind::Box;
    double axis_min = 0.7, axis_max = 1.3;
    double scale_min = 0.625, scale_max = 1.25;
    TextureRep texture_rep = TextureRep::Constant;
    int shape_code_dim = 8;
    int texture_code_dim = 7;

    // Residual level (blurred color + weighted depth) below which the image
    // counts as explained and surplus slots are parked out of view.
    double explained_threshold = 0.05;

    void validate() const {
        if (slots < 1) throw std::invalid_argument("fit: need at least one slot");
        if (steps_per_phase < 1 || final_steps < 0)
            throw std::invalid_argument("fit: step budgets must be positive");
        march.validate();
    }
    int64_t total_steps() const {
        return static_cast<int64_t>(slots) * steps_per_phase + final_steps;
    }
};

struct LossPoint {
    int64_t step = 0;
    LossReport report; // gradient omitted in history entries
};

struct FitResult {
    SceneLatent scene;
    std::vector<LossPoint> history;
    double best_loss = 0.0;
};

struct SlotSeed {
    bool fully_explained = false;
    ObjectExtrinsics ext;
    Vec3d color{0.5, 0.5, 0.5}; // mean target color near the residual peak
    double peak_residual = 0.0;
};

// Finds the pixel with the largest blurred residual, back-projects it through
// the target depth and seeds a slot at the ground projection of that point.
SlotSeed init_next_slot(const ImageRgb& target_rgb, const ImageDepth& target_depth,
                        const SceneRender& current, const CameraModel& cam, const FitConfig& cfg);

using SnapshotFn = std::function<void(int phase, const SceneLatent&)>;

FitResult fit_scene(const ImageRgb& target_rgb, const ImageDepth& target_depth,
                    const CameraModel& cam, const FitConfig& cfg, const FieldSet& fields,
                    const SnapshotFn& snapshot = nullptr);

// ---- latent-space scene edits -------------------------------------------------

struct EditSwapPositions {
    int a = 0, b = 0;
};
struct EditRemove {
    int index = 0;
};
struct EditSetShapeKind {
    int index = 0;
    PrimitiveKind kind = PrimitiveKind::Box;
};
struct EditSetShapeCode {
    int index = 0;
    std::vector<double> code;
};
struct EditSetTexture {
    int index = 0;
    Vec3d rgb{0.5, 0.5, 0.5};
};
struct EditSetPose {
    int index = 0;
    Vec3d position{0, 0, 0};
    double theta = 0.0;
    std::optional<double> scale; // squashed value within the slot's bounds
};

using SceneEdit = std::variant<EditSwapPositions, EditRemove, EditSetShapeKind, EditSetShapeCode,
                               EditSetTexture, EditSetPose>;

SceneLatent apply_edit(const SceneLatent& scene, const SceneEdit& edit);

struct PoseSampleRange {
    double position_min = -1.5;
    double position_max = 1.5;
    int max_attempts = 100;
};

// Rejection-samples a collision-free pose for one slot: position within range,
// rotation uniform, height kept; accepted only with zero pairwise
// intersection loss against every other slot and a zero ground hinge.
std::optional<SceneLatent> sample_valid_pose(const SceneLatent& scene, int slot,
                                             const PoseSampleRange& range, Rng& rng,
                                             const FieldSet& fields, int intersection_samples = 10);

} // namespace sdfscene
