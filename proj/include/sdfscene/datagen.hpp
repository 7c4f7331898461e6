// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sdfscene/render.hpp"
#include "sdfscene/rng.hpp"

#include <string>

namespace sdfscene {

// Clevr-style sampler: colored primitives with random per-axis stretch,
// rotation and scale, placed on the ground plane with certified pairwise
// non-intersection. Full occlusion is allowed.

struct SceneSampleConfig {
    double position_range = 1.5; // latent positions in [-range, range]^2
    double axis_min = 0.7, axis_max = 1.3;
    double scale_min = 0.625, scale_max = 1.25;
    std::vector<PrimitiveKind> kinds = {PrimitiveKind::Sphere, PrimitiveKind::Box,
                                        PrimitiveKind::Cylinder};
    double color_min = 0.1, color_max = 0.9;
    double separation_margin = 0.02; // bounding-sphere gap
    int max_object_attempts = 200;
    int max_scene_restarts = 80;
    int certify_samples = 32; // K for the intersection-loss certificate
};

// World-space bounding-sphere radius of a slot's shape.
double slot_bounding_radius(const SlotLatent& slot);

// Rejection-samples until every invariant holds: positions in range, resting
// on the ground, pairwise disjoint bounding spheres, zero intersection loss.
SceneLatent sample_scene_latent(int count, Rng& rng, const SceneSampleConfig& cfg);

struct DatasetManifest {
    int train = 180, val = 20, test = 50; // scene ids are split in this order
    int width = 64, height = 64;
    int objects = 3;
    uint64_t seed = 0;
    double noise_sigma = 0.0; // additive Gaussian RGB noise
    int render_steps = 96;    // ground-truth marching resolution
    double far = 12.0;
    SceneSampleConfig sample;

    int total() const { return train + val + test; }
};

std::string manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const std::string& text);
void write_manifest(const std::string& path, const DatasetManifest& m);
DatasetManifest read_manifest(const std::string& path);

// Deterministic per-id scene; parallel generation cannot change outputs.
SceneDoc sample_scene_doc(const DatasetManifest& m, uint64_t scene_id);

// Writes scenes/NNNNNN.scene, rgb/NNNNNN.png, depth/NNNNNN.f32 and
// mask/NNNNNN.png (0 background, i = slot i) plus manifest.json at the root.
void generate_dataset(const DatasetManifest& m, const std::string& out_dir, int threads = 1);

std::string scene_id_string(uint64_t id);

} // namespace sdfscene
