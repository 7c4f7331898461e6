// SPDX-License-Identifier: Apache-2.0
#include "sdfscene/datagen.hpp"

#include "sdfscene/loss.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace sdfscene {

using nlohmann::json;

double slot_bounding_radius(const SlotLatent& slot) {
    const double inv_s = 1.0 / squashed_scale(slot.ext);
    if (slot.shape_rep != ShapeRep::Analytic) return kBoundingHalfExtent * std::sqrt(3.0) * inv_s;
    const Vec3d a = slot.axis_scales();
    double r = 0.0;
    switch (slot.kind) {
        case PrimitiveKind::Sphere: r = std::max(a.x, std::max(a.y, a.z)); break;
        case PrimitiveKind::Box: r = norm(a); break;
        default: r = std::hypot(std::max(a.x, a.y), a.z); break;
    }
    return kShapeHalfExtent * r * inv_s;
}

namespace {

// Uniform draw mapped through the squash so the stored raw value stays finite.
double raw_for_uniform(Rng& rng) {
    const double eps = 1e-4;
    return logit(eps + (1.0 - 2.0 * eps) * rng.uniform());
}

SlotLatent sample_slot(Rng& rng, const SceneSampleConfig& cfg) {
    SlotLatent s;
    s.shape_rep = ShapeRep::Analytic;
    s.kind = cfg.kinds[rng.uniform_index(cfg.kinds.size())];
    s.axis_min = cfg.axis_min;
    s.axis_max = cfg.axis_max;
    s.raw_axis = Vec3d{raw_for_uniform(rng), raw_for_uniform(rng), raw_for_uniform(rng)};
    s.texture_rep = TextureRep::Constant;
    s.raw_color = Vec3d{logit(rng.uniform(cfg.color_min, cfg.color_max)),
                        logit(rng.uniform(cfg.color_min, cfg.color_max)),
                        logit(rng.uniform(cfg.color_min, cfg.color_max))};
    s.ext.scale_min = cfg.scale_min;
    s.ext.scale_max = cfg.scale_max;
    s.ext.raw_scale = raw_for_uniform(rng);
    const double theta = rng.uniform(-3.141592653589793, 3.141592653589793);
    s.ext.rot_cos = std::cos(theta);
    s.ext.rot_sin = std::sin(theta);
    s.ext.position.x = rng.uniform(-cfg.position_range, cfg.position_range);
    s.ext.position.y = rng.uniform(-cfg.position_range, cfg.position_range);
    // Rest on the ground: latent z is 0.4 * a_z for every primitive.
    s.ext.position.z = kShapeHalfExtent * s.axis_scales().z;
    return s;
}

} // namespace

SceneLatent sample_scene_latent(int count, Rng& rng, const SceneSampleConfig& cfg) {
    if (count < 1) throw std::invalid_argument("sample_scene: need at least one object");
    const FieldSet no_fields;
    for (int restart = 0; restart <= cfg.max_scene_restarts; ++restart) {
        SceneLatent scene;
        scene.raw_background = Vec3d{logit(rng.uniform(cfg.color_min, cfg.color_max)),
                                     logit(rng.uniform(cfg.color_min, cfg.color_max)),
                                     logit(rng.uniform(cfg.color_min, cfg.color_max))};
        bool scene_ok = true;
        for (int i = 0; i < count && scene_ok; ++i) {
            bool placed = false;
            for (int attempt = 0; attempt < cfg.max_object_attempts; ++attempt) {
                SlotLatent s = sample_slot(rng, cfg);
                const double r = slot_bounding_radius(s);
                const Vec3d c = world_center(s.ext);
                bool clear = true;
                for (const auto& other : scene.slots) {
                    const double need =
                        r + slot_bounding_radius(other) + cfg.separation_margin;
                    if (norm(c - world_center(other.ext)) < need) {
                        clear = false;
                        break;
                    }
                }
                if (!clear) continue;
                scene.slots.push_back(std::move(s));
                placed = true;
                break;
            }
            if (!placed) scene_ok = false;
        }
        if (!scene_ok) continue;

        // Certificate: the disjoint bounding spheres must imply a zero
        // intersection loss; anything else restarts the scene.
        bool certified = true;
        for (size_t i = 0; i < scene.slots.size() && certified; ++i)
            for (size_t j = 0; j < i; ++j)
                if (slot_pair_intersection(scene.slots[i], scene.slots[j], no_fields,
                                           cfg.certify_samples) > 0.0) {
                    certified = false;
                    break;
                }
        if (certified) return scene;
    }
    throw std::runtime_error("sample_scene: rejection budget exhausted (scene too crowded)");
}

namespace {

json sample_config_json(const SceneSampleConfig& c) {
    json j;
    j["position_range"] = c.position_range;
    j["axis_min"] = c.axis_min;
    j["axis_max"] = c.axis_max;
    j["scale_min"] = c.scale_min;
    j["scale_max"] = c.scale_max;
    json kinds = json::array();
    for (PrimitiveKind k : c.kinds)
        kinds.push_back(k == PrimitiveKind::Sphere ? "sphere"
                        : k == PrimitiveKind::Box  ? "box"
                                                   : "cylinder");
    j["kinds"] = kinds;
    j["color_min"] = c.color_min;
    j["color_max"] = c.color_max;
    j["separation_margin"] = c.separation_margin;
    j["max_object_attempts"] = c.max_object_attempts;
    j["max_scene_restarts"] = c.max_scene_restarts;
    j["certify_samples"] = c.certify_samples;
    return j;
}

SceneSampleConfig sample_config_from(const json& j) {
    SceneSampleConfig c;
    c.position_range = j.at("position_range").get<double>();
    c.axis_min = j.at("axis_min").get<double>();
    c.axis_max = j.at("axis_max").get<double>();
    c.scale_min = j.at("scale_min").get<double>();
    c.scale_max = j.at("scale_max").get<double>();
    c.kinds.clear();
    for (const json& k : j.at("kinds")) {
        const std::string s = k.get<std::string>();
        c.kinds.push_back(s == "sphere" ? PrimitiveKind::Sphere
                          : s == "box"  ? PrimitiveKind::Box
                                        : PrimitiveKind::Cylinder);
    }
    c.color_min = j.at("color_min").get<double>();
    c.color_max = j.at("color_max").get<double>();
    c.separation_margin = j.at("separation_margin").get<double>();
    c.max_object_attempts = j.at("max_object_attempts").get<int>();
    c.max_scene_restarts = j.at("max_scene_restarts").get<int>();
    c.certify_samples = j.at("certify_samples").get<int>();
    return c;
}

} // namespace

std::string manifest_to_json(const DatasetManifest& m) {
    json j;
    j["version"] = 1;
    j["train"] = m.train;
    j["val"] = m.val;
    j["test"] = m.test;
    j["width"] = m.width;
    j["height"] = m.height;
    j["objects"] = m.objects;
    j["seed"] = m.seed;
    j["noise_sigma"] = m.noise_sigma;
    j["render_steps"] = m.render_steps;
    j["far"] = m.far;
    j["sample"] = sample_config_json(m.sample);
    return j.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("manifest: JSON parse error: ") + e.what());
    }
    try {
        if (j.at("version").get<int>() != 1) throw std::runtime_error("manifest: unknown version");
        DatasetManifest m;
        m.train = j.at("train").get<int>();
        m.val = j.at("val").get<int>();
        m.test = j.at("test").get<int>();
        m.width = j.at("width").get<int>();
        m.height = j.at("height").get<int>();
        m.objects = j.at("objects").get<int>();
        m.seed = j.at("seed").get<uint64_t>();
        m.noise_sigma = j.at("noise_sigma").get<double>();
        m.render_steps = j.at("render_steps").get<int>();
        m.far = j.at("far").get<double>();
        m.sample = sample_config_from(j.at("sample"));
        return m;
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("manifest: missing or malformed field: ") + e.what());
    }
}

void write_manifest(const std::string& path, const DatasetManifest& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << manifest_to_json(m);
}

DatasetManifest read_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open for reading");
    std::stringstream ss;
    ss << in.rdbuf();
    return manifest_from_json(ss.str());
}

SceneDoc sample_scene_doc(const DatasetManifest& m, uint64_t scene_id) {
    Rng rng = Rng::stream(m.seed, scene_id);
    SceneDoc doc;
    doc.camera = default_camera(m.width, m.height);
    doc.latent = sample_scene_latent(m.objects, rng, m.sample);
    return doc;
}

std::string scene_id_string(uint64_t id) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06llu", static_cast<unsigned long long>(id));
    return buf;
}

void generate_dataset(const DatasetManifest& m, const std::string& out_dir, int threads) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    fs::create_directories(out_dir + "/scenes");
    fs::create_directories(out_dir + "/rgb");
    fs::create_directories(out_dir + "/depth");
    fs::create_directories(out_dir + "/mask");
    write_manifest(out_dir + "/manifest.json", m);

    RayMarchConfig rmc;
    rmc.steps = m.render_steps;
    rmc.far = m.far;

    const int total = m.total();
    const auto emit_scene = [&](int id) {
        const SceneDoc doc = sample_scene_doc(m, static_cast<uint64_t>(id));
        RenderedViews views = render_views(doc, FieldSet{}, rmc);
        if (m.noise_sigma > 0.0) {
            // Noise draws continue the scene's own stream.
            Rng noise = Rng::stream(m.seed, static_cast<uint64_t>(id) + 0x40153e00000000ull);
            for (Vec3d& p : views.rgb.pixels) {
                p.x = std::clamp(p.x + m.noise_sigma * noise.normal(), 0.0, 1.0);
                p.y = std::clamp(p.y + m.noise_sigma * noise.normal(), 0.0, 1.0);
                p.z = std::clamp(p.z + m.noise_sigma * noise.normal(), 0.0, 1.0);
            }
        }
        const std::string tag = scene_id_string(static_cast<uint64_t>(id));
        write_scene(out_dir + "/scenes/" + tag + ".scene", doc);
        write_png_rgb(out_dir + "/rgb/" + tag + ".png", views.rgb);
        write_depth_f32(out_dir + "/depth/" + tag + ".f32", views.depth);
        write_png_gray(out_dir + "/mask/" + tag + ".png", views.ids);
    };

    if (threads <= 1) {
        for (int id = 0; id < total; ++id) emit_scene(id);
        return;
    }
    const int workers = std::min(threads, total);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (int id = w; id < total; id += workers) emit_scene(id);
        });
    for (auto& t : pool) t.join();
}

} // namespace sdfscene
