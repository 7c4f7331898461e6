// SPDX-License-Identifier: Apache-2.0
#include "sdfscene/scene.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace sdfscene {

using nlohmann::json;

namespace {

size_t slot_dim(const SlotLatent& s) {
    size_t n = 6; // position, rotation pair, raw scale
    n += s.shape_rep == ShapeRep::Analytic ? 3 : s.shape_code.size();
    n += s.texture_rep == TextureRep::Constant ? 3 : s.texture_code.size();
    return n;
}

} // namespace

size_t latent_dim(const SceneLatent& scene) {
    size_t n = 3;
    for (const auto& s : scene.slots) n += slot_dim(s);
    return n;
}

std::vector<double> flatten(const SceneLatent& scene) {
    std::vector<double> out;
    out.reserve(latent_dim(scene));
    out.push_back(scene.raw_background.x);
    out.push_back(scene.raw_background.y);
    out.push_back(scene.raw_background.z);
    for (const auto& s : scene.slots) {
        if (s.shape_rep == ShapeRep::Analytic) {
            out.push_back(s.raw_axis.x);
            out.push_back(s.raw_axis.y);
            out.push_back(s.raw_axis.z);
        } else {
            out.insert(out.end(), s.shape_code.begin(), s.shape_code.end());
        }
        if (s.texture_rep == TextureRep::Constant) {
            out.push_back(s.raw_color.x);
            out.push_back(s.raw_color.y);
            out.push_back(s.raw_color.z);
        } else {
            out.insert(out.end(), s.texture_code.begin(), s.texture_code.end());
        }
        out.push_back(s.ext.position.x);
        out.push_back(s.ext.position.y);
        out.push_back(s.ext.position.z);
        out.push_back(s.ext.rot_cos);
        out.push_back(s.ext.rot_sin);
        out.push_back(s.ext.raw_scale);
    }
    return out;
}

void unflatten(SceneLatent& scene, std::span<const double> flat) {
    if (flat.size() != latent_dim(scene))
        throw std::invalid_argument("unflatten: parameter vector size mismatch");
    size_t i = 0;
    scene.raw_background = {flat[i], flat[i + 1], flat[i + 2]};
    i += 3;
    for (auto& s : scene.slots) {
        if (s.shape_rep == ShapeRep::Analytic) {
            s.raw_axis = {flat[i], flat[i + 1], flat[i + 2]};
            i += 3;
        } else {
            for (auto& c : s.shape_code) c = flat[i++];
        }
        if (s.texture_rep == TextureRep::Constant) {
            s.raw_color = {flat[i], flat[i + 1], flat[i + 2]};
            i += 3;
        } else {
            for (auto& c : s.texture_code) c = flat[i++];
        }
        s.ext.position = {flat[i], flat[i + 1], flat[i + 2]};
        i += 3;
        s.ext.rot_cos = flat[i++];
        s.ext.rot_sin = flat[i++];
        s.ext.raw_scale = flat[i++];
    }
}

SceneLatentT<DiffValue> lift(const SceneLatent& scene, Tape& tape, std::vector<int32_t>& handles) {
    const std::vector<double> flat = flatten(scene);
    std::vector<DiffValue> leaves;
    leaves.reserve(flat.size());
    handles.clear();
    handles.reserve(flat.size());
    for (double v : flat) {
        leaves.push_back(tape.leaf(v));
        handles.push_back(leaves.back().idx);
    }

    SceneLatentT<DiffValue> out;
    size_t i = 0;
    out.raw_background = {leaves[i], leaves[i + 1], leaves[i + 2]};
    i += 3;
    for (const auto& s : scene.slots) {
        SlotLatentT<DiffValue> d;
        d.shape_rep = s.shape_rep;
        d.kind = s.kind;
        d.axis_min = s.axis_min;
        d.axis_max = s.axis_max;
        d.texture_rep = s.texture_rep;
        d.ext.scale_min = s.ext.scale_min;
        d.ext.scale_max = s.ext.scale_max;
        if (s.shape_rep == ShapeRep::Analytic) {
            d.raw_axis = {leaves[i], leaves[i + 1], leaves[i + 2]};
            i += 3;
        } else {
            d.shape_code.assign(leaves.begin() + static_cast<long>(i),
                                leaves.begin() + static_cast<long>(i + s.shape_code.size()));
            i += s.shape_code.size();
        }
        if (s.texture_rep == TextureRep::Constant) {
            d.raw_color = {leaves[i], leaves[i + 1], leaves[i + 2]};
            i += 3;
        } else {
            d.texture_code.assign(leaves.begin() + static_cast<long>(i),
                                  leaves.begin() + static_cast<long>(i + s.texture_code.size()));
            i += s.texture_code.size();
        }
        d.ext.position = {leaves[i], leaves[i + 1], leaves[i + 2]};
        i += 3;
        d.ext.rot_cos = leaves[i++];
        d.ext.rot_sin = leaves[i++];
        d.ext.raw_scale = leaves[i++];
        out.slots.push_back(std::move(d));
    }
    return out;
}

namespace {

json vec3_json(const Vec3d& v) { return json::array({v.x, v.y, v.z}); }

Vec3d vec3_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

const char* kind_name(PrimitiveKind k) {
    switch (k) {
        case PrimitiveKind::Sphere: return "sphere";
        case PrimitiveKind::Box: return "box";
        default: return "cylinder";
    }
}

PrimitiveKind kind_from(const std::string& s) {
    if (s == "sphere") return PrimitiveKind::Sphere;
    if (s == "box") return PrimitiveKind::Box;
    if (s == "cylinder") return PrimitiveKind::Cylinder;
    throw std::runtime_error("scene: unknown primitive kind '" + s + "'");
}

} // namespace

std::string scene_to_json(const SceneDoc& doc) {
    json j;
    j["version"] = 1;

    json cam;
    json m = json::array();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m.push_back(doc.camera.cam_to_world.linear(r, c));
    cam["rotation"] = m;
    cam["eye"] = vec3_json(doc.camera.cam_to_world.translation);
    cam["vfov"] = doc.camera.vfov;
    cam["width"] = doc.camera.width;
    cam["height"] = doc.camera.height;
    j["camera"] = cam;

    json bg;
    bg["raw_rgb"] = vec3_json(doc.latent.raw_background);
    bg["rgb"] = vec3_json(doc.latent.background_color());
    j["background"] = bg;

    j["objects"] = json::array();
    for (const auto& s : doc.latent.slots) {
        json o;
        json shape;
        if (s.shape_rep == ShapeRep::Analytic) {
            shape["mode"] = "analytic";
            shape["kind"] = kind_name(s.kind);
            shape["raw_axis"] = vec3_json(s.raw_axis);
            shape["axis_min"] = s.axis_min;
            shape["axis_max"] = s.axis_max;
            shape["axis"] = vec3_json(s.axis_scales());
        } else {
            shape["mode"] = "code";
            shape["code"] = s.shape_code;
        }
        o["shape"] = shape;
        json tex;
        if (s.texture_rep == TextureRep::Constant) {
            tex["mode"] = "constant";
            tex["raw_rgb"] = vec3_json(s.raw_color);
            tex["rgb"] = vec3_json(s.constant_color());
        } else {
            tex["mode"] = "code";
            tex["code"] = s.texture_code;
        }
        o["texture"] = tex;
        json e;
        e["position"] = vec3_json(s.ext.position);
        e["rot_cos"] = s.ext.rot_cos;
        e["rot_sin"] = s.ext.rot_sin;
        e["raw_scale"] = s.ext.raw_scale;
        e["scale_min"] = s.ext.scale_min;
        e["scale_max"] = s.ext.scale_max;
        e["theta"] = angle_from_two_param(s.ext.rot_cos, s.ext.rot_sin);
        e["scale"] = squashed_scale(s.ext);
        o["extrinsics"] = e;
        j["objects"].push_back(o);
    }
    return j.dump(2) + "\n";
}

SceneDoc scene_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("scene: JSON parse error: ") + e.what());
    }
    try {
        if (j.at("version").get<int>() != 1) throw std::runtime_error("scene: unknown version");
        SceneDoc doc;
        const json& cam = j.at("camera");
        const json& m = cam.at("rotation");
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                doc.camera.cam_to_world.linear(r, c) = m.at(3 * r + c).get<double>();
        doc.camera.cam_to_world.translation = vec3_from(cam.at("eye"));
        doc.camera.vfov = cam.at("vfov").get<double>();
        doc.camera.width = cam.at("width").get<int>();
        doc.camera.height = cam.at("height").get<int>();

        doc.latent.raw_background = vec3_from(j.at("background").at("raw_rgb"));
        for (const json& o : j.at("objects")) {
            SlotLatent s;
            const json& shape = o.at("shape");
            if (shape.at("mode") == "analytic") {
                s.shape_rep = ShapeRep::Analytic;
                s.kind = kind_from(shape.at("kind").get<std::string>());
                s.raw_axis = vec3_from(shape.at("raw_axis"));
                s.axis_min = shape.at("axis_min").get<double>();
                s.axis_max = shape.at("axis_max").get<double>();
            } else if (shape.at("mode") == "code") {
                s.shape_rep = ShapeRep::Code;
                s.shape_code = shape.at("code").get<std::vector<double>>();
            } else {
                throw std::runtime_error("scene: unknown shape mode");
            }
            const json& tex = o.at("texture");
            if (tex.at("mode") == "constant") {
                s.texture_rep = TextureRep::Constant;
                s.raw_color = vec3_from(tex.at("raw_rgb"));
            } else if (tex.at("mode") == "code") {
                s.texture_rep = TextureRep::Code;
                s.texture_code = tex.at("code").get<std::vector<double>>();
            } else {
                throw std::runtime_error("scene: unknown texture mode");
            }
            const json& e = o.at("extrinsics");
            s.ext.position = vec3_from(e.at("position"));
            s.ext.rot_cos = e.at("rot_cos").get<double>();
            s.ext.rot_sin = e.at("rot_sin").get<double>();
            s.ext.raw_scale = e.at("raw_scale").get<double>();
            s.ext.scale_min = e.at("scale_min").get<double>();
            s.ext.scale_max = e.at("scale_max").get<double>();
            doc.latent.slots.push_back(std::move(s));
        }
        return doc;
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("scene: missing or malformed field: ") + e.what());
    }
}

void write_scene(const std::string& path, const SceneDoc& doc) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << scene_to_json(doc);
    if (!out) throw std::runtime_error(path + ": write failed");
}

SceneDoc read_scene(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open for reading");
    std::stringstream ss;
    ss << in.rdbuf();
    return scene_from_json(ss.str());
}

} // namespace sdfscene
