// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sdfscene/render.hpp"
#include "sdfscene/rng.hpp"
#include "oracles.hpp"

using namespace sdfscene;

namespace {

constexpr double kPi = 3.141592653589793;

// Camera frame == world frame: origin, x right, y down, z forward.
CameraModel identity_camera(int w = 33, int h = 33) {
    CameraModel cam;
    cam.width = w;
    cam.height = h;
    cam.vfov = kPi / 4;
    return cam;
}

// Analytic slot; scale bounds chosen so raw 0 squashes to exactly 1.
SlotLatent make_slot(PrimitiveKind kind, Vec3d world_center, double theta = 0.0,
                     Vec3d color = {0.8, 0.2, 0.2}) {
    SlotLatent s;
    s.shape_rep = ShapeRep::Analytic;
    s.kind = kind;
    s.axis_min = 0.5;
    s.axis_max = 1.5; // raw 0 -> unit axes
    s.texture_rep = TextureRep::Constant;
    s.raw_color = Vec3d{logit(color.x), logit(color.y), logit(color.z)};
    s.ext.scale_min = 0.5;
    s.ext.scale_max = 1.5; // raw 0 -> unit scale, world center == position
    s.ext.rot_cos = std::cos(theta);
    s.ext.rot_sin = std::sin(theta);
    s.ext.position = world_center; // valid at unit scale
    return s;
}

const FieldSet kNoFields;

} // namespace

TEST_CASE("zero crossing by linear interpolation") {
    RayMarchConfig cfg;

    SUBCASE("linear sdf along the ray is exact at any step count") {
        // Half space occupying depth >= 5: positive to negative at exactly 5.
        const auto half_space = [](double d) { return 5.0 - d; };
        for (int n : {2, 5, 12}) {
            RayMarchConfig c = cfg;
            c.steps = n;
            const auto m = ray_march_zero_crossing(half_space, 3.0, 8.0, c);
            REQUIRE(m.hit);
            CHECK(m.depth == doctest::Approx(5.0).epsilon(1e-6));
        }
    }

    SUBCASE("sphere hit approaches the closed-form intersection") {
        // World sphere radius 0.4 at depth 5 on the ray: surface at 4.6.
        const auto sphere = [](double d) { return std::abs(d - 5.0) - 0.4; };
        RayMarchConfig c = cfg;
        c.steps = 12;
        const auto m = ray_march_zero_crossing(sphere, 4.5, 5.5, c);
        REQUIRE(m.hit);
        CHECK(std::abs(m.depth - 4.6) < 0.01);
    }

    SUBCASE("miss returns the far constant") {
        const auto never = [](double) { return 1.0; };
        const auto m = ray_march_zero_crossing(never, 0.5, 11.0, cfg);
        CHECK_FALSE(m.hit);
        CHECK(m.depth == 12.0);
    }

    SUBCASE("ray starting inside hits immediately at t_near") {
        const auto inside = [](double d) { return d - 1.0; }; // negative below 1
        const auto m = ray_march_zero_crossing(inside, 0.5, 3.0, cfg);
        REQUIRE(m.hit);
        CHECK(m.depth == 0.5);
    }

    SUBCASE("hit depth stays within the marched interval") {
        Rng rng(10);
        for (int i = 0; i < 200; ++i) {
            const double c0 = rng.uniform(1.0, 9.0);
            const double r = rng.uniform(0.1, 0.8);
            const auto sdf = [&](double d) { return std::abs(d - c0) - r; };
            const double lo = rng.uniform(0.1, c0);
            const double hi = c0 + rng.uniform(0.0, 2.0);
            const auto m = ray_march_zero_crossing(sdf, lo, hi, cfg);
            if (!m.hit) continue;
            CHECK(m.depth >= lo);
            CHECK(m.depth <= hi);
        }
    }
}

TEST_CASE("projected box culling") {
    const CameraModel cam = identity_camera();
    RayMarchConfig cfg;

    SUBCASE("centered object gives a centered rectangle") {
        const SlotLatent s = make_slot(PrimitiveKind::Sphere, {0, 0, 8});
        const auto [rect, interval] = project_bbox_roi<double>(s, cam, cfg);
        REQUIRE_FALSE(rect.empty());
        REQUIRE(interval.valid);
        CHECK(std::abs(rect.x0 - (cam.width - 1 - rect.x1)) <= 2);
        CHECK(std::abs(rect.y0 - (cam.height - 1 - rect.y1)) <= 2);
        CHECK(interval.t_near > 7.0);
        CHECK(interval.t_near < 7.6);
        CHECK(interval.t_far > 8.4);
        CHECK(interval.t_far < 9.0);
    }

    SUBCASE("object behind the camera yields an empty rect") {
        const SlotLatent s = make_slot(PrimitiveKind::Box, {0, 0, -5});
        const auto [rect, interval] = project_bbox_roi<double>(s, cam, cfg);
        CHECK(rect.empty());
        const ObjectRender r = render_object<double>(s, kNoFields, cam, cfg);
        for (uint8_t m : r.mask.pixels) CHECK(m == 0);
        for (double d : r.depth.pixels) CHECK(d == cfg.far);
    }

    SUBCASE("object outside the frustum marches nothing") {
        const SlotLatent s = make_slot(PrimitiveKind::Sphere, {50, 0, 8});
        const auto [rect, interval] = project_bbox_roi<double>(s, cam, cfg);
        CHECK(rect.empty());
    }

    SUBCASE("rect covers the mask support and matches a full-image march") {
        Rng rng(77);
        for (int trial = 0; trial < 10; ++trial) {
            const SlotLatent s = make_slot(
                static_cast<PrimitiveKind>(rng.uniform_index(3)),
                {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(5.0, 9.0)},
                rng.uniform(-kPi, kPi));
            const ObjectRender r = render_object<double>(s, kNoFields, cam, cfg);
            const auto [rect, interval] = project_bbox_roi<double>(s, cam, cfg);
            REQUIRE_FALSE(rect.empty());

            // Oracle: march every pixel of the image over the same interval.
            const Transform4d c2o = camera_to_object(s.ext, cam);
            for (int y = 0; y < cam.height; ++y) {
                for (int x = 0; x < cam.width; ++x) {
                    const PixelRay ray = pixel_to_ray(cam, x + 0.5, y + 0.5);
                    const Vec3d dir = c2o.linear * Vec3d{ray.ux, ray.uy, 1.0};
                    const auto sdf = [&](double d) {
                        return eval_slot_sdf<double>(s, kNoFields, c2o.translation + dir * d);
                    };
                    const auto m =
                        ray_march_zero_crossing(sdf, interval.t_near, interval.t_far, cfg);
                    if (m.hit) {
                        CHECK(x >= rect.x0);
                        CHECK(x <= rect.x1);
                        CHECK(y >= rect.y0);
                        CHECK(y <= rect.y1);
                        CHECK(r.mask.at(x, y) == 1);
                        CHECK(r.depth.at(x, y) == m.depth);
                    } else {
                        CHECK(r.mask.at(x, y) == 0);
                    }
                }
            }
        }
    }
}

TEST_CASE("object rendering") {
    const CameraModel cam = identity_camera();
    RayMarchConfig cfg;

    SUBCASE("principal-ray sphere depth and mask") {
        const SlotLatent s = make_slot(PrimitiveKind::Sphere, {0, 0, 5});
        const ObjectRender r = render_object<double>(s, kNoFields, cam, cfg);
        const int cx = cam.width / 2, cy = cam.height / 2;
        CHECK(r.mask.at(cx, cy) == 1);
        CHECK(std::abs(r.depth.at(cx, cy) - 4.6) < 0.01);
        CHECK(r.mask.at(0, 0) == 0);
        CHECK(r.depth.at(0, 0) == cfg.far);
    }

    SUBCASE("constant texture colors every hit pixel exactly") {
        const Vec3d color{0.2, 0.5, 0.9};
        SlotLatent s = make_slot(PrimitiveKind::Box, {0.3, -0.2, 6}, 0.4, color);
        const ObjectRender r = render_object<double>(s, kNoFields, cam, cfg);
        const Vec3d squashed = s.constant_color();
        int hits = 0;
        for (int y = 0; y < cam.height; ++y)
            for (int x = 0; x < cam.width; ++x) {
                if (!r.mask.at(x, y)) continue;
                ++hits;
                CHECK(r.color.at(x, y).x == squashed.x);
                CHECK(r.color.at(x, y).y == squashed.y);
                CHECK(r.color.at(x, y).z == squashed.z);
            }
        CHECK(hits > 0);
        CHECK(squashed.x == doctest::Approx(color.x).epsilon(1e-12));
    }

    SUBCASE("code slot renders through the latent field") {
        // Field reproducing the object-frame z coordinate: a half space.
        FieldParams fp = make_sdf_field(4);
        fp.weights.assign(5, {});
        fp.biases.assign(5, {});
        for (int l = 0; l < 5; ++l) {
            fp.weights[static_cast<size_t>(l)].assign(
                static_cast<size_t>(fp.layer_in(l)) * fp.layer_out(l), 0.0);
            fp.biases[static_cast<size_t>(l)].assign(static_cast<size_t>(fp.layer_out(l)), 0.0);
        }
        fp.weights[0][0 * static_cast<size_t>(fp.layer_in(0)) + 2] = 1.0;
        fp.weights[0][1 * static_cast<size_t>(fp.layer_in(0)) + 2] = -1.0;
        for (int l = 1; l < 4; ++l) {
            fp.weights[static_cast<size_t>(l)][0 * static_cast<size_t>(fp.layer_in(l)) + 0] = 1.0;
            fp.weights[static_cast<size_t>(l)][1 * static_cast<size_t>(fp.layer_in(l)) + 1] = 1.0;
        }
        fp.weights[4][0] = 1.0;
        fp.weights[4][1] = -1.0;
        FieldSet fields;
        fields.sdf = &fp;

        SlotLatent s = make_slot(PrimitiveKind::Sphere, {0, 0, 6});
        s.shape_rep = ShapeRep::Code;
        s.shape_code.assign(4, 0.0);
        const ObjectRender r = render_object<double>(s, fields, cam, cfg);
        int hits = 0;
        for (uint8_t m : r.mask.pixels) hits += m;
        CHECK(hits > 0);

        // Wrong code dimension surfaces as an error.
        s.shape_code.assign(3, 0.0);
        CHECK_THROWS_AS(render_object<double>(s, fields, cam, cfg), std::invalid_argument);
    }
}

TEST_CASE("scene composition") {
    RayMarchConfig cfg;

    SUBCASE("empty scene is background color over the plane depth") {
        const CameraModel cam = default_camera(32, 32);
        SceneLatent scene;
        scene.raw_background = Vec3d{logit(0.3), logit(0.4), logit(0.5)};
        const SceneRender sr = render_scene(scene, kNoFields, cam, cfg);
        const Vec3d bg = scene.background_color();
        for (int y = 0; y < cam.height; ++y)
            for (int x = 0; x < cam.width; ++x) {
                CHECK(sr.color.at(x, y).x == bg.x);
                CHECK(sr.winner.at(x, y) == -1);
                const double plane =
                    std::min(ground_depth(cam, pixel_to_ray(cam, x + 0.5, y + 0.5)), cfg.far);
                CHECK(sr.depth.at(x, y) == plane);
                CHECK(sr.depth.at(x, y) <= cfg.far);
            }
    }

    SUBCASE("winner equals the brute-force argmin, bitwise") {
        Rng rng(5);
        const CameraModel cam = default_camera(48, 48);
        for (int trial = 0; trial < 20; ++trial) {
            SceneLatent scene;
            scene.raw_background = Vec3d{0.1, -0.3, 0.2};
            const int count = 1 + static_cast<int>(rng.uniform_index(3));
            for (int i = 0; i < count; ++i)
                scene.slots.push_back(make_slot(
                    static_cast<PrimitiveKind>(rng.uniform_index(3)),
                    {rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(0.3, 0.6)},
                    rng.uniform(-kPi, kPi),
                    {rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)}));
            std::vector<ObjectRender> renders;
            for (const auto& slot : scene.slots)
                renders.push_back(render_object<double>(slot, kNoFields, cam, cfg));
            const SceneRender sr = compose_scene(std::span<const ObjectRender>(renders),
                                                 scene.background_color(), cam, cfg);
            const auto want =
                oracle::brute_force_compose(renders, scene.background_color(), cam, cfg.far);
            for (size_t i = 0; i < sr.depth.pixels.size(); ++i) {
                CHECK(sr.winner.pixels[i] == want.winner[i]);
                CHECK(sr.depth.pixels[i] == want.depth.pixels[i]);
                CHECK(sr.color.pixels[i].x == want.color.pixels[i].x);
                CHECK(sr.color.pixels[i].y == want.color.pixels[i].y);
                CHECK(sr.color.pixels[i].z == want.color.pixels[i].z);
            }
            for (size_t i = 0; i < sr.depth.pixels.size(); ++i) {
                int total = sr.background_mask.pixels[i];
                for (const auto& m : sr.masks) total += m.pixels[i];
                CHECK(total == 1);
            }
        }
    }

    SUBCASE("composition is invariant to object order") {
        Rng rng(6);
        const CameraModel cam = default_camera(48, 48);
        SceneLatent scene;
        scene.raw_background = Vec3d{0, 0, 0};
        for (int i = 0; i < 3; ++i)
            scene.slots.push_back(make_slot(
                static_cast<PrimitiveKind>(i), {rng.uniform(-1, 1), rng.uniform(-1, 1), 0.45},
                rng.uniform(-kPi, kPi), {0.2 + 0.3 * i, 0.5, 0.9 - 0.3 * i}));
        std::vector<ObjectRender> renders;
        for (const auto& slot : scene.slots)
            renders.push_back(render_object<double>(slot, kNoFields, cam, cfg));
        const SceneRender a = compose_scene(std::span<const ObjectRender>(renders),
                                            scene.background_color(), cam, cfg);
        std::vector<ObjectRender> reversed{renders[2], renders[1], renders[0]};
        const SceneRender b = compose_scene(std::span<const ObjectRender>(reversed),
                                            scene.background_color(), cam, cfg);
        for (size_t i = 0; i < a.depth.pixels.size(); ++i) {
            CHECK(a.depth.pixels[i] == b.depth.pixels[i]);
            CHECK(a.color.pixels[i].x == b.color.pixels[i].x);
            CHECK(a.color.pixels[i].y == b.color.pixels[i].y);
            CHECK(a.color.pixels[i].z == b.color.pixels[i].z);
        }
    }

    SUBCASE("a fully occluded object changes nothing, bitwise") {
        const CameraModel cam = identity_camera(48, 48);
        const SlotLatent front = make_slot(PrimitiveKind::Sphere, {0, 0, 4});
        SlotLatent hidden = make_slot(PrimitiveKind::Sphere, {0, 0, 7});
        hidden.ext.raw_scale = 4.0; // near the small end of the size range
        hidden.ext.position = Vec3d{0, 0, 7 * squashed_scale(hidden.ext)};

        std::vector<ObjectRender> one{render_object<double>(front, kNoFields, cam, cfg)};
        const ObjectRender hr = render_object<double>(hidden, kNoFields, cam, cfg);
        int own_mask = 0;
        for (uint8_t m : hr.mask.pixels) own_mask += m;
        REQUIRE(own_mask > 0); // visible on its own

        std::vector<ObjectRender> two = one;
        two.push_back(hr);
        const Vec3d bg{0.5, 0.5, 0.5};
        const SceneRender sa = compose_scene(std::span<const ObjectRender>(one), bg, cam, cfg);
        const SceneRender sb = compose_scene(std::span<const ObjectRender>(two), bg, cam, cfg);
        int composed_mask = 0;
        for (uint8_t m : sb.masks[1].pixels) composed_mask += m;
        CHECK(composed_mask == 0); // occluded in the composition
        for (size_t i = 0; i < sa.depth.pixels.size(); ++i) {
            CHECK(sa.depth.pixels[i] == sb.depth.pixels[i]);
            CHECK(sa.color.pixels[i].x == sb.color.pixels[i].x);
            CHECK(sa.color.pixels[i].y == sb.color.pixels[i].y);
            CHECK(sa.color.pixels[i].z == sb.color.pixels[i].z);
        }
    }
}

TEST_CASE("depth gradient through the march") {
    // Moving the object away from the camera moves the principal-ray hit depth
    // one-for-one in world units (1/s in latent units; s = 1 here).
    const CameraModel cam = identity_camera(9, 9);
    RayMarchConfig cfg;
    const double z0 = 5.0;
    const SlotLatent base = make_slot(PrimitiveKind::Sphere, {0, 0, z0});

    const auto center_depth = [&](double pz) {
        SlotLatent s = base;
        s.ext.position.z = pz;
        const ObjectRender r = render_object<double>(s, kNoFields, cam, cfg);
        return r.depth.at(4, 4);
    };

    Tape tape;
    TapeScope scope(tape);
    SlotLatentT<DiffValue> slot;
    slot.shape_rep = base.shape_rep;
    slot.kind = base.kind;
    slot.axis_min = base.axis_min;
    slot.axis_max = base.axis_max;
    slot.texture_rep = base.texture_rep;
    slot.raw_color = Vec3<DiffValue>{DiffValue(0.0), DiffValue(0.0), DiffValue(0.0)};
    slot.ext.scale_min = base.ext.scale_min;
    slot.ext.scale_max = base.ext.scale_max;
    const DiffValue pz = tape.leaf(z0);
    slot.ext.position = Vec3<DiffValue>{DiffValue(0.0), DiffValue(0.0), pz};
    const ObjectRenderT<DiffValue> r = render_object(slot, kNoFields, cam, cfg);
    REQUIRE(r.mask.at(4, 4) == 1);
    const int32_t h = pz.idx;
    const double analytic = tape.gradient(r.depth.at(4, 4), std::span<const int32_t>(&h, 1))[0];
    const double fd = (center_depth(z0 + 1e-4) - center_depth(z0 - 1e-4)) / 2e-4;
    CHECK(analytic == doctest::Approx(fd).epsilon(1e-3));
    CHECK(analytic == doctest::Approx(1.0).epsilon(1e-3));
}
