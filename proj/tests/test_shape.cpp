// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sdfscene/shape.hpp"
#include "sdfscene/optim.hpp"

#include <cmath>
#include <filesystem>

using namespace sdfscene;

namespace {

// Exact membership predicates, independent of the SDF formulas.
bool inside_exact(const AnalyticShape& s, const Vec3d& x) {
    const Vec3d q{x.x / s.axis_scales.x, x.y / s.axis_scales.y, x.z / s.axis_scales.z};
    switch (s.kind) {
        case PrimitiveKind::Sphere: return dot(q, q) < 0.4 * 0.4;
        case PrimitiveKind::Box:
            return std::abs(q.x) < 0.4 && std::abs(q.y) < 0.4 && std::abs(q.z) < 0.4;
        default: return q.x * q.x + q.y * q.y < 0.4 * 0.4 && std::abs(q.z) < 0.4;
    }
}

FieldParams zero_params(FieldParams fp) {
    fp.weights.assign(static_cast<size_t>(fp.layer_count()), {});
    fp.biases.assign(static_cast<size_t>(fp.layer_count()), {});
    for (int l = 0; l < fp.layer_count(); ++l) {
        fp.weights[static_cast<size_t>(l)].assign(
            static_cast<size_t>(fp.layer_in(l)) * fp.layer_out(l), 0.0);
        fp.biases[static_cast<size_t>(l)].assign(static_cast<size_t>(fp.layer_out(l)), 0.0);
    }
    return fp;
}

double clamp01(double v, double c) { return std::clamp(v, -c, c); }

} // namespace

TEST_CASE("analytic signed distances") {
    const AnalyticShape sphere{PrimitiveKind::Sphere, {1, 1, 1}};
    CHECK(eval_analytic_sdf(sphere, {0, 0, 0}) == doctest::Approx(-0.4));
    CHECK(eval_analytic_sdf(sphere, {0.4, 0, 0}) == doctest::Approx(0.0));

    const AnalyticShape box{PrimitiveKind::Box, {1, 1, 1}};
    CHECK(eval_analytic_sdf(box, {1, 0, 0}) == doctest::Approx(0.6));
    CHECK(eval_analytic_sdf(box, {0, 0, 0}) == doctest::Approx(-0.4));

    const AnalyticShape cyl{PrimitiveKind::Cylinder, {1, 1, 1}};
    CHECK(eval_analytic_sdf(cyl, {0.4, 0, 0}) == doctest::Approx(0.0));
    CHECK(eval_analytic_sdf(cyl, {0, 0, 0.5}) == doctest::Approx(0.1));

    AnalyticShape bad = sphere;
    bad.axis_scales.y = 0.0;
    CHECK_THROWS_AS(eval_analytic_sdf(bad, {0, 0, 0}), DomainError);
}

TEST_CASE("sphere SDF is eikonal away from the center") {
    Rng rng(2);
    const AnalyticShape sphere{PrimitiveKind::Sphere, {1, 1, 1}};
    const double h = 1e-6;
    for (int i = 0; i < 200; ++i) {
        Vec3d p{rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)};
        if (norm(p) < 0.05) continue;
        Vec3d g;
        for (int a = 0; a < 3; ++a) {
            Vec3d hi = p, lo = p;
            hi[a] += h;
            lo[a] -= h;
            g[a] = (eval_analytic_sdf(sphere, hi) - eval_analytic_sdf(sphere, lo)) / (2 * h);
        }
        CHECK(norm(g) == doctest::Approx(1.0).epsilon(1e-4));
    }
}

TEST_CASE("sign agrees with the exact membership predicate") {
    Rng rng(7);
    for (int i = 0; i < 3000; ++i) {
        AnalyticShape s;
        s.kind = static_cast<PrimitiveKind>(rng.uniform_index(3));
        s.axis_scales = {rng.uniform(0.6, 1.4), rng.uniform(0.6, 1.4), rng.uniform(0.6, 1.4)};
        const Vec3d p{rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)};
        const double phi = eval_analytic_sdf(s, p);
        if (std::abs(phi) < 1e-9) continue; // surface
        CHECK(inside_exact(s, p) == (phi < 0.0));
    }
}

TEST_CASE("anisotropic evaluation is a conservative lower bound") {
    Rng rng(8);
    for (int i = 0; i < 500; ++i) {
        AnalyticShape s;
        s.kind = static_cast<PrimitiveKind>(rng.uniform_index(3));
        s.axis_scales = {rng.uniform(0.6, 1.4), rng.uniform(0.6, 1.4), rng.uniform(0.6, 1.4)};
        const Vec3d p{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const double phi = eval_analytic_sdf(s, p);
        if (phi <= 0.0) continue;
        // Walking just under phi along any direction cannot cross the surface.
        const Vec3d dir = normalized({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
        const double phi2 = eval_analytic_sdf(s, p + dir * (phi * 0.999));
        CHECK(phi2 >= -1e-9);
    }
}

TEST_CASE("field forward with zero parameters") {
    FieldParams fp = zero_params(make_sdf_field(8));
    const std::vector<double> code(8, 0.3);
    CHECK(field_eval_sdf<double>(fp, code, {0.2, -0.4, 1.0}) == 0.0);

    FieldParams tex = zero_params(make_texture_field(7));
    const std::vector<double> tcode(7, -0.5);
    const Vec3d rgb = field_eval_rgb<double>(tex, tcode, {0.1, 0.2, 0.3});
    CHECK(rgb.x == doctest::Approx(0.5));
    CHECK(rgb.y == doctest::Approx(0.5));
    CHECK(rgb.z == doctest::Approx(0.5));
}

TEST_CASE("hand-built weights reproduce the z coordinate") {
    // relu(z) - relu(-z) routed through pass-through layers.
    FieldParams fp = zero_params(make_sdf_field(8));
    fp.weights[0][0 * static_cast<size_t>(fp.layer_in(0)) + 2] = 1.0;
    fp.weights[0][1 * static_cast<size_t>(fp.layer_in(0)) + 2] = -1.0;
    for (int l = 1; l < 4; ++l) {
        fp.weights[static_cast<size_t>(l)][0 * static_cast<size_t>(fp.layer_in(l)) + 0] = 1.0;
        fp.weights[static_cast<size_t>(l)][1 * static_cast<size_t>(fp.layer_in(l)) + 1] = 1.0;
    }
    fp.weights[4][0] = 1.0;
    fp.weights[4][1] = -1.0;
    const std::vector<double> code(8, 0.0);
    Rng rng(12);
    for (int i = 0; i < 50; ++i) {
        const Vec3d p{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        CHECK(field_eval_sdf<double>(fp, code, p) == doctest::Approx(p.z).epsilon(1e-12));
    }
}

TEST_CASE("codes act only through layers at and after the concatenation") {
    Rng rng(31);
    FieldParams fp = make_sdf_field(8);
    fp.init(rng);
    for (int l = fp.concat_layer; l < fp.layer_count(); ++l) {
        std::fill(fp.weights[static_cast<size_t>(l)].begin(),
                  fp.weights[static_cast<size_t>(l)].end(), 0.0);
        std::fill(fp.biases[static_cast<size_t>(l)].begin(),
                  fp.biases[static_cast<size_t>(l)].end(), 0.0);
    }
    const Vec3d p{0.2, 0.1, -0.3};
    std::vector<double> code_a(8, 0.0), code_b(8);
    for (auto& c : code_b) c = rng.uniform(-1, 1);
    CHECK(field_eval_sdf<double>(fp, code_a, p) == field_eval_sdf<double>(fp, code_b, p));
}

TEST_CASE("field is locally Lipschitz on random probes") {
    Rng rng(65);
    FieldParams fp = make_sdf_field(8);
    fp.init(rng);
    std::vector<double> code(8);
    for (auto& c : code) c = rng.uniform(-0.5, 0.5);
    double worst = 0.0;
    for (int i = 0; i < 300; ++i) {
        const Vec3d p{rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6)};
        const Vec3d d = normalized({rng.normal(), rng.normal(), rng.normal()}) * 1e-4;
        const double a = field_eval_sdf<double>(fp, code, p);
        const double b = field_eval_sdf<double>(fp, code, p + d);
        worst = std::max(worst, std::abs(a - b) / norm(d));
    }
    CHECK(worst < 1e3); // smoke bound for a freshly initialized net
}

TEST_CASE("field record round trip") {
    Rng rng(19);
    FieldParams fp = make_texture_field(7);
    fp.init(rng);
    const std::string path = "/tmp/sdfscene_test_field.bin";
    write_field_params(path, fp);
    const FieldParams back = read_field_params(path);
    CHECK(back.in_dim == fp.in_dim);
    CHECK(back.out_dim == fp.out_dim);
    CHECK(back.latent_dim == fp.latent_dim);
    CHECK(back.concat_layer == fp.concat_layer);
    CHECK(back.logistic_output == fp.logistic_output);
    CHECK(back.hidden == fp.hidden);
    for (int l = 0; l < fp.layer_count(); ++l)
        for (size_t i = 0; i < fp.weights[static_cast<size_t>(l)].size(); ++i)
            CHECK(back.weights[static_cast<size_t>(l)][i] ==
                  static_cast<double>(static_cast<float>(fp.weights[static_cast<size_t>(l)][i])));
    std::filesystem::remove(path);
}

TEST_CASE("tape and plain forward agree") {
    Rng rng(91);
    FieldParams fp = make_sdf_field(8);
    fp.init(rng);
    std::vector<double> code(8);
    for (auto& c : code) c = rng.uniform(-0.5, 0.5);
    for (int i = 0; i < 20; ++i) {
        const Vec3d p{rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6)};
        const double plain = field_eval_sdf<double>(fp, code, p);
        Tape tape;
        TapeScope scope(tape);
        std::vector<DiffValue> dcode;
        for (double c : code) dcode.push_back(tape.leaf(c));
        const Vec3<DiffValue> dp{tape.leaf(p.x), tape.leaf(p.y), tape.leaf(p.z)};
        const DiffValue v = field_eval_sdf<DiffValue>(fp, dcode, dp);
        CHECK(v.value() == doctest::Approx(plain).epsilon(1e-12));
    }
}

TEST_CASE("fit_field input validation") {
    const FieldParams fp = make_sdf_field(8);
    FieldFitConfig cfg;
    std::vector<std::pair<AnalyticShape, std::vector<double>>> empty;
    CHECK_THROWS_AS(fit_field(empty, fp, cfg), std::invalid_argument);

    std::vector<std::pair<AnalyticShape, std::vector<double>>> one{
        {AnalyticShape{PrimitiveKind::Sphere, {1, 1, 1}}, std::vector<double>(8, 0.0)}};
    FieldFitConfig bad = cfg;
    bad.points_per_shape = 10;
    CHECK_THROWS_AS(fit_field(one, fp, bad), std::invalid_argument);
}

TEST_CASE("zero training steps leave parameters unchanged") {
    Rng rng(3);
    FieldParams fp = make_sdf_field(8);
    fp.init(rng);
    FieldFitConfig cfg;
    cfg.steps = 0;
    std::vector<std::pair<AnalyticShape, std::vector<double>>> oracles{
        {AnalyticShape{PrimitiveKind::Sphere, {1, 1, 1}}, std::vector<double>(8, 0.01)}};
    const FieldFitResult r = fit_field(oracles, fp, cfg);
    CHECK(r.loss_history.empty());
    for (int l = 0; l < fp.layer_count(); ++l)
        CHECK(r.params.weights[static_cast<size_t>(l)] == fp.weights[static_cast<size_t>(l)]);
    CHECK(r.codes[0] == oracles[0].second);
}

TEST_CASE("auto-decoder embeds a sphere" * doctest::timeout(900)) {
    FieldParams init = make_sdf_field(8);
    FieldFitConfig cfg;
    cfg.seed = 404;
    cfg.steps = 10000;
    const AnalyticShape sphere{PrimitiveKind::Sphere, {1, 1, 1}};
    std::vector<std::pair<AnalyticShape, std::vector<double>>> oracles{
        {sphere, std::vector<double>(8, 0.0)}};
    const FieldFitResult r = fit_field(oracles, init, cfg);

    REQUIRE(r.loss_history.size() == 10000);
    double tail = 0.0;
    for (size_t i = r.loss_history.size() - 100; i < r.loss_history.size(); ++i)
        tail += r.loss_history[i];
    tail /= 100.0;
    CHECK(tail < 0.005);

    // Clamped-distance agreement on a 17^3 grid over [-0.6, 0.6]^3.
    double worst = 0.0;
    for (int iz = 0; iz < 17; ++iz)
        for (int iy = 0; iy < 17; ++iy)
            for (int ix = 0; ix < 17; ++ix) {
                const Vec3d p{-0.6 + 1.2 * ix / 16.0, -0.6 + 1.2 * iy / 16.0,
                              -0.6 + 1.2 * iz / 16.0};
                const double got =
                    clamp01(field_eval_sdf<double>(r.params, r.codes[0], p), cfg.clamp);
                const double want = clamp01(eval_analytic_sdf(sphere, p), cfg.clamp);
                worst = std::max(worst, std::abs(got - want));
            }
    CHECK(worst < 0.02);
}

TEST_CASE("auto-decoder separates two shapes" * doctest::timeout(900)) {
    FieldParams init = make_sdf_field(8);
    FieldFitConfig cfg;
    cfg.seed = 405;
    cfg.steps = 8000;
    const AnalyticShape sphere{PrimitiveKind::Sphere, {1, 1, 1}};
    const AnalyticShape box{PrimitiveKind::Box, {1, 1, 1}};
    Rng crng(1);
    std::vector<std::pair<AnalyticShape, std::vector<double>>> oracles;
    for (const auto& s : {sphere, box}) {
        std::vector<double> code(8);
        for (auto& c : code) c = 0.01 * crng.normal();
        oracles.emplace_back(s, code);
    }
    const FieldFitResult r = fit_field(oracles, init, cfg);

    double dist = 0.0;
    for (size_t i = 0; i < 8; ++i) dist += sq(r.codes[0][i] - r.codes[1][i]);
    CHECK(std::sqrt(dist) > 0.0);

    for (size_t s = 0; s < 2; ++s) {
        double worst = 0.0;
        const AnalyticShape& shape = oracles[s].first;
        for (int iz = 0; iz < 9; ++iz)
            for (int iy = 0; iy < 9; ++iy)
                for (int ix = 0; ix < 9; ++ix) {
                    const Vec3d p{-0.6 + 1.2 * ix / 8.0, -0.6 + 1.2 * iy / 8.0,
                                  -0.6 + 1.2 * iz / 8.0};
                    const double got =
                        clamp01(field_eval_sdf<double>(r.params, r.codes[s], p), cfg.clamp);
                    const double want = clamp01(eval_analytic_sdf(shape, p), cfg.clamp);
                    worst = std::max(worst, std::abs(got - want));
                }
        CHECK(worst < 0.05);
    }
}

TEST_CASE("texture field fits a two-tone target") {
    // Reduced-width net: the same forward path, quicker to train in a test.
    FieldParams fp = make_texture_field(2);
    fp.hidden = {16, 16, 16, 16};
    Rng rng(5);
    fp.init(rng);

    const Vec3d low{0.2, 0.2, 0.8}, high{0.9, 0.6, 0.1};
    std::vector<double> flat;
    fp.flatten_into(flat);
    AdamState adam(flat.size());
    AdamConfig acfg;
    acfg.lr = 3e-3;
    Tape tape;
    std::vector<std::vector<DiffValue>> wd(static_cast<size_t>(fp.layer_count()));
    std::vector<std::vector<DiffValue>> bd(static_cast<size_t>(fp.layer_count()));
    for (int step = 0; step < 1500; ++step) {
        tape.clear();
        TapeScope scope(tape);
        std::vector<int32_t> handles;
        size_t pos = 0;
        for (int l = 0; l < fp.layer_count(); ++l) {
            auto& wl = wd[static_cast<size_t>(l)];
            auto& bl = bd[static_cast<size_t>(l)];
            wl.clear();
            bl.clear();
            const size_t nw = static_cast<size_t>(fp.layer_in(l)) * fp.layer_out(l);
            for (size_t i = 0; i < nw; ++i, ++pos) {
                wl.push_back(tape.leaf(flat[pos]));
                handles.push_back(wl.back().idx);
            }
            for (int i = 0; i < fp.layer_out(l); ++i, ++pos) {
                bl.push_back(tape.leaf(flat[pos]));
                handles.push_back(bl.back().idx);
            }
        }
        std::vector<DiffValue> dcode{DiffValue(0.0), DiffValue(0.0)};
        DiffValue loss(0.0);
        for (int k = 0; k < 24; ++k) {
            const Vec3d p{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
            const Vec3d target = p.z < 0.0 ? low : high;
            const auto out = detail::field_forward<DiffValue, DiffValue>(
                fp, wd, bd, dcode, {DiffValue(p.x), DiffValue(p.y), DiffValue(p.z)});
            loss += sq(out[0] - DiffValue(target.x)) + sq(out[1] - DiffValue(target.y)) +
                    sq(out[2] - DiffValue(target.z));
        }
        loss = loss / DiffValue(24.0);
        const auto g = tape.gradient(loss, handles);
        adam.step(flat, g, acfg);
    }
    fp.unflatten_from(flat);

    const std::vector<double> c2{0.0, 0.0};
    const Vec3d at_low = field_eval_rgb<double>(fp, c2, {0.1, 0.0, -0.3});
    const Vec3d at_high = field_eval_rgb<double>(fp, c2, {0.1, 0.0, 0.3});
    for (int ch = 0; ch < 3; ++ch) {
        CHECK(std::abs(at_low[ch] - low[ch]) < 0.05);
        CHECK(std::abs(at_high[ch] - high[ch]) < 0.05);
    }
}
