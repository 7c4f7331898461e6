// SPDX-License-Identifier: Apache-2.0
#include "sdfscene/shape.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>

namespace sdfscene {

size_t FieldParams::param_count() const {
    size_t n = 0;
    for (int l = 0; l < layer_count(); ++l)
        n += static_cast<size_t>(layer_in(l)) * layer_out(l) + layer_out(l);
    return n;
}

void FieldParams::init(Rng& rng) {
    weights.assign(static_cast<size_t>(layer_count()), {});
    biases.assign(static_cast<size_t>(layer_count()), {});
    for (int l = 0; l < layer_count(); ++l) {
        const int n_in = layer_in(l);
        const int n_out = layer_out(l);
        const double scale = std::sqrt(2.0 / n_in);
        auto& w = weights[static_cast<size_t>(l)];
        w.resize(static_cast<size_t>(n_in) * n_out);
        for (double& v : w) v = scale * rng.normal();
        biases[static_cast<size_t>(l)].assign(static_cast<size_t>(n_out), 0.0);
    }
}

void FieldParams::flatten_into(std::vector<double>& out) const {
    for (int l = 0; l < layer_count(); ++l) {
        const auto& w = weights[static_cast<size_t>(l)];
        const auto& b = biases[static_cast<size_t>(l)];
        out.insert(out.end(), w.begin(), w.end());
        out.insert(out.end(), b.begin(), b.end());
    }
}

void FieldParams::unflatten_from(std::span<const double> flat) {
    if (flat.size() != param_count()) throw std::invalid_argument("field params: flat size mismatch");
    size_t pos = 0;
    weights.assign(static_cast<size_t>(layer_count()), {});
    biases.assign(static_cast<size_t>(layer_count()), {});
    for (int l = 0; l < layer_count(); ++l) {
        const size_t nw = static_cast<size_t>(layer_in(l)) * layer_out(l);
        const size_t nb = static_cast<size_t>(layer_out(l));
        weights[static_cast<size_t>(l)].assign(flat.begin() + pos, flat.begin() + pos + nw);
        pos += nw;
        biases[static_cast<size_t>(l)].assign(flat.begin() + pos, flat.begin() + pos + nb);
        pos += nb;
    }
}

FieldParams make_sdf_field(int latent_dim) {
    FieldParams fp;
    fp.in_dim = 3;
    fp.out_dim = 1;
    fp.latent_dim = latent_dim;
    fp.concat_layer = 2;
    fp.hidden = {64, 64, 64, 64};
    fp.logistic_output = false;
    return fp;
}

FieldParams make_texture_field(int latent_dim) {
    FieldParams fp;
    fp.in_dim = 3;
    fp.out_dim = 3;
    fp.latent_dim = latent_dim;
    fp.concat_layer = 0;
    fp.hidden = {64, 64, 64, 64};
    fp.logistic_output = true;
    return fp;
}

namespace {

constexpr char kFieldMagic[8] = {'S', 'D', 'F', 'F', 'I', 'E', 'L', 'D'};

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f32(std::vector<uint8_t>& out, float f) {
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
}

uint32_t get_u32(const uint8_t*& p) {
    uint32_t v = static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
                 (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
    p += 4;
    return v;
}

float get_f32(const uint8_t*& p) {
    const uint32_t bits = get_u32(p);
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
}

} // namespace

void write_field_params(const std::string& path, const FieldParams& fp) {
    std::vector<uint8_t> out;
    out.insert(out.end(), kFieldMagic, kFieldMagic + 8);
    put_u32(out, 1); // version
    put_u32(out, static_cast<uint32_t>(fp.in_dim));
    put_u32(out, static_cast<uint32_t>(fp.out_dim));
    put_u32(out, static_cast<uint32_t>(fp.latent_dim));
    put_u32(out, static_cast<uint32_t>(fp.concat_layer));
    put_u32(out, fp.logistic_output ? 1u : 0u);
    put_u32(out, static_cast<uint32_t>(fp.hidden.size()));
    for (int h : fp.hidden) put_u32(out, static_cast<uint32_t>(h));
    for (int l = 0; l < fp.layer_count(); ++l) {
        for (double w : fp.weights[static_cast<size_t>(l)]) put_f32(out, static_cast<float>(w));
        for (double b : fp.biases[static_cast<size_t>(l)]) put_f32(out, static_cast<float>(b));
    }
    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) throw std::runtime_error(path + ": cannot open for writing");
    if (std::fwrite(out.data(), 1, out.size(), file.get()) != out.size())
        throw std::runtime_error(path + ": short write");
}

FieldParams read_field_params(const std::string& path) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) throw std::runtime_error(path + ": cannot open for reading");
    std::fseek(file.get(), 0, SEEK_END);
    const long size = std::ftell(file.get());
    std::fseek(file.get(), 0, SEEK_SET);
    std::vector<uint8_t> raw(static_cast<size_t>(size));
    if (std::fread(raw.data(), 1, raw.size(), file.get()) != raw.size())
        throw std::runtime_error(path + ": short read");
    if (raw.size() < 36 || std::memcmp(raw.data(), kFieldMagic, 8) != 0)
        throw std::runtime_error(path + ": bad field record");
    const uint8_t* p = raw.data() + 8;
    if (get_u32(p) != 1) throw std::runtime_error(path + ": unsupported field record version");
    FieldParams fp;
    fp.in_dim = static_cast<int>(get_u32(p));
    fp.out_dim = static_cast<int>(get_u32(p));
    fp.latent_dim = static_cast<int>(get_u32(p));
    fp.concat_layer = static_cast<int>(get_u32(p));
    fp.logistic_output = get_u32(p) != 0;
    const uint32_t n_hidden = get_u32(p);
    fp.hidden.resize(n_hidden);
    for (uint32_t i = 0; i < n_hidden; ++i) fp.hidden[i] = static_cast<int>(get_u32(p));
    const size_t expect = 36 + 4 * n_hidden + 4 * fp.param_count();
    if (raw.size() != expect) throw std::runtime_error(path + ": truncated field record");
    fp.weights.assign(static_cast<size_t>(fp.layer_count()), {});
    fp.biases.assign(static_cast<size_t>(fp.layer_count()), {});
    for (int l = 0; l < fp.layer_count(); ++l) {
        const size_t nw = static_cast<size_t>(fp.layer_in(l)) * fp.layer_out(l);
        auto& w = fp.weights[static_cast<size_t>(l)];
        w.resize(nw);
        for (size_t i = 0; i < nw; ++i) w[i] = get_f32(p);
        auto& b = fp.biases[static_cast<size_t>(l)];
        b.resize(static_cast<size_t>(fp.layer_out(l)));
        for (size_t i = 0; i < b.size(); ++i) b[i] = get_f32(p);
    }
    return fp;
}

namespace {

// Surface point along the ray from the origin through `dir`, by bisection of
// the base (unstretched) primitive; origin is interior for all three kinds.
Vec3d surface_point(const AnalyticShape& shape, const Vec3d& dir, Rng& rng) {
    Vec3d d = dir;
    const double n = norm(d);
    if (n < 1e-9) d = Vec3d{1.0, 0.0, 0.0};
    else d = normalized(d);
    double lo = 0.0, hi = 1.4; // beyond the stretched extent for axis <= 1.6
    for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double phi = eval_analytic_sdf(shape, d * mid);
        (phi < 0.0 ? lo : hi) = mid;
    }
    Vec3d p = d * (0.5 * (lo + hi));
    (void)rng;
    return p;
}

} // namespace

FieldFitResult fit_field(std::span<const std::pair<AnalyticShape, std::vector<double>>> oracles,
                         const FieldParams& init, const FieldFitConfig& cfg) {
    if (oracles.empty()) throw std::invalid_argument("fit_field: need at least one oracle shape");
    if (cfg.points_per_shape < 1000)
        throw std::invalid_argument("fit_field: sample budget must be >= 1000 points per shape");
    if (cfg.minibatch < 1 || cfg.steps < 0 || !(cfg.clamp > 0.0))
        throw std::invalid_argument("fit_field: invalid sampling config");

    FieldFitResult result;
    result.params = init;
    if (result.params.weights.empty()) {
        Rng wrng = Rng::stream(cfg.seed, 0xfee1d);
        result.params.init(wrng);
    }
    for (const auto& [shape, code] : oracles) {
        (void)shape;
        if (static_cast<int>(code.size()) != init.latent_dim)
            throw std::invalid_argument("fit_field: initial code dimension mismatch");
        result.codes.push_back(code);
    }

    // Presampled point pools with oracle distances.
    const size_t n_shapes = oracles.size();
    std::vector<std::vector<Vec3d>> points(n_shapes);
    std::vector<std::vector<double>> dists(n_shapes);
    for (size_t s = 0; s < n_shapes; ++s) {
        Rng rng = Rng::stream(cfg.seed, 100 + s);
        const auto& shape = oracles[s].first;
        points[s].reserve(static_cast<size_t>(cfg.points_per_shape));
        for (int i = 0; i < cfg.points_per_shape; ++i) {
            Vec3d p;
            if (rng.uniform() < cfg.near_surface_ratio) {
                const Vec3d dir{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
                p = surface_point(shape, dir, rng);
                p = p + Vec3d{rng.normal(), rng.normal(), rng.normal()} * cfg.near_surface_sigma;
            } else {
                p = Vec3d{rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6)};
            }
            points[s].push_back(p);
            dists[s].push_back(eval_analytic_sdf(shape, p));
        }
    }

    // One parameter vector: field params then all codes.
    std::vector<double> flat;
    result.params.flatten_into(flat);
    const size_t n_params = flat.size();
    for (const auto& code : result.codes) flat.insert(flat.end(), code.begin(), code.end());
    const size_t dim = flat.size();
    const int d_lat = init.latent_dim;

    AdamState adam(dim);
    AdamConfig acfg;
    acfg.lr = cfg.lr;
    Rng batch_rng = Rng::stream(cfg.seed, 7);
    const double c = cfg.clamp;
    Tape tape;

    std::vector<std::vector<DiffValue>> wd(static_cast<size_t>(init.layer_count()));
    std::vector<std::vector<DiffValue>> bd(static_cast<size_t>(init.layer_count()));

    for (int step = 0; step < cfg.steps; ++step) {
        const size_t s = static_cast<size_t>(step) % n_shapes;
        tape.clear();
        TapeScope scope(tape);

        // Lift parameters and the selected code as leaves, in flat order.
        std::vector<int32_t> handles;
        handles.reserve(n_params + static_cast<size_t>(d_lat));
        size_t pos = 0;
        for (int l = 0; l < init.layer_count(); ++l) {
            const size_t nw = static_cast<size_t>(init.layer_in(l)) * init.layer_out(l);
            const size_t nb = static_cast<size_t>(init.layer_out(l));
            auto& wl = wd[static_cast<size_t>(l)];
            auto& bl = bd[static_cast<size_t>(l)];
            wl.clear();
            bl.clear();
            for (size_t i = 0; i < nw; ++i, ++pos) {
                wl.push_back(tape.leaf(flat[pos]));
                handles.push_back(wl.back().idx);
            }
            for (size_t i = 0; i < nb; ++i, ++pos) {
                bl.push_back(tape.leaf(flat[pos]));
                handles.push_back(bl.back().idx);
            }
        }
        std::vector<DiffValue> code(static_cast<size_t>(d_lat));
        const size_t code_base = n_params + s * static_cast<size_t>(d_lat);
        for (int i = 0; i < d_lat; ++i) {
            code[static_cast<size_t>(i)] = tape.leaf(flat[code_base + static_cast<size_t>(i)]);
            handles.push_back(code[static_cast<size_t>(i)].idx);
        }

        DiffValue loss(0.0);
        for (int k = 0; k < cfg.minibatch; ++k) {
            const size_t j = batch_rng.uniform_index(points[s].size());
            const Vec3d& p = points[s][j];
            const Vec3<DiffValue> x{DiffValue(p.x), DiffValue(p.y), DiffValue(p.z)};
            const DiffValue phi =
                detail::field_forward<DiffValue, DiffValue>(init, wd, bd, code, x)[0];
            const DiffValue clamped = min(max(phi, DiffValue(-c)), DiffValue(c));
            const double target = std::clamp(dists[s][j], -c, c);
            loss += abs(clamped - target);
        }
        loss = loss / DiffValue(static_cast<double>(cfg.minibatch));
        result.loss_history.push_back(loss.value());

        const std::vector<double> g = tape.gradient(loss, handles);
        // Scatter: shared params first, then the selected shape's code slice.
        std::vector<double> full_grad(dim, 0.0);
        for (size_t i = 0; i < n_params; ++i) full_grad[i] = g[i];
        for (int i = 0; i < d_lat; ++i)
            full_grad[code_base + static_cast<size_t>(i)] = g[n_params + static_cast<size_t>(i)];
        adam.step(flat, full_grad, acfg);
    }

    result.params.unflatten_from(std::span<const double>(flat.data(), n_params));
    for (size_t s = 0; s < n_shapes; ++s) {
        const size_t base = n_params + s * static_cast<size_t>(d_lat);
        for (int i = 0; i < d_lat; ++i)
            result.codes[s][static_cast<size_t>(i)] = flat[base + static_cast<size_t>(i)];
    }
    return result;
}

} // namespace sdfscene
