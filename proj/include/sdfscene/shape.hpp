// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sdfscene/autodiff.hpp"
#include "sdfscene/optim.hpp"
#include "sdfscene/rng.hpp"
#include "sdfscene/vec.hpp"

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sdfscene {

// Shapes live in object coordinates normalized to the cube [-0.4, 0.4]^3
// (unit cube minus padding 0.1) before stretching by per-axis factors.
constexpr double kShapeHalfExtent = 0.4;
constexpr double kBoundingHalfExtent = 0.5; // unit cube, used for projected-box culling

enum class PrimitiveKind : uint8_t { Sphere = 0, Box = 1, Cylinder = 2 };

struct AnalyticShape {
    PrimitiveKind kind = PrimitiveKind::Sphere;
    Vec3d axis_scales{1.0, 1.0, 1.0};
};

// ---- analytic signed distances ----------------------------------------------

template <typename T>
T sdf_sphere(const Vec3<T>& p) {
    return sqrt(p.x * p.x + p.y * p.y + p.z * p.z) - kShapeHalfExtent;
}

template <typename T>
T sdf_box(const Vec3<T>& p) {
    const Vec3<T> q{abs(p.x) - kShapeHalfExtent, abs(p.y) - kShapeHalfExtent,
                    abs(p.z) - kShapeHalfExtent};
    const T ox = relu(q.x), oy = relu(q.y), oz = relu(q.z);
    const T outside = sqrt(ox * ox + oy * oy + oz * oz);
    return outside + min(max(q.x, max(q.y, q.z)), T(0.0));
}

template <typename T>
T sdf_cylinder(const Vec3<T>& p) {
    const T radial = sqrt(p.x * p.x + p.y * p.y) - kShapeHalfExtent;
    const T axial = abs(p.z) - kShapeHalfExtent;
    const T orad = relu(radial), oax = relu(axial);
    return sqrt(orad * orad + oax * oax) + min(max(radial, axial), T(0.0));
}

// Per-axis stretched evaluation. Anisotropic scaling of an SDF is not itself a
// distance, so we return the min-axis lower bound: the sign is exact and the
// value is conservative, which is all the sign-change marcher needs.
template <typename T>
T eval_analytic_sdf(PrimitiveKind kind, const Vec3<T>& axis_scales, const Vec3<T>& x) {
    if (!(value_of(axis_scales.x) > 0.0) || !(value_of(axis_scales.y) > 0.0) ||
        !(value_of(axis_scales.z) > 0.0))
        throw DomainError("eval_analytic_sdf: axis scales must be positive");
    const Vec3<T> q{x.x / axis_scales.x, x.y / axis_scales.y, x.z / axis_scales.z};
    T base;
    switch (kind) {
        case PrimitiveKind::Sphere: base = sdf_sphere(q); break;
        case PrimitiveKind::Box: base = sdf_box(q); break;
        default: base = sdf_cylinder(q); break;
    }
    return min(axis_scales.x, min(axis_scales.y, axis_scales.z)) * base;
}

inline double eval_analytic_sdf(const AnalyticShape& shape, const Vec3d& x) {
    return eval_analytic_sdf(shape.kind, shape.axis_scales, x);
}

// ---- latent-conditioned fields ----------------------------------------------

// Fully-connected field: rectifier hidden layers, latent code concatenated to
// the input of hidden layer `concat_layer`.
struct FieldParams {
    int in_dim = 3;
    int out_dim = 1;
    int latent_dim = 8;
    int concat_layer = 2;
    std::vector<int> hidden = {64, 64, 64, 64};
    bool logistic_output = false;
    std::vector<std::vector<double>> weights; // [layer][out*in]
    std::vector<std::vector<double>> biases;  // [layer][out]

    int layer_count() const { return static_cast<int>(hidden.size()) + 1; }
    int layer_in(int l) const {
        int base = l == 0 ? in_dim : hidden[static_cast<size_t>(l - 1)];
        if (l == concat_layer) base += latent_dim;
        return base;
    }
    int layer_out(int l) const {
        return l == layer_count() - 1 ? out_dim : hidden[static_cast<size_t>(l)];
    }
    size_t param_count() const;
    void init(Rng& rng);
    void flatten_into(std::vector<double>& out) const;
    void unflatten_from(std::span<const double> flat);
};

// SDF field Phi: scalar output, code joins the third hidden layer.
FieldParams make_sdf_field(int latent_dim = 8);
// Texture field Psi: RGB output squashed to [0,1], code joins the input.
FieldParams make_texture_field(int latent_dim = 7);

// Little-endian float32 record with a shape-descriptor header.
void write_field_params(const std::string& path, const FieldParams& fp);
FieldParams read_field_params(const std::string& path);

namespace detail {

// Forward pass shared by frozen (double) and trainable (tape) parameters.
template <typename T, typename PT>
std::vector<T> field_forward(const FieldParams& layout, const std::vector<std::vector<PT>>& ws,
                             const std::vector<std::vector<PT>>& bs, std::span<const T> code,
                             const Vec3<T>& x) {
    if (static_cast<int>(code.size()) != layout.latent_dim)
        throw std::invalid_argument("field_forward: latent dimension mismatch");
    std::vector<T> act;
    act.reserve(static_cast<size_t>(layout.layer_in(0)));
    act.push_back(x.x);
    act.push_back(x.y);
    act.push_back(x.z);
    std::vector<T> next;
    for (int l = 0; l < layout.layer_count(); ++l) {
        if (l == layout.concat_layer) act.insert(act.end(), code.begin(), code.end());
        const int n_in = layout.layer_in(l);
        const int n_out = layout.layer_out(l);
        const bool last = l == layout.layer_count() - 1;
        next.clear();
        next.reserve(static_cast<size_t>(n_out));
        for (int o = 0; o < n_out; ++o) {
            T s;
            if constexpr (std::is_same_v<T, double> && std::is_same_v<PT, double>) {
                double acc = bs[static_cast<size_t>(l)][static_cast<size_t>(o)];
                const double* w = &ws[static_cast<size_t>(l)][static_cast<size_t>(o) * n_in];
                for (int i = 0; i < n_in; ++i) acc += w[i] * act[static_cast<size_t>(i)];
                s = acc;
            } else {
                Tape& tape = detail::need_tape();
                FusedAccum acc(tape);
                if constexpr (std::is_same_v<PT, double>)
                    acc.add_const(bs[static_cast<size_t>(l)][static_cast<size_t>(o)]);
                else
                    acc.add(bs[static_cast<size_t>(l)][static_cast<size_t>(o)], 1.0);
                const PT* w = &ws[static_cast<size_t>(l)][static_cast<size_t>(o) * n_in];
                for (int i = 0; i < n_in; ++i) acc.add(act[static_cast<size_t>(i)], w[i]);
                s = acc.done();
            }
            if (!last)
                next.push_back(relu(s));
            else if (layout.logistic_output)
                next.push_back(logistic(s));
            else
                next.push_back(s);
        }
        act.swap(next);
    }
    return act;
}

} // namespace detail

template <typename T>
T field_eval_sdf(const FieldParams& fp, std::span<const T> code, const Vec3<T>& x) {
    if (fp.out_dim != 1) throw std::invalid_argument("field_eval_sdf: field is not scalar");
    return detail::field_forward<T, double>(fp, fp.weights, fp.biases, code, x)[0];
}

template <typename T>
Vec3<T> field_eval_rgb(const FieldParams& fp, std::span<const T> code, const Vec3<T>& x) {
    if (fp.out_dim != 3) throw std::invalid_argument("field_eval_rgb: field is not RGB");
    auto out = detail::field_forward<T, double>(fp, fp.weights, fp.biases, code, x);
    return {out[0], out[1], out[2]};
}

// ---- auto-decoder fitting against analytic oracles ---------------------------

struct FieldFitConfig {
    int points_per_shape = 4096; // sample pool per oracle, >= 1000
    double near_surface_ratio = 0.3;
    double near_surface_sigma = 0.05;
    int minibatch = 64;
    int steps = 10000;
    double lr = 3e-4;
    double clamp = 0.1;
    uint64_t seed = 0;
};

struct FieldFitResult {
    FieldParams params;
    std::vector<std::vector<double>> codes;
    std::vector<double> loss_history; // clamped-L1 per step
};

// Jointly optimizes parameters and per-shape codes with Adam on the mean
// absolute error of the +-clamp signed distance, over points drawn uniformly
// in [-0.6, 0.6]^3 plus near-surface samples.
FieldFitResult fit_field(std::span<const std::pair<AnalyticShape, std::vector<double>>> oracles,
                         const FieldParams& init, const FieldFitConfig& cfg);

} // namespace sdfscene
