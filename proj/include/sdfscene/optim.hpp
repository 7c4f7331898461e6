// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace sdfscene {

struct AdamConfig {
    double lr = 1e-4; // fits override to 1e-2
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Standard bias-corrected Adam update.
struct AdamState {
    std::vector<double> m, v;
    int64_t t = 0;

    explicit AdamState(size_t n) : m(n, 0.0), v(n, 0.0) {}

    void step(std::span<double> params, std::span<const double> grads, const AdamConfig& cfg) {
        if (params.size() != m.size() || grads.size() != m.size())
            throw std::invalid_argument("adam: dimension mismatch");
        ++t;
        const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
        for (size_t i = 0; i < m.size(); ++i) {
            const double g = grads[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
};

} // namespace sdfscene
