// SPDX-License-Identifier: Apache-2.0
#include "sdfscene/loss.hpp"

#include <json.hpp>

namespace sdfscene {

BlurKernel make_blur_kernel(int length, double sigma) {
    if (length < 1) throw std::invalid_argument("blur: kernel length must be positive");
    if (!(sigma > 0.0)) throw std::invalid_argument("blur: sigma must be positive");
    BlurKernel k;
    k.offset0 = -(length / 2);
    k.w.resize(static_cast<size_t>(length));
    const double half_shift = length % 2 == 0 ? 0.5 : 0.0;
    double sum = 0.0;
    for (int i = 0; i < length; ++i) {
        const double pos = static_cast<double>(i + k.offset0) + half_shift;
        k.w[static_cast<size_t>(i)] = std::exp(-0.5 * pos * pos / (sigma * sigma));
        sum += k.w[static_cast<size_t>(i)];
    }
    for (double& w : k.w) w /= sum;
    return k;
}

LossReport total_loss(const SceneLatent& scene, const FieldSet& fields, const ImageRgb& target_rgb,
                      const ImageDepth& target_depth, const CameraModel& cam,
                      const RayMarchConfig& rmc, const LossConfig& lc) {
    Tape tape;
    TapeScope scope(tape);
    std::vector<int32_t> handles;
    const SceneLatentT<DiffValue> lifted = lift(scene, tape, handles);
    const LossTerms<DiffValue> terms =
        eval_losses(lifted, fields, target_rgb, target_depth, cam, rmc, lc);

    LossReport r;
    r.image = terms.image.value();
    r.depth = terms.depth.value();
    r.ground = terms.ground.value();
    r.shape_reg = terms.shape_reg.value();
    r.in_view = terms.in_view.value();
    r.intersection = terms.intersection.value();
    r.total = terms.total.value();
    r.sigma = terms.sigma;
    r.lambda_shape = terms.lambda_shape;
    r.gradient = tape.gradient(terms.total, handles);
    return r;
}

std::string loss_log_line(int64_t step, const LossReport& report) {
    nlohmann::json j;
    j["step"] = step;
    j["image"] = report.image;
    j["depth"] = report.depth;
    j["ground"] = report.ground;
    j["shape_reg"] = report.shape_reg;
    j["in_view"] = report.in_view;
    j["intersection"] = report.intersection;
    j["total"] = report.total;
    j["sigma"] = report.sigma;
    j["lambda_shape"] = report.lambda_shape;
    return j.dump();
}

} // namespace sdfscene
