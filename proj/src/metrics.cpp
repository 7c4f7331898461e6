// SPDX-License-Identifier: Apache-2.0
#include "sdfscene/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace sdfscene {

namespace {

int mask_area(const ImageMask& m) {
    int n = 0;
    for (uint8_t p : m.pixels) n += p ? 1 : 0;
    return n;
}

constexpr double kPi = 3.141592653589793;

double wrap_angle_error(double delta, double period) {
    double d = std::fmod(std::abs(delta), period);
    return std::min(d, period - d);
}

} // namespace

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double mask_iou(const ImageMask& a, const ImageMask& b) {
    if (!a.same_size(b.width, b.height)) throw std::invalid_argument("iou: dimension mismatch");
    int inter = 0, uni = 0;
    for (size_t i = 0; i < a.pixels.size(); ++i) {
        const bool pa = a.pixels[i] != 0, pb = b.pixels[i] != 0;
        inter += (pa && pb) ? 1 : 0;
        uni += (pa || pb) ? 1 : 0;
    }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / uni;
}

MatchResult match_instances(std::span<const ImageMask> pred, std::span<const ImageMask> gt,
                            double tau, const MatchConfig& cfg) {
    std::vector<int> pred_ids, gt_ids;
    for (size_t i = 0; i < pred.size(); ++i)
        if (mask_area(pred[i]) >= cfg.min_pixels) pred_ids.push_back(static_cast<int>(i));
    for (size_t j = 0; j < gt.size(); ++j)
        if (mask_area(gt[j]) >= cfg.min_pixels) gt_ids.push_back(static_cast<int>(j));

    struct Cand {
        double iou;
        int p, g;
    };
    std::vector<Cand> cands;
    for (int p : pred_ids)
        for (int g : gt_ids) {
            const double iou = mask_iou(pred[static_cast<size_t>(p)], gt[static_cast<size_t>(g)]);
            if (iou >= tau) cands.push_back({iou, p, g});
        }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.iou != b.iou) return a.iou > b.iou;
        if (a.p != b.p) return a.p < b.p;
        return a.g < b.g;
    });

    MatchResult r;
    r.considered_pred = static_cast<int>(pred_ids.size());
    r.considered_gt = static_cast<int>(gt_ids.size());
    std::vector<bool> p_used(pred.size(), false), g_used(gt.size(), false);
    for (const Cand& c : cands) {
        if (p_used[static_cast<size_t>(c.p)] || g_used[static_cast<size_t>(c.g)]) continue;
        p_used[static_cast<size_t>(c.p)] = true;
        g_used[static_cast<size_t>(c.g)] = true;
        r.matches.push_back({c.p, c.g, c.iou});
    }
    for (int p : pred_ids)
        if (!p_used[static_cast<size_t>(p)]) r.false_positives.push_back(p);
    for (int g : gt_ids)
        if (!g_used[static_cast<size_t>(g)]) r.false_negatives.push_back(g);
    return r;
}

std::vector<ImageMask> split_instance_masks(const ImageMask& ids, int count) {
    std::vector<ImageMask> masks(static_cast<size_t>(count), ImageMask(ids.width, ids.height, 0));
    for (size_t i = 0; i < ids.pixels.size(); ++i) {
        const int id = ids.pixels[i];
        if (id >= 1 && id <= count) masks[static_cast<size_t>(id - 1)].pixels[i] = 1;
    }
    return masks;
}

InstanceMetrics instance_metrics(std::span<const MaskSets> images, const MatchConfig& cfg) {
    if (images.empty()) throw std::invalid_argument("instance_metrics: empty image set");
    InstanceMetrics out;
    double map_acc = 0.0;
    for (int t = 0; t < 10; ++t) {
        const double tau = 0.5 + 0.05 * t;
        double prec_acc = 0.0, rec_acc = 0.0, f1_acc = 0.0, all_acc = 0.0;
        for (const MaskSets& img : images) {
            const MatchResult m = match_instances(img.pred, img.gt, tau, cfg);
            const int tp = static_cast<int>(m.matches.size());
            // 0/0 conventions: precision 0, recall 1 (vacuously complete),
            // F1 0 when precision and recall are both 0.
            const double prec = m.considered_pred == 0 ? 0.0
                                                       : static_cast<double>(tp) / m.considered_pred;
            const double rec =
                m.considered_gt == 0 ? 1.0 : static_cast<double>(tp) / m.considered_gt;
            const double f1 = (prec + rec) == 0.0 ? 0.0 : 2.0 * prec * rec / (prec + rec);
            prec_acc += prec;
            rec_acc += rec;
            f1_acc += f1;
            all_acc += (tp == m.considered_gt) ? 1.0 : 0.0;
        }
        const double n = static_cast<double>(images.size());
        map_acc += prec_acc / n;
        if (t == 0) {
            out.ap50 = prec_acc / n;
            out.ar50 = rec_acc / n;
            out.f1_50 = f1_acc / n;
            out.all_obj = all_acc / n;
        }
    }
    out.map = map_acc / 10.0;
    return out;
}

namespace {

// Valid-window SSIM for one channel: uniform 7x7 windows, sample-normalized
// second moments, dynamic range 1.
double ssim_channel(const ImageRgb& a, const ImageRgb& b, int ch) {
    constexpr int kWin = 7;
    constexpr double kC1 = 0.01 * 0.01;
    constexpr double kC2 = 0.03 * 0.03;
    const int w = a.width, h = a.height;
    if (w < kWin || h < kWin) throw std::invalid_argument("ssim: image smaller than the window");
    const double n = kWin * kWin;
    const double norm = n / (n - 1.0);
    double acc = 0.0;
    int windows = 0;
    for (int y = 0; y + kWin <= h; ++y) {
        for (int x = 0; x + kWin <= w; ++x) {
            double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
            for (int dy = 0; dy < kWin; ++dy)
                for (int dx = 0; dx < kWin; ++dx) {
                    const double va = a.at(x + dx, y + dy)[ch];
                    const double vb = b.at(x + dx, y + dy)[ch];
                    sa += va;
                    sb += vb;
                    saa += va * va;
                    sbb += vb * vb;
                    sab += va * vb;
                }
            const double ma = sa / n, mb = sb / n;
            const double va = (saa / n - ma * ma) * norm;
            const double vb = (sbb / n - mb * mb) * norm;
            const double cov = (sab / n - ma * mb) * norm;
            const double num = (2.0 * ma * mb + kC1) * (2.0 * cov + kC2);
            const double den = (ma * ma + mb * mb + kC1) * (va + vb + kC2);
            acc += num / den;
            ++windows;
        }
    }
    return acc / windows;
}

} // namespace

ImageMetrics image_metrics(const ImageRgb& pred, const ImageRgb& gt) {
    if (!pred.same_size(gt.width, gt.height))
        throw std::invalid_argument("image_metrics: dimension mismatch");
    double mse = 0.0;
    for (size_t i = 0; i < pred.pixels.size(); ++i) {
        const Vec3d d = pred.pixels[i] - gt.pixels[i];
        mse += dot(d, d);
    }
    mse /= static_cast<double>(pred.pixels.size());
    ImageMetrics r;
    r.rmse = std::sqrt(mse);
    r.psnr = mse == 0.0 ? std::numeric_limits<double>::infinity() : 10.0 * std::log10(1.0 / mse);
    r.ssim =
        (ssim_channel(pred, gt, 0) + ssim_channel(pred, gt, 1) + ssim_channel(pred, gt, 2)) / 3.0;
    return r;
}

DepthMetrics depth_metrics(const ImageDepth& pred, const ImageDepth& gt) {
    if (!pred.same_size(gt.width, gt.height))
        throw std::invalid_argument("depth_metrics: dimension mismatch");
    DepthMetrics r;
    double sq = 0.0;
    for (size_t i = 0; i < pred.pixels.size(); ++i) {
        if (!(gt.pixels[i] > 0.0))
            throw std::invalid_argument("depth_metrics: ground-truth depth must be positive");
        const double d = pred.pixels[i] - gt.pixels[i];
        sq += d * d;
        r.abs_rel += std::abs(d) / gt.pixels[i];
        r.sq_rel += d * d / gt.pixels[i];
    }
    const double n = static_cast<double>(pred.pixels.size());
    r.rmse = std::sqrt(sq / n);
    r.abs_rel /= n;
    r.sq_rel /= n;
    return r;
}

std::optional<PoseMetrics> pose_metrics(std::span<const PoseEntry> pred_tp,
                                        std::span<const PoseEntry> gt, double symmetry_period) {
    if (pred_tp.empty() || gt.empty()) return std::nullopt;
    struct Cand {
        double dist;
        int p, g;
    };
    std::vector<Cand> cands;
    for (size_t p = 0; p < pred_tp.size(); ++p)
        for (size_t g = 0; g < gt.size(); ++g)
            cands.push_back({norm(pred_tp[p].position - gt[g].position), static_cast<int>(p),
                             static_cast<int>(g)});
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.dist != b.dist) return a.dist < b.dist;
        if (a.p != b.p) return a.p < b.p;
        return a.g < b.g;
    });
    PoseMetrics r;
    std::vector<bool> p_used(pred_tp.size(), false), g_used(gt.size(), false);
    for (const Cand& c : cands) {
        if (p_used[static_cast<size_t>(c.p)] || g_used[static_cast<size_t>(c.g)]) continue;
        p_used[static_cast<size_t>(c.p)] = true;
        g_used[static_cast<size_t>(c.g)] = true;
        const double dtheta =
            pred_tp[static_cast<size_t>(c.p)].theta - gt[static_cast<size_t>(c.g)].theta;
        r.pos_errors.push_back(c.dist);
        r.rot_errors_deg.push_back(wrap_angle_error(dtheta, 2.0 * kPi) * 180.0 / kPi);
        r.rot_sym_errors_deg.push_back(wrap_angle_error(dtheta, symmetry_period) * 180.0 / kPi);
    }
    r.matched = static_cast<int>(r.pos_errors.size());
    double acc = 0.0;
    for (double d : r.pos_errors) acc += d;
    r.err_pos = acc / r.matched;
    r.err_rot_deg = median(r.rot_errors_deg);
    r.err_rot_sym_deg = median(r.rot_sym_errors_deg);
    return r;
}

namespace {

nlohmann::json finite_or_string(double v) {
    if (std::isfinite(v)) return v;
    return v > 0 ? "+inf" : "-inf";
}

std::string csv_num(double v) {
    if (!std::isfinite(v)) return v > 0 ? "+inf" : "-inf";
    std::ostringstream ss;
    ss.precision(9);
    ss << v;
    return ss.str();
}

} // namespace

std::string eval_report_json(const EvalReport& r) {
    nlohmann::json j;
    j["images"] = r.images;
    j["instances"] = {{"map", r.instances.map},
                      {"ap50", r.instances.ap50},
                      {"ar50", r.instances.ar50},
                      {"f1_50", r.instances.f1_50},
                      {"all_obj", r.instances.all_obj}};
    j["image"] = {{"rmse", r.image.rmse}, {"psnr", finite_or_string(r.image.psnr)}, {"ssim", r.image.ssim}};
    j["depth"] = {{"rmse", r.depth.rmse}, {"abs_rel", r.depth.abs_rel}, {"sq_rel", r.depth.sq_rel}};
    if (r.pose) {
        j["pose"] = {{"matched", r.pose->matched},
                     {"err_pos", r.pose->err_pos},
                     {"err_rot_deg", r.pose->err_rot_deg},
                     {"err_rot_sym_deg", r.pose->err_rot_sym_deg}};
    } else {
        j["pose"] = nullptr;
    }
    return j.dump(2) + "\n";
}

std::string eval_report_csv_header() {
    return "images,map,ap50,ar50,f1_50,all_obj,rmse,psnr,ssim,depth_rmse,depth_abs_rel,"
           "depth_sq_rel,pose_matched,err_pos,err_rot_deg,err_rot_sym_deg";
}

std::string eval_report_csv_row(const EvalReport& r) {
    std::ostringstream ss;
    ss << r.images << ',' << csv_num(r.instances.map) << ',' << csv_num(r.instances.ap50) << ','
       << csv_num(r.instances.ar50) << ',' << csv_num(r.instances.f1_50) << ','
       << csv_num(r.instances.all_obj) << ',' << csv_num(r.image.rmse) << ','
       << csv_num(r.image.psnr) << ',' << csv_num(r.image.ssim) << ',' << csv_num(r.depth.rmse)
       << ',' << csv_num(r.depth.abs_rel) << ',' << csv_num(r.depth.sq_rel) << ',';
    if (r.pose)
        ss << r.pose->matched << ',' << csv_num(r.pose->err_pos) << ','
           << csv_num(r.pose->err_rot_deg) << ',' << csv_num(r.pose->err_rot_sym_deg);
    else
        ss << "0,,,";
    return ss.str();
}

} // namespace sdfscene
