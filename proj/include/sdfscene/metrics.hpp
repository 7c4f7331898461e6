// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sdfscene/image.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sdfscene {

// Instance, image, depth and pose evaluation. Masks under the visibility
// floor (25 pixels) are dropped on both sides before matching.

struct MatchConfig {
    int min_pixels = 25;
};

struct MatchPair {
    int pred = 0, gt = 0;
    double iou = 0.0;
};

struct MatchResult {
    std::vector<MatchPair> matches;   // true positives
    std::vector<int> false_positives; // considered pred indices left unmatched
    std::vector<int> false_negatives; // considered gt indices left unmatched
    int considered_pred = 0;
    int considered_gt = 0;
};

double mask_iou(const ImageMask& a, const ImageMask& b);

// Greedy best-IoU matching: candidate pairs with IoU >= tau in descending
// order, each side assigned at most once. Ties break on lower indices.
MatchResult match_instances(std::span<const ImageMask> pred, std::span<const ImageMask> gt,
                            double tau, const MatchConfig& cfg = {});

// Splits an instance-id image (0 background, i = slot i) into binary masks.
std::vector<ImageMask> split_instance_masks(const ImageMask& ids, int count);

struct InstanceMetrics {
    double map = 0;    // mean AP over tau in {0.5, ..., 0.95}
    double ap50 = 0;   // mean per-image precision at tau = 0.5
    double ar50 = 0;   // mean per-image recall
    double f1_50 = 0;  // mean per-image F1
    double all_obj = 0; // share of images with every visible gt object matched
};

struct MaskSets {
    std::vector<ImageMask> pred, gt;
};

InstanceMetrics instance_metrics(std::span<const MaskSets> images, const MatchConfig& cfg = {});

struct ImageMetrics {
    double rmse = 0;
    double psnr = 0; // +inf when the MSE vanishes
    double ssim = 0;
};

// MSE is the pixel mean of the squared RGB vector norm (dynamic range 1).
// SSIM: uniform 7x7 windows fully inside the image, sample-normalized
// covariance, K1 = 0.01, K2 = 0.03, averaged over channels.
ImageMetrics image_metrics(const ImageRgb& pred, const ImageRgb& gt);

struct DepthMetrics {
    double rmse = 0;
    double abs_rel = 0;
    double sq_rel = 0;
};

DepthMetrics depth_metrics(const ImageDepth& pred, const ImageDepth& gt);

struct PoseEntry {
    Vec3d position{0, 0, 0};
    double theta = 0;
};

struct PoseMetrics {
    int matched = 0;
    double err_pos = 0;         // mean distance over greedy nearest-position pairs
    double err_rot_deg = 0;     // median wrapped angular error
    double err_rot_sym_deg = 0; // median after folding by the symmetry period
    std::vector<double> pos_errors;
    std::vector<double> rot_errors_deg;
    std::vector<double> rot_sym_errors_deg;
};

// Only predictions that are true positives at tau = 0.5 should be passed in.
// Absent when either side is empty.
std::optional<PoseMetrics> pose_metrics(std::span<const PoseEntry> pred_tp,
                                        std::span<const PoseEntry> gt, double symmetry_period);

struct EvalReport {
    int images = 0;
    InstanceMetrics instances;
    ImageMetrics image;
    DepthMetrics depth;
    std::optional<PoseMetrics> pose;
};

std::string eval_report_json(const EvalReport& r);
std::string eval_report_csv_header();
std::string eval_report_csv_row(const EvalReport& r);

double median(std::vector<double> values);

} // namespace sdfscene
