#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "starpoly/label_mask.hpp"

namespace starpoly {

/// 0.50, 0.55, ..., 0.90.
std::vector<double> ap_thresholds();

/// Sparse IoU table between the instances of two masks of equal size.
struct OverlapTable {
  std::vector<std::uint32_t> gt_ids, pred_ids;  // ascending
  std::vector<std::size_t> gt_area, pred_area;
  /// (gt index, pred index, IoU) for every pair sharing at least one pixel.
  std::vector<std::tuple<std::size_t, std::size_t, double>> pairs;
};

OverlapTable overlap_table(const LabelMask& gt, const LabelMask& pred);

struct MatchRow {
  double tau = 0;
  int tp = 0, fp = 0, fn = 0;
  double sum_matched_iou = 0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> matches;  // (gt id, pred id)
};

/// One-to-one matching of pairs with IoU > tau, greedy by descending IoU
/// (ties by gt id, then pred id).
MatchRow match_instances(const LabelMask& gt, const LabelMask& pred, double tau);
MatchRow match_instances(const OverlapTable& table, double tau);

/// tp / (tp + fp + fn); 1 when both masks are empty.
double average_precision(const MatchRow& row);

struct ApCurve {
  std::vector<double> thresholds;
  std::vector<double> ap;
  double mean = 0;
};

ApCurve ap_curve(const LabelMask& gt, const LabelMask& pred);

struct PqReport {
  double bpq = 0;
  std::optional<double> mpq;  // when both masks carry classes and some class occurs
  std::map<std::uint8_t, double> per_class;  // classes present in either mask
};

/// Panoptic quality at IoU > 0.5: sum of matched IoUs / (tp + fp/2 + fn/2);
/// 1 when both sides are empty. Per-class scores use each instance's majority
/// class; mPQ averages the classes present in either mask.
PqReport panoptic_quality(const LabelMask& gt, const LabelMask& pred);

struct ImageMetrics {
  std::string name;
  ApCurve ap;
  PqReport pq;
  std::vector<MatchRow> rows;  // one per AP threshold
};

ImageMetrics evaluate_image(const std::string& name, const LabelMask& gt, const LabelMask& pred);

struct DatasetMetrics {
  std::vector<ImageMetrics> images;
  ApCurve ap;                  // per-image values averaged in input order
  double bpq = 0;
  std::optional<double> mpq;   // mean over images that define it
};

DatasetMetrics aggregate(std::vector<ImageMetrics> images);

/// Header "name,AP_0.5,AP_0.55,...,AP_0.9,Mean".
std::string ap_csv_header();
std::string ap_csv_row(const std::string& name, const ApCurve& curve);
std::string metrics_to_json(const DatasetMetrics& metrics);

}  // namespace starpoly
