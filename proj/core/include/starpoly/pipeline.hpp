#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "starpoly/config.hpp"
#include "starpoly/dataset.hpp"
#include "starpoly/encode.hpp"
#include "starpoly/losses.hpp"
#include "starpoly/metrics.hpp"
#include "starpoly/model.hpp"
#include "starpoly/postprocess.hpp"
#include "starpoly/transform_model.hpp"

namespace starpoly {

/// Receives one JSON object per line of training/ablation log.
using LogFn = std::function<void(const std::string&)>;

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double lr = 0;
  bool improved = false;
};

struct TrainSummary {
  std::vector<EpochRecord> history;
  double best_val_loss = 0;
  int best_epoch = 0;
  bool stopped_by_schedule = false;  // lr fell below min_lr before max_epochs
};

/// Window [y0, y0+h) x [x0, x0+w) of an [H,W,...] tensor.
Tensor<float> crop_hw(const Tensor<float>& t, int y0, int x0, int h, int w);
LabelMask crop_mask(const LabelMask& m, int y0, int x0, int h, int w);
GroundTruthBundle crop_bundle(const GroundTruthBundle& gt, int y0, int x0, int h, int w);

/// Pads [H,W,C] on the bottom/right by mirror reflection to multiples of divisor.
Tensor<float> mirror_pad(const Tensor<float>& image, int divisor);

struct TransformRun {
  std::unique_ptr<TransformModel<float>> model;  // frozen
  TrainSummary summary;
  double initial_loss = 0;  // mean training loss before the first update
  double final_loss = 0;    // mean training loss of the returned model
  bool converged = false;   // final < initial
};

/// Fits the transformation model on (D_gt, P_gt) of the training masks without
/// augmentation, keeps the best-validation weights and freezes them.
TransformRun train_transform(const std::vector<Sample>& train, const std::vector<Sample>& validation,
                             const RunConfig& config, std::uint64_t seed, const LogFn& log = {});

struct StarNetRun {
  std::unique_ptr<StarNet<float>> model;  // best-validation weights
  TrainSummary summary;
};

/// Trains with L_prob + L_dist(') [+ L_SAP] [+ L_class], Adam, plateau lr
/// decay, rot90/flip augmentation and optional random crops. Deterministic in
/// (config, seed). Writes the best-validation checkpoint when a path is given.
StarNetRun train_starnet(const Dataset& data, const RunConfig& config,
                       const TransformModel<float>* sap_encoder, std::uint64_t seed,
                       const LogFn& log = {},
                       const std::optional<std::filesystem::path>& checkpoint = std::nullopt);

/// Loss terms of one image without augmentation (evaluation mode).
LossTerms<float> evaluate_losses(const StarNet<float>& net, const Sample& sample,
                                 const TransformModel<float>* sap_encoder);

/// Probability and refined distance maps at the input's size.
struct Prediction {
  Tensor<float> probability;  // [H,W]
  Tensor<float> distances;    // [H,W,K] refined
};
Prediction predict(const StarNet<float>& net, const Tensor<float>& image);

struct InferResult {
  PostprocessResult post;
  double network_ms = 0;
  double postprocess_ms = 0;
  double total_ms() const { return network_ms + postprocess_ms; }
};

InferResult infer(const StarNet<float>& net, const Tensor<float>& image,
                  const PostprocessConfig& thresholds);

/// Grid search of (prob_thresh, nms_thresh) maximizing mean AP on the samples.
PostprocessConfig tune_thresholds(const StarNet<float>& net, const std::vector<Sample>& samples,
                                  PostprocessConfig base);

DatasetMetrics evaluate_model(const StarNet<float>& net, const std::vector<Sample>& samples,
                              const PostprocessConfig& thresholds);

struct AblationCell {
  std::string name;
  int samples = 0;
  Weighting weighting = Weighting::Cwm;
  std::optional<SapTargetMode> sap;
  std::vector<std::uint64_t> seeds;
  std::vector<DatasetMetrics> per_seed;
  std::vector<PostprocessConfig> thresholds;  // per seed
  ApCurve mean;             // per-threshold mean over seeds
  std::vector<double> std;  // per-threshold sample std, then the Mean column's
};

struct AblationReport {
  std::vector<AblationCell> cells;
};

/// Grid cells in report order: N = 0 rows first, then by samples, weighting and
/// SAP mode as configured.
std::vector<AblationCell> ablation_grid(const AblationConfig& config);

/// Trains and evaluates every cell for every seed on the test split.
AblationReport run_ablation(const Dataset& data, const RunConfig& config, const LogFn& log = {});

/// name,samples,weighting,sap,seeds,AP_0.5..AP_0.9,Mean,Mean_std
std::string ablation_csv(const AblationReport& report);
/// One row per (cell, seed).
std::string ablation_seed_csv(const AblationReport& report);
std::string ablation_json(const AblationReport& report);

}  // namespace starpoly
