#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "starpoly/model.hpp"
#include "starpoly/optim.hpp"
#include "starpoly/synth.hpp"
#include "starpoly/transform_model.hpp"

namespace starpoly {

struct PathConfig {
  std::string dataset = "data";         // dataset root (synth output, training input)
  std::string output = "runs";          // default --out
  std::string checkpoint;               // network checkpoint for infer (default <out>/model.ckpt)
  std::string transform_checkpoint;     // frozen transformation model for SAP training
  std::string images;                   // infer input directory (default: dataset test split)
  std::string predictions;              // eval: predicted masks directory
  std::string ground_truth;             // eval: GT masks directory (default: dataset masks)
  std::string plot_image;               // plot inputs
  std::string plot_mask;
  std::string plot_proposals;
};

struct SapConfig {
  std::optional<SapTargetMode> mode;  // none disables the SAP term
  int levels = 4;
  int base_channels = 8;
  int max_epochs = 30;
};

struct OptimizerConfig {
  PlateauConfig plateau;
  AdamConfig adam;
  int max_epochs = 200;
};

struct AugmentConfig {
  bool rotation90 = true;
  bool hflip = true;
};

struct TrainingConfig {
  int crop_size = 0;           // square random crops; 0 trains on full images
  int validation_limit = 0;    // validation images used per epoch; 0 = all
  int train_limit = 0;         // training images used; 0 = all
};

struct PostprocessConfig {
  double prob_thresh = 0.5;
  double nms_thresh = 0.5;
  /// Pick both thresholds by mean AP on the validation split after training.
  bool tune_on_validation = false;
};

struct AblationConfig {
  std::vector<int> samples{0, 6};
  std::vector<Weighting> weightings{Weighting::Cwm};
  std::vector<std::optional<SapTargetMode>> sap_modes{std::nullopt};
  std::vector<std::uint64_t> seeds{1, 2, 3};
};

struct RunConfig {
  PathConfig paths;
  BackboneConfig backbone;
  SynthConfig synth;
  SapConfig sap;
  OptimizerConfig optimizer;
  AugmentConfig augmentation;
  TrainingConfig training;
  PostprocessConfig postprocess;
  AblationConfig ablation;
  std::uint64_t seed = 0;
};

/// Parses the JSON config. Missing keys keep their defaults; unknown keys and
/// ill-typed values throw ConfigError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Fully resolved config as pretty JSON (every key present).
std::string config_to_json(const RunConfig& config);

std::string backbone_to_json(const BackboneConfig& config);
BackboneConfig backbone_from_json(const std::string& text);
std::string synth_to_json(const SynthConfig& config);
SynthConfig synth_from_json(const std::string& text);

}  // namespace starpoly
