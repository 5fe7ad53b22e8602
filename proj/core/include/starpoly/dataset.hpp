#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "starpoly/label_mask.hpp"
#include "starpoly/synth.hpp"
#include "starpoly/tensor.hpp"

namespace starpoly {

struct Sample {
  std::string name;
  Tensor<float> image;  // [H,W,C] in [0,1]
  LabelMask labels;     // empty (0x0) when no mask exists
};

struct Dataset {
  std::vector<Sample> train, validation, test;
  std::optional<SynthConfig> synth;  // set for generated datasets
};

using Warn = std::function<void(const std::string&)>;

/// Writes images/NNNN.png, masks/NNNN.png (16-bit), classes/NNNN.png when the
/// config has classes, and manifest.json listing the splits.
void write_synth_dataset(const std::filesystem::path& root, const SynthConfig& config,
                         const Warn& warn = {});

/// Loads a dataset root. With manifest.json the listed splits are used;
/// otherwise every images/*.png (sorted by name) with a same-named mask is
/// split 70/15/15 in order.
Dataset load_dataset(const std::filesystem::path& root);

/// Images of a directory (sorted by file name); masks are attached from
/// mask_dir when given and present.
std::vector<Sample> load_images(const std::filesystem::path& image_dir,
                                const std::optional<std::filesystem::path>& mask_dir = std::nullopt);

/// Sorted *.png stems of a directory.
std::vector<std::string> png_stems(const std::filesystem::path& dir);

std::string manifest_json(const SynthConfig& config);

}  // namespace starpoly
