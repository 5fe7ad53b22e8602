#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "starpoly/model.hpp"
#include "starpoly/transform_model.hpp"

namespace starpoly {

/// Checkpoint container: magic "SPCK", u32 version, u64 header length, a JSON
/// header (kind, model config, parameter names, free-form metadata), then one
/// tensor dump per parameter in header order.

template <typename T>
void save_starnet(const std::filesystem::path& path, const StarNet<T>& net,
                 const std::string& metadata_json = "{}");

template <typename T>
std::unique_ptr<StarNet<T>> load_starnet(const std::filesystem::path& path);

/// Transformation model checkpoints carry their SapTargetMode; loading
/// returns the model frozen.
template <typename T>
void save_transform(const std::filesystem::path& path, const TransformModel<T>& model);

template <typename T>
std::unique_ptr<TransformModel<T>> load_transform(const std::filesystem::path& path);

/// Header JSON of any checkpoint file.
std::string read_checkpoint_header(const std::filesystem::path& path);

}  // namespace starpoly
