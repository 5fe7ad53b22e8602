#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "starpoly/geometry.hpp"
#include "starpoly/label_mask.hpp"

namespace starpoly {

struct SynthConfig {
  int height = 128;
  int width = 128;
  int min_instances = 5;
  int max_instances = 15;
  double min_radius = 6;
  double max_radius = 12;
  double roughness = 0.2;    // a in r_k = R (1 + a g_k), within [0, 0.5]
  int harmonics = 4;         // Fourier orders 2..harmonics shape g
  int vertices = 64;         // rays of the generated polygons
  double max_overlap = 0.1;  // allowed intersection / smaller instance area
  double blur_sigma = 1.0;
  double noise_sigma = 0.03;
  double background = 0.1;
  double min_brightness = 0.45;
  double max_brightness = 1.0;
  int class_count = 0;  // 0 = no class masks
  int train = 200;
  int validation = 50;
  int test = 50;
  std::uint64_t seed = 0;

  /// Throws ConfigError on invalid values.
  void validate() const;
  int total_images() const { return train + validation + test; }

  friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

/// Order-independent seed of image `index` of a dataset.
std::uint64_t image_seed(std::uint64_t dataset_seed, std::uint64_t index);

/// Star-convex polygon with radii R (1 + a g_k), g a unit-bounded random
/// Fourier series of orders 2..harmonics, center uniform at distance >= R from
/// the image border.
StarPolygon generate_instance(std::mt19937_64& rng, const SynthConfig& config);

struct SynthImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;  // 8-bit gray, row-major
  LabelMask labels;                  // carries classes when class_count > 0
  std::vector<StarPolygon> polygons; // placed instances, id i+1 = polygons[i]
  int requested = 0;                 // instances asked for; > polygons.size() on placement failure
};

SynthImage generate_image(const SynthConfig& config, std::uint64_t seed);

/// Separable Gaussian blur with clamped borders; sigma <= 0 is the identity.
std::vector<double> gaussian_blur(const std::vector<double>& image, int height, int width,
                                  double sigma);

}  // namespace starpoly
