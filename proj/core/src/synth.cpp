#include "starpoly/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "starpoly/errors.hpp"

namespace starpoly {

void SynthConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("synth: " + m); };
  if (height < 8 || width < 8) fail("height and width must be >= 8");
  if (min_instances < 0 || max_instances < min_instances) fail("need 0 <= min_instances <= max_instances");
  if (min_radius < 3 || max_radius < min_radius) fail("need 3 <= min_radius <= max_radius");
  if (2 * max_radius >= std::min(height, width)) fail("max_radius too large for the image");
  if (roughness < 0 || roughness > 0.5) fail("roughness must lie in [0, 0.5]");
  if (harmonics < 2) fail("harmonics must be >= 2");
  if (vertices < 8) fail("vertices must be >= 8");
  if (max_overlap < 0 || max_overlap > 1) fail("max_overlap must lie in [0, 1]");
  if (blur_sigma < 0 || noise_sigma < 0) fail("blur_sigma and noise_sigma must be >= 0");
  if (class_count < 0 || class_count > 255) fail("class_count must lie in [0, 255]");
  if (train < 0 || validation < 0 || test < 0) fail("split sizes must be >= 0");
}

namespace {
std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}
}  // namespace

std::uint64_t image_seed(std::uint64_t dataset_seed, std::uint64_t index) {
  return splitmix(splitmix(dataset_seed) ^ splitmix(index + 0x5851f42d4c957f2dULL));
}

StarPolygon generate_instance(std::mt19937_64& rng, const SynthConfig& config) {
  const double r = uniform(rng, config.min_radius, config.max_radius);
  StarPolygon poly;
  poly.center = {uniform(rng, r, config.width - 1 - r), uniform(rng, r, config.height - 1 - r)};
  std::vector<double> amp, phase;
  double norm = 0;
  for (int j = 2; j <= config.harmonics; ++j) {
    amp.push_back(uniform(rng, -1.0, 1.0) / j);
    phase.push_back(uniform(rng, 0.0, 2 * std::numbers::pi));
    norm += std::abs(amp.back());
  }
  const RaySet rays(config.vertices);
  poly.radii.resize(static_cast<std::size_t>(config.vertices));
  for (int k = 0; k < config.vertices; ++k) {
    double g = 0;
    for (std::size_t j = 0; j < amp.size(); ++j)
      g += amp[j] * std::cos(static_cast<double>(j + 2) * rays.angle(k) + phase[j]);
    if (norm > 0) g /= norm;
    poly.radii[static_cast<std::size_t>(k)] = std::max(r * (1 + config.roughness * g), 0.1 * r);
  }
  poly.score = 1;
  return poly;
}

std::vector<double> gaussian_blur(const std::vector<double>& image, int height, int width,
                                  double sigma) {
  if (sigma <= 0) return image;
  const int radius = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0;
  for (int i = -radius; i <= radius; ++i)
    total += kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : kernel) v /= total;
  std::vector<double> tmp(image.size()), out(image.size());
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double acc = 0;
      for (int i = -radius; i <= radius; ++i) {
        const int xx = std::clamp(x + i, 0, width - 1);
        acc += kernel[static_cast<std::size_t>(i + radius)] * image[static_cast<std::size_t>(y) * width + xx];
      }
      tmp[static_cast<std::size_t>(y) * width + x] = acc;
    }
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double acc = 0;
      for (int i = -radius; i <= radius; ++i) {
        const int yy = std::clamp(y + i, 0, height - 1);
        acc += kernel[static_cast<std::size_t>(i + radius)] * tmp[static_cast<std::size_t>(yy) * width + x];
      }
      out[static_cast<std::size_t>(y) * width + x] = acc;
    }
  return out;
}

SynthImage generate_image(const SynthConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  SynthImage out;
  out.height = config.height;
  out.width = config.width;
  out.labels = LabelMask(config.height, config.width);
  if (config.class_count > 0) out.labels.classes.assign(out.labels.size(), 0);
  out.requested =
      std::uniform_int_distribution<int>(config.min_instances, config.max_instances)(rng);

  const ImageSize size{config.height, config.width};
  std::vector<SpanMask> placed;
  std::vector<double> brightness;
  const int attempts = 100 * out.requested;
  for (int a = 0; a < attempts && static_cast<int>(placed.size()) < out.requested; ++a) {
    StarPolygon cand = generate_instance(rng, config);
    SpanMask raster = rasterize_spans(cand).clipped(size);
    const std::size_t area = raster.area();
    if (area == 0) continue;
    bool ok = true;
    for (const auto& p : placed) {
      const double inter = static_cast<double>(intersection_area(raster, p));
      if (inter > config.max_overlap * static_cast<double>(std::min(area, p.area()))) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    const auto id = static_cast<std::uint32_t>(placed.size() + 1);
    std::uint8_t cls = 0;
    double lo = config.min_brightness, hi = config.max_brightness;
    if (config.class_count > 0) {
      cls = static_cast<std::uint8_t>(std::uniform_int_distribution<int>(1, config.class_count)(rng));
      const double band = (hi - lo) / config.class_count;
      lo += band * (cls - 1);
      hi = lo + band;
    }
    brightness.push_back(uniform(rng, lo, hi));
    for (std::size_t r = 0; r < raster.rows.size(); ++r) {
      const int y = raster.y0 + static_cast<int>(r);
      for (const auto& [s, e] : raster.rows[r])
        for (int x = s; x < e; ++x) {
          const std::size_t i = out.labels.index(x, y);
          if (out.labels.ids[i] != 0) continue;  // first placed wins
          out.labels.ids[i] = id;
          if (cls) out.labels.classes[i] = cls;
        }
    }
    placed.push_back(std::move(raster));
    out.polygons.push_back(std::move(cand));
  }

  std::vector<double> intensity(out.labels.size(), config.background);
  for (std::size_t i = 0; i < intensity.size(); ++i)
    if (out.labels.ids[i]) intensity[i] = brightness[out.labels.ids[i] - 1];
  intensity = gaussian_blur(intensity, config.height, config.width, config.blur_sigma);
  std::normal_distribution<double> noise(0.0, 1.0);
  out.pixels.resize(intensity.size());
  for (std::size_t i = 0; i < intensity.size(); ++i) {
    double v = intensity[i];
    if (config.noise_sigma > 0) v += config.noise_sigma * noise(rng);
    out.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  }
  return out;
}

}  // namespace starpoly
