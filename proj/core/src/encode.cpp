#include "starpoly/encode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace starpoly {

Tensor<float> star_distance_map(const LabelMask& mask, const RaySet& rays) {
  const int h = mask.height, w = mask.width, k_count = rays.size();
  Tensor<float> out(Shape{static_cast<std::size_t>(h), static_cast<std::size_t>(w),
                          static_cast<std::size_t>(k_count)});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto v = mask.id(x, y);
      if (v == 0) continue;
      float* d = out.data() + (static_cast<std::size_t>(y) * w + x) * k_count;
      for (int k = 0; k < k_count; ++k) {
        const double dx = rays.cos(k), dy = rays.sin(k);
        // Back off from the first outside step to the edge of the last inside pixel.
        const double back = 0.5 / std::max(std::abs(dx), std::abs(dy)) - 1.0;
        int t = 1;
        for (;; ++t) {
          const int px = static_cast<int>(std::round(x + t * dx));
          const int py = static_cast<int>(std::round(y + t * dy));
          if (!mask.inside(px, py) || mask.id(px, py) != v) break;
        }
        d[k] = static_cast<float>(t + back);
      }
    }
  }
  return out;
}

Tensor<float> centroid_prob_map(const LabelMask& mask, const Tensor<float>& distances) {
  require(distances.rank() == 3 && distances.dim(0) == static_cast<std::size_t>(mask.height) &&
              distances.dim(1) == static_cast<std::size_t>(mask.width),
          "centroid_prob_map: distance map does not match the mask");
  const std::size_t k_count = distances.dim(2);
  const std::size_t n = mask.size();
  std::vector<float> min_d(n, 0.0f);
  std::map<std::uint32_t, float> peak;
  for (std::size_t i = 0; i < n; ++i) {
    if (mask.ids[i] == 0) continue;
    const float* d = distances.data() + i * k_count;
    min_d[i] = *std::min_element(d, d + k_count);
    auto& p = peak[mask.ids[i]];
    p = std::max(p, min_d[i]);
  }
  Tensor<float> out(Shape{static_cast<std::size_t>(mask.height),
                          static_cast<std::size_t>(mask.width)});
  for (std::size_t i = 0; i < n; ++i) {
    if (mask.ids[i] == 0) continue;
    const float p = peak[mask.ids[i]];
    require(p > 0, "centroid_prob_map: instance " + std::to_string(mask.ids[i]) +
                       " has zero maximum distance");
    out[i] = min_d[i] / p;
  }
  return out;
}

std::pair<Tensor<float>, Tensor<float>> seg_boundary_targets(const LabelMask& mask) {
  const Shape shape{static_cast<std::size_t>(mask.height), static_cast<std::size_t>(mask.width)};
  Tensor<float> seg(shape), bnd(shape);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      const auto v = mask.id(x, y);
      if (v == 0) continue;
      const std::size_t i = mask.index(x, y);
      seg[i] = 1.0f;
      bool edge = false;
      for (int dy = -1; dy <= 1 && !edge; ++dy)
        for (int dx = -1; dx <= 1 && !edge; ++dx) {
          if (dx == 0 && dy == 0) continue;
          edge = !mask.inside(x + dx, y + dy) || mask.id(x + dx, y + dy) != v;
        }
      if (edge) bnd[i] = 1.0f;
    }
  }
  return {seg, bnd};
}

Tensor<float> bbox_targets(const LabelMask& mask) {
  struct Stats {
    double sx = 0, sy = 0;
    std::size_t n = 0;
    int x0 = std::numeric_limits<int>::max(), y0 = std::numeric_limits<int>::max();
    int x1 = std::numeric_limits<int>::min(), y1 = std::numeric_limits<int>::min();
  };
  std::map<std::uint32_t, Stats> stats;
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) {
      const auto v = mask.id(x, y);
      if (v == 0) continue;
      auto& s = stats[v];
      s.sx += x;
      s.sy += y;
      ++s.n;
      s.x0 = std::min(s.x0, x);
      s.x1 = std::max(s.x1, x);
      s.y0 = std::min(s.y0, y);
      s.y1 = std::max(s.y1, y);
    }
  Tensor<float> out(Shape{static_cast<std::size_t>(mask.height),
                          static_cast<std::size_t>(mask.width), 6});
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) {
      const auto v = mask.id(x, y);
      if (v == 0) continue;
      const auto& s = stats[v];
      float* o = out.data() + mask.index(x, y) * 6;
      o[0] = static_cast<float>(s.sx / static_cast<double>(s.n) - x);
      o[1] = static_cast<float>(s.sy / static_cast<double>(s.n) - y);
      o[2] = static_cast<float>(x - s.x0);
      o[3] = static_cast<float>(s.x1 - x);
      o[4] = static_cast<float>(y - s.y0);
      o[5] = static_cast<float>(s.y1 - y);
    }
  return out;
}

GroundTruthBundle encode_ground_truth(const LabelMask& mask, const RaySet& rays) {
  GroundTruthBundle gt;
  gt.distances = star_distance_map(mask, rays);
  gt.probability = centroid_prob_map(mask, gt.distances);
  std::tie(gt.seg, gt.bnd) = seg_boundary_targets(mask);
  gt.bbox = bbox_targets(mask);
  return gt;
}

template <typename T>
StarPolygon decode_polygon(const Tensor<T>& probability, const Tensor<T>& distances, Pixel pixel) {
  require(distances.rank() == 3 && probability.rank() == 2, "decode_polygon: bad map ranks");
  const int h = static_cast<int>(distances.dim(0)), w = static_cast<int>(distances.dim(1));
  require(pixel.x >= 0 && pixel.y >= 0 && pixel.x < w && pixel.y < h,
          "decode_polygon: pixel outside the image");
  const std::size_t k_count = distances.dim(2);
  const std::size_t i = static_cast<std::size_t>(pixel.y) * w + pixel.x;
  StarPolygon poly;
  poly.center = {static_cast<double>(pixel.x), static_cast<double>(pixel.y)};
  poly.radii.resize(k_count);
  for (std::size_t k = 0; k < k_count; ++k)
    poly.radii[k] = std::max(0.0, static_cast<double>(distances[i * k_count + k]));
  poly.score = static_cast<double>(probability[i]);
  return poly;
}

template StarPolygon decode_polygon(const Tensor<float>&, const Tensor<float>&, Pixel);
template StarPolygon decode_polygon(const Tensor<double>&, const Tensor<double>&, Pixel);

}  // namespace starpoly
