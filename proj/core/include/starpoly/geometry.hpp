#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

namespace starpoly {

inline constexpr int kDefaultRays = 32;

struct Point {
  double x = 0;
  double y = 0;
};

/// Integer pixel; (x, y) = (column, row). Pixel centers sit at integer coordinates.
struct Pixel {
  int x = 0;
  int y = 0;

  friend bool operator==(const Pixel&, const Pixel&) = default;
  friend std::strong_ordering operator<=>(const Pixel& a, const Pixel& b) {
    if (auto c = a.y <=> b.y; c != 0) return c;
    return a.x <=> b.x;
  }
};

/// Pixels sorted in raster order (row-major), no duplicates.
using PixelSet = std::vector<Pixel>;

struct ImageSize {
  int height = 0;
  int width = 0;
};

/// K equiangular ray directions, theta_k = 2*pi*k/K measured from +x toward +y.
class RaySet {
 public:
  explicit RaySet(int count = kDefaultRays);

  int size() const { return static_cast<int>(cos_.size()); }
  double angle(int k) const;
  double cos(int k) const { return cos_[static_cast<std::size_t>(k)]; }
  double sin(int k) const { return sin_[static_cast<std::size_t>(k)]; }

 private:
  std::vector<double> cos_;
  std::vector<double> sin_;
};

struct StarPolygon {
  Point center;
  std::vector<double> radii;
  double score = 0;
};

/// Vertex k = center + radii[k] * (cos theta_k, sin theta_k). Requires K >= 3.
std::vector<Point> vertices(const StarPolygon& poly);

/// Row-wise run-length raster: rows[i] holds half-open [x_begin, x_end) spans of
/// row y0 + i, sorted and disjoint.
struct SpanMask {
  int y0 = 0;
  std::vector<std::vector<std::pair<int, int>>> rows;

  std::size_t area() const;
  bool contains(int x, int y) const;
  PixelSet pixels() const;
  SpanMask clipped(ImageSize size) const;
};

/// Raster of a closed polygon: pixel centers inside under the even-odd rule
/// with half-open crossings (a vertex lying exactly on a scanline counts for
/// the edge that extends strictly above it). Not clipped.
SpanMask rasterize_spans(const std::vector<Point>& polygon);
SpanMask rasterize_spans(const StarPolygon& poly);

/// Pixels of the polygon inside an H x W image.
PixelSet rasterize(const StarPolygon& poly, int height, int width);

std::size_t intersection_area(const SpanMask& a, const SpanMask& b);

/// Pixel-resolution IoU of two polygons; 0 when the union is empty. Pass an
/// image size to restrict both rasters to the image first.
double polygon_iou(const StarPolygon& a, const StarPolygon& b,
                   std::optional<ImageSize> clip = std::nullopt);

/// |a & b| / |a | b| for sorted pixel sets; 0 when both are empty.
double mask_iou(const PixelSet& a, const PixelSet& b);

}  // namespace starpoly
