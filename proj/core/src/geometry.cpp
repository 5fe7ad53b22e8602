#include "starpoly/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "starpoly/errors.hpp"

namespace starpoly {

RaySet::RaySet(int count) {
  require(count >= 1, "RaySet: need at least one direction");
  cos_.resize(static_cast<std::size_t>(count));
  sin_.resize(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const double theta = angle(k);
    cos_[static_cast<std::size_t>(k)] = std::cos(theta);
    sin_[static_cast<std::size_t>(k)] = std::sin(theta);
  }
}

double RaySet::angle(int k) const {
  const int count = static_cast<int>(cos_.size());
  return 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(count);
}

std::vector<Point> vertices(const StarPolygon& poly) {
  const int k_count = static_cast<int>(poly.radii.size());
  require(k_count >= 3, "vertices: a star polygon needs K >= 3 rays, got " +
                            std::to_string(k_count));
  const RaySet rays(k_count);
  std::vector<Point> out(static_cast<std::size_t>(k_count));
  for (int k = 0; k < k_count; ++k) {
    const double r = poly.radii[static_cast<std::size_t>(k)];
    require(r >= 0, "vertices: negative radius");
    out[static_cast<std::size_t>(k)] = {poly.center.x + r * rays.cos(k),
                                         poly.center.y + r * rays.sin(k)};
  }
  return out;
}

std::size_t SpanMask::area() const {
  std::size_t n = 0;
  for (const auto& row : rows)
    for (const auto& [b, e] : row) n += static_cast<std::size_t>(e - b);
  return n;
}

bool SpanMask::contains(int x, int y) const {
  const int i = y - y0;
  if (i < 0 || i >= static_cast<int>(rows.size())) return false;
  for (const auto& [b, e] : rows[static_cast<std::size_t>(i)])
    if (x >= b && x < e) return true;
  return false;
}

PixelSet SpanMask::pixels() const {
  PixelSet out;
  out.reserve(area());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (const auto& [b, e] : rows[i])
      for (int x = b; x < e; ++x) out.push_back({x, y0 + static_cast<int>(i)});
  return out;
}

SpanMask SpanMask::clipped(ImageSize size) const {
  SpanMask out;
  const int first = std::max(y0, 0);
  const int last = std::min(y0 + static_cast<int>(rows.size()), size.height);
  out.y0 = first;
  for (int y = first; y < last; ++y) {
    std::vector<std::pair<int, int>> row;
    for (const auto& [b, e] : rows[static_cast<std::size_t>(y - y0)]) {
      const int cb = std::max(b, 0), ce = std::min(e, size.width);
      if (cb < ce) row.emplace_back(cb, ce);
    }
    out.rows.push_back(std::move(row));
  }
  if (out.rows.empty()) out.y0 = 0;
  return out;
}

SpanMask rasterize_spans(const std::vector<Point>& polygon) {
  SpanMask mask;
  if (polygon.size() < 3) return mask;
  double ymin = polygon[0].y, ymax = polygon[0].y;
  for (const auto& p : polygon) {
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  const int first = static_cast<int>(std::ceil(ymin));
  const int last = static_cast<int>(std::floor(ymax));
  if (last < first) return mask;
  mask.y0 = first;
  mask.rows.resize(static_cast<std::size_t>(last - first + 1));

  std::vector<double> crossings;
  const std::size_t n = polygon.size();
  for (int y = first; y <= last; ++y) {
    crossings.clear();
    const double fy = y;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const Point& a = polygon[i];
      const Point& b = polygon[j];
      if ((a.y > fy) != (b.y > fy))
        crossings.push_back((b.x - a.x) * (fy - a.y) / (b.y - a.y) + a.x);
    }
    std::sort(crossings.begin(), crossings.end());
    // Pixel x is inside iff an odd number of crossings lie strictly right of
    // it, i.e. crossings[2m] <= x < crossings[2m+1].
    auto& row = mask.rows[static_cast<std::size_t>(y - first)];
    for (std::size_t m = 0; m + 1 < crossings.size(); m += 2) {
      const int b = static_cast<int>(std::ceil(crossings[m]));
      const int e = static_cast<int>(std::ceil(crossings[m + 1]));
      if (b >= e) continue;
      if (!row.empty() && row.back().second >= b)
        row.back().second = std::max(row.back().second, e);
      else
        row.emplace_back(b, e);
    }
  }
  // Trim empty leading and trailing rows so the window is tight.
  std::size_t lo = 0, hi = mask.rows.size();
  while (lo < hi && mask.rows[lo].empty()) ++lo;
  while (hi > lo && mask.rows[hi - 1].empty()) --hi;
  if (lo == hi) return SpanMask{};
  mask.rows = std::vector<std::vector<std::pair<int, int>>>(mask.rows.begin() + lo,
                                                            mask.rows.begin() + hi);
  mask.y0 += static_cast<int>(lo);
  return mask;
}

SpanMask rasterize_spans(const StarPolygon& poly) { return rasterize_spans(vertices(poly)); }

PixelSet rasterize(const StarPolygon& poly, int height, int width) {
  require(height >= 1 && width >= 1, "rasterize: image dims must be positive");
  return rasterize_spans(poly).clipped({height, width}).pixels();
}

std::size_t intersection_area(const SpanMask& a, const SpanMask& b) {
  const int first = std::max(a.y0, b.y0);
  const int last = std::min(a.y0 + static_cast<int>(a.rows.size()),
                            b.y0 + static_cast<int>(b.rows.size()));
  std::size_t total = 0;
  for (int y = first; y < last; ++y) {
    const auto& ra = a.rows[static_cast<std::size_t>(y - a.y0)];
    const auto& rb = b.rows[static_cast<std::size_t>(y - b.y0)];
    std::size_t i = 0, j = 0;
    while (i < ra.size() && j < rb.size()) {
      const int lo = std::max(ra[i].first, rb[j].first);
      const int hi = std::min(ra[i].second, rb[j].second);
      if (lo < hi) total += static_cast<std::size_t>(hi - lo);
      if (ra[i].second < rb[j].second)
        ++i;
      else
        ++j;
    }
  }
  return total;
}

double polygon_iou(const StarPolygon& a, const StarPolygon& b, std::optional<ImageSize> clip) {
  SpanMask ma = rasterize_spans(a);
  SpanMask mb = rasterize_spans(b);
  if (clip) {
    ma = ma.clipped(*clip);
    mb = mb.clipped(*clip);
  }
  const std::size_t inter = intersection_area(ma, mb);
  const std::size_t uni = ma.area() + mb.area() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double mask_iou(const PixelSet& a, const PixelSet& b) {
  std::size_t inter = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++inter;
      ++ia;
      ++ib;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace starpoly
