#include "starpoly/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "starpoly/errors.hpp"

namespace starpoly {

Rgb id_color(std::uint32_t id) {
  const double hue = std::fmod(id * 0.618033988749895, 1.0) * 6.0;
  const double s = 0.85, v = 1.0;
  const int sector = static_cast<int>(hue) % 6;
  const double f = hue - std::floor(hue);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  double r = v, g = t, b = p;
  switch (sector) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
  auto c = [](double x) { return static_cast<std::uint8_t>(std::lround(x * 255)); };
  return {c(r), c(g), c(b)};
}

RasterImage to_rgb8(const RasterImage& image) {
  RasterImage out;
  out.height = image.height;
  out.width = image.width;
  out.channels = 3;
  out.bit_depth = 8;
  const std::size_t n = static_cast<std::size_t>(image.height) * image.width;
  out.samples.resize(n * 3);
  const int shift = image.bit_depth == 16 ? 8 : 0;
  for (std::size_t i = 0; i < n; ++i)
    for (int ch = 0; ch < 3; ++ch) {
      const int src = image.channels == 1 ? 0 : ch;
      out.samples[i * 3 + ch] = static_cast<std::uint16_t>(image.samples[i * image.channels + src] >> shift);
    }
  return out;
}

namespace {
void put(RasterImage& rgb, int x, int y, const Rgb& c) {
  if (x < 0 || y < 0 || x >= rgb.width || y >= rgb.height) return;
  const std::size_t i = (static_cast<std::size_t>(y) * rgb.width + x) * 3;
  for (int ch = 0; ch < 3; ++ch) rgb.samples[i + ch] = c[ch];
}

bool is_boundary(const LabelMask& m, int x, int y) {
  const auto id = m.id(x, y);
  if (!id) return false;
  const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
  for (int d = 0; d < 4; ++d) {
    const int xx = x + dx[d], yy = y + dy[d];
    if (!m.inside(xx, yy) || m.id(xx, yy) != id) return true;
  }
  return false;
}
}  // namespace

void draw_mask_outlines(RasterImage& rgb, const LabelMask& mask) {
  require(rgb.channels == 3 && rgb.height == mask.height && rgb.width == mask.width,
          "draw_mask_outlines: RGB image and mask sizes differ");
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x)
      if (is_boundary(mask, x, y)) put(rgb, x, y, id_color(mask.id(x, y)));
}

void draw_polygon_outlines(RasterImage& rgb, const std::vector<StarPolygon>& polygons) {
  require(rgb.channels == 3, "draw_polygon_outlines: RGB image required");
  for (std::size_t i = 0; i < polygons.size(); ++i) {
    const Rgb c = id_color(static_cast<std::uint32_t>(i + 1));
    const auto v = vertices(polygons[i]);
    for (std::size_t k = 0; k < v.size(); ++k) {
      const Point a = v[k], b = v[(k + 1) % v.size()];
      const int steps = std::max(1, static_cast<int>(std::ceil(std::max(std::abs(b.x - a.x), std::abs(b.y - a.y)))));
      for (int s = 0; s <= steps; ++s) {
        const double t = static_cast<double>(s) / steps;
        put(rgb, static_cast<int>(std::lround(a.x + t * (b.x - a.x))),
            static_cast<int>(std::lround(a.y + t * (b.y - a.y))), c);
      }
    }
  }
}

std::string overlay_svg(const std::string& image_href, int height, int width, const LabelMask* mask,
                        const std::vector<StarPolygon>& polygons) {
  auto hex = [](const Rgb& c) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c[0], c[1], c[2]);
    return std::string(buf);
  };
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" xmlns:xlink=\"http://www.w3.org/1999/xlink\" width=\"" +
                    std::to_string(width) + "\" height=\"" + std::to_string(height) + "\" viewBox=\"-0.5 -0.5 " +
                    std::to_string(width) + " " + std::to_string(height) + "\">\n";
  svg += "<image x=\"-0.5\" y=\"-0.5\" width=\"" + std::to_string(width) + "\" height=\"" +
         std::to_string(height) + "\" xlink:href=\"" + image_href + "\" style=\"image-rendering:pixelated\"/>\n";
  if (mask) {
    for (int y = 0; y < mask->height; ++y)
      for (int x = 0; x < mask->width; ++x)
        if (is_boundary(*mask, x, y))
          svg += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) +
                 "\" width=\"1\" height=\"1\" transform=\"translate(-0.5,-0.5)\" fill=\"" +
                 hex(id_color(mask->id(x, y))) + "\"/>\n";
  }
  for (std::size_t i = 0; i < polygons.size(); ++i) {
    std::string pts;
    for (const auto& p : vertices(polygons[i])) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%s%.3f,%.3f", pts.empty() ? "" : " ", p.x, p.y);
      pts += buf;
    }
    svg += "<polygon points=\"" + pts + "\" fill=\"none\" stroke-width=\"0.5\" stroke=\"" +
           hex(id_color(static_cast<std::uint32_t>(i + 1))) + "\"/>\n";
  }
  return svg + "</svg>\n";
}

}  // namespace starpoly
