#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "starpoly/geometry.hpp"
#include "starpoly/image_io.hpp"
#include "starpoly/label_mask.hpp"

namespace starpoly {

using Rgb = std::array<std::uint8_t, 3>;

/// Deterministic, well-separated color of an instance id (golden-angle hues).
Rgb id_color(std::uint32_t id);

/// 8-bit RGB copy of an image (gray replicated, 16-bit scaled down).
RasterImage to_rgb8(const RasterImage& image);

/// Colors the boundary pixels of every instance (pixels with a 4-neighbour of
/// another id) with the instance color.
void draw_mask_outlines(RasterImage& rgb, const LabelMask& mask);

/// Draws each polygon's closed outline through its vertices; polygon i uses
/// id_color(i + 1).
void draw_polygon_outlines(RasterImage& rgb, const std::vector<StarPolygon>& polygons);

/// SVG overlay: the image referenced by file name, mask outlines as pixel
/// rectangles and polygons as <polygon> elements with vertex coordinates.
std::string overlay_svg(const std::string& image_href, int height, int width, const LabelMask* mask,
                        const std::vector<StarPolygon>& polygons);

}  // namespace starpoly
