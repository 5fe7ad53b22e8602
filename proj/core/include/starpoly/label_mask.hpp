#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "starpoly/geometry.hpp"

namespace starpoly {

/// H x W instance ids (0 = background) with an optional parallel class mask
/// (0 = background, 1..C = categories; nonzero exactly where ids are).
struct LabelMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint32_t> ids;
  std::vector<std::uint8_t> classes;

  LabelMask() = default;
  LabelMask(int h, int w) : height(h), width(w), ids(static_cast<std::size_t>(h) * w, 0) {}

  bool has_classes() const { return !classes.empty(); }
  bool inside(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
  std::uint32_t id(int x, int y) const { return ids[index(x, y)]; }
  std::uint32_t& id(int x, int y) { return ids[index(x, y)]; }
  std::size_t size() const { return ids.size(); }

  /// Pixels of every nonzero id, in raster order.
  std::map<std::uint32_t, PixelSet> instances() const;
  /// Majority class of each instance; empty when the mask has no classes.
  std::map<std::uint32_t, std::uint8_t> instance_classes() const;

  /// Rotation by quarter turns / horizontal flip with the same pixel mapping
  /// as ops::rot90 and ops::hflip.
  LabelMask rotated(int quarter_turns) const;
  LabelMask flipped() const;

  /// Throws ContractViolation if class and id masks disagree on foreground.
  void validate() const;

  friend bool operator==(const LabelMask&, const LabelMask&) = default;
};

}  // namespace starpoly
