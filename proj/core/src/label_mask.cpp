#include "starpoly/label_mask.hpp"

#include <array>

#include "starpoly/errors.hpp"

namespace starpoly {

std::map<std::uint32_t, PixelSet> LabelMask::instances() const {
  std::map<std::uint32_t, PixelSet> out;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      if (const auto v = id(x, y); v != 0) out[v].push_back({x, y});
  return out;
}

std::map<std::uint32_t, std::uint8_t> LabelMask::instance_classes() const {
  std::map<std::uint32_t, std::uint8_t> out;
  if (!has_classes()) return out;
  std::map<std::uint32_t, std::array<std::size_t, 256>> votes;
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (ids[i] != 0) {
      auto [it, inserted] = votes.try_emplace(ids[i]);
      if (inserted) it->second.fill(0);
      ++it->second[classes[i]];
    }
  for (const auto& [v, counts] : votes) {
    std::size_t best = 1;
    for (std::size_t c = 1; c < counts.size(); ++c)
      if (counts[c] > counts[best]) best = c;
    out[v] = static_cast<std::uint8_t>(best);
  }
  return out;
}

LabelMask LabelMask::rotated(int quarter_turns) const {
  LabelMask cur = *this;
  const int turns = ((quarter_turns % 4) + 4) % 4;
  for (int t = 0; t < turns; ++t) {
    LabelMask next(cur.width, cur.height);
    if (cur.has_classes()) next.classes.assign(cur.classes.size(), 0);
    for (int y = 0; y < cur.height; ++y)
      for (int x = 0; x < cur.width; ++x) {
        const std::size_t dst = next.index(cur.height - 1 - y, x);
        next.ids[dst] = cur.id(x, y);
        if (cur.has_classes()) next.classes[dst] = cur.classes[cur.index(x, y)];
      }
    cur = std::move(next);
  }
  return cur;
}

LabelMask LabelMask::flipped() const {
  LabelMask out(height, width);
  if (has_classes()) out.classes.assign(classes.size(), 0);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const std::size_t dst = out.index(width - 1 - x, y);
      out.ids[dst] = id(x, y);
      if (has_classes()) out.classes[dst] = classes[index(x, y)];
    }
  return out;
}

void LabelMask::validate() const {
  require(height >= 0 && width >= 0 && ids.size() == static_cast<std::size_t>(height) * width,
          "LabelMask: id buffer does not match dims");
  if (!has_classes()) return;
  require(classes.size() == ids.size(), "LabelMask: class buffer does not match dims");
  for (std::size_t i = 0; i < ids.size(); ++i)
    require((ids[i] != 0) == (classes[i] != 0),
            "LabelMask: class mask must be nonzero exactly on foreground");
}

}  // namespace starpoly
