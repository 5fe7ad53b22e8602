#pragma once

#include "starpoly/geometry.hpp"
#include "starpoly/label_mask.hpp"
#include "starpoly/tensor.hpp"

namespace starpoly {

/// Every per-pixel training target derived from one label mask.
struct GroundTruthBundle {
  Tensor<float> distances;    // [H,W,K] pixel-to-boundary distances, 0 on background
  Tensor<float> probability;  // [H,W] normalized centroid probability
  Tensor<float> seg;          // [H,W] foreground indicator
  Tensor<float> bnd;          // [H,W] instance boundary indicator (subset of seg)
  Tensor<float> bbox;         // [H,W,6] (cx-x, cy-y, x-x0, x1-x, y-y0, y1-y)
};

/// Ray-march distances. From each foreground pixel p, steps t = 1, 2, ... of
/// unit length along ray k are rounded to the nearest pixel until the first t
/// whose pixel is outside the image or belongs to another id. The distance is
/// t - 1 + 0.5 / max(|cos|, |sin|): the exit step pulled back to the edge of the
/// last pixel inside, which removes the half-pixel overshoot of the raw count.
Tensor<float> star_distance_map(const LabelMask& mask, const RaySet& rays);

/// min_k D[p,k] normalized by its maximum over the pixel's instance.
Tensor<float> centroid_prob_map(const LabelMask& mask, const Tensor<float>& distances);

/// seg = ids > 0; bnd = foreground pixels with an 8-neighbour of another id
/// (background and outside-the-image count as another id).
std::pair<Tensor<float>, Tensor<float>> seg_boundary_targets(const LabelMask& mask);

/// Per-pixel offset to the instance centroid (mean of member pixels) and
/// distances to the instance's axis-aligned bounding box edges.
Tensor<float> bbox_targets(const LabelMask& mask);

GroundTruthBundle encode_ground_truth(const LabelMask& mask, const RaySet& rays);

/// Polygon proposal from the maps at one pixel: center = pixel, radii = D at
/// that pixel, score = probability at that pixel.
template <typename T>
StarPolygon decode_polygon(const Tensor<T>& probability, const Tensor<T>& distances, Pixel pixel);

}  // namespace starpoly
