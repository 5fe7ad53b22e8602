#pragma once

#include <string>
#include <vector>

#include "starpoly/geometry.hpp"
#include "starpoly/label_mask.hpp"
#include "starpoly/tensor.hpp"

namespace starpoly {

struct ProposalSet {
  std::vector<StarPolygon> proposals;
  int height = 0;
  int width = 0;
  double prob_thresh = 0.5;
  double nms_thresh = 0.5;
};

/// One polygon per pixel with probability >= prob_thresh, in raster order.
template <typename T>
ProposalSet propose(const Tensor<T>& probability, const Tensor<T>& distances, double prob_thresh);

/// Strict total order used for NMS ranking: descending score, then raster
/// order of the center, then smaller radius sum.
bool proposal_before(const StarPolygon& a, const StarPolygon& b);

/// Greedy suppression. A proposal is kept iff its polygon_iou with every
/// already kept proposal is below nms_thresh. Output follows proposal_before.
std::vector<StarPolygon> nms(std::vector<StarPolygon> proposals, double nms_thresh);

/// Label mask of kept polygons (in proposal_before order): each pixel goes to
/// the first polygon covering it; ids are 1..n in that order over polygons
/// owning at least one pixel.
LabelMask render_labels(const std::vector<StarPolygon>& kept, int height, int width);

struct PostprocessResult {
  ProposalSet kept;  // after NMS
  LabelMask labels;
  std::size_t candidates = 0;
};

/// propose -> nms -> render_labels.
template <typename T>
PostprocessResult postprocess(const Tensor<T>& probability, const Tensor<T>& distances,
                              double prob_thresh, double nms_thresh);

/// {"prob_thresh":..,"nms_thresh":..,"height":..,"width":..,"polygons":[{"center":[x,y],"radii":[..],"score":s}]}
std::string proposals_to_json(const ProposalSet& set);
/// Throws IoError on malformed input.
ProposalSet proposals_from_json(const std::string& text);

}  // namespace starpoly
