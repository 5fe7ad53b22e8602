#include "starpoly/postprocess.hpp"

#include <algorithm>
#include <numeric>

#include <json.hpp>

#include "starpoly/encode.hpp"

namespace starpoly {

template <typename T>
ProposalSet propose(const Tensor<T>& probability, const Tensor<T>& distances, double prob_thresh) {
  require(probability.rank() == 2 && distances.rank() == 3 &&
              probability.dim(0) == distances.dim(0) && probability.dim(1) == distances.dim(1),
          "propose: probability [H,W] and distances [H,W,K] must align");
  ProposalSet set;
  set.height = static_cast<int>(probability.dim(0));
  set.width = static_cast<int>(probability.dim(1));
  set.prob_thresh = prob_thresh;
  for (int y = 0; y < set.height; ++y)
    for (int x = 0; x < set.width; ++x)
      if (probability[static_cast<std::size_t>(y) * set.width + x] >= prob_thresh)
        set.proposals.push_back(decode_polygon(probability, distances, Pixel{x, y}));
  return set;
}

namespace {

double radius_sum(const StarPolygon& p) {
  return std::accumulate(p.radii.begin(), p.radii.end(), 0.0);
}

struct Box {
  int x0, y0, x1, y1;  // inclusive
  bool overlaps(const Box& o) const {
    return x0 <= o.x1 && o.x0 <= x1 && y0 <= o.y1 && o.y0 <= y1;
  }
};

Box bounds(const SpanMask& m) {
  Box b{0, m.y0, -1, m.y0 + static_cast<int>(m.rows.size()) - 1};
  bool first = true;
  for (const auto& row : m.rows)
    for (const auto& [s, e] : row) {
      if (first || s < b.x0) b.x0 = s;
      if (first || e - 1 > b.x1) b.x1 = e - 1;
      first = false;
    }
  return b;
}

}  // namespace

bool proposal_before(const StarPolygon& a, const StarPolygon& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.center.y != b.center.y) return a.center.y < b.center.y;
  if (a.center.x != b.center.x) return a.center.x < b.center.x;
  return radius_sum(a) < radius_sum(b);
}

std::vector<StarPolygon> nms(std::vector<StarPolygon> proposals, double nms_thresh) {
  std::sort(proposals.begin(), proposals.end(), proposal_before);
  struct Kept {
    SpanMask raster;
    std::size_t area;
    Box box;
  };
  std::vector<Kept> kept_rasters;
  std::vector<StarPolygon> kept;
  for (auto& p : proposals) {
    SpanMask raster = rasterize_spans(p);
    const std::size_t area = raster.area();
    const Box box = bounds(raster);
    bool keep = true;
    for (const auto& k : kept_rasters) {
      double iou = 0;
      if (area > 0 && k.area > 0 && box.overlaps(k.box)) {
        const std::size_t inter = intersection_area(raster, k.raster);
        iou = static_cast<double>(inter) / static_cast<double>(area + k.area - inter);
      }
      if (iou >= nms_thresh) {
        keep = false;
        break;
      }
    }
    if (!keep) continue;
    kept_rasters.push_back({std::move(raster), area, box});
    kept.push_back(std::move(p));
  }
  return kept;
}

LabelMask render_labels(const std::vector<StarPolygon>& kept, int height, int width) {
  LabelMask mask(height, width);
  std::vector<std::size_t> order(kept.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return proposal_before(kept[a], kept[b]); });
  std::uint32_t next = 1;
  for (std::size_t i : order) {
    const SpanMask raster = rasterize_spans(kept[i]).clipped(ImageSize{height, width});
    bool owns = false;
    for (std::size_t r = 0; r < raster.rows.size(); ++r) {
      const int y = raster.y0 + static_cast<int>(r);
      for (const auto& [s, e] : raster.rows[r])
        for (int x = s; x < e; ++x) {
          auto& id = mask.id(x, y);
          if (id == 0) {
            id = next;
            owns = true;
          }
        }
    }
    if (owns) ++next;
  }
  return mask;
}

template <typename T>
PostprocessResult postprocess(const Tensor<T>& probability, const Tensor<T>& distances,
                              double prob_thresh, double nms_thresh) {
  PostprocessResult result;
  ProposalSet candidates = propose(probability, distances, prob_thresh);
  result.candidates = candidates.proposals.size();
  result.kept = candidates;
  result.kept.nms_thresh = nms_thresh;
  result.kept.proposals = nms(std::move(candidates.proposals), nms_thresh);
  result.labels = render_labels(result.kept.proposals, candidates.height, candidates.width);
  return result;
}

std::string proposals_to_json(const ProposalSet& set) {
  nlohmann::json polys = nlohmann::json::array();
  for (const auto& p : set.proposals)
    polys.push_back({{"center", {p.center.x, p.center.y}}, {"radii", p.radii}, {"score", p.score}});
  nlohmann::json doc = {{"prob_thresh", set.prob_thresh},
                        {"nms_thresh", set.nms_thresh},
                        {"height", set.height},
                        {"width", set.width},
                        {"polygons", std::move(polys)}};
  return doc.dump(1);
}

ProposalSet proposals_from_json(const std::string& text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    ProposalSet set;
    set.prob_thresh = doc.at("prob_thresh").get<double>();
    set.nms_thresh = doc.at("nms_thresh").get<double>();
    set.height = doc.at("height").get<int>();
    set.width = doc.at("width").get<int>();
    for (const auto& p : doc.at("polygons")) {
      StarPolygon poly;
      poly.center = {p.at("center").at(0).get<double>(), p.at("center").at(1).get<double>()};
      poly.radii = p.at("radii").get<std::vector<double>>();
      poly.score = p.at("score").get<double>();
      if (poly.radii.size() < 3) throw IoError("proposal file: a polygon needs at least 3 radii");
      set.proposals.push_back(std::move(poly));
    }
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("proposal file: ") + e.what());
  }
}

template ProposalSet propose(const Tensor<float>&, const Tensor<float>&, double);
template ProposalSet propose(const Tensor<double>&, const Tensor<double>&, double);
template PostprocessResult postprocess(const Tensor<float>&, const Tensor<float>&, double, double);
template PostprocessResult postprocess(const Tensor<double>&, const Tensor<double>&, double, double);

}  // namespace starpoly
