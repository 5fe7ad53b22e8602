#include "starpoly/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <tuple>

#include <json.hpp>

#include "starpoly/errors.hpp"

namespace starpoly {

std::vector<double> ap_thresholds() {
  std::vector<double> t;
  for (int i = 0; i <= 8; ++i) t.push_back((50 + 5 * i) / 100.0);
  return t;
}

namespace {

std::size_t position(const std::vector<std::uint32_t>& ids, std::uint32_t id) {
  return static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
}

// Ids present in the mask, ascending, with their areas.
void collect(const LabelMask& m, std::vector<std::uint32_t>& ids, std::vector<std::size_t>& area) {
  std::map<std::uint32_t, std::size_t> count;
  for (auto id : m.ids)
    if (id) ++count[id];
  for (const auto& [id, n] : count) {
    ids.push_back(id);
    area.push_back(n);
  }
}

OverlapTable restricted(const OverlapTable& t, const std::vector<bool>& keep_gt,
                        const std::vector<bool>& keep_pred) {
  OverlapTable r;
  std::vector<std::size_t> gmap(t.gt_ids.size()), pmap(t.pred_ids.size());
  for (std::size_t i = 0; i < t.gt_ids.size(); ++i)
    if (keep_gt[i]) {
      gmap[i] = r.gt_ids.size();
      r.gt_ids.push_back(t.gt_ids[i]);
      r.gt_area.push_back(t.gt_area[i]);
    }
  for (std::size_t j = 0; j < t.pred_ids.size(); ++j)
    if (keep_pred[j]) {
      pmap[j] = r.pred_ids.size();
      r.pred_ids.push_back(t.pred_ids[j]);
      r.pred_area.push_back(t.pred_area[j]);
    }
  for (const auto& [g, p, iou] : t.pairs)
    if (keep_gt[g] && keep_pred[p]) r.pairs.emplace_back(gmap[g], pmap[p], iou);
  return r;
}

double pq_value(const MatchRow& row) {
  const double denom = row.tp + 0.5 * row.fp + 0.5 * row.fn;
  return denom == 0 ? 1.0 : row.sum_matched_iou / denom;
}

}  // namespace

OverlapTable overlap_table(const LabelMask& gt, const LabelMask& pred) {
  require(gt.height == pred.height && gt.width == pred.width,
          "metrics: mask dims differ (" + std::to_string(gt.height) + "x" +
              std::to_string(gt.width) + " vs " + std::to_string(pred.height) + "x" +
              std::to_string(pred.width) + ")");
  OverlapTable t;
  collect(gt, t.gt_ids, t.gt_area);
  collect(pred, t.pred_ids, t.pred_area);
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> inter;
  for (std::size_t i = 0; i < gt.ids.size(); ++i)
    if (gt.ids[i] && pred.ids[i])
      ++inter[{position(t.gt_ids, gt.ids[i]), position(t.pred_ids, pred.ids[i])}];
  for (const auto& [key, n] : inter) {
    const double uni = static_cast<double>(t.gt_area[key.first] + t.pred_area[key.second] - n);
    t.pairs.emplace_back(key.first, key.second, static_cast<double>(n) / uni);
  }
  return t;
}

MatchRow match_instances(const OverlapTable& t, double tau) {
  require(tau > 0 && tau < 1, "match_instances: tau must lie in (0, 1)");
  std::vector<std::tuple<std::size_t, std::size_t, double>> cand;
  for (const auto& p : t.pairs)
    if (std::get<2>(p) > tau) cand.push_back(p);
  std::sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
    if (std::get<2>(a) != std::get<2>(b)) return std::get<2>(a) > std::get<2>(b);
    return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
  });
  std::vector<bool> gt_used(t.gt_ids.size()), pred_used(t.pred_ids.size());
  MatchRow row;
  row.tau = tau;
  for (const auto& [g, p, iou] : cand) {
    if (gt_used[g] || pred_used[p]) continue;
    gt_used[g] = pred_used[p] = true;
    ++row.tp;
    row.sum_matched_iou += iou;
    row.matches.emplace_back(t.gt_ids[g], t.pred_ids[p]);
  }
  row.fn = static_cast<int>(t.gt_ids.size()) - row.tp;
  row.fp = static_cast<int>(t.pred_ids.size()) - row.tp;
  return row;
}

MatchRow match_instances(const LabelMask& gt, const LabelMask& pred, double tau) {
  return match_instances(overlap_table(gt, pred), tau);
}

double average_precision(const MatchRow& row) {
  const int denom = row.tp + row.fp + row.fn;
  return denom == 0 ? 1.0 : static_cast<double>(row.tp) / denom;
}

namespace {

ApCurve curve_from_rows(const std::vector<MatchRow>& rows) {
  ApCurve c;
  for (const auto& r : rows) {
    c.thresholds.push_back(r.tau);
    c.ap.push_back(average_precision(r));
  }
  double s = 0;
  for (double v : c.ap) s += v;
  c.mean = s / static_cast<double>(c.ap.size());
  return c;
}

PqReport pq_from_table(const OverlapTable& t, const LabelMask& gt, const LabelMask& pred) {
  PqReport r;
  r.bpq = pq_value(match_instances(t, 0.5));
  if (!gt.has_classes() || !pred.has_classes()) return r;
  const auto gc = gt.instance_classes();
  const auto pc = pred.instance_classes();
  std::vector<std::uint8_t> classes;
  for (const auto& [_, c] : gc) classes.push_back(c);
  for (const auto& [_, c] : pc) classes.push_back(c);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  double total = 0;
  for (auto c : classes) {
    std::vector<bool> kg(t.gt_ids.size()), kp(t.pred_ids.size());
    for (std::size_t i = 0; i < t.gt_ids.size(); ++i) kg[i] = gc.at(t.gt_ids[i]) == c;
    for (std::size_t j = 0; j < t.pred_ids.size(); ++j) kp[j] = pc.at(t.pred_ids[j]) == c;
    const double v = pq_value(match_instances(restricted(t, kg, kp), 0.5));
    r.per_class[c] = v;
    total += v;
  }
  if (!classes.empty()) r.mpq = total / static_cast<double>(classes.size());
  return r;
}

}  // namespace

ApCurve ap_curve(const LabelMask& gt, const LabelMask& pred) {
  const OverlapTable t = overlap_table(gt, pred);
  std::vector<MatchRow> rows;
  for (double tau : ap_thresholds()) rows.push_back(match_instances(t, tau));
  return curve_from_rows(rows);
}

PqReport panoptic_quality(const LabelMask& gt, const LabelMask& pred) {
  return pq_from_table(overlap_table(gt, pred), gt, pred);
}

ImageMetrics evaluate_image(const std::string& name, const LabelMask& gt, const LabelMask& pred) {
  const OverlapTable t = overlap_table(gt, pred);
  ImageMetrics m;
  m.name = name;
  for (double tau : ap_thresholds()) m.rows.push_back(match_instances(t, tau));
  m.ap = curve_from_rows(m.rows);
  m.pq = pq_from_table(t, gt, pred);
  return m;
}

DatasetMetrics aggregate(std::vector<ImageMetrics> images) {
  DatasetMetrics d;
  d.ap.thresholds = ap_thresholds();
  d.ap.ap.assign(d.ap.thresholds.size(), 0.0);
  double mpq_sum = 0;
  int mpq_n = 0;
  for (const auto& im : images) {
    for (std::size_t i = 0; i < d.ap.ap.size(); ++i) d.ap.ap[i] += im.ap.ap[i];
    d.bpq += im.pq.bpq;
    if (im.pq.mpq) {
      mpq_sum += *im.pq.mpq;
      ++mpq_n;
    }
  }
  const double n = images.empty() ? 1.0 : static_cast<double>(images.size());
  double s = 0;
  for (auto& v : d.ap.ap) s += (v /= n);
  d.ap.mean = s / static_cast<double>(d.ap.ap.size());
  d.bpq /= n;
  if (mpq_n) d.mpq = mpq_sum / mpq_n;
  d.images = std::move(images);
  return d;
}

namespace {
std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}
}  // namespace

std::string ap_csv_header() {
  std::string h = "name";
  for (double t : ap_thresholds()) h += ",AP_" + fmt("%g", t);
  return h + ",Mean";
}

std::string ap_csv_row(const std::string& name, const ApCurve& curve) {
  std::string r = name;
  for (double v : curve.ap) r += "," + fmt("%.4f", v);
  return r + "," + fmt("%.4f", curve.mean);
}

std::string metrics_to_json(const DatasetMetrics& metrics) {
  using nlohmann::json;
  auto pq_json = [](const PqReport& pq) {
    json j = {{"bPQ", pq.bpq}};
    if (pq.mpq) j["mPQ"] = *pq.mpq;
    json pc = json::object();
    for (const auto& [c, v] : pq.per_class) pc[std::to_string(c)] = v;
    if (!pq.per_class.empty()) j["per_class"] = pc;
    return j;
  };
  json images = json::array();
  for (const auto& im : metrics.images) {
    json rows = json::array();
    for (const auto& r : im.rows)
      rows.push_back({{"tau", r.tau}, {"tp", r.tp}, {"fp", r.fp}, {"fn", r.fn},
                      {"sum_matched_iou", r.sum_matched_iou}});
    images.push_back({{"name", im.name}, {"ap", im.ap.ap}, {"mean_ap", im.ap.mean},
                      {"pq", pq_json(im.pq)}, {"matches", rows}});
  }
  json doc = {{"thresholds", metrics.ap.thresholds},
              {"ap", metrics.ap.ap},
              {"mean_ap", metrics.ap.mean},
              {"bPQ", metrics.bpq},
              {"images", images}};
  if (metrics.mpq) doc["mPQ"] = *metrics.mpq;
  return doc.dump(1);
}

}  // namespace starpoly
