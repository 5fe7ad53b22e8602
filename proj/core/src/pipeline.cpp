#include "starpoly/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>

#include <json.hpp>

#include "starpoly/checkpoint.hpp"
#include "starpoly/optim.hpp"

namespace starpoly {

using nlohmann::json;

Tensor<float> crop_hw(const Tensor<float>& t, int y0, int x0, int h, int w) {
  require(t.rank() >= 2 && y0 >= 0 && x0 >= 0 && y0 + h <= static_cast<int>(t.dim(0)) &&
              x0 + w <= static_cast<int>(t.dim(1)),
          "crop_hw: window outside the tensor");
  Shape shape = t.shape();
  const std::size_t c = t.numel() / (shape[0] * shape[1]);
  const std::size_t src_w = shape[1];
  shape[0] = static_cast<std::size_t>(h);
  shape[1] = static_cast<std::size_t>(w);
  Tensor<float> out(shape);
  for (int y = 0; y < h; ++y) {
    const float* src = t.data() + ((static_cast<std::size_t>(y0 + y) * src_w) + x0) * c;
    std::copy(src, src + static_cast<std::size_t>(w) * c, out.data() + static_cast<std::size_t>(y) * w * c);
  }
  return out;
}

LabelMask crop_mask(const LabelMask& m, int y0, int x0, int h, int w) {
  require(y0 >= 0 && x0 >= 0 && y0 + h <= m.height && x0 + w <= m.width,
          "crop_mask: window outside the mask");
  LabelMask out(h, w);
  if (m.has_classes()) out.classes.assign(out.size(), 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      out.id(x, y) = m.id(x0 + x, y0 + y);
      if (m.has_classes()) out.classes[out.index(x, y)] = m.classes[m.index(x0 + x, y0 + y)];
    }
  return out;
}

GroundTruthBundle crop_bundle(const GroundTruthBundle& gt, int y0, int x0, int h, int w) {
  return {crop_hw(gt.distances, y0, x0, h, w), crop_hw(gt.probability, y0, x0, h, w),
          crop_hw(gt.seg, y0, x0, h, w), crop_hw(gt.bnd, y0, x0, h, w),
          crop_hw(gt.bbox, y0, x0, h, w)};
}

namespace {

int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace

Tensor<float> mirror_pad(const Tensor<float>& image, int divisor) {
  require(image.rank() == 3 && divisor >= 1, "mirror_pad: need [H,W,C] and divisor >= 1");
  const int h = static_cast<int>(image.dim(0)), w = static_cast<int>(image.dim(1));
  const std::size_t c = image.dim(2);
  const int ph = (h + divisor - 1) / divisor * divisor;
  const int pw = (w + divisor - 1) / divisor * divisor;
  if (ph == h && pw == w) return image;
  Tensor<float> out(Shape{static_cast<std::size_t>(ph), static_cast<std::size_t>(pw), c});
  for (int y = 0; y < ph; ++y)
    for (int x = 0; x < pw; ++x) {
      const float* src = image.data() + (static_cast<std::size_t>(reflect(y, h)) * w + reflect(x, w)) * c;
      std::copy(src, src + c, out.data() + (static_cast<std::size_t>(y) * pw + x) * c);
    }
  return out;
}

namespace {

struct Prepared {
  Tensor<float> image;
  GroundTruthBundle gt;
  std::vector<std::uint8_t> classes;
};

struct Window {
  int h, w;
};

Window window_for(int height, int width, int crop, int divisor) {
  const int h = (crop > 0 ? std::min(crop, height) : height) / divisor * divisor;
  const int w = (crop > 0 ? std::min(crop, width) : width) / divisor * divisor;
  if (h == 0 || w == 0)
    throw ConfigError("image " + std::to_string(height) + "x" + std::to_string(width) +
                      " is smaller than the network divisor " + std::to_string(divisor));
  return {h, w};
}

Prepared prepare(const Sample& s, int turns, bool flip, int crop, int divisor, int rays,
                 std::mt19937_64* rng) {
  require(s.labels.height > 0, "training sample " + s.name + " has no mask");
  LabelMask m = s.labels;
  Tensor<float> image = s.image;
  if (flip) {
    m = m.flipped();
    image = ops::hflip(image);
  }
  if (turns) {
    m = m.rotated(turns);
    image = ops::rot90(image, turns);
  }
  const Window win = window_for(m.height, m.width, crop, divisor);
  int y0 = (m.height - win.h) / 2, x0 = (m.width - win.w) / 2;
  if (rng) {
    y0 = std::uniform_int_distribution<int>(0, m.height - win.h)(*rng);
    x0 = std::uniform_int_distribution<int>(0, m.width - win.w)(*rng);
  }
  Prepared p;
  const GroundTruthBundle gt = encode_ground_truth(m, RaySet(rays));
  p.gt = crop_bundle(gt, y0, x0, win.h, win.w);
  p.image = crop_hw(image, y0, x0, win.h, win.w);
  if (m.has_classes()) p.classes = crop_mask(m, y0, x0, win.h, win.w).classes;
  return p;
}

template <typename T>
std::vector<std::vector<T>> snapshot(const nn::ParamStore<T>& params) {
  std::vector<std::vector<T>> out;
  for (const auto& [_, t] : params.entries()) out.emplace_back(t.values().begin(), t.values().end());
  return out;
}

template <typename T>
void restore(nn::ParamStore<T>& params, const std::vector<std::vector<T>>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    Tensor<T> t = params.entries()[i].second;
    std::copy(values[i].begin(), values[i].end(), t.values().begin());
  }
}

std::vector<std::size_t> shuffled(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const auto j = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

std::vector<Sample> limited(const std::vector<Sample>& v, int limit) {
  if (limit <= 0 || static_cast<std::size_t>(limit) >= v.size()) return v;
  return {v.begin(), v.begin() + limit};
}

void emit(const LogFn& log, const json& j) {
  if (log) log(j.dump());
}

const std::vector<std::uint8_t>* class_target(const StarNet<float>& net, const Prepared& p) {
  if (net.config().class_count == 0) return nullptr;
  require(!p.classes.empty(), "class head configured but the sample has no class mask");
  return &p.classes;
}

}  // namespace

TransformRun train_transform(const std::vector<Sample>& train, const std::vector<Sample>& validation,
                             const RunConfig& config, std::uint64_t seed, const LogFn& log) {
  if (!config.sap.mode) throw ConfigError("train-transform: sap.mode must not be none");
  if (train.empty()) throw ConfigError("train-transform: training split is empty");
  TransformConfig tc;
  tc.rays = config.backbone.rays;
  tc.mode = *config.sap.mode;
  tc.levels = config.sap.levels;
  tc.base_channels = config.sap.base_channels;

  auto prep = [&](const std::vector<Sample>& v) {
    std::vector<Prepared> out;
    for (const auto& s : v) out.push_back(prepare(s, 0, false, 0, tc.divisor(), tc.rays, nullptr));
    return out;
  };
  const std::vector<Prepared> tr = prep(limited(train, config.training.train_limit));
  const std::vector<Prepared> va = prep(limited(validation, config.training.validation_limit));

  TransformRun run;
  run.model = std::make_unique<TransformModel<float>>(tc, seed);
  auto& model = *run.model;
  auto loss_of = [&](Tape<float>& tape, const Prepared& p) {
    const Tensor<float> input = TransformModel<float>::make_input(tape, p.gt.distances, p.gt.probability);
    return model.target_loss(tape, model.forward(tape, input), input, p.gt);
  };
  auto mean_loss = [&](const std::vector<Prepared>& v) {
    double s = 0;
    for (const auto& p : v) {
      Tape<float> tape(false);
      s += loss_of(tape, p).item();
    }
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };

  run.initial_loss = mean_loss(tr);
  PlateauSchedule sched(config.optimizer.plateau);
  Adam<float> adam(model.params(), sched.lr(), config.optimizer.adam);
  std::mt19937_64 rng(image_seed(seed, 0x7f));
  auto best = snapshot(model.params());
  for (int epoch = 1; epoch <= config.sap.max_epochs; ++epoch) {
    adam.set_lr(sched.lr());
    double sum = 0;
    for (std::size_t i : shuffled(tr.size(), rng)) {
      Tape<float> tape;
      const Tensor<float> loss = loss_of(tape, tr[i]);
      tape.backward(loss);
      adam.step();
      sum += loss.item();
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = sum / static_cast<double>(tr.size());
    rec.val_loss = va.empty() ? rec.train_loss : mean_loss(va);
    rec.lr = sched.lr();
    rec.improved = sched.observe(rec.val_loss);
    if (rec.improved) {
      best = snapshot(model.params());
      run.summary.best_epoch = epoch;
      run.summary.best_val_loss = rec.val_loss;
    }
    run.summary.history.push_back(rec);
    emit(log, {{"phase", "transform"}, {"mode", to_string(tc.mode)}, {"epoch", epoch},
               {"train_loss", rec.train_loss}, {"val_loss", rec.val_loss}, {"lr", rec.lr},
               {"best", rec.improved}});
    if (sched.finished()) {
      run.summary.stopped_by_schedule = true;
      break;
    }
  }
  restore(model.params(), best);
  run.final_loss = mean_loss(tr);
  run.converged = run.final_loss < run.initial_loss;
  if (!run.converged) {
    json curve = json::array();
    for (const auto& r : run.summary.history) curve.push_back(r.train_loss);
    emit(log, {{"phase", "transform"}, {"warning", "training loss did not decrease"},
               {"initial_loss", run.initial_loss}, {"final_loss", run.final_loss}, {"curve", curve}});
  }
  model.freeze();
  return run;
}

LossTerms<float> evaluate_losses(const StarNet<float>& net, const Sample& sample,
                                 const TransformModel<float>* sap_encoder) {
  int divisor = net.config().divisor();
  if (sap_encoder) divisor = std::max(divisor, sap_encoder->config().divisor());
  const Prepared p = prepare(sample, 0, false, 0, divisor, net.config().rays, nullptr);
  Tape<float> tape(false);
  const auto out = net.forward(tape, p.image);
  return compute_losses(tape, out, p.gt, net.config().samples, sap_encoder, class_target(net, p));
}

StarNetRun train_starnet(const Dataset& data, const RunConfig& config,
                       const TransformModel<float>* sap_encoder, std::uint64_t seed, const LogFn& log,
                       const std::optional<std::filesystem::path>& checkpoint) {
  if (config.sap.mode && !sap_encoder)
    throw ConfigError("SAP mode '" + to_string(*config.sap.mode) +
                      "' needs a trained transformation model (paths.transform_checkpoint)");
  if (sap_encoder) {
    require(sap_encoder->frozen(), "train_starnet: the transformation model must be frozen");
    if (sap_encoder->config().rays != config.backbone.rays)
      throw ConfigError("transformation model ray count differs from backbone.rays");
  }
  const std::vector<Sample> train = limited(data.train, config.training.train_limit);
  const std::vector<Sample> val = limited(data.validation, config.training.validation_limit);
  if (train.empty()) throw ConfigError("train: training split is empty");

  StarNetRun run;
  run.model = std::make_unique<StarNet<float>>(config.backbone, seed);
  auto& net = *run.model;
  int divisor = net.config().divisor();
  if (sap_encoder) divisor = std::max(divisor, sap_encoder->config().divisor());
  const int rays = config.backbone.rays;
  const int samples = config.backbone.samples;

  std::vector<Prepared> va;
  for (const auto& s : val) va.push_back(prepare(s, 0, false, 0, divisor, rays, nullptr));

  PlateauSchedule sched(config.optimizer.plateau);
  Adam<float> adam(net.params(), sched.lr(), config.optimizer.adam);
  std::mt19937_64 rng(image_seed(seed, 0x51));
  auto best = snapshot(net.params());
  for (int epoch = 1; epoch <= config.optimizer.max_epochs; ++epoch) {
    adam.set_lr(sched.lr());
    double sum = 0;
    for (std::size_t i : shuffled(train.size(), rng)) {
      const int turns = config.augmentation.rotation90 ? std::uniform_int_distribution<int>(0, 3)(rng) : 0;
      const bool flip = config.augmentation.hflip && std::uniform_int_distribution<int>(0, 1)(rng) == 1;
      const Prepared p = prepare(train[i], turns, flip, config.training.crop_size, divisor, rays, &rng);
      Tape<float> tape;
      const auto out = net.forward(tape, p.image);
      const auto terms = compute_losses(tape, out, p.gt, samples, sap_encoder, class_target(net, p));
      tape.backward(terms.total);
      adam.step();
      sum += terms.total.item();
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = sum / static_cast<double>(train.size());
    json val_terms = {{"prob", 0.0}, {"dist", 0.0}};
    if (va.empty()) {
      rec.val_loss = rec.train_loss;
    } else {
      double total = 0, prob = 0, dist = 0, sap = 0, cls = 0;
      for (const auto& p : va) {
        Tape<float> tape(false);
        const auto out = net.forward(tape, p.image);
        const auto t = compute_losses(tape, out, p.gt, samples, sap_encoder, class_target(net, p));
        total += t.total.item();
        prob += t.prob.item();
        dist += t.dist.item();
        if (t.sap.defined()) sap += t.sap.item();
        if (t.cls.defined()) cls += t.cls.item();
      }
      const double n = static_cast<double>(va.size());
      rec.val_loss = total / n;
      val_terms = {{"prob", prob / n}, {"dist", dist / n}};
      if (sap_encoder) val_terms["sap"] = sap / n;
      if (net.config().class_count > 0) val_terms["class"] = cls / n;
    }
    rec.lr = sched.lr();
    rec.improved = sched.observe(rec.val_loss);
    if (rec.improved) {
      best = snapshot(net.params());
      run.summary.best_epoch = epoch;
      run.summary.best_val_loss = rec.val_loss;
      if (checkpoint) save_starnet(*checkpoint, net, json{{"seed", seed}, {"epoch", epoch}}.dump());
    }
    run.summary.history.push_back(rec);
    emit(log, {{"phase", "train"}, {"epoch", epoch}, {"train_loss", rec.train_loss},
               {"val_loss", rec.val_loss}, {"val_terms", val_terms}, {"lr", rec.lr},
               {"best", rec.improved}});
    if (sched.finished()) {
      run.summary.stopped_by_schedule = true;
      break;
    }
  }
  restore(net.params(), best);
  return run;
}

Prediction predict(const StarNet<float>& net, const Tensor<float>& image) {
  require(image.rank() == 3, "predict: image must be [H,W,C]");
  const int h = static_cast<int>(image.dim(0)), w = static_cast<int>(image.dim(1));
  const Tensor<float> padded = mirror_pad(image, net.config().divisor());
  Tape<float> tape(false);
  const auto out = net.forward(tape, padded);
  Prediction p;
  p.probability = crop_hw(out.probability, 0, 0, h, w);
  p.distances = crop_hw(out.refined, 0, 0, h, w);
  return p;
}

InferResult infer(const StarNet<float>& net, const Tensor<float>& image,
                  const PostprocessConfig& thresholds) {
  using clock = std::chrono::steady_clock;
  InferResult r;
  const auto t0 = clock::now();
  const Prediction p = predict(net, image);
  const auto t1 = clock::now();
  r.post = postprocess(p.probability, p.distances, thresholds.prob_thresh, thresholds.nms_thresh);
  const auto t2 = clock::now();
  r.network_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  r.postprocess_ms = std::chrono::duration<double, std::milli>(t2 - t1).count();
  return r;
}

PostprocessConfig tune_thresholds(const StarNet<float>& net, const std::vector<Sample>& samples,
                                  PostprocessConfig base) {
  if (samples.empty()) return base;
  std::vector<Prediction> preds;
  for (const auto& s : samples) preds.push_back(predict(net, s.image));
  double best = -1;
  PostprocessConfig chosen = base;
  for (double prob : {0.3, 0.4, 0.5, 0.6, 0.7})
    for (double nms : {0.3, 0.4, 0.5}) {
      double total = 0;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto post = postprocess(preds[i].probability, preds[i].distances, prob, nms);
        total += ap_curve(samples[i].labels, post.labels).mean;
      }
      if (total > best) {
        best = total;
        chosen.prob_thresh = prob;
        chosen.nms_thresh = nms;
      }
    }
  return chosen;
}

DatasetMetrics evaluate_model(const StarNet<float>& net, const std::vector<Sample>& samples,
                              const PostprocessConfig& thresholds) {
  std::vector<ImageMetrics> images;
  for (const auto& s : samples) {
    require(s.labels.height > 0, "evaluate_model: sample " + s.name + " has no mask");
    const InferResult r = infer(net, s.image, thresholds);
    LabelMask pred = r.post.labels;
    if (s.labels.has_classes() && net.config().class_count > 0) {
      // Per-pixel argmax of the class head, then majority vote per instance.
      const Tensor<float> padded = mirror_pad(s.image, net.config().divisor());
      Tape<float> tape(false);
      const auto out = net.backbone_forward(tape, padded);
      const std::size_t c = out.class_logits.dim(2);
      const std::size_t pw = padded.dim(1);
      pred.classes.assign(pred.size(), 0);
      std::map<std::uint32_t, std::vector<int>> votes;
      for (int y = 0; y < pred.height; ++y)
        for (int x = 0; x < pred.width; ++x) {
          const auto id = pred.id(x, y);
          if (!id) continue;
          const float* z = out.class_logits.data() + (static_cast<std::size_t>(y) * pw + x) * c;
          const auto best = static_cast<int>(std::max_element(z + 1, z + c) - z);
          auto& v = votes[id];
          v.resize(c, 0);
          ++v[static_cast<std::size_t>(best)];
        }
      std::map<std::uint32_t, std::uint8_t> cls;
      for (const auto& [id, v] : votes)
        cls[id] = static_cast<std::uint8_t>(std::max_element(v.begin(), v.end()) - v.begin());
      for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred.ids[i]) pred.classes[i] = cls[pred.ids[i]];
    }
    images.push_back(evaluate_image(s.name, s.labels, pred));
  }
  return aggregate(std::move(images));
}

std::vector<AblationCell> ablation_grid(const AblationConfig& config) {
  std::vector<AblationCell> baseline, rest;
  for (int n : config.samples)
    for (const auto& sap : config.sap_modes) {
      if (n == 0) {
        AblationCell c;
        c.samples = 0;
        c.sap = sap;
        c.name = "N=0";
        if (sap) c.name += " sap=" + to_string(*sap);
        const bool dup = std::any_of(baseline.begin(), baseline.end(),
                                     [&](const AblationCell& b) { return b.name == c.name; });
        if (!dup) baseline.push_back(c);
        continue;
      }
      for (auto w : config.weightings) {
        AblationCell c;
        c.samples = n;
        c.weighting = w;
        c.sap = sap;
        c.name = "N=" + std::to_string(n) + " " + to_string(w);
        if (sap) c.name += " sap=" + to_string(*sap);
        rest.push_back(c);
      }
    }
  baseline.insert(baseline.end(), rest.begin(), rest.end());
  for (auto& c : baseline) c.seeds = config.seeds;
  return baseline;
}

AblationReport run_ablation(const Dataset& data, const RunConfig& config, const LogFn& log) {
  AblationReport report;
  report.cells = ablation_grid(config.ablation);
  std::map<std::pair<int, std::uint64_t>, std::unique_ptr<TransformModel<float>>> transforms;
  for (auto& cell : report.cells) {
    for (std::uint64_t seed : cell.seeds) {
      RunConfig rc = config;
      rc.backbone.samples = cell.samples;
      rc.backbone.weighting = cell.weighting;
      rc.sap.mode = cell.sap;
      const TransformModel<float>* encoder = nullptr;
      if (cell.sap) {
        auto& slot = transforms[{static_cast<int>(*cell.sap), seed}];
        if (!slot) slot = train_transform(data.train, data.validation, rc, seed, log).model;
        encoder = slot.get();
      }
      LogFn tagged;
      if (log)
        tagged = [&](const std::string& line) {
          json j = json::parse(line);
          j["cell"] = cell.name;
          j["seed"] = seed;
          log(j.dump());
        };
      const StarNetRun run = train_starnet(data, rc, encoder, seed, tagged);
      const PostprocessConfig th = rc.postprocess.tune_on_validation
                                       ? tune_thresholds(*run.model, data.validation, rc.postprocess)
                                       : rc.postprocess;
      DatasetMetrics m = evaluate_model(*run.model, data.test, th);
      emit(log, {{"phase", "ablation"}, {"cell", cell.name}, {"seed", seed},
                 {"prob_thresh", th.prob_thresh}, {"nms_thresh", th.nms_thresh},
                 {"ap", m.ap.ap}, {"mean_ap", m.ap.mean}, {"best_epoch", run.summary.best_epoch}});
      m.images.clear();
      cell.per_seed.push_back(std::move(m));
      cell.thresholds.push_back(th);
    }
    const std::size_t k = ap_thresholds().size();
    const double n = static_cast<double>(cell.per_seed.size());
    cell.mean.thresholds = ap_thresholds();
    cell.mean.ap.assign(k, 0.0);
    cell.std.assign(k + 1, 0.0);
    for (const auto& m : cell.per_seed) {
      for (std::size_t i = 0; i < k; ++i) cell.mean.ap[i] += m.ap.ap[i] / n;
      cell.mean.mean += m.ap.mean / n;
    }
    if (cell.per_seed.size() > 1) {
      for (const auto& m : cell.per_seed) {
        for (std::size_t i = 0; i < k; ++i)
          cell.std[i] += (m.ap.ap[i] - cell.mean.ap[i]) * (m.ap.ap[i] - cell.mean.ap[i]);
        cell.std[k] += (m.ap.mean - cell.mean.mean) * (m.ap.mean - cell.mean.mean);
      }
      for (auto& v : cell.std) v = std::sqrt(v / (n - 1));
    }
  }
  return report;
}

namespace {
std::string f4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}
std::string sap_label(const std::optional<SapTargetMode>& m) { return m ? to_string(*m) : "none"; }
}  // namespace

std::string ablation_csv(const AblationReport& report) {
  std::string out = "name,samples,weighting,sap,seeds";
  const std::string header = ap_csv_header();
  out += header.substr(header.find(',')) + ",Mean_std\n";
  for (const auto& c : report.cells) {
    out += c.name + "," + std::to_string(c.samples) + "," +
           (c.samples == 0 ? std::string("-") : to_string(c.weighting)) + "," + sap_label(c.sap) +
           "," + std::to_string(c.seeds.size());
    for (double v : c.mean.ap) out += "," + f4(v);
    out += "," + f4(c.mean.mean) + "," + f4(c.std.empty() ? 0.0 : c.std.back()) + "\n";
  }
  return out;
}

std::string ablation_seed_csv(const AblationReport& report) {
  std::string out = "name,seed,prob_thresh,nms_thresh";
  const std::string header = ap_csv_header();
  out += header.substr(header.find(',')) + "\n";
  for (const auto& c : report.cells)
    for (std::size_t s = 0; s < c.per_seed.size(); ++s) {
      out += c.name + "," + std::to_string(c.seeds[s]) + "," + f4(c.thresholds[s].prob_thresh) + "," +
             f4(c.thresholds[s].nms_thresh);
      for (double v : c.per_seed[s].ap.ap) out += "," + f4(v);
      out += "," + f4(c.per_seed[s].ap.mean) + "\n";
    }
  return out;
}

std::string ablation_json(const AblationReport& report) {
  json cells = json::array();
  for (const auto& c : report.cells) {
    json seeds = json::array();
    for (std::size_t s = 0; s < c.per_seed.size(); ++s)
      seeds.push_back({{"seed", c.seeds[s]},
                       {"prob_thresh", c.thresholds[s].prob_thresh},
                       {"nms_thresh", c.thresholds[s].nms_thresh},
                       {"ap", c.per_seed[s].ap.ap},
                       {"mean_ap", c.per_seed[s].ap.mean},
                       {"bPQ", c.per_seed[s].bpq}});
    cells.push_back({{"name", c.name},
                     {"samples", c.samples},
                     {"weighting", to_string(c.weighting)},
                     {"sap", sap_label(c.sap)},
                     {"mean_ap", c.mean.mean},
                     {"ap", c.mean.ap},
                     {"std", c.std},
                     {"runs", seeds}});
  }
  return json{{"thresholds", ap_thresholds()}, {"cells", cells}}.dump(1);
}

}  // namespace starpoly
