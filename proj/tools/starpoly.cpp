#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "starpoly/checkpoint.hpp"
#include "starpoly/config.hpp"
#include "starpoly/dataset.hpp"
#include "starpoly/encode.hpp"
#include "starpoly/image_io.hpp"
#include "starpoly/metrics.hpp"
#include "starpoly/pipeline.hpp"
#include "starpoly/plot.hpp"
#include "starpoly/tensor_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace starpoly;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kIo = 3, kContract = 4 };

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

struct Context {
  RunConfig cfg;
  fs::path out;
  bool seed_given = false;
};

void make_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create directory " + p.string() + ": " + ec.message());
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw IoError("cannot write " + p.string());
  os << text;
  if (!os) throw IoError("write failed: " + p.string());
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// JSON-lines log written to a file and echoed to stderr.
class JsonLog {
 public:
  explicit JsonLog(const fs::path& path) : os_(path, std::ios::binary) {
    if (!os_) throw IoError("cannot write " + path.string());
  }
  LogFn fn() {
    return [this](const std::string& line) {
      os_ << line << '\n';
      os_.flush();
      std::cerr << line << '\n';
    };
  }

 private:
  std::ofstream os_;
};

Context resolve(const Options& o) {
  Context c;
  if (!o.config.empty()) c.cfg = load_config(o.config);
  if (o.seed) {
    c.cfg.seed = *o.seed;
    c.cfg.synth.seed = *o.seed;
    c.seed_given = true;
  }
  c.out = o.out.empty() ? fs::path(c.cfg.paths.output) : fs::path(o.out);
  return c;
}

void cmd_synth(const Options& o, bool out_given) {
  Context c = resolve(o);
  const fs::path root = out_given ? c.out : fs::path(c.cfg.paths.dataset);
  write_synth_dataset(root, c.cfg.synth, [](const std::string& m) {
    std::cerr << json{{"warning", m}}.dump() << '\n';
  });
  std::cerr << json{{"phase", "synth"}, {"images", c.cfg.synth.total_images()}, {"root", root.string()}}.dump()
            << '\n';
}

void cmd_encode(const Options& o) {
  Context c = resolve(o);
  const Dataset d = load_dataset(c.cfg.paths.dataset);
  const fs::path dir = c.out / "encoded";
  const RaySet rays(c.cfg.backbone.rays);
  for (const auto* split : {&d.train, &d.validation, &d.test})
    for (const auto& s : *split) {
      const GroundTruthBundle gt = encode_ground_truth(s.labels, rays);
      const fs::path sub = dir / s.name;
      make_dir(sub);
      save_tensor(sub / "distances.sptn", gt.distances);
      save_tensor(sub / "probability.sptn", gt.probability);
      save_tensor(sub / "seg.sptn", gt.seg);
      save_tensor(sub / "bnd.sptn", gt.bnd);
      save_tensor(sub / "bbox.sptn", gt.bbox);
    }
}

void cmd_train_transform(const Options& o) {
  Context c = resolve(o);
  if (!c.cfg.sap.mode) throw ConfigError("train-transform needs sap.mode (seg_bnd|bbox|both|recons)");
  const Dataset d = load_dataset(c.cfg.paths.dataset);
  make_dir(c.out);
  JsonLog log(c.out / "transform_log.jsonl");
  const TransformRun run = train_transform(d.train, d.validation, c.cfg, c.cfg.seed, log.fn());
  save_transform(c.out / "transform.ckpt", *run.model);
  json report = {{"config", json::parse(config_to_json(c.cfg))},
                 {"initial_loss", run.initial_loss},
                 {"final_loss", run.final_loss},
                 {"converged", run.converged},
                 {"best_epoch", run.summary.best_epoch}};
  write_text(c.out / "transform_report.json", report.dump(2) + "\n");
}

std::unique_ptr<TransformModel<float>> sap_model(const Context& c) {
  if (!c.cfg.sap.mode) return nullptr;
  if (c.cfg.paths.transform_checkpoint.empty())
    throw ConfigError("sap.mode is '" + to_string(*c.cfg.sap.mode) +
                      "' but paths.transform_checkpoint is not set; run train-transform first");
  if (!fs::exists(c.cfg.paths.transform_checkpoint))
    throw ConfigError("transformation checkpoint not found: " + c.cfg.paths.transform_checkpoint);
  auto model = load_transform<float>(c.cfg.paths.transform_checkpoint);
  if (model->config().mode != *c.cfg.sap.mode)
    throw ConfigError("transformation checkpoint mode '" + to_string(model->config().mode) +
                      "' differs from sap.mode");
  return model;
}

void cmd_train(const Options& o) {
  Context c = resolve(o);
  const auto encoder = sap_model(c);
  const Dataset d = load_dataset(c.cfg.paths.dataset);
  make_dir(c.out);
  JsonLog log(c.out / "train_log.jsonl");
  const StarNetRun run = train_starnet(d, c.cfg, encoder.get(), c.cfg.seed, log.fn(), c.out / "model.ckpt");
  json history = json::array();
  for (const auto& r : run.summary.history)
    history.push_back({{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"val_loss", r.val_loss}, {"lr", r.lr}});
  json report = {{"config", json::parse(config_to_json(c.cfg))},
                 {"best_epoch", run.summary.best_epoch},
                 {"best_val_loss", run.summary.best_val_loss},
                 {"stopped_by_schedule", run.summary.stopped_by_schedule},
                 {"history", history}};
  write_text(c.out / "train_report.json", report.dump(2) + "\n");
}

std::vector<Sample> infer_inputs(const Context& c) {
  if (!c.cfg.paths.images.empty()) return load_images(c.cfg.paths.images);
  return load_dataset(c.cfg.paths.dataset).test;
}

void cmd_infer(const Options& o) {
  Context c = resolve(o);
  const fs::path ckpt = c.cfg.paths.checkpoint.empty() ? c.out / "model.ckpt" : fs::path(c.cfg.paths.checkpoint);
  if (!fs::exists(ckpt)) throw IoError("checkpoint not found: " + ckpt.string());
  const auto net = load_starnet<float>(ckpt);
  if (net->config().rays != c.cfg.backbone.rays)
    throw ConfigError("checkpoint has " + std::to_string(net->config().rays) +
                      " rays but backbone.rays is " + std::to_string(c.cfg.backbone.rays));
  const std::vector<Sample> inputs = infer_inputs(c);
  make_dir(c.out / "masks");
  make_dir(c.out / "proposals");
  if (net->config().class_count > 0) make_dir(c.out / "classes");
  json timing = json::array();
  std::string csv = "name,network_ms,postprocess_ms,total_ms,candidates,instances\n";
  for (const auto& s : inputs) {
    if (static_cast<int>(s.image.dim(2)) != net->config().in_channels)
      throw ConfigError("image " + s.name + " has " + std::to_string(s.image.dim(2)) +
                        " channels, the model expects " + std::to_string(net->config().in_channels));
    const InferResult r = infer(*net, s.image, c.cfg.postprocess);
    write_label_png(c.out / "masks" / (s.name + ".png"), r.post.labels);
    write_text(c.out / "proposals" / (s.name + ".json"), proposals_to_json(r.post.kept) + "\n");
    if (net->config().class_count > 0) {
      Tape<float> tape(false);
      const auto out = net->backbone_forward(tape, mirror_pad(s.image, net->config().divisor()));
      LabelMask cls = r.post.labels;
      cls.classes.assign(cls.size(), 0);
      const std::size_t k = out.class_logits.dim(2), pw = out.class_logits.dim(1);
      for (int y = 0; y < cls.height; ++y)
        for (int x = 0; x < cls.width; ++x) {
          if (!cls.id(x, y)) continue;
          const float* z = out.class_logits.data() + (static_cast<std::size_t>(y) * pw + x) * k;
          cls.classes[cls.index(x, y)] = static_cast<std::uint8_t>(std::max_element(z + 1, z + k) - z);
        }
      write_class_png(c.out / "classes" / (s.name + ".png"), cls);
    }
    std::size_t instances = 0;
    for (auto id : r.post.labels.ids) instances = std::max<std::size_t>(instances, id);
    timing.push_back({{"name", s.name},
                      {"network_ms", r.network_ms},
                      {"postprocess_ms", r.postprocess_ms},
                      {"total_ms", r.total_ms()},
                      {"candidates", r.post.candidates},
                      {"instances", instances}});
    char row[256];
    std::snprintf(row, sizeof row, "%s,%.3f,%.3f,%.3f,%zu,%zu\n", s.name.c_str(), r.network_ms,
                  r.postprocess_ms, r.total_ms(), r.post.candidates, instances);
    csv += row;
    std::cerr << timing.back().dump() << '\n';
  }
  // Wall times vary between runs; they live apart from the deterministic outputs.
  write_text(c.out / "timing.json", timing.dump(1) + "\n");
  write_text(c.out / "timing.csv", csv);
}

void cmd_eval(const Options& o) {
  Context c = resolve(o);
  const bool gt_explicit = !c.cfg.paths.ground_truth.empty();
  const fs::path gt_dir = gt_explicit ? fs::path(c.cfg.paths.ground_truth) : fs::path(c.cfg.paths.dataset) / "masks";
  const fs::path pred_dir = c.cfg.paths.predictions.empty() ? c.out / "masks" : fs::path(c.cfg.paths.predictions);
  const auto pred_names = png_stems(pred_dir);
  const auto gt_names = png_stems(gt_dir);
  const std::set<std::string> gt_set(gt_names.begin(), gt_names.end());
  const std::set<std::string> pred_set(pred_names.begin(), pred_names.end());
  std::vector<std::string> missing;
  for (const auto& n : pred_names)
    if (!gt_set.count(n)) missing.push_back("ground truth for " + n);
  if (gt_explicit)
    for (const auto& n : gt_names)
      if (!pred_set.count(n)) missing.push_back("prediction for " + n);
  if (!missing.empty()) {
    std::string msg = "missing counterpart files:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw IoError(msg);
  }
  const fs::path gt_cls = gt_dir.parent_path() / "classes";
  const fs::path pred_cls = pred_dir.parent_path() / "classes";
  std::vector<ImageMetrics> images;
  for (const auto& n : pred_names) {
    LabelMask gt = read_label_png(gt_dir / (n + ".png"));
    LabelMask pred = read_label_png(pred_dir / (n + ".png"));
    if (fs::exists(gt_cls / (n + ".png")) && fs::exists(pred_cls / (n + ".png"))) {
      read_class_png(gt_cls / (n + ".png"), gt);
      read_class_png(pred_cls / (n + ".png"), pred);
    }
    if (gt.height != pred.height || gt.width != pred.width)
      throw ContractViolation("mask size mismatch for " + n);
    images.push_back(evaluate_image(n, gt, pred));
  }
  const DatasetMetrics m = aggregate(std::move(images));
  make_dir(c.out);
  write_text(c.out / "metrics.json", metrics_to_json(m) + "\n");
  std::string csv = ap_csv_header() + "\n";
  for (const auto& im : m.images) csv += ap_csv_row(im.name, im.ap) + "\n";
  csv += ap_csv_row("mean", m.ap) + "\n";
  write_text(c.out / "metrics.csv", csv);
  json summary = {{"phase", "eval"}, {"images", m.images.size()}, {"mean_ap", m.ap.mean}, {"bPQ", m.bpq}};
  if (m.mpq) summary["mPQ"] = *m.mpq;
  std::cerr << summary.dump() << '\n';
}

void cmd_ablate(const Options& o) {
  Context c = resolve(o);
  if (c.seed_given) c.cfg.ablation.seeds = {c.cfg.seed};
  const Dataset d = load_dataset(c.cfg.paths.dataset);
  make_dir(c.out);
  JsonLog log(c.out / "ablation_log.jsonl");
  const AblationReport report = run_ablation(d, c.cfg, log.fn());
  write_text(c.out / "ablation.csv", ablation_csv(report));
  write_text(c.out / "ablation_seeds.csv", ablation_seed_csv(report));
  write_text(c.out / "ablation.json", ablation_json(report) + "\n");
  write_text(c.out / "ablation_config.json", config_to_json(c.cfg) + "\n");
}

void cmd_plot(const Options& o) {
  Context c = resolve(o);
  if (c.cfg.paths.plot_image.empty()) throw ConfigError("plot needs paths.plot_image");
  const RasterImage image = read_png(c.cfg.paths.plot_image);
  RasterImage rgb = to_rgb8(image);
  make_dir(c.out);
  write_png(c.out / "overlay_image.png", rgb);
  std::optional<LabelMask> mask;
  std::vector<StarPolygon> polygons;
  if (!c.cfg.paths.plot_mask.empty()) {
    mask = read_label_png(c.cfg.paths.plot_mask);
    if (mask->height != image.height || mask->width != image.width)
      throw ConfigError("plot: mask size differs from the image");
    draw_mask_outlines(rgb, *mask);
  }
  if (!c.cfg.paths.plot_proposals.empty()) {
    polygons = proposals_from_json(read_text(c.cfg.paths.plot_proposals)).proposals;
    draw_polygon_outlines(rgb, polygons);
  }
  write_png(c.out / "overlay.png", rgb);
  write_text(c.out / "overlay.svg",
             overlay_svg("overlay_image.png", image.height, image.width, mask ? &*mask : nullptr, polygons));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Star-convex polygon nucleus instance segmentation"};
  app.require_subcommand(1);
  Options opts;
  auto add = [&](const char* name, const char* help) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opts.config, "JSON run configuration")->required();
    sub->add_option("--seed", opts.seed, "Seed override");
    sub->add_option("--out", opts.out, "Output directory");
    return sub;
  };
  CLI::App* synth = add("synth", "Generate the synthetic dataset");
  CLI::App* encode = add("encode", "Write ground-truth target tensors for every dataset image");
  CLI::App* train_transform = add("train-transform", "Train and freeze the transformation model");
  CLI::App* train = add("train", "Train the segmentation network");
  CLI::App* infer = add("infer", "Predict label masks and polygon proposals");
  CLI::App* eval = add("eval", "Score predicted masks against ground truth");
  CLI::App* ablate = add("ablate", "Run the ablation grid over seeds");
  CLI::App* plot = add("plot", "Draw mask and polygon overlays");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (synth->parsed()) cmd_synth(opts, !opts.out.empty());
    else if (encode->parsed()) cmd_encode(opts);
    else if (train_transform->parsed()) cmd_train_transform(opts);
    else if (train->parsed()) cmd_train(opts);
    else if (infer->parsed()) cmd_infer(opts);
    else if (eval->parsed()) cmd_eval(opts);
    else if (ablate->parsed()) cmd_ablate(opts);
    else if (plot->parsed()) cmd_plot(opts);
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const ContractViolation& e) {
    std::cerr << "contract violation: " << e.what() << '\n';
    return kContract;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}
