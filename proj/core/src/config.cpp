#include "starpoly/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace starpoly {

using nlohmann::json;

namespace {

// Strict reader for one JSON object: typed getters, unknown keys rejected.
class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  void get(const char* key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) fail(key, "an integer");
      out = v->get<int>();
    }
  }
  void get(const char* key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned()) fail(key, "a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void get(const char* key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(key, "a number");
      out = v->get<double>();
    }
  }
  void get(const char* key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) fail(key, "true or false");
      out = v->get<bool>();
    }
  }
  void get(const char* key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(key, "a string");
      out = v->get<std::string>();
    }
  }
  const json* object(const char* key) { return find(key); }

  void finish() const {
    for (const auto& [k, _] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown config key '" + where_ + "." + k + "'");
  }

  [[noreturn]] void fail(const char* key, const char* what) const {
    throw ConfigError("config key '" + where_ + "." + key + "' must be " + what);
  }

 private:
  const json* find(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

std::optional<SapTargetMode> sap_or_none(const std::string& s) {
  if (s == "none") return std::nullopt;
  return sap_mode_from_string(s);
}

std::string sap_name(const std::optional<SapTargetMode>& m) { return m ? to_string(*m) : "none"; }

void read_backbone(const json& j, BackboneConfig& b) {
  Section s(j, "backbone");
  s.get("levels", b.levels);
  s.get("base_channels", b.base_channels);
  s.get("rays", b.rays);
  s.get("samples", b.samples);
  std::string w = to_string(b.weighting);
  s.get("weighting", w);
  b.weighting = weighting_from_string(w);
  s.get("coord_grad", b.coord_grad);
  s.get("class_count", b.class_count);
  s.get("in_channels", b.in_channels);
  s.finish();
  b.validate();
}

json backbone_json(const BackboneConfig& b) {
  return {{"levels", b.levels},           {"base_channels", b.base_channels},
          {"rays", b.rays},               {"samples", b.samples},
          {"weighting", to_string(b.weighting)}, {"coord_grad", b.coord_grad},
          {"class_count", b.class_count}, {"in_channels", b.in_channels}};
}

void read_synth(const json& j, SynthConfig& c) {
  Section s(j, "synth");
  s.get("height", c.height);
  s.get("width", c.width);
  s.get("min_instances", c.min_instances);
  s.get("max_instances", c.max_instances);
  s.get("min_radius", c.min_radius);
  s.get("max_radius", c.max_radius);
  s.get("roughness", c.roughness);
  s.get("harmonics", c.harmonics);
  s.get("vertices", c.vertices);
  s.get("max_overlap", c.max_overlap);
  s.get("blur_sigma", c.blur_sigma);
  s.get("noise_sigma", c.noise_sigma);
  s.get("background", c.background);
  s.get("min_brightness", c.min_brightness);
  s.get("max_brightness", c.max_brightness);
  s.get("class_count", c.class_count);
  s.get("train", c.train);
  s.get("validation", c.validation);
  s.get("test", c.test);
  s.get("seed", c.seed);
  s.finish();
  c.validate();
}

json synth_json(const SynthConfig& c) {
  return {{"height", c.height},
          {"width", c.width},
          {"min_instances", c.min_instances},
          {"max_instances", c.max_instances},
          {"min_radius", c.min_radius},
          {"max_radius", c.max_radius},
          {"roughness", c.roughness},
          {"harmonics", c.harmonics},
          {"vertices", c.vertices},
          {"max_overlap", c.max_overlap},
          {"blur_sigma", c.blur_sigma},
          {"noise_sigma", c.noise_sigma},
          {"background", c.background},
          {"min_brightness", c.min_brightness},
          {"max_brightness", c.max_brightness},
          {"class_count", c.class_count},
          {"train", c.train},
          {"validation", c.validation},
          {"test", c.test},
          {"seed", c.seed}};
}

template <typename T, typename F>
std::vector<T> read_list(const json* v, const std::string& where, F convert) {
  if (!v->is_array()) throw ConfigError("config key '" + where + "' must be an array");
  std::vector<T> out;
  for (const auto& e : *v) {
    try {
      out.push_back(convert(e));
    } catch (const json::exception&) {
      throw ConfigError("config key '" + where + "' has an ill-typed element");
    }
  }
  if (out.empty()) throw ConfigError("config key '" + where + "' must not be empty");
  return out;
}

json parse_json(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  const json root = parse_json(text, "config is not valid JSON");
  RunConfig cfg;
  Section top(root, "config");
  if (const json* p = top.object("paths")) {
    Section s(*p, "paths");
    auto& c = cfg.paths;
    s.get("dataset", c.dataset);
    s.get("output", c.output);
    s.get("checkpoint", c.checkpoint);
    s.get("transform_checkpoint", c.transform_checkpoint);
    s.get("images", c.images);
    s.get("predictions", c.predictions);
    s.get("ground_truth", c.ground_truth);
    s.get("plot_image", c.plot_image);
    s.get("plot_mask", c.plot_mask);
    s.get("plot_proposals", c.plot_proposals);
    s.finish();
  }
  if (const json* p = top.object("backbone")) read_backbone(*p, cfg.backbone);
  if (const json* p = top.object("synth")) read_synth(*p, cfg.synth);
  if (const json* p = top.object("sap")) {
    Section s(*p, "sap");
    std::string mode = sap_name(cfg.sap.mode);
    s.get("mode", mode);
    cfg.sap.mode = sap_or_none(mode);
    s.get("levels", cfg.sap.levels);
    s.get("base_channels", cfg.sap.base_channels);
    s.get("max_epochs", cfg.sap.max_epochs);
    s.finish();
    if (cfg.sap.levels < 1 || cfg.sap.base_channels < 1 || cfg.sap.max_epochs < 1)
      throw ConfigError("sap: levels, base_channels and max_epochs must be >= 1");
  }
  if (const json* p = top.object("optimizer")) {
    Section s(*p, "optimizer");
    auto& o = cfg.optimizer;
    s.get("initial_lr", o.plateau.initial_lr);
    s.get("lr_decay", o.plateau.factor);
    s.get("patience", o.plateau.patience);
    s.get("min_lr", o.plateau.min_lr);
    s.get("max_epochs", o.max_epochs);
    s.get("beta1", o.adam.beta1);
    s.get("beta2", o.adam.beta2);
    s.get("epsilon", o.adam.epsilon);
    s.finish();
    PlateauSchedule check(o.plateau);  // validates
    if (o.max_epochs < 1) throw ConfigError("optimizer: max_epochs must be >= 1");
  }
  if (const json* p = top.object("augmentation")) {
    Section s(*p, "augmentation");
    s.get("rotation90", cfg.augmentation.rotation90);
    s.get("hflip", cfg.augmentation.hflip);
    s.finish();
  }
  if (const json* p = top.object("training")) {
    Section s(*p, "training");
    s.get("crop_size", cfg.training.crop_size);
    s.get("validation_limit", cfg.training.validation_limit);
    s.get("train_limit", cfg.training.train_limit);
    s.finish();
    if (cfg.training.crop_size < 0 || cfg.training.validation_limit < 0 || cfg.training.train_limit < 0)
      throw ConfigError("training: crop_size, validation_limit and train_limit must be >= 0");
  }
  if (const json* p = top.object("postprocess")) {
    Section s(*p, "postprocess");
    s.get("prob_thresh", cfg.postprocess.prob_thresh);
    s.get("nms_thresh", cfg.postprocess.nms_thresh);
    s.get("tune_on_validation", cfg.postprocess.tune_on_validation);
    s.finish();
    auto in01 = [](double v) { return v > 0 && v < 1; };
    if (!in01(cfg.postprocess.prob_thresh) || !in01(cfg.postprocess.nms_thresh))
      throw ConfigError("postprocess: thresholds must lie in (0, 1)");
  }
  if (const json* p = top.object("ablation")) {
    Section s(*p, "ablation");
    auto& a = cfg.ablation;
    if (const json* v = s.object("samples"))
      a.samples = read_list<int>(v, "ablation.samples", [](const json& e) {
        if (!e.is_number_integer() || e.get<int>() < 0) throw ConfigError("ablation.samples: non-negative integers required");
        return e.get<int>();
      });
    if (const json* v = s.object("weightings"))
      a.weightings = read_list<Weighting>(v, "ablation.weightings", [](const json& e) {
        return weighting_from_string(e.get<std::string>());
      });
    if (const json* v = s.object("sap_modes"))
      a.sap_modes = read_list<std::optional<SapTargetMode>>(
          v, "ablation.sap_modes", [](const json& e) { return sap_or_none(e.get<std::string>()); });
    if (const json* v = s.object("seeds"))
      a.seeds = read_list<std::uint64_t>(v, "ablation.seeds", [](const json& e) {
        if (!e.is_number_unsigned()) throw ConfigError("ablation.seeds: non-negative integers required");
        return e.get<std::uint64_t>();
      });
    s.finish();
  }
  top.get("seed", cfg.seed);
  top.finish();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const RunConfig& cfg) {
  const auto& p = cfg.paths;
  json paths = {{"dataset", p.dataset},
                {"output", p.output},
                {"checkpoint", p.checkpoint},
                {"transform_checkpoint", p.transform_checkpoint},
                {"images", p.images},
                {"predictions", p.predictions},
                {"ground_truth", p.ground_truth},
                {"plot_image", p.plot_image},
                {"plot_mask", p.plot_mask},
                {"plot_proposals", p.plot_proposals}};
  const auto& o = cfg.optimizer;
  json weightings = json::array(), modes = json::array();
  for (auto w : cfg.ablation.weightings) weightings.push_back(to_string(w));
  for (const auto& m : cfg.ablation.sap_modes) modes.push_back(sap_name(m));
  json root = {
      {"paths", paths},
      {"backbone", backbone_json(cfg.backbone)},
      {"synth", synth_json(cfg.synth)},
      {"sap",
       {{"mode", sap_name(cfg.sap.mode)},
        {"levels", cfg.sap.levels},
        {"base_channels", cfg.sap.base_channels},
        {"max_epochs", cfg.sap.max_epochs}}},
      {"optimizer",
       {{"initial_lr", o.plateau.initial_lr},
        {"lr_decay", o.plateau.factor},
        {"patience", o.plateau.patience},
        {"min_lr", o.plateau.min_lr},
        {"max_epochs", o.max_epochs},
        {"beta1", o.adam.beta1},
        {"beta2", o.adam.beta2},
        {"epsilon", o.adam.epsilon}}},
      {"augmentation",
       {{"rotation90", cfg.augmentation.rotation90}, {"hflip", cfg.augmentation.hflip}}},
      {"training",
       {{"crop_size", cfg.training.crop_size},
        {"validation_limit", cfg.training.validation_limit},
        {"train_limit", cfg.training.train_limit}}},
      {"postprocess",
       {{"prob_thresh", cfg.postprocess.prob_thresh}, {"nms_thresh", cfg.postprocess.nms_thresh},
        {"tune_on_validation", cfg.postprocess.tune_on_validation}}},
      {"ablation",
       {{"samples", cfg.ablation.samples},
        {"weightings", weightings},
        {"sap_modes", modes},
        {"seeds", cfg.ablation.seeds}}},
      {"seed", cfg.seed}};
  return root.dump(2);
}

std::string backbone_to_json(const BackboneConfig& config) { return backbone_json(config).dump(); }

BackboneConfig backbone_from_json(const std::string& text) {
  BackboneConfig b;
  read_backbone(parse_json(text, "backbone"), b);
  return b;
}

std::string synth_to_json(const SynthConfig& config) { return synth_json(config).dump(2); }

SynthConfig synth_from_json(const std::string& text) {
  SynthConfig c;
  read_synth(parse_json(text, "synth"), c);
  return c;
}

}  // namespace starpoly
