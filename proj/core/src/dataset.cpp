#include "starpoly/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "starpoly/config.hpp"
#include "starpoly/image_io.hpp"

namespace starpoly {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string stem_of(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d", index);
  return buf;
}

void make_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create directory " + p.string() + ": " + ec.message());
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Sample load_sample(const fs::path& root, const std::string& stem) {
  Sample s;
  s.name = stem;
  s.image = to_tensor(read_png(root / "images" / (stem + ".png")));
  const fs::path mask = root / "masks" / (stem + ".png");
  if (!fs::exists(mask)) throw IoError("missing mask " + mask.string());
  s.labels = read_label_png(mask);
  if (s.labels.height != static_cast<int>(s.image.dim(0)) ||
      s.labels.width != static_cast<int>(s.image.dim(1)))
    throw IoError("mask size differs from image: " + mask.string());
  const fs::path cls = root / "classes" / (stem + ".png");
  if (fs::exists(cls)) read_class_png(cls, s.labels);
  return s;
}

}  // namespace

std::vector<std::string> png_stems(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::string> stems;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") stems.push_back(e.path().stem().string());
  std::sort(stems.begin(), stems.end());
  return stems;
}

std::string manifest_json(const SynthConfig& config) {
  json splits = {{"train", json::array()}, {"validation", json::array()}, {"test", json::array()}};
  int index = 0;
  for (const auto& [name, count] : {std::pair<const char*, int>{"train", config.train},
                                    {"validation", config.validation},
                                    {"test", config.test}})
    for (int i = 0; i < count; ++i) splits[name].push_back(stem_of(index++));
  json doc = {{"synth", json::parse(synth_to_json(config))}, {"splits", splits}};
  return doc.dump(2) + "\n";
}

void write_synth_dataset(const fs::path& root, const SynthConfig& config, const Warn& warn) {
  config.validate();
  make_dir(root / "images");
  make_dir(root / "masks");
  if (config.class_count > 0) make_dir(root / "classes");
  for (int i = 0; i < config.total_images(); ++i) {
    const SynthImage img = generate_image(config, image_seed(config.seed, static_cast<std::uint64_t>(i)));
    const std::string stem = stem_of(i);
    if (warn && static_cast<int>(img.polygons.size()) < img.requested)
      warn("image " + stem + ": placed " + std::to_string(img.polygons.size()) + " of " +
           std::to_string(img.requested) + " instances");
    write_png(root / "images" / (stem + ".png"), gray8(img.height, img.width, img.pixels));
    write_label_png(root / "masks" / (stem + ".png"), img.labels);
    if (config.class_count > 0) write_class_png(root / "classes" / (stem + ".png"), img.labels);
  }
  std::ofstream out(root / "manifest.json");
  if (!out) throw IoError("cannot write " + (root / "manifest.json").string());
  out << manifest_json(config);
  if (!out) throw IoError("write failed: " + (root / "manifest.json").string());
}

Dataset load_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("dataset directory not found: " + root.string());
  Dataset d;
  const fs::path manifest = root / "manifest.json";
  if (fs::exists(manifest)) {
    json doc;
    try {
      doc = json::parse(read_text(manifest));
      d.synth = synth_from_json(doc.at("synth").dump());
      for (const auto& [name, split] : {std::pair<const char*, std::vector<Sample>*>{"train", &d.train},
                                        {"validation", &d.validation},
                                        {"test", &d.test}})
        for (const auto& stem : doc.at("splits").at(name)) split->push_back(load_sample(root, stem.get<std::string>()));
    } catch (const json::exception& e) {
      throw IoError("corrupt manifest " + manifest.string() + ": " + e.what());
    }
    return d;
  }
  std::vector<std::string> stems;
  for (const auto& s : png_stems(root / "images"))
    if (fs::exists(root / "masks" / (s + ".png"))) stems.push_back(s);
  const std::size_t n = stems.size();
  const std::size_t n_train = n * 70 / 100, n_val = n * 15 / 100;
  for (std::size_t i = 0; i < n; ++i) {
    auto& split = i < n_train ? d.train : i < n_train + n_val ? d.validation : d.test;
    split.push_back(load_sample(root, stems[i]));
  }
  return d;
}

std::vector<Sample> load_images(const fs::path& image_dir, const std::optional<fs::path>& mask_dir) {
  std::vector<Sample> out;
  for (const auto& stem : png_stems(image_dir)) {
    Sample s;
    s.name = stem;
    s.image = to_tensor(read_png(image_dir / (stem + ".png")));
    if (mask_dir && fs::exists(*mask_dir / (stem + ".png")))
      s.labels = read_label_png(*mask_dir / (stem + ".png"));
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace starpoly
