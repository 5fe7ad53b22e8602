#include "starpoly/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "starpoly/config.hpp"
#include "starpoly/tensor_io.hpp"

namespace starpoly {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'S', 'P', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_le(std::ostream& os, T v) {
  unsigned char b[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T read_le(std::istream& is, const std::filesystem::path& path) {
  unsigned char b[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(T))) throw IoError("truncated checkpoint " + path.string());
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(b[i]) << (8 * i);
  return v;
}

template <typename T>
void write_file(const std::filesystem::path& path, json header, const nn::ParamStore<T>& params) {
  json names = json::array();
  for (const auto& [name, _] : params.entries()) names.push_back(name);
  header["params"] = names;
  const std::string text = header.dump();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write checkpoint " + path.string());
  os.write(kMagic, 4);
  write_le<std::uint32_t>(os, kVersion);
  write_le<std::uint64_t>(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [_, t] : params.entries()) write_tensor(os, t);
  if (!os) throw IoError("write failed: " + path.string());
}

json read_header(std::istream& is, const std::filesystem::path& path) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("not a checkpoint file: " + path.string());
  if (read_le<std::uint32_t>(is, path) != kVersion)
    throw IoError("unsupported checkpoint version: " + path.string());
  const auto len = read_le<std::uint64_t>(is, path);
  if (len > (1u << 26)) throw IoError("corrupt checkpoint header: " + path.string());
  std::string text(len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(len)))
    throw IoError("truncated checkpoint " + path.string());
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw IoError("corrupt checkpoint header in " + path.string() + ": " + e.what());
  }
}

std::ifstream open(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  return is;
}

template <typename T>
void read_params(std::istream& is, const json& header, nn::ParamStore<T>& params,
                 const std::filesystem::path& path) {
  const auto& names = header.at("params");
  if (names.size() != params.size())
    throw IoError("checkpoint " + path.string() + " parameter count does not match its config");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, dst] = params.entries()[i];
    if (names[i].get<std::string>() != name)
      throw IoError("checkpoint " + path.string() + ": unexpected parameter " + names[i].get<std::string>());
    Tensor<T> src = read_tensor<T>(is);
    if (src.shape() != dst.shape())
      throw IoError("checkpoint " + path.string() + ": shape mismatch for " + name);
    Tensor<T> target = dst;
    std::copy(src.values().begin(), src.values().end(), target.values().begin());
  }
}

}  // namespace

template <typename T>
void save_starnet(const std::filesystem::path& path, const StarNet<T>& net,
                 const std::string& metadata_json) {
  json header = {{"kind", "starnet"},
                 {"backbone", json::parse(backbone_to_json(net.config()))},
                 {"metadata", json::parse(metadata_json)}};
  write_file(path, header, net.params());
}

template <typename T>
std::unique_ptr<StarNet<T>> load_starnet(const std::filesystem::path& path) {
  auto is = open(path);
  const json header = read_header(is, path);
  if (header.value("kind", "") != "starnet")
    throw IoError(path.string() + " is not a network checkpoint");
  auto net = std::make_unique<StarNet<T>>(backbone_from_json(header.at("backbone").dump()), 0);
  read_params(is, header, net->params(), path);
  return net;
}

template <typename T>
void save_transform(const std::filesystem::path& path, const TransformModel<T>& model) {
  const auto& c = model.config();
  json header = {{"kind", "transform"},
                 {"mode", to_string(c.mode)},
                 {"rays", c.rays},
                 {"levels", c.levels},
                 {"base_channels", c.base_channels}};
  write_file(path, header, model.params());
}

template <typename T>
std::unique_ptr<TransformModel<T>> load_transform(const std::filesystem::path& path) {
  auto is = open(path);
  const json header = read_header(is, path);
  if (header.value("kind", "") != "transform")
    throw IoError(path.string() + " is not a transformation model checkpoint");
  TransformConfig c;
  try {
    c.mode = sap_mode_from_string(header.at("mode").get<std::string>());
    c.rays = header.at("rays").get<int>();
    c.levels = header.at("levels").get<int>();
    c.base_channels = header.at("base_channels").get<int>();
  } catch (const json::exception& e) {
    throw IoError("corrupt checkpoint header in " + path.string() + ": " + e.what());
  }
  auto model = std::make_unique<TransformModel<T>>(c, 0);
  read_params(is, header, model->params(), path);
  model->freeze();
  return model;
}

std::string read_checkpoint_header(const std::filesystem::path& path) {
  auto is = open(path);
  return read_header(is, path).dump();
}

template void save_starnet(const std::filesystem::path&, const StarNet<float>&, const std::string&);
template void save_starnet(const std::filesystem::path&, const StarNet<double>&, const std::string&);
template std::unique_ptr<StarNet<float>> load_starnet(const std::filesystem::path&);
template std::unique_ptr<StarNet<double>> load_starnet(const std::filesystem::path&);
template void save_transform(const std::filesystem::path&, const TransformModel<float>&);
template void save_transform(const std::filesystem::path&, const TransformModel<double>&);
template std::unique_ptr<TransformModel<float>> load_transform(const std::filesystem::path&);
template std::unique_ptr<TransformModel<double>> load_transform(const std::filesystem::path&);

}  // namespace starpoly
