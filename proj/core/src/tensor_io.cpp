#include "starpoly/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace starpoly {
namespace {

static_assert(std::endian::native == std::endian::little, "dump format assumes little-endian host");

void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 4)) throw IoError("tensor dump: truncated header");
  return v;
}

template <typename T>
constexpr DType dtype_of() {
  return sizeof(T) == 4 ? DType::F32 : DType::F64;
}

}  // namespace

template <typename T>
void write_tensor(std::ostream& os, const Tensor<T>& t) {
  os.write("SPTN", 4);
  put_u32(os, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) put_u32(os, static_cast<std::uint32_t>(d));
  const auto dtype = static_cast<char>(dtype_of<T>());
  os.write(&dtype, 1);
  os.write(reinterpret_cast<const char*>(t.data()),
           static_cast<std::streamsize>(t.numel() * sizeof(T)));
}

template <typename T>
Tensor<T> read_tensor(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "SPTN", 4) != 0)
    throw IoError("tensor dump: bad magic");
  const std::uint32_t rank = get_u32(is);
  if (rank > 16) throw IoError("tensor dump: implausible rank " + std::to_string(rank));
  Shape shape(rank);
  for (auto& d : shape) d = get_u32(is);
  char dtype = 0;
  if (!is.read(&dtype, 1)) throw IoError("tensor dump: truncated header");
  Tensor<T> out(shape);
  const std::size_t n = out.numel();
  if (dtype == static_cast<char>(DType::F32)) {
    std::vector<float> buf(n);
    if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * 4)))
      throw IoError("tensor dump: truncated payload");
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<T>(buf[i]);
  } else if (dtype == static_cast<char>(DType::F64)) {
    std::vector<double> buf(n);
    if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * 8)))
      throw IoError("tensor dump: truncated payload");
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<T>(buf[i]);
  } else {
    throw IoError("tensor dump: unknown dtype " + std::to_string(static_cast<int>(dtype)));
  }
  return out;
}

template <typename T>
void save_tensor(const std::filesystem::path& path, const Tensor<T>& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  write_tensor(os, t);
  if (!os) throw IoError("write failed: " + path.string());
}

template <typename T>
Tensor<T> load_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path.string());
  return read_tensor<T>(is);
}

template void write_tensor(std::ostream&, const Tensor<float>&);
template void write_tensor(std::ostream&, const Tensor<double>&);
template Tensor<float> read_tensor(std::istream&);
template Tensor<double> read_tensor(std::istream&);
template void save_tensor(const std::filesystem::path&, const Tensor<float>&);
template void save_tensor(const std::filesystem::path&, const Tensor<double>&);
template Tensor<float> load_tensor(const std::filesystem::path&);
template Tensor<double> load_tensor(const std::filesystem::path&);

}  // namespace starpoly
