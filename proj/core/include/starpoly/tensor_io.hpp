#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "starpoly/tensor.hpp"

namespace starpoly {

/// Tensor dump format: magic "SPTN", u32 rank, u32 dims[rank], u8 dtype
/// (0 = f32, 1 = f64), then the row-major payload. All little-endian.
enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

template <typename T>
void write_tensor(std::ostream& os, const Tensor<T>& t);

/// Reads a dump of either dtype and converts to T.
template <typename T>
Tensor<T> read_tensor(std::istream& is);

template <typename T>
void save_tensor(const std::filesystem::path& path, const Tensor<T>& t);

template <typename T>
Tensor<T> load_tensor(const std::filesystem::path& path);

}  // namespace starpoly
