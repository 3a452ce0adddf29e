#pragma once

#include <filesystem>
#include <variant>

#include "qks/tensor.hpp"

namespace qks {

/// QTF tensor container, all little-endian:
///   magic "QTF1" | dtype u8 (1=f32, 2=f64) | rank u8 | reserved u16 = 0
///   | dims rank x u64 | payload row-major.
/// Round-trips are bit-exact; trailing bytes are a corruption error.

void write_tensor(const std::filesystem::path& path, const Tensor<float>& t);
void write_tensor(const std::filesystem::path& path, const Tensor<double>& t);

using AnyTensor = std::variant<Tensor<float>, Tensor<double>>;

AnyTensor read_tensor(const std::filesystem::path& path);

/// Reads a tensor that must be stored as float32 / float64.
Tensor<float> read_tensor_f32(const std::filesystem::path& path);
Tensor<double> read_tensor_f64(const std::filesystem::path& path);

/// Header-only peek: dtype and dims without reading the payload.
struct QtfHeader {
    Dtype dtype;
    std::vector<std::size_t> dims;
};
QtfHeader read_tensor_header(const std::filesystem::path& path);

} // namespace qks
