#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "qks/model.hpp"

namespace qks {

/// FNV-1a 64-bit over a byte string.
std::uint64_t fnv1a64(std::string_view bytes);

std::string to_hex(std::uint64_t value);

/// Canonical flat JSON of a model config (sorted dotted keys, compact).
/// Key order cannot affect the string, so the hash is reorder-stable.
std::string model_config_canonical(const ModelConfig& cfg);

std::string model_config_hash(const ModelConfig& cfg);

} // namespace qks
