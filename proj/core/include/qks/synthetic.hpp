#pragma once

#include <filesystem>

#include "qks/manifest.hpp"

namespace qks {

/// Generates a planted-structure dataset under out_dir and writes its
/// manifest to out_dir/manifest.json. Per label: one unit-norm prototype.
/// Per image: background cells ~ N(0, sigma^2); each sampled label plants
/// alpha * prototype + N(0, sigma^2) in a random rectangle, overlaps
/// resolved last-writer-wins in label-index order. Per-template label
/// embeddings are prototype + N(0, tau^2). Byte-identical output for a
/// fixed seed.
DatasetManifest generate_synthetic(const SyntheticConfig& cfg,
                                   const std::filesystem::path& out_dir);

} // namespace qks
