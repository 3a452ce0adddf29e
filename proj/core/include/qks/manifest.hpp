#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qks/prompt_pool.hpp"
#include "qks/tensor.hpp"

namespace qks {

enum class Split : std::uint8_t { train, test };

/// A rectangular cell region where one label's prototype was planted.
struct PlantedRegion {
    std::size_t label = 0;
    std::size_t row0 = 0, col0 = 0;
    std::size_t height = 0, width = 0;

    std::size_t area() const { return height * width; }
    bool contains(std::size_t r, std::size_t c) const {
        return r >= row0 && r < row0 + height && c >= col0 && c < col0 + width;
    }
};

struct ImageRecord {
    std::string feature_file;              // relative to the manifest directory
    std::vector<std::size_t> labels;       // sorted ascending
    std::string mask_file;                 // synthetic ground truth, optional
    std::vector<PlantedRegion> regions;    // synthetic ground truth, in plant order
};

/// Generator provenance stored in the manifest when the dataset is synthetic.
struct SyntheticConfig {
    std::size_t grid_h = 8, grid_w = 8;
    std::size_t d = 32; // generator uses C = d
    std::size_t n_seen = 40, n_unseen = 10;
    std::size_t n_train = 2000, n_test = 400;
    std::size_t labels_per_image_min = 1, labels_per_image_max = 3;
    std::size_t region_min = 2, region_max = 4;
    double signal_gain = 1.0;    // alpha
    double noise = 0.1;          // sigma
    std::size_t n_templates = 4; // K
    double template_noise = 0.1; // tau
    std::uint64_t seed = 0;

    std::size_t n_labels() const { return n_seen + n_unseen; }
    void validate() const;
};

struct DatasetManifest {
    std::string name;
    std::size_t d = 0, channels = 0, grid_h = 0, grid_w = 0;
    std::vector<std::string> label_names;
    std::vector<std::size_t> seen_labels, unseen_labels;
    std::vector<std::string> templates;
    std::vector<std::string> template_embedding_files;
    std::vector<ImageRecord> train, test;
    std::optional<SyntheticConfig> provenance;
    std::filesystem::path root; // directory the manifest was loaded from

    std::size_t n_labels() const { return label_names.size(); }
    std::size_t hw() const { return grid_h * grid_w; }
    const std::vector<ImageRecord>& images(Split s) const { return s == Split::train ? train : test; }

    std::vector<std::uint8_t> seen_mask() const;

    std::filesystem::path resolve(const std::string& relative) const { return root / relative; }

    /// Structural validation; with check_files also verifies every referenced
    /// file exists and its QTF header matches the manifest dimensions.
    /// Train annotations must reference seen labels only.
    void validate(bool check_files = false) const;

    static DatasetManifest load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

/// Reads the K per-template embedding files into a bank (float32 storage).
TemplateEmbeddingBank<float> load_template_bank(const DatasetManifest& manifest);

/// Bank -> averaged label table with the manifest's seen/unseen partition.
LabelEmbeddingTable<float> load_label_table(const DatasetManifest& manifest);

} // namespace qks
