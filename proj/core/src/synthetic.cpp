#include "qks/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "qks/errors.hpp"
#include "qks/qtf.hpp"
#include "qks/rng.hpp"

namespace qks {

namespace {

std::string zero_padded(std::size_t value, int width) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%0*zu", width, value);
    return buf;
}

/// First `count` entries of a partial Fisher-Yates over `pool`.
std::vector<std::size_t> sample_distinct(std::vector<std::size_t> pool, std::size_t count,
                                         Rng& rng) {
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + rng.index(pool.size() - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    return pool;
}

struct ImageOut {
    Tensor<float> features; // [HW x d]
    Tensor<float> mask;     // [H x W], label index or -1
    std::vector<PlantedRegion> regions;
    std::vector<std::size_t> labels;
};

ImageOut make_image(const SyntheticConfig& cfg, const Tensor<float>& prototypes,
                    const std::vector<std::size_t>& label_pool, Rng& rng) {
    const std::size_t hw = cfg.grid_h * cfg.grid_w;
    ImageOut img;
    img.features = Tensor<float>({hw, cfg.d});
    img.mask = Tensor<float>::full({cfg.grid_h, cfg.grid_w}, -1.0f);

    const std::size_t span = cfg.labels_per_image_max - cfg.labels_per_image_min + 1;
    const std::size_t count = cfg.labels_per_image_min + rng.index(span);
    img.labels = sample_distinct(label_pool, count, rng);
    std::sort(img.labels.begin(), img.labels.end());

    // Background noise first, planted regions overwrite.
    for (auto& v : img.features.values()) v = static_cast<float>(rng.normal() * cfg.noise);

    const std::size_t region_span = cfg.region_max - cfg.region_min + 1;
    for (std::size_t lab : img.labels) { // ascending order: last writer wins
        PlantedRegion region;
        region.label = lab;
        region.height = cfg.region_min + rng.index(region_span);
        region.width = cfg.region_min + rng.index(region_span);
        region.row0 = rng.index(cfg.grid_h - region.height + 1);
        region.col0 = rng.index(cfg.grid_w - region.width + 1);
        const float* proto = prototypes.row(lab);
        for (std::size_t r = region.row0; r < region.row0 + region.height; ++r) {
            for (std::size_t c = region.col0; c < region.col0 + region.width; ++c) {
                float* cell = img.features.row(r * cfg.grid_w + c);
                for (std::size_t k = 0; k < cfg.d; ++k) {
                    cell[k] = static_cast<float>(cfg.signal_gain * proto[k] + rng.normal() * cfg.noise);
                }
                img.mask(r, c) = static_cast<float>(lab);
            }
        }
        img.regions.push_back(region);
    }
    return img;
}

} // namespace

DatasetManifest generate_synthetic(const SyntheticConfig& cfg,
                                   const std::filesystem::path& out_dir) {
    cfg.validate();
    const std::size_t n_labels = cfg.n_labels();

    std::filesystem::create_directories(out_dir / "features");
    std::filesystem::create_directories(out_dir / "masks");
    std::filesystem::create_directories(out_dir / "templates");

    Rng rng(cfg.seed);

    // Unit-norm prototype per label.
    Tensor<float> prototypes({n_labels, cfg.d});
    for (std::size_t i = 0; i < n_labels; ++i) {
        float* row = prototypes.row(i);
        double norm_sq = 0.0;
        for (std::size_t k = 0; k < cfg.d; ++k) {
            row[k] = static_cast<float>(rng.normal());
            norm_sq += static_cast<double>(row[k]) * row[k];
        }
        const float inv = static_cast<float>(1.0 / std::sqrt(norm_sq));
        for (std::size_t k = 0; k < cfg.d; ++k) row[k] *= inv;
    }
    write_tensor(out_dir / "prototypes.qtf", prototypes);

    DatasetManifest m;
    m.name = "synthetic";
    m.d = cfg.d;
    m.channels = cfg.d;
    m.grid_h = cfg.grid_h;
    m.grid_w = cfg.grid_w;
    m.provenance = cfg;
    m.root = out_dir;
    for (std::size_t i = 0; i < n_labels; ++i) m.label_names.push_back("label" + zero_padded(i, 3));
    for (std::size_t i = 0; i < cfg.n_seen; ++i) m.seen_labels.push_back(i);
    for (std::size_t i = cfg.n_seen; i < n_labels; ++i) m.unseen_labels.push_back(i);

    // Per-template embeddings: prototype + template noise.
    for (std::size_t k = 0; k < cfg.n_templates; ++k) {
        Tensor<float> slice = prototypes;
        for (auto& v : slice.values()) v += static_cast<float>(rng.normal() * cfg.template_noise);
        const std::string file = "templates/template_" + zero_padded(k, 2) + ".qtf";
        write_tensor(out_dir / file, slice);
        m.templates.push_back("synthetic template " + std::to_string(k));
        m.template_embedding_files.push_back(file);
    }

    std::vector<std::size_t> seen_pool = m.seen_labels;
    std::vector<std::size_t> all_pool(n_labels);
    for (std::size_t i = 0; i < n_labels; ++i) all_pool[i] = i;

    auto emit_split = [&](Split split, std::size_t n_images, const std::vector<std::size_t>& pool,
                          const char* tag) {
        std::vector<ImageRecord>& records = split == Split::train ? m.train : m.test;
        for (std::size_t i = 0; i < n_images; ++i) {
            ImageOut img = make_image(cfg, prototypes, pool, rng);
            ImageRecord rec;
            rec.feature_file = std::string("features/") + tag + "_" + zero_padded(i, 5) + ".qtf";
            rec.mask_file = std::string("masks/") + tag + "_" + zero_padded(i, 5) + ".qtf";
            rec.labels = img.labels;
            rec.regions = img.regions;
            write_tensor(out_dir / rec.feature_file, img.features);
            write_tensor(out_dir / rec.mask_file, img.mask);
            records.push_back(std::move(rec));
        }
    };
    emit_split(Split::train, cfg.n_train, seen_pool, "train");
    emit_split(Split::test, cfg.n_test, all_pool, "test");

    m.validate(false);
    m.save(out_dir / "manifest.json");
    return m;
}

} // namespace qks
