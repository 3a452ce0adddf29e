#include "qks/manifest.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"

#include "qks/errors.hpp"
#include "qks/qtf.hpp"

namespace qks {

using nlohmann::json;

void SyntheticConfig::validate() const {
    if (grid_h == 0 || grid_w == 0) throw DataError("synthetic config: grid extents must be >= 1");
    if (d == 0) throw DataError("synthetic config: d must be >= 1");
    if (n_seen == 0 || n_unseen == 0) {
        throw DataError("synthetic config: n_seen and n_unseen must be >= 1");
    }
    if (labels_per_image_min == 0 || labels_per_image_min > labels_per_image_max) {
        throw DataError("synthetic config: invalid labels_per_image range");
    }
    if (labels_per_image_max > n_labels()) {
        throw DataError("synthetic config: labels_per_image exceeds label count");
    }
    if (region_min == 0 || region_min > region_max) {
        throw DataError("synthetic config: invalid region size range");
    }
    if (region_max > grid_h || region_max > grid_w) {
        throw DataError("synthetic config: region size " + std::to_string(region_max) +
                        " larger than grid " + std::to_string(grid_h) + "x" + std::to_string(grid_w));
    }
    if (noise < 0.0 || template_noise < 0.0) {
        throw DataError("synthetic config: noise levels must be >= 0");
    }
    if (n_templates == 0) throw DataError("synthetic config: needs at least one template");
}

std::vector<std::uint8_t> DatasetManifest::seen_mask() const {
    std::vector<std::uint8_t> mask(n_labels(), 0);
    for (std::size_t i : seen_labels) {
        if (i >= mask.size()) throw DataError("seen label index out of range");
        mask[i] = 1;
    }
    return mask;
}

namespace {

void validate_label_lists(const DatasetManifest& m) {
    const std::size_t n = m.n_labels();
    std::vector<std::uint8_t> mark(n, 0);
    for (std::size_t i : m.seen_labels) {
        if (i >= n) throw DataError("seen label index " + std::to_string(i) + " out of range");
        if (mark[i]) throw DataError("label " + std::to_string(i) + " listed twice");
        mark[i] = 1;
    }
    for (std::size_t i : m.unseen_labels) {
        if (i >= n) throw DataError("unseen label index " + std::to_string(i) + " out of range");
        if (mark[i]) {
            throw DataError("label " + std::to_string(i) + " is in both seen and unseen sets");
        }
        mark[i] = 2;
    }
    if (m.seen_labels.size() + m.unseen_labels.size() != n) {
        throw DataError("seen + unseen label counts must equal the label count");
    }
}

void validate_records(const DatasetManifest& m, const std::vector<ImageRecord>& records,
                      bool train_split) {
    const auto seen = m.seen_mask();
    for (std::size_t idx = 0; idx < records.size(); ++idx) {
        const ImageRecord& rec = records[idx];
        if (rec.feature_file.empty()) {
            throw DataError("image " + std::to_string(idx) + " has no feature file");
        }
        std::size_t prev = 0;
        bool first = true;
        for (std::size_t lab : rec.labels) {
            if (lab >= m.n_labels()) {
                throw DataError("annotation label " + std::to_string(lab) + " out of range");
            }
            if (!first && lab <= prev) {
                throw DataError("annotations must be sorted strictly ascending (image " +
                                std::to_string(idx) + ")");
            }
            if (train_split && !seen[lab]) {
                throw DataError("train image " + std::to_string(idx) + " annotated with unseen label " +
                                std::to_string(lab));
            }
            prev = lab;
            first = false;
        }
    }
}

void check_file_shapes(const DatasetManifest& m) {
    for (const std::string& file : m.template_embedding_files) {
        const auto path = m.resolve(file);
        if (!std::filesystem::exists(path)) throw DataError("missing file: " + path.string());
        const QtfHeader h = read_tensor_header(path);
        if (h.dims != std::vector<std::size_t>{m.n_labels(), m.d}) {
            throw DataError("template embedding " + path.string() + " has shape " +
                            shape_to_string(h.dims) + ", expected [" + std::to_string(m.n_labels()) +
                            "x" + std::to_string(m.d) + "]");
        }
    }
    auto check_split = [&](const std::vector<ImageRecord>& records) {
        for (const ImageRecord& rec : records) {
            const auto path = m.resolve(rec.feature_file);
            if (!std::filesystem::exists(path)) throw DataError("missing file: " + path.string());
            const QtfHeader h = read_tensor_header(path);
            if (h.dims != std::vector<std::size_t>{m.hw(), m.channels}) {
                throw DataError("feature file " + path.string() + " has shape " +
                                shape_to_string(h.dims) + ", expected [" + std::to_string(m.hw()) +
                                "x" + std::to_string(m.channels) + "]");
            }
            if (!rec.mask_file.empty()) {
                const auto mask_path = m.resolve(rec.mask_file);
                if (!std::filesystem::exists(mask_path)) {
                    throw DataError("missing file: " + mask_path.string());
                }
            }
        }
    };
    check_split(m.train);
    check_split(m.test);
}

json region_to_json(const PlantedRegion& r) {
    return json::array({r.label, r.row0, r.col0, r.height, r.width});
}

PlantedRegion region_from_json(const json& j) {
    if (!j.is_array() || j.size() != 5) throw DataError("region must be [label,row,col,h,w]");
    return PlantedRegion{j[0].get<std::size_t>(), j[1].get<std::size_t>(), j[2].get<std::size_t>(),
                         j[3].get<std::size_t>(), j[4].get<std::size_t>()};
}

json records_to_json(const std::vector<ImageRecord>& records) {
    json arr = json::array();
    for (const ImageRecord& rec : records) {
        json r;
        r["features"] = rec.feature_file;
        r["labels"] = rec.labels;
        if (!rec.mask_file.empty()) r["mask"] = rec.mask_file;
        if (!rec.regions.empty()) {
            json regions = json::array();
            for (const auto& reg : rec.regions) regions.push_back(region_to_json(reg));
            r["regions"] = regions;
        }
        arr.push_back(std::move(r));
    }
    return arr;
}

std::vector<ImageRecord> records_from_json(const json& arr) {
    std::vector<ImageRecord> out;
    for (const json& r : arr) {
        ImageRecord rec;
        rec.feature_file = r.at("features").get<std::string>();
        rec.labels = r.at("labels").get<std::vector<std::size_t>>();
        if (r.contains("mask")) rec.mask_file = r["mask"].get<std::string>();
        if (r.contains("regions")) {
            for (const json& reg : r["regions"]) rec.regions.push_back(region_from_json(reg));
        }
        out.push_back(std::move(rec));
    }
    return out;
}

json synthetic_to_json(const SyntheticConfig& c) {
    json j;
    j["h"] = c.grid_h;
    j["w"] = c.grid_w;
    j["d"] = c.d;
    j["n_seen"] = c.n_seen;
    j["n_unseen"] = c.n_unseen;
    j["n_train"] = c.n_train;
    j["n_test"] = c.n_test;
    j["labels_min"] = c.labels_per_image_min;
    j["labels_max"] = c.labels_per_image_max;
    j["region_min"] = c.region_min;
    j["region_max"] = c.region_max;
    j["alpha"] = c.signal_gain;
    j["noise"] = c.noise;
    j["templates"] = c.n_templates;
    j["template_noise"] = c.template_noise;
    j["seed"] = c.seed;
    return j;
}

SyntheticConfig synthetic_from_json(const json& j) {
    SyntheticConfig c;
    c.grid_h = j.at("h").get<std::size_t>();
    c.grid_w = j.at("w").get<std::size_t>();
    c.d = j.at("d").get<std::size_t>();
    c.n_seen = j.at("n_seen").get<std::size_t>();
    c.n_unseen = j.at("n_unseen").get<std::size_t>();
    c.n_train = j.at("n_train").get<std::size_t>();
    c.n_test = j.at("n_test").get<std::size_t>();
    c.labels_per_image_min = j.at("labels_min").get<std::size_t>();
    c.labels_per_image_max = j.at("labels_max").get<std::size_t>();
    c.region_min = j.at("region_min").get<std::size_t>();
    c.region_max = j.at("region_max").get<std::size_t>();
    c.signal_gain = j.at("alpha").get<double>();
    c.noise = j.at("noise").get<double>();
    c.n_templates = j.at("templates").get<std::size_t>();
    c.template_noise = j.at("template_noise").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

} // namespace

void DatasetManifest::validate(bool check_files) const {
    if (d == 0 || channels == 0 || grid_h == 0 || grid_w == 0) {
        throw DataError("manifest: d, C, H, W must all be >= 1");
    }
    if (label_names.empty()) throw DataError("manifest: no labels");
    validate_label_lists(*this);
    if (templates.size() != template_embedding_files.size()) {
        throw DataError("manifest: template string and file counts differ");
    }
    if (template_embedding_files.empty()) {
        throw DataError("manifest: needs at least one template embedding file");
    }
    validate_records(*this, train, /*train_split=*/true);
    validate_records(*this, test, /*train_split=*/false);
    if (check_files) check_file_shapes(*this);
}

DatasetManifest DatasetManifest::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("manifest parse error in " + path.string() + ": " + e.what());
    }
    DatasetManifest m;
    try {
        m.name = j.at("name").get<std::string>();
        m.d = j.at("d").get<std::size_t>();
        m.channels = j.at("C").get<std::size_t>();
        m.grid_h = j.at("H").get<std::size_t>();
        m.grid_w = j.at("W").get<std::size_t>();
        m.label_names = j.at("label_names").get<std::vector<std::string>>();
        m.seen_labels = j.at("seen_labels").get<std::vector<std::size_t>>();
        m.unseen_labels = j.at("unseen_labels").get<std::vector<std::size_t>>();
        m.templates = j.at("templates").get<std::vector<std::string>>();
        m.template_embedding_files = j.at("template_embedding_files").get<std::vector<std::string>>();
        m.train = records_from_json(j.at("train"));
        m.test = records_from_json(j.at("test"));
        if (j.contains("provenance")) m.provenance = synthetic_from_json(j["provenance"]);
    } catch (const json::exception& e) {
        throw DataError("manifest field error in " + path.string() + ": " + e.what());
    }
    m.root = path.parent_path();
    m.validate(false);
    return m;
}

void DatasetManifest::save(const std::filesystem::path& path) const {
    json j;
    j["name"] = name;
    j["d"] = d;
    j["C"] = channels;
    j["H"] = grid_h;
    j["W"] = grid_w;
    j["label_names"] = label_names;
    j["seen_labels"] = seen_labels;
    j["unseen_labels"] = unseen_labels;
    j["templates"] = templates;
    j["template_embedding_files"] = template_embedding_files;
    j["train"] = records_to_json(train);
    j["test"] = records_to_json(test);
    if (provenance) j["provenance"] = synthetic_to_json(*provenance);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write manifest: " + path.string());
    out << j.dump(2) << '\n';
}

TemplateEmbeddingBank<float> load_template_bank(const DatasetManifest& manifest) {
    TemplateEmbeddingBank<float> bank;
    bank.templates = manifest.templates;
    bank.label_names = manifest.label_names;
    for (const std::string& file : manifest.template_embedding_files) {
        bank.embeddings.push_back(read_tensor_f32(manifest.resolve(file)));
    }
    bank.validate();
    if (bank.n_labels() != manifest.n_labels() || bank.width() != manifest.d) {
        throw DataError("template bank shape does not match manifest header");
    }
    return bank;
}

LabelEmbeddingTable<float> load_label_table(const DatasetManifest& manifest) {
    return combine_templates(load_template_bank(manifest), manifest.seen_mask());
}

} // namespace qks
