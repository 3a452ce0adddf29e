#include "qks/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "json.hpp"

#include "qks/batching.hpp"
#include "qks/errors.hpp"
#include "qks/parallel.hpp"
#include "qks/qtf.hpp"

namespace qks {

EvalTask eval_task_from_string(const std::string& s) {
    if (s == "zsl") return EvalTask::zsl;
    if (s == "gzsl") return EvalTask::gzsl;
    throw DataError("unknown task '" + s + "' (expected zsl|gzsl)");
}

std::string to_string(EvalTask t) {
    return t == EvalTask::zsl ? "zsl" : "gzsl";
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["task"] = qks::to_string(task);
    j["map"] = map;
    nlohmann::json ks = nlohmann::json::array();
    for (const AtK& a : topk) {
        ks.push_back({{"k", a.k}, {"precision", a.precision}, {"recall", a.recall}, {"f1", a.f1}});
    }
    j["topk"] = ks;
    j["candidates"] = candidates;
    nlohmann::json aps = nlohmann::json::array();
    for (double ap : per_label_ap) {
        if (std::isnan(ap)) {
            aps.push_back(nullptr);
        } else {
            aps.push_back(ap);
        }
    }
    j["per_label_ap"] = aps;
    j["skipped_labels"] = skipped_labels;
    j["n_images"] = n_images;
    return j.dump(2);
}

void EvalReport::print_table(std::ostream& os) const {
    char line[128];
    std::snprintf(line, sizeof(line), "task: %-5s  images: %zu  candidates: %zu  skipped: %zu",
                  qks::to_string(task).c_str(), n_images, candidates.size(),
                  skipped_labels.size());
    os << line << '\n';
    std::snprintf(line, sizeof(line), "mAP: %.4f", map);
    os << line << '\n';
    os << "  K     P@K     R@K    F1@K\n";
    for (const AtK& a : topk) {
        std::snprintf(line, sizeof(line), "%3zu  %.4f  %.4f  %.4f", a.k, a.precision, a.recall,
                      a.f1);
        os << line << '\n';
    }
}

EvalReport compute_report(const Tensor<double>& scores,
                          const std::vector<std::vector<std::size_t>>& annotations,
                          std::vector<std::size_t> candidates, std::span<const std::size_t> ks,
                          EvalTask task) {
    EvalReport report;
    report.task = task;
    report.n_images = scores.rows();
    report.candidates = std::move(candidates);

    MeanApResult ap = mean_ap(scores, annotations, report.candidates);
    report.map = ap.map;
    report.per_label_ap = std::move(ap.per_label_ap);
    report.skipped_labels = std::move(ap.skipped_labels);

    for (std::size_t k : ks) {
        const TopkResult r = topk_prf(scores, annotations, k, report.candidates);
        report.topk.push_back(EvalReport::AtK{k, r.precision, r.recall, r.f1});
    }
    return report;
}

SplitInference score_split(const QksParameters<float>& params, const ModelConfig& cfg,
                           const DatasetManifest& manifest, Split split, std::size_t threads) {
    const LabelEmbeddingTable<float> labels = load_label_table(manifest);
    BatchLoader loader(manifest, split, 1, 0);
    loader.preload();
    const std::size_t n = loader.n_images(), n_labels = manifest.n_labels();

    SplitInference out;
    out.scores = Tensor<double>({n, n_labels});
    out.argmax.assign(n, {});
    parallel_for(n, threads, [&](std::size_t img) {
        const ForwardResult<float> fwd = forward(loader.features(img), labels, params, cfg);
        double* row = out.scores.row(img);
        for (std::size_t i = 0; i < n_labels; ++i) row[i] = static_cast<double>(fwd.scores.scores[i]);
        out.argmax[img] = fwd.scores.argmax_token;
    });
    return out;
}

namespace {

void check_checkpoint_matches_manifest(const ModelConfig& cfg, const DatasetManifest& manifest) {
    if (cfg.d != manifest.d || cfg.channels != manifest.channels ||
        cfg.grid_h != manifest.grid_h || cfg.grid_w != manifest.grid_w) {
        throw DataError("checkpoint model dims do not match the manifest (model d=" +
                        std::to_string(cfg.d) + " C=" + std::to_string(cfg.channels) +
                        ", manifest d=" + std::to_string(manifest.d) + " C=" +
                        std::to_string(manifest.channels) + ")");
    }
}

std::vector<std::size_t> candidate_labels(const DatasetManifest& manifest, EvalTask task) {
    std::vector<std::size_t> cands;
    if (task == EvalTask::zsl) {
        cands = manifest.unseen_labels;
    } else {
        cands.resize(manifest.n_labels());
        for (std::size_t i = 0; i < cands.size(); ++i) cands[i] = i;
    }
    std::sort(cands.begin(), cands.end());
    return cands;
}

std::vector<std::vector<std::size_t>> split_annotations(const DatasetManifest& manifest,
                                                        Split split) {
    std::vector<std::vector<std::size_t>> out;
    for (const ImageRecord& rec : manifest.images(split)) out.push_back(rec.labels);
    return out;
}

} // namespace

EvalReport evaluate(const Checkpoint& checkpoint, const DatasetManifest& manifest, EvalTask task,
                    std::span<const std::size_t> ks, std::size_t threads) {
    manifest.validate(false);
    check_checkpoint_matches_manifest(checkpoint.meta.model, manifest);
    const SplitInference inf =
        score_split(checkpoint.params, checkpoint.meta.model, manifest, Split::test, threads);
    return compute_report(inf.scores, split_annotations(manifest, Split::test),
                          candidate_labels(manifest, task), ks, task);
}

EvalReport evaluate(const std::filesystem::path& checkpoint_dir, const DatasetManifest& manifest,
                    EvalTask task, std::span<const std::size_t> ks, std::size_t threads) {
    return evaluate(load_checkpoint(checkpoint_dir), manifest, task, ks, threads);
}

AttentionMap export_attention_map(const Checkpoint& checkpoint, const DatasetManifest& manifest,
                                  std::size_t image_index, std::size_t label,
                                  const std::filesystem::path& out_prefix) {
    manifest.validate(false);
    check_checkpoint_matches_manifest(checkpoint.meta.model, manifest);
    if (label >= manifest.n_labels()) {
        throw DataError("label index " + std::to_string(label) + " out of range");
    }
    const auto& records = manifest.test;
    if (image_index >= records.size()) {
        throw DataError("test image index " + std::to_string(image_index) + " out of range");
    }
    const ModelConfig& cfg = checkpoint.meta.model;
    const LabelEmbeddingTable<float> labels = load_label_table(manifest);
    const Tensor<float> feats = read_tensor_f32(manifest.resolve(records[image_index].feature_file));
    const ForwardResult<float> fwd = forward(feats, labels, checkpoint.params, cfg);

    AttentionMap map;
    map.token = fwd.scores.argmax_token[label];

    // Final layer cross-attention row of the argmax token, head-averaged.
    const Tensor<float>& probs = fwd.trace.layers.back().cross_attn.probs;
    const std::size_t heads = probs.size(0), m = probs.size(1), hw = probs.size(2);
    map.raw = Tensor<float>({cfg.grid_h, cfg.grid_w});
    for (std::size_t h = 0; h < heads; ++h) {
        const float* row = probs.data() + (h * m + map.token) * hw;
        for (std::size_t cell = 0; cell < hw; ++cell) map.raw[cell] += row[cell];
    }
    const float inv_heads = 1.0f / static_cast<float>(heads);
    for (auto& v : map.raw.values()) v *= inv_heads;

    float lo = map.raw[0], hi = map.raw[0];
    for (float v : map.raw.values()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    map.normalized = Tensor<float>({cfg.grid_h, cfg.grid_w});
    if (hi - lo <= 0.0f) {
        map.degenerate = true; // constant map; caller warns
    } else {
        const float inv_range = 1.0f / (hi - lo);
        for (std::size_t i = 0; i < map.raw.numel(); ++i) {
            map.normalized[i] = (map.raw[i] - lo) * inv_range;
        }
    }

    if (!out_prefix.empty()) {
        const std::filesystem::path csv_path = out_prefix.string() + ".csv";
        std::ofstream csv(csv_path, std::ios::trunc);
        if (!csv) throw DataError("cannot write " + csv_path.string());
        for (std::size_t r = 0; r < cfg.grid_h; ++r) {
            for (std::size_t c = 0; c < cfg.grid_w; ++c) {
                char buf[32];
                std::snprintf(buf, sizeof(buf), "%.6f", map.normalized(r, c));
                csv << buf << (c + 1 < cfg.grid_w ? "," : "\n");
            }
        }

        const std::filesystem::path raster_path = out_prefix.string() + ".raster";
        std::ofstream raster(raster_path, std::ios::binary | std::ios::trunc);
        if (!raster) throw DataError("cannot write " + raster_path.string());
        for (float v : map.normalized.values()) {
            const auto byte = static_cast<unsigned char>(std::lround(255.0f * v));
            raster.write(reinterpret_cast<const char*>(&byte), 1);
        }

        nlohmann::json side;
        side["height"] = cfg.grid_h;
        side["width"] = cfg.grid_w;
        side["image_index"] = image_index;
        side["label"] = label;
        side["label_name"] = manifest.label_names[label];
        side["token"] = map.token;
        side["degenerate"] = map.degenerate;
        const std::filesystem::path json_path = out_prefix.string() + ".json";
        std::ofstream sidecar(json_path, std::ios::trunc);
        if (!sidecar) throw DataError("cannot write " + json_path.string());
        sidecar << side.dump(2) << '\n';
    }
    return map;
}

PreferenceStats token_preference_stats(const Checkpoint& checkpoint,
                                       const DatasetManifest& manifest, EvalTask task,
                                       std::size_t threads) {
    manifest.validate(false);
    check_checkpoint_matches_manifest(checkpoint.meta.model, manifest);
    const ModelConfig& cfg = checkpoint.meta.model;
    const SplitInference inf =
        score_split(checkpoint.params, cfg, manifest, Split::test, threads);

    std::vector<std::uint8_t> candidate_mask(manifest.n_labels(), 0);
    for (std::size_t c : candidate_labels(manifest, task)) candidate_mask[c] = 1;

    PreferenceStats stats;
    stats.counts.assign(manifest.n_labels(), std::vector<std::uint64_t>(cfg.m, 0));
    stats.histogram.assign(cfg.m, 0);
    const auto& records = manifest.test;
    for (std::size_t img = 0; img < records.size(); ++img) {
        for (std::size_t label : records[img].labels) {
            if (!candidate_mask[label]) continue;
            const std::size_t token = inf.argmax[img][label];
            ++stats.counts[label][token];
            ++stats.histogram[token];
        }
    }
    return stats;
}

void write_stats_csv(const PreferenceStats& stats, const std::vector<std::string>& label_names,
                     const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    const std::size_t m = stats.histogram.size();
    out << "label";
    for (std::size_t j = 0; j < m; ++j) out << ",token" << j;
    out << "\n";
    for (std::size_t i = 0; i < stats.counts.size(); ++i) {
        out << (i < label_names.size() ? label_names[i] : "label" + std::to_string(i));
        for (std::size_t j = 0; j < m; ++j) out << "," << stats.counts[i][j];
        out << "\n";
    }
    out << "total";
    for (std::size_t j = 0; j < m; ++j) out << "," << stats.histogram[j];
    out << "\n";
}

} // namespace qks
