#include "qks/trainer.hpp"

#include <cmath>
#include <cstdio>

#include "qks/batching.hpp"
#include "qks/errors.hpp"
#include "qks/parallel.hpp"
#include "qks/rng.hpp"

namespace qks {

namespace {

// Stream tags for deriving independent rng streams from the run seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;

void zero_gradients(QksParameters<float>& grads, const ModelConfig& cfg) {
    for_each_trainable<float>(grads, cfg,
                              [](const std::string&, Tensor<float>& t) { t.zero(); });
}

void check_model_matches_manifest(const ModelConfig& cfg, const DatasetManifest& manifest) {
    if (cfg.channels != manifest.channels || cfg.grid_h != manifest.grid_h ||
        cfg.grid_w != manifest.grid_w) {
        throw DataError("model expects C=" + std::to_string(cfg.channels) + " grid " +
                        std::to_string(cfg.grid_h) + "x" + std::to_string(cfg.grid_w) +
                        " but manifest has C=" + std::to_string(manifest.channels) + " grid " +
                        std::to_string(manifest.grid_h) + "x" + std::to_string(manifest.grid_w));
    }
    if (cfg.d != manifest.d) {
        throw DataError("model width d=" + std::to_string(cfg.d) + " does not match manifest d=" +
                        std::to_string(manifest.d));
    }
}

struct CsvLog {
    explicit CsvLog(const std::filesystem::path& path) : file(std::fopen(path.c_str(), "w")) {
        if (!file) throw DataError("cannot open loss log: " + path.string());
        std::fprintf(file, "step,lr,loss\n");
    }
    ~CsvLog() {
        if (file) std::fclose(file);
    }
    void row(std::size_t step, double lr, double loss) {
        std::fprintf(file, "%zu,%.10g,%.10g\n", step, lr, loss);
    }
    std::FILE* file;
};

} // namespace

TrainResult train(const DatasetManifest& manifest, const ModelConfig& model_cfg,
                  const TrainConfig& train_cfg, const std::filesystem::path& out_dir) {
    model_cfg.validate();
    manifest.validate(false);
    check_model_matches_manifest(model_cfg, manifest);
    std::filesystem::create_directories(out_dir);

    const LabelEmbeddingTable<float> labels = load_label_table(manifest);
    const std::vector<std::uint8_t> seen_mask = manifest.seen_mask();

    Rng init_rng(mix_seed(train_cfg.seed, kInitStream));
    QksParameters<float> params = QksParameters<float>::init(model_cfg, init_rng);

    BatchLoader loader(manifest, Split::train, train_cfg.batch_size,
                       mix_seed(train_cfg.seed, kShuffleStream));
    loader.preload();

    AdamW<float> optimizer(train_cfg.adamw);
    PlateauSchedule schedule(train_cfg.plateau, train_cfg.adamw.lr);

    // Slot list shared across steps; order fixed by for_each_trainable.
    QksParameters<float> grads = QksParameters<float>::zeros_like(model_cfg);
    std::vector<ParamSlot<float>> slots;
    {
        std::vector<Tensor<float>*> grad_ptrs;
        for_each_trainable<float>(grads, model_cfg, [&](const std::string&, Tensor<float>& t) {
            grad_ptrs.push_back(&t);
        });
        std::size_t i = 0;
        for_each_trainable<float>(params, model_cfg, [&](const std::string& name, Tensor<float>& t) {
            slots.push_back(ParamSlot<float>{name, &t, grad_ptrs[i++]});
        });
    }

    // One gradient buffer per batch slot so accumulation order (and thus
    // the result) is independent of the thread count.
    std::vector<QksParameters<float>> image_grads;
    image_grads.reserve(train_cfg.batch_size);
    for (std::size_t i = 0; i < train_cfg.batch_size; ++i) {
        image_grads.push_back(QksParameters<float>::zeros_like(model_cfg));
    }
    std::vector<double> image_losses(train_cfg.batch_size, 0.0);

    auto tensor_ptrs = [&](QksParameters<float>& p) {
        std::vector<Tensor<float>*> ptrs;
        for_each_trainable<float>(p, model_cfg,
                                  [&](const std::string&, Tensor<float>& t) { ptrs.push_back(&t); });
        return ptrs;
    };
    const std::vector<Tensor<float>*> grad_dst = tensor_ptrs(grads);
    std::vector<std::vector<Tensor<float>*>> grad_src;
    grad_src.reserve(image_grads.size());
    for (auto& g : image_grads) grad_src.push_back(tensor_ptrs(g));

    const std::size_t batches_per_epoch = loader.batches_per_epoch();
    const std::filesystem::path log_path = out_dir / "loss_log.csv";
    CsvLog log(log_path);

    TrainResult result;
    result.loss_log = log_path;
    result.checkpoint_dir = out_dir / "checkpoint-final";

    CheckpointMeta meta;
    meta.model = model_cfg;
    meta.loss_kind = train_cfg.loss_kind;
    meta.seed = train_cfg.seed;
    meta.run_config_hash = train_cfg.run_config_hash;

    for (std::size_t step = 0; step < train_cfg.steps; ++step) {
        const std::size_t epoch = step / batches_per_epoch;
        const std::size_t batch_index = step % batches_per_epoch;
        const std::vector<std::size_t> batch = loader.batch(epoch, batch_index);
        const std::size_t n = batch.size();

        parallel_for(n, train_cfg.threads, [&](std::size_t i) {
            for (Tensor<float>* t : grad_src[i]) t->zero();
            const Tensor<float>& feats = loader.features(batch[i]);
            const auto& positives = loader.annotations(batch[i]);
            ForwardResult<float> fwd = forward(feats, labels, params, model_cfg);
            LossResult<float> loss = train_cfg.loss_kind == LossKind::classification
                                         ? classification_loss(fwd.scores, positives, seen_mask)
                                         : ranking_loss(fwd.scores, positives, seen_mask);
            image_losses[i] = loss.value;
            backward(fwd.trace, fwd.scores, loss.d_scores, labels, params, model_cfg,
                     image_grads[i]);
        });

        // Order-fixed reduction: image-index order, then mean over the batch.
        zero_gradients(grads, model_cfg);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t t = 0; t < grad_dst.size(); ++t) {
                add_inplace(*grad_dst[t], *grad_src[i][t]);
            }
        }
        const float inv_n = 1.0f / static_cast<float>(n);
        for (Tensor<float>* t : grad_dst) {
            for (auto& v : t->values()) v *= inv_n;
        }

        double batch_loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) batch_loss += image_losses[i];
        batch_loss /= static_cast<double>(n);

        if (!std::isfinite(batch_loss)) {
            throw VerificationError("training diverged at step " + std::to_string(step) +
                                    " (loss is not finite); last checkpoint kept");
        }

        const double lr = schedule.lr();
        optimizer.step(slots, lr);
        schedule.observe(batch_loss);

        log.row(step, lr, batch_loss);
        result.losses.push_back(batch_loss);
        result.final_loss = batch_loss;
        result.steps_run = step + 1;

        if (train_cfg.checkpoint_every > 0 && (step + 1) % train_cfg.checkpoint_every == 0 &&
            step + 1 < train_cfg.steps) {
            meta.step = step + 1;
            meta.lr = schedule.lr();
            char tag[32];
            std::snprintf(tag, sizeof(tag), "checkpoint-%06zu", step + 1);
            save_checkpoint(out_dir / tag, params, &optimizer, meta);
        }
    }

    meta.step = train_cfg.steps;
    meta.lr = schedule.lr();
    save_checkpoint(result.checkpoint_dir, params, &optimizer, meta);
    return result;
}

} // namespace qks
