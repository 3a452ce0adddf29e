#include "cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "qks/config_hash.hpp"
#include "qks/errors.hpp"
#include "qks/evaluate.hpp"
#include "qks/manifest.hpp"
#include "qks/model_gradcheck.hpp"
#include "qks/parallel.hpp"
#include "qks/rng.hpp"
#include "qks/synthetic.hpp"
#include "qks/trainer.hpp"

namespace qks::cli {

namespace {

using nlohmann::json;

/// Flat JSON config with dotted keys ("model.m": 12). Flags override file
/// values; the content hash covers the canonical (sorted, compact)
/// serialization, so key order never matters.
class RunConfig {
public:
    RunConfig() : values_(json::object()) {}

    static RunConfig load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open config: " + path.string());
        RunConfig cfg;
        try {
            in >> cfg.values_;
        } catch (const json::exception& e) {
            throw DataError("config parse error in " + path.string() + ": " + e.what());
        }
        if (!cfg.values_.is_object()) throw DataError("config must be a JSON object");
        for (const auto& [key, value] : cfg.values_.items()) {
            if (value.is_object()) {
                throw DataError("config key '" + key + "' is nested; use flat dotted keys");
            }
        }
        return cfg;
    }

    bool has(const std::string& key) const { return values_.contains(key); }

    double number(const std::string& key, double def) const {
        if (!has(key)) return def;
        try {
            return values_.at(key).get<double>();
        } catch (const json::exception&) {
            throw DataError("config key '" + key + "' is not a number");
        }
    }

    std::uint64_t integer(const std::string& key, std::uint64_t def) const {
        if (!has(key)) return def;
        try {
            return values_.at(key).get<std::uint64_t>();
        } catch (const json::exception&) {
            throw DataError("config key '" + key + "' is not an integer");
        }
    }

    std::string text(const std::string& key, const std::string& def) const {
        if (!has(key)) return def;
        try {
            return values_.at(key).get<std::string>();
        } catch (const json::exception&) {
            throw DataError("config key '" + key + "' is not a string");
        }
    }

    template <typename V>
    void set(const std::string& key, const V& value) {
        values_[key] = value;
    }

    std::string canonical() const { return values_.dump(); }
    std::string hash() const { return to_hex(fnv1a64(canonical())); }

private:
    json values_; // nlohmann keeps object keys sorted
};

std::vector<std::size_t> parse_grid(const std::string& text) {
    std::vector<std::size_t> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t comma = text.find(',', pos);
        if (comma == std::string::npos) comma = text.size();
        const std::string item = text.substr(pos, comma - pos);
        const std::size_t dash = item.find('-');
        try {
            if (dash != std::string::npos && dash > 0) {
                const std::size_t lo = std::stoull(item.substr(0, dash));
                const std::size_t hi = std::stoull(item.substr(dash + 1));
                if (lo == 0 || hi < lo) throw DataError("bad grid range: " + item);
                for (std::size_t v = lo; v <= hi; ++v) out.push_back(v);
            } else {
                out.push_back(std::stoull(item));
            }
        } catch (const std::logic_error&) {
            throw DataError("cannot parse grid item: '" + item + "'");
        }
        pos = comma + 1;
    }
    if (out.empty()) throw DataError("empty grid");
    return out;
}

std::vector<std::size_t> parse_topk(const std::string& text) {
    std::vector<std::size_t> ks = parse_grid(text);
    for (std::size_t k : ks) {
        if (k == 0) throw DataError("top-K values must be >= 1");
    }
    return ks;
}

std::size_t resolve_label(const DatasetManifest& manifest, const std::string& text) {
    for (std::size_t i = 0; i < manifest.label_names.size(); ++i) {
        if (manifest.label_names[i] == text) return i;
    }
    try {
        const std::size_t idx = std::stoull(text);
        if (idx < manifest.n_labels()) return idx;
    } catch (const std::logic_error&) {
    }
    throw DataError("unknown label '" + text + "'");
}

struct CommonArgs {
    std::string config_path;
    std::uint64_t seed = 0;
    std::size_t threads = 0; // 0: auto
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "flat JSON config with dotted keys");
    cmd->add_option("--seed", args.seed, "seed for all randomness");
    cmd->add_option("--threads", args.threads, "worker threads (0 = auto)");
}

RunConfig load_config(const CommonArgs& args) {
    return args.config_path.empty() ? RunConfig() : RunConfig::load(args.config_path);
}

std::size_t effective_threads(const CommonArgs& args, const RunConfig& cfg) {
    const std::size_t t =
        args.threads != 0 ? args.threads : static_cast<std::size_t>(cfg.integer("run.threads", 0));
    return t != 0 ? t : default_threads();
}

std::size_t flag_u64(CLI::App* cmd, const char* flag, const RunConfig& cfg, const char* key,
                     std::size_t def) {
    if (cmd->count(flag)) return cmd->get_option(flag)->as<std::size_t>();
    return static_cast<std::size_t>(cfg.integer(key, def));
}

double flag_f64(CLI::App* cmd, const char* flag, const RunConfig& cfg, const char* key,
                double def) {
    if (cmd->count(flag)) return cmd->get_option(flag)->as<double>();
    return cfg.number(key, def);
}

std::string flag_text(CLI::App* cmd, const char* flag, const RunConfig& cfg, const char* key,
                      const std::string& def) {
    if (cmd->count(flag)) return cmd->get_option(flag)->as<std::string>();
    return cfg.text(key, def);
}

// ---------------------------------------------------------------------- gen

int cmd_gen(CLI::App* cmd, const CommonArgs& common, const std::string& out_dir) {
    const RunConfig cfg = load_config(common);
    SyntheticConfig syn;
    syn.grid_h = flag_u64(cmd, "--height", cfg, "synthetic.h", syn.grid_h);
    syn.grid_w = flag_u64(cmd, "--width", cfg, "synthetic.w", syn.grid_w);
    syn.d = flag_u64(cmd, "--d", cfg, "synthetic.d", syn.d);
    syn.n_seen = flag_u64(cmd, "--n-seen", cfg, "synthetic.n_seen", syn.n_seen);
    syn.n_unseen = flag_u64(cmd, "--n-unseen", cfg, "synthetic.n_unseen", syn.n_unseen);
    syn.n_train = flag_u64(cmd, "--n-train", cfg, "synthetic.n_train", syn.n_train);
    syn.n_test = flag_u64(cmd, "--n-test", cfg, "synthetic.n_test", syn.n_test);
    syn.labels_per_image_min =
        flag_u64(cmd, "--labels-min", cfg, "synthetic.labels_min", syn.labels_per_image_min);
    syn.labels_per_image_max =
        flag_u64(cmd, "--labels-max", cfg, "synthetic.labels_max", syn.labels_per_image_max);
    syn.region_min = flag_u64(cmd, "--region-min", cfg, "synthetic.region_min", syn.region_min);
    syn.region_max = flag_u64(cmd, "--region-max", cfg, "synthetic.region_max", syn.region_max);
    syn.n_templates = flag_u64(cmd, "--templates", cfg, "synthetic.templates", syn.n_templates);
    syn.signal_gain = flag_f64(cmd, "--alpha", cfg, "synthetic.alpha", syn.signal_gain);
    syn.noise = flag_f64(cmd, "--noise", cfg, "synthetic.noise", syn.noise);
    syn.template_noise =
        flag_f64(cmd, "--template-noise", cfg, "synthetic.template_noise", syn.template_noise);
    syn.seed = cmd->count("--seed") ? common.seed : cfg.integer("synthetic.seed", common.seed);

    const DatasetManifest manifest = generate_synthetic(syn, out_dir);
    std::printf("wrote %s: %zu labels (%zu seen / %zu unseen), %zu train / %zu test images\n",
                (std::filesystem::path(out_dir) / "manifest.json").string().c_str(),
                manifest.n_labels(), manifest.seen_labels.size(), manifest.unseen_labels.size(),
                manifest.train.size(), manifest.test.size());
    return 0;
}

// -------------------------------------------------------------------- train

ModelConfig model_from_flags(CLI::App* cmd, const RunConfig& cfg, const DatasetManifest& manifest) {
    ModelConfig model;
    model.d = manifest.d;
    model.channels = manifest.channels;
    model.grid_h = manifest.grid_h;
    model.grid_w = manifest.grid_w;
    model.m = flag_u64(cmd, "--m", cfg, "model.m", 12);
    model.layers = flag_u64(cmd, "--L", cfg, "model.L", 7);
    model.heads = flag_u64(cmd, "--heads", cfg, "model.heads", 8);
    model.ffn_mult = flag_u64(cmd, "--ffn-mult", cfg, "model.ffn_mult", 4);
    model.norm_mode =
        norm_mode_from_string(flag_text(cmd, "--norm-mode", cfg, "model.norm_mode", "prenorm"));
    model.validate();
    return model;
}

TrainConfig train_from_flags(CLI::App* cmd, const RunConfig& cfg, const CommonArgs& common) {
    TrainConfig tc;
    tc.steps = flag_u64(cmd, "--steps", cfg, "train.steps", 5000);
    tc.batch_size = flag_u64(cmd, "--batch-size", cfg, "train.batch_size", 64);
    tc.checkpoint_every =
        flag_u64(cmd, "--checkpoint-every", cfg, "train.checkpoint_every", 0);
    tc.adamw.lr = flag_f64(cmd, "--lr", cfg, "train.lr", 1e-5);
    tc.adamw.beta1 = cfg.number("train.beta1", tc.adamw.beta1);
    tc.adamw.beta2 = cfg.number("train.beta2", tc.adamw.beta2);
    tc.adamw.eps = cfg.number("train.eps", tc.adamw.eps);
    tc.adamw.weight_decay = cfg.number("train.weight_decay", tc.adamw.weight_decay);
    tc.plateau.eval_every = cfg.integer("train.plateau_every", tc.plateau.eval_every);
    tc.plateau.rel_threshold = cfg.number("train.plateau_threshold", tc.plateau.rel_threshold);
    tc.plateau.patience = cfg.integer("train.plateau_patience", tc.plateau.patience);
    tc.loss_kind =
        loss_kind_from_string(flag_text(cmd, "--loss", cfg, "train.loss", "classification"));
    tc.seed = cmd->count("--seed") ? common.seed : cfg.integer("train.seed", common.seed);
    tc.threads = effective_threads(common, cfg);
    return tc;
}

std::string merged_hash(const RunConfig& file_cfg, const ModelConfig& model,
                        const TrainConfig& tc) {
    RunConfig merged = file_cfg;
    merged.set("model.m", model.m);
    merged.set("model.L", model.layers);
    merged.set("model.d", model.d);
    merged.set("model.heads", model.heads);
    merged.set("model.ffn_mult", model.ffn_mult);
    merged.set("model.C", model.channels);
    merged.set("model.H", model.grid_h);
    merged.set("model.W", model.grid_w);
    merged.set("model.norm_mode", to_string(model.norm_mode));
    merged.set("train.steps", tc.steps);
    merged.set("train.batch_size", tc.batch_size);
    merged.set("train.lr", tc.adamw.lr);
    merged.set("train.loss", to_string(tc.loss_kind));
    merged.set("train.seed", tc.seed);
    return merged.hash();
}

int cmd_train(CLI::App* cmd, const CommonArgs& common, const std::string& manifest_path,
              const std::string& out_dir) {
    const RunConfig cfg = load_config(common);
    const DatasetManifest manifest = DatasetManifest::load(manifest_path);
    const ModelConfig model = model_from_flags(cmd, cfg, manifest);
    TrainConfig tc = train_from_flags(cmd, cfg, common);
    tc.run_config_hash = merged_hash(cfg, model, tc);

    const TrainResult result = train(manifest, model, tc, out_dir);
    std::printf("trained %zu steps, final loss %.6g\ncheckpoint: %s\nloss log: %s\n",
                result.steps_run, result.final_loss, result.checkpoint_dir.string().c_str(),
                result.loss_log.string().c_str());
    return 0;
}

// --------------------------------------------------------------------- eval

int cmd_eval(CLI::App* cmd, const CommonArgs& common, const std::string& checkpoint_dir,
             const std::string& manifest_path, const std::string& task_name,
             const std::string& topk_text, const std::string& out_path) {
    const RunConfig cfg = load_config(common);
    const DatasetManifest manifest = DatasetManifest::load(manifest_path);
    const EvalTask task = eval_task_from_string(task_name);
    const std::vector<std::size_t> ks =
        parse_topk(cmd->count("--topk") ? topk_text : cfg.text("eval.topk", topk_text));

    const EvalReport report = evaluate(std::filesystem::path(checkpoint_dir), manifest, task, ks,
                                       effective_threads(common, cfg));
    report.print_table(std::cout);
    if (!out_path.empty()) {
        std::ofstream out(out_path, std::ios::trunc);
        if (!out) throw DataError("cannot write report: " + out_path);
        out << report.to_json() << '\n';
        std::printf("report: %s\n", out_path.c_str());
    }
    return 0;
}

// ---------------------------------------------------------------- gradcheck

int cmd_gradcheck(const CommonArgs& common, const std::string& dims, double step, double tol,
                  const std::string& norm_mode, const std::string& loss) {
    ModelGradCheckSpec spec;
    if (dims == "tiny") {
        spec.config.m = 2;
        spec.config.layers = 1;
        spec.config.d = 4;
        spec.config.heads = 1;
        spec.config.channels = 4;
        spec.config.grid_h = 2;
        spec.config.grid_w = 2;
        spec.n_labels = 3;
        spec.n_positive = 1;
    } else if (dims == "small") {
        spec.config.m = 4;
        spec.config.layers = 2;
        spec.config.d = 8;
        spec.config.heads = 2;
        spec.config.channels = 8;
        spec.config.grid_h = 3;
        spec.config.grid_w = 3;
        spec.n_labels = 6;
        spec.n_positive = 2;
    } else {
        throw DataError("unknown --dims preset '" + dims + "' (expected tiny|small)");
    }
    spec.config.norm_mode = norm_mode_from_string(norm_mode);
    spec.loss_kind = loss_kind_from_string(loss);
    spec.step = step;
    spec.seed = common.seed;

    const GradCheckReport report = model_grad_check(spec);
    for (const GradCheckEntry& e : report.entries) {
        std::printf("%-28s max rel err %.3e\n", e.name.c_str(), e.max_rel_err);
    }
    std::printf("overall max rel err %.3e (tolerance %.1e)\n", report.max_rel_err, tol);
    if (!report.passed(tol)) {
        std::printf("FAIL\n");
        return 3;
    }
    std::printf("PASS\n");
    return 0;
}

// -------------------------------------------------------------- export-attn

int cmd_export_attn(const std::string& checkpoint_dir, const std::string& manifest_path,
                    std::size_t image_index, const std::string& label_text,
                    const std::string& out_prefix) {
    const DatasetManifest manifest = DatasetManifest::load(manifest_path);
    const Checkpoint checkpoint = load_checkpoint(checkpoint_dir);
    const std::size_t label = resolve_label(manifest, label_text);
    const AttentionMap map =
        export_attention_map(checkpoint, manifest, image_index, label, out_prefix);
    if (map.degenerate) {
        std::fprintf(stderr, "warning: attention map is constant; emitted zeros\n");
    }
    std::printf("wrote %s.{csv,raster,json} (token %zu)\n", out_prefix.c_str(), map.token);
    return 0;
}

// -------------------------------------------------------------------- stats

int cmd_stats(const CommonArgs& common, const std::string& checkpoint_dir,
              const std::string& manifest_path, const std::string& task_name,
              const std::string& out_path) {
    const RunConfig cfg = load_config(common);
    const DatasetManifest manifest = DatasetManifest::load(manifest_path);
    const Checkpoint checkpoint = load_checkpoint(checkpoint_dir);
    const PreferenceStats stats = token_preference_stats(
        checkpoint, manifest, eval_task_from_string(task_name), effective_threads(common, cfg));
    write_stats_csv(stats, manifest.label_names, out_path);
    std::printf("stats: %s\n", out_path.c_str());
    return 0;
}

// -------------------------------------------------------------------- sweep

int cmd_sweep(CLI::App* cmd, const CommonArgs& common, const std::string& manifest_path,
              const std::string& out_path, const std::string& m_grid_text,
              const std::string& l_grid_text, const std::string& task_name) {
    const RunConfig cfg = load_config(common);
    const DatasetManifest manifest = DatasetManifest::load(manifest_path);
    const std::vector<std::size_t> m_grid = parse_grid(m_grid_text);
    const std::vector<std::size_t> l_grid = parse_grid(l_grid_text);
    const EvalTask task = eval_task_from_string(task_name);
    const std::vector<std::size_t> ks = {3, 5};

    const std::filesystem::path out_csv(out_path);
    const std::filesystem::path run_root = out_csv.parent_path().empty()
                                               ? std::filesystem::path("sweep-runs")
                                               : out_csv.parent_path() / "sweep-runs";
    std::filesystem::create_directories(run_root);

    std::ofstream out(out_csv, std::ios::trunc);
    if (!out) throw DataError("cannot write sweep csv: " + out_path);
    out << "m,L,mAP,F1@3,F1@5,AVG\n";

    std::size_t grid_index = 0;
    for (std::size_t m : m_grid) {
        for (std::size_t L : l_grid) {
            ModelConfig model = model_from_flags(cmd, cfg, manifest);
            model.m = m;
            model.layers = L;
            model.validate();
            TrainConfig tc = train_from_flags(cmd, cfg, common);
            tc.seed = mix_seed(tc.seed, grid_index); // independent seed per grid point
            tc.run_config_hash = merged_hash(cfg, model, tc);

            char tag[64];
            std::snprintf(tag, sizeof(tag), "m%02zu-L%02zu", m, L);
            const TrainResult run = train(manifest, model, tc, run_root / tag);
            const EvalReport report = evaluate(run.checkpoint_dir, manifest, task, ks, tc.threads);

            const double f1_3 = report.topk[0].f1;
            const double f1_5 = report.topk[1].f1;
            const double avg = (report.map + f1_3 + f1_5) / 3.0;
            char row[160];
            std::snprintf(row, sizeof(row), "%zu,%zu,%.6f,%.6f,%.6f,%.6f\n", m, L, report.map,
                          f1_3, f1_5, avg);
            out << row;
            out.flush();
            std::printf("sweep %s: mAP %.4f F1@3 %.4f F1@5 %.4f AVG %.4f\n", tag, report.map, f1_3,
                        f1_5, avg);
            ++grid_index;
        }
    }
    std::printf("sweep csv: %s (%zu rows)\n", out_path.c_str(), grid_index);
    return 0;
}

} // namespace

int run(std::vector<std::string> args) {
    CLI::App app{"query-token knowledge-sharing head for open-vocabulary multi-label "
                 "classification on precomputed features"};
    app.require_subcommand(1);

    CommonArgs common;

    auto* gen = app.add_subcommand("gen", "generate a synthetic planted-structure dataset");
    std::string gen_out;
    gen->add_option("--out", gen_out, "output directory")->required();
    add_common(gen, common);
    for (const char* f : {"--height", "--width", "--d", "--n-seen", "--n-unseen", "--n-train", "--n-test",
                          "--labels-min", "--labels-max", "--region-min", "--region-max",
                          "--templates"}) {
        gen->add_option(f, "synthetic geometry / counts");
    }
    for (const char* f : {"--alpha", "--noise", "--template-noise"}) {
        gen->add_option(f, "synthetic signal / noise levels");
    }

    auto* train_cmd = app.add_subcommand("train", "train the model on a dataset manifest");
    std::string train_manifest, train_out;
    train_cmd->add_option("--manifest", train_manifest, "dataset manifest path")->required();
    train_cmd->add_option("--out", train_out, "run output directory")->required();
    add_common(train_cmd, common);
    for (const char* f :
         {"--m", "--L", "--heads", "--ffn-mult", "--steps", "--batch-size", "--checkpoint-every"}) {
        train_cmd->add_option(f, "model / training integers");
    }
    train_cmd->add_option("--lr", "initial learning rate");
    train_cmd->add_option("--loss", "classification|ranking");
    train_cmd->add_option("--norm-mode", "literal|prenorm");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint (ZSL or GZSL)");
    std::string eval_checkpoint, eval_manifest, eval_task = "zsl", eval_topk = "3,5", eval_out;
    eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint directory")->required();
    eval_cmd->add_option("--manifest", eval_manifest, "dataset manifest path")->required();
    eval_cmd->add_option("--task", eval_task, "zsl|gzsl");
    eval_cmd->add_option("--topk", eval_topk, "comma-separated K values");
    eval_cmd->add_option("--out", eval_out, "write the report JSON here");
    add_common(eval_cmd, common);

    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of all gradients");
    std::string grad_dims = "small", grad_norm = "prenorm", grad_loss = "classification";
    double grad_step = 1e-5, grad_tol = 1e-4;
    grad_cmd->add_option("--dims", grad_dims, "tiny|small");
    grad_cmd->add_option("--fd-step", grad_step, "finite-difference step");
    grad_cmd->add_option("--tol", grad_tol, "max relative error tolerance");
    grad_cmd->add_option("--norm-mode", grad_norm, "literal|prenorm");
    grad_cmd->add_option("--loss", grad_loss, "classification|ranking");
    add_common(grad_cmd, common);

    auto* attn_cmd = app.add_subcommand("export-attn", "export an attention map for one label");
    std::string attn_checkpoint, attn_manifest, attn_label, attn_out;
    std::size_t attn_image = 0;
    attn_cmd->add_option("--checkpoint", attn_checkpoint, "checkpoint directory")->required();
    attn_cmd->add_option("--manifest", attn_manifest, "dataset manifest path")->required();
    attn_cmd->add_option("--image", attn_image, "test image index")->required();
    attn_cmd->add_option("--label", attn_label, "label name or index")->required();
    attn_cmd->add_option("--out", attn_out, "output path prefix")->required();
    add_common(attn_cmd, common);

    auto* stats_cmd = app.add_subcommand("stats", "token preference statistics");
    std::string stats_checkpoint, stats_manifest, stats_task = "gzsl", stats_out;
    stats_cmd->add_option("--checkpoint", stats_checkpoint, "checkpoint directory")->required();
    stats_cmd->add_option("--manifest", stats_manifest, "dataset manifest path")->required();
    stats_cmd->add_option("--task", stats_task, "zsl|gzsl");
    stats_cmd->add_option("--out", stats_out, "output CSV path")->required();
    add_common(stats_cmd, common);

    auto* sweep_cmd = app.add_subcommand("sweep", "grid over m and L, one training run each");
    std::string sweep_manifest, sweep_out, sweep_m = "1-24", sweep_l = "1-10", sweep_task = "zsl";
    sweep_cmd->add_option("--manifest", sweep_manifest, "dataset manifest path")->required();
    sweep_cmd->add_option("--out", sweep_out, "output CSV path")->required();
    sweep_cmd->add_option("--m-grid", sweep_m, "query-token grid, e.g. 1-24 or 4,8,12");
    sweep_cmd->add_option("--l-grid", sweep_l, "layer grid, e.g. 1-10 or 1,3,5");
    sweep_cmd->add_option("--task", sweep_task, "zsl|gzsl");
    add_common(sweep_cmd, common);
    for (const char* f :
         {"--m", "--L", "--heads", "--ffn-mult", "--steps", "--batch-size", "--checkpoint-every"}) {
        sweep_cmd->add_option(f, "model / training integers");
    }
    sweep_cmd->add_option("--lr", "initial learning rate");
    sweep_cmd->add_option("--loss", "classification|ranking");
    sweep_cmd->add_option("--norm-mode", "literal|prenorm");

    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const std::string& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e); // prints help, exit 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1; // usage
    }

    try {
        if (gen->parsed()) return cmd_gen(gen, common, gen_out);
        if (train_cmd->parsed()) return cmd_train(train_cmd, common, train_manifest, train_out);
        if (eval_cmd->parsed()) {
            return cmd_eval(eval_cmd, common, eval_checkpoint, eval_manifest, eval_task, eval_topk,
                            eval_out);
        }
        if (grad_cmd->parsed()) {
            return cmd_gradcheck(common, grad_dims, grad_step, grad_tol, grad_norm, grad_loss);
        }
        if (attn_cmd->parsed()) {
            return cmd_export_attn(attn_checkpoint, attn_manifest, attn_image, attn_label,
                                   attn_out);
        }
        if (stats_cmd->parsed()) {
            return cmd_stats(common, stats_checkpoint, stats_manifest, stats_task, stats_out);
        }
        if (sweep_cmd->parsed()) {
            return cmd_sweep(sweep_cmd, common, sweep_manifest, sweep_out, sweep_m, sweep_l,
                             sweep_task);
        }
    } catch (const VerificationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}

} // namespace qks::cli
