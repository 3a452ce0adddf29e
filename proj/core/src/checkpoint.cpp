#include "qks/checkpoint.hpp"

#include <fstream>

#include "json.hpp"

#include "qks/config_hash.hpp"
#include "qks/errors.hpp"
#include "qks/qtf.hpp"

namespace qks {

using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

json model_to_json(const ModelConfig& cfg) {
    json j;
    j["m"] = cfg.m;
    j["L"] = cfg.layers;
    j["d"] = cfg.d;
    j["heads"] = cfg.heads;
    j["ffn_mult"] = cfg.ffn_mult;
    j["C"] = cfg.channels;
    j["H"] = cfg.grid_h;
    j["W"] = cfg.grid_w;
    j["norm_mode"] = to_string(cfg.norm_mode);
    return j;
}

ModelConfig model_from_json(const json& j) {
    ModelConfig cfg;
    cfg.m = j.at("m").get<std::size_t>();
    cfg.layers = j.at("L").get<std::size_t>();
    cfg.d = j.at("d").get<std::size_t>();
    cfg.heads = j.at("heads").get<std::size_t>();
    cfg.ffn_mult = j.at("ffn_mult").get<std::size_t>();
    cfg.channels = j.at("C").get<std::size_t>();
    cfg.grid_h = j.at("H").get<std::size_t>();
    cfg.grid_w = j.at("W").get<std::size_t>();
    cfg.norm_mode = norm_mode_from_string(j.at("norm_mode").get<std::string>());
    return cfg;
}

} // namespace

void save_checkpoint(const std::filesystem::path& dir, const QksParameters<float>& params,
                     const AdamW<float>* optimizer, const CheckpointMeta& meta) {
    std::filesystem::create_directories(dir / "params");

    json j;
    j["format_version"] = kFormatVersion;
    j["step"] = meta.step;
    j["model"] = model_to_json(meta.model);
    j["model_hash"] = model_config_hash(meta.model);
    j["loss"] = to_string(meta.loss_kind);
    j["seed"] = meta.seed;
    j["lr"] = meta.lr;
    if (!meta.run_config_hash.empty()) j["run_config_hash"] = meta.run_config_hash;

    std::vector<std::string> names;
    for_each_trainable<float>(params, meta.model, [&](const std::string& name, const Tensor<float>& t) {
        names.push_back(name);
        write_tensor(dir / "params" / (name + ".qtf"), t);
    });
    write_tensor(dir / "params" / "spatial_pos.qtf", params.spatial_pos);
    j["param_names"] = names;

    if (optimizer && !optimizer->first_moments().empty()) {
        std::filesystem::create_directories(dir / "optim");
        const auto& m = optimizer->first_moments();
        const auto& v = optimizer->second_moments();
        if (m.size() != names.size()) {
            throw DataError("checkpoint: optimizer slot count does not match trainables");
        }
        for (std::size_t i = 0; i < names.size(); ++i) {
            write_tensor(dir / "optim" / (names[i] + ".m.qtf"), m[i]);
            write_tensor(dir / "optim" / (names[i] + ".v.qtf"), v[i]);
        }
        j["optim_steps"] = optimizer->steps_taken();
    }

    std::ofstream out(dir / "checkpoint.json", std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint metadata in " + dir.string());
    out << j.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
    const auto meta_path = dir / "checkpoint.json";
    std::ifstream in(meta_path);
    if (!in) throw DataError("cannot open checkpoint: " + meta_path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("checkpoint parse error: " + std::string(e.what()));
    }

    Checkpoint ck;
    try {
        if (j.at("format_version").get<int>() != kFormatVersion) {
            throw DataError("unsupported checkpoint format version");
        }
        ck.meta.step = j.at("step").get<std::size_t>();
        ck.meta.model = model_from_json(j.at("model"));
        ck.meta.loss_kind = loss_kind_from_string(j.at("loss").get<std::string>());
        ck.meta.seed = j.at("seed").get<std::uint64_t>();
        ck.meta.lr = j.at("lr").get<double>();
        if (j.contains("run_config_hash")) {
            ck.meta.run_config_hash = j["run_config_hash"].get<std::string>();
        }

        const std::string stored_hash = j.at("model_hash").get<std::string>();
        if (stored_hash != model_config_hash(ck.meta.model)) {
            throw DataError("checkpoint config hash mismatch: stored " + stored_hash +
                            ", recomputed " + model_config_hash(ck.meta.model));
        }
    } catch (const json::exception& e) {
        throw DataError("checkpoint field error: " + std::string(e.what()));
    }

    ck.params = QksParameters<float>::zeros_like(ck.meta.model);
    for_each_trainable<float>(ck.params, ck.meta.model, [&](const std::string& name, Tensor<float>& t) {
        Tensor<float> loaded = read_tensor_f32(dir / "params" / (name + ".qtf"));
        if (!loaded.same_shape(t)) {
            throw DataError("checkpoint tensor " + name + " has shape " + loaded.shape_str() +
                            ", expected " + t.shape_str());
        }
        t = std::move(loaded);
    });
    ck.params.spatial_pos = read_tensor_f32(dir / "params" / "spatial_pos.qtf");

    if (j.contains("optim_steps")) {
        ck.has_optimizer = true;
        ck.optim_steps = j["optim_steps"].get<std::size_t>();
        const auto names = j.at("param_names").get<std::vector<std::string>>();
        for (const std::string& name : names) {
            ck.optim_m.push_back(read_tensor_f32(dir / "optim" / (name + ".m.qtf")));
            ck.optim_v.push_back(read_tensor_f32(dir / "optim" / (name + ".v.qtf")));
        }
    }
    return ck;
}

} // namespace qks
