#include "qks/config_hash.hpp"

#include <cstdio>

#include "json.hpp"

namespace qks {

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

std::string to_hex(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::string model_config_canonical(const ModelConfig& cfg) {
    // nlohmann objects keep keys sorted, which makes dump() canonical.
    nlohmann::json j;
    j["model.m"] = cfg.m;
    j["model.L"] = cfg.layers;
    j["model.d"] = cfg.d;
    j["model.heads"] = cfg.heads;
    j["model.ffn_mult"] = cfg.ffn_mult;
    j["model.C"] = cfg.channels;
    j["model.H"] = cfg.grid_h;
    j["model.W"] = cfg.grid_w;
    j["model.norm_mode"] = to_string(cfg.norm_mode);
    return j.dump();
}

std::string model_config_hash(const ModelConfig& cfg) {
    return to_hex(fnv1a64(model_config_canonical(cfg)));
}

} // namespace qks
