#include "ldadam/accounting.hpp"

#include <algorithm>
#include <stdexcept>

namespace ldadam {

std::uint64_t ModelSpec::weight_tokens() const {
    std::uint64_t total = 0;
    for (const LayerSpec& l : layers)
        total += static_cast<std::uint64_t>(l.count) * l.n * l.m;
    return total;
}

std::uint64_t optimizer_state_tokens(const ModelSpec& model, OptimizerKind optimizer,
                                     std::size_t rank) {
    std::uint64_t total = 0;
    for (const LayerSpec& l : model.layers) {
        if (l.state == StateKind::none) continue;
        const std::uint64_t full = 2ull * l.n * l.m;
        std::uint64_t per_layer = full;
        if (l.state == StateKind::lowrank && optimizer != OptimizerKind::adam) {
            const std::uint64_t nmin = std::min(l.n, l.m);
            const std::uint64_t nmax = std::max(l.n, l.m);
            if (rank < 1 || rank > nmin)
                throw std::invalid_argument("optimizer_state_tokens: rank " +
                                            std::to_string(rank) + " invalid for layer '" +
                                            l.name + "' (" + std::to_string(l.n) + "x" +
                                            std::to_string(l.m) + ")");
            per_layer = nmin * rank + 2ull * rank * nmax;
        }
        total += per_layer * l.count;
    }
    return total;
}

MemoryEstimate memory_bytes(std::uint64_t tokens, unsigned bytes_per_token) {
    if (bytes_per_token != 2 && bytes_per_token != 4)
        throw std::invalid_argument("memory_bytes: bytes_per_token must be 2 or 4");
    MemoryEstimate est;
    est.tokens = tokens;
    est.bytes = tokens * bytes_per_token;
    est.gb = static_cast<double>(est.bytes) / (1024.0 * 1024.0 * 1024.0);
    est.gb_si = static_cast<double>(est.bytes) / 1e9;
    return est;
}

const std::vector<ModelSpec>& builtin_model_specs() {
    static const std::vector<ModelSpec> specs = [] {
        std::vector<ModelSpec> out;

        // Sequence-classification head sized for two labels; its contribution
        // is negligible against the embedding and encoder blocks.
        ModelSpec roberta{"roberta-base",
                          {
                              {"token_embedding", 50265, 768, 1, StateKind::adam},
                              {"token_embedding_bias", 768, 1, 1, StateKind::adam},
                              {"positional_embedding", 564, 768, 1, StateKind::adam},
                              {"attention", 768, 768, 12 * 4, StateKind::lowrank},
                              {"mlp", 3072, 768, 12 * 3, StateKind::lowrank},
                              {"normalization", 2 * 768 + 12 * (9 * 768 + 3072), 1, 1,
                               StateKind::adam},
                              {"dense", 768, 768, 1, StateKind::adam},
                              {"dense_bias", 768, 1, 1, StateKind::adam},
                              {"output", 768, 2, 1, StateKind::adam},
                              {"output_bias", 2, 1, 1, StateKind::adam},
                          }};
        out.push_back(std::move(roberta));

        ModelSpec llama130{"llama-130m",
                           {
                               {"embedding", 32000, 768, 1, StateKind::adam},
                               {"attention", 768, 768, 12 * 4, StateKind::lowrank},
                               {"mlp", 2048, 768, 12 * 3, StateKind::lowrank},
                               {"normalization", (12 * 2 + 1) * 768, 1, 1, StateKind::adam},
                               {"output", 768, 32000, 1, StateKind::adam},
                           }};
        out.push_back(std::move(llama130));

        ModelSpec llama350{"llama-350m",
                           {
                               {"embedding", 32000, 1024, 1, StateKind::adam},
                               {"attention", 1024, 1024, 24 * 4, StateKind::lowrank},
                               {"mlp", 2736, 1024, 24 * 3, StateKind::lowrank},
                               {"normalization", (24 * 2 + 1) * 1024, 1, 1, StateKind::adam},
                               {"output", 1024, 32000, 1, StateKind::adam},
                           }};
        out.push_back(std::move(llama350));

        ModelSpec llama7b{"llama2-7b",
                          {
                              {"embedding", 32000, 4096, 1, StateKind::adam},
                              {"attention", 4096, 4096, 32 * 4, StateKind::lowrank},
                              {"mlp", 11008, 4096, 32 * 3, StateKind::lowrank},
                              {"normalization", (32 * 2 + 1) * 4096, 1, 1, StateKind::adam},
                              {"output", 4096, 32000, 1, StateKind::adam},
                          }};
        out.push_back(std::move(llama7b));
        return out;
    }();
    return specs;
}

const ModelSpec& builtin_model(const std::string& name) {
    for (const ModelSpec& m : builtin_model_specs())
        if (m.name == name) return m;
    throw std::invalid_argument("unknown model '" + name + "'");
}

ModelSpec model_spec_from_config(ConfigMap& map) {
    ModelSpec model;
    model.name = map.get_string("model.name", "custom");
    for (std::size_t i = 0;; ++i) {
        const std::string prefix = "layer." + std::to_string(i) + ".";
        if (!map.has(prefix + "n")) break;
        LayerSpec layer;
        layer.name = map.get_string(prefix + "name", "layer" + std::to_string(i));
        layer.n = map.get_uint(prefix + "n");
        layer.m = map.get_uint(prefix + "m");
        layer.count = map.get_uint(prefix + "count", 1);
        const std::string state = map.get_string(prefix + "state", "adam");
        if (state == "lowrank")
            layer.state = StateKind::lowrank;
        else if (state == "adam")
            layer.state = StateKind::adam;
        else if (state == "none")
            layer.state = StateKind::none;
        else
            throw std::invalid_argument("model spec: state must be lowrank|adam|none");
        if (layer.n < 1 || layer.m < 1)
            throw std::invalid_argument("model spec: layer dims must be positive");
        model.layers.push_back(std::move(layer));
    }
    if (model.layers.empty()) throw std::invalid_argument("model spec: no layers");
    map.require_all_consumed();
    return model;
}

OptimizerKind optimizer_kind_from_string(const std::string& s) {
    if (s == "adam") return OptimizerKind::adam;
    if (s == "ldadam") return OptimizerKind::ldadam;
    if (s == "galore") return OptimizerKind::galore;
    throw std::invalid_argument("unknown optimizer '" + s + "' (adam|ldadam|galore)");
}

} // namespace ldadam
