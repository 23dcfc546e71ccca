#pragma once

#include "ldadam/config.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ldadam {

// Which optimizer state a layer carries: low-rank projected states, full Adam
// states (embeddings, norms, heads), or none (frozen).
enum class StateKind { lowrank, adam, none };

struct LayerSpec {
    std::string name;
    std::size_t n = 1;
    std::size_t m = 1;
    std::size_t count = 1;
    StateKind state = StateKind::adam;
};

struct ModelSpec {
    std::string name;
    std::vector<LayerSpec> layers;

    std::uint64_t weight_tokens() const;
};

enum class OptimizerKind { adam, ldadam, galore };

// Optimizer-state token count. Low-rank layers cost min(n,m)*r + 2*r*max(n,m)
// under ldadam/galore and 2nm under adam; layers flagged adam always cost 2nm;
// frozen layers cost nothing. Multiplicities applied.
std::uint64_t optimizer_state_tokens(const ModelSpec& model, OptimizerKind optimizer,
                                     std::size_t rank);

struct MemoryEstimate {
    std::uint64_t tokens = 0;
    std::uint64_t bytes = 0;
    double gb = 0.0;    // 1024^3 divisor, matching the reported-table convention
    double gb_si = 0.0; // 10^9 divisor
};

// bytes_per_token must be 2 (half precision) or 4 (single precision).
MemoryEstimate memory_bytes(std::uint64_t tokens, unsigned bytes_per_token);

// Architectures transcribed from the reference table: roberta-base,
// llama-130m, llama-350m, llama2-7b.
const std::vector<ModelSpec>& builtin_model_specs();
const ModelSpec& builtin_model(const std::string& name);

OptimizerKind optimizer_kind_from_string(const std::string& s);

// Custom architecture from flat config text:
//   model.name = tiny
//   layer.0.name = attention
//   layer.0.n = 64
//   layer.0.m = 64
//   layer.0.count = 4          # optional, default 1
//   layer.0.state = lowrank    # lowrank | adam | none
ModelSpec model_spec_from_config(ConfigMap& map);

} // namespace ldadam
