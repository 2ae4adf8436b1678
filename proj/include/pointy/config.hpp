// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pointy/common.hpp"

namespace pointy {

enum class Activation { GeLU, ReLU };
enum class MergeStrategy { Addition, Linear };
enum class PosEmbedKind { Mlp, Table };

inline std::string to_string(Activation a) { return a == Activation::GeLU ? "gelu" : "relu"; }
inline std::string to_string(MergeStrategy s) { return s == MergeStrategy::Addition ? "addition" : "linear"; }
inline std::string to_string(PosEmbedKind k) { return k == PosEmbedKind::Mlp ? "mlp" : "table"; }

inline Activation activation_from_string(const std::string& s) {
    if (s == "gelu") return Activation::GeLU;
    if (s == "relu") return Activation::ReLU;
    throw ConfigError("unknown activation '" + s + "' (expected gelu|relu)");
}

inline MergeStrategy merge_strategy_from_string(const std::string& s) {
    if (s == "addition") return MergeStrategy::Addition;
    if (s == "linear") return MergeStrategy::Linear;
    throw ConfigError("unknown merge strategy '" + s + "' (expected addition|linear)");
}

inline PosEmbedKind pos_embed_from_string(const std::string& s) {
    if (s == "mlp") return PosEmbedKind::Mlp;
    if (s == "table") return PosEmbedKind::Table;
    throw ConfigError("unknown positional embedding kind '" + s + "' (expected mlp|table)");
}

// =====================================================================
//  Architecture hyperparameters
// =====================================================================

struct ModelConfig {
    std::int64_t embed_dim = 192;       // D
    std::int64_t heads = 64;            // H, head dim = D/H
    std::int64_t layers = 6;            // L
    std::int64_t patch_count = 64;      // P
    std::int64_t points_per_patch = 32; // k
    std::int64_t n_points = 2048;       // input resolution after sampling
    std::vector<std::int64_t> merge_schedule = {2, 2, 2, 2, 2, 1};  // post-block factors
    MergeStrategy merge_strategy = MergeStrategy::Addition;
    bool hierarchical = true;           // false: schedule treated as all ones
    Activation activation = Activation::GeLU;
    bool use_positional = true;
    PosEmbedKind pos_embed = PosEmbedKind::Mlp;
    std::int64_t mlp_ratio = 4;
    std::int64_t num_classes = 40;
    std::int64_t embed_hidden = 64;     // mini-PointNet hidden width
    bool use_extras = false;            // feed normals/colors into the point MLP
    double dropout = 0.0;               // hook only; no dropout in the default regime

    std::int64_t head_dim() const { return embed_dim / heads; }

    std::vector<std::int64_t> effective_schedule() const {
        if (!hierarchical) return std::vector<std::int64_t>(static_cast<std::size_t>(layers), 1);
        return merge_schedule;
    }

    /// Token counts after each block under the effective schedule.
    std::vector<std::int64_t> token_counts() const {
        std::vector<std::int64_t> counts;
        std::int64_t t = patch_count;
        for (const auto f : effective_schedule()) {
            t = (t + f - 1) / f;
            counts.push_back(t);
        }
        return counts;
    }

    std::int64_t final_token_count() const {
        const auto counts = token_counts();
        return counts.empty() ? patch_count : counts.back();
    }

    std::int64_t point_feature_dim() const { return use_extras ? 9 : 6; }

    void validate() const {
        if (embed_dim < 1 || heads < 1 || layers < 1 || patch_count < 1 || points_per_patch < 1 ||
            n_points < 1 || mlp_ratio < 1 || num_classes < 1 || embed_hidden < 1) {
            throw ConfigError("model config: all extents must be positive");
        }
        if (embed_dim % heads != 0) {
            throw ConfigError("model config: embed_dim " + std::to_string(embed_dim) +
                              " not divisible by heads " + std::to_string(heads));
        }
        if (static_cast<std::int64_t>(merge_schedule.size()) != layers) {
            throw ConfigError("model config: merge schedule has " + std::to_string(merge_schedule.size()) +
                              " entries for " + std::to_string(layers) + " layers");
        }
        for (const auto f : merge_schedule) {
            if (f < 1) throw ConfigError("model config: merge factors must be >= 1");
        }
        if (n_points < patch_count) {
            throw ConfigError("model config: n_points " + std::to_string(n_points) + " < patch count " +
                              std::to_string(patch_count));
        }
        if (points_per_patch > n_points) {
            throw ConfigError("model config: points_per_patch exceeds n_points");
        }
        if (dropout != 0.0) throw ConfigError("model config: dropout is a hook, only 0 is supported");
    }

    /// D=192, H=64: the 3:1 embedding-to-heads preset at ~3M parameters.
    static ModelConfig small() {
        ModelConfig cfg;
        cfg.assert_head_ratio();
        return cfg;
    }

    /// D=510, H=170: same 3:1 ratio at ~19M parameters.
    static ModelConfig base() {
        ModelConfig cfg;
        cfg.embed_dim = 510;
        cfg.heads = 170;
        cfg.assert_head_ratio();
        return cfg;
    }

    static ModelConfig preset(const std::string& name) {
        if (name == "small") return small();
        if (name == "base") return base();
        throw ConfigError("unknown preset '" + name + "' (expected small|base)");
    }

    void assert_head_ratio() const {
        if (embed_dim / heads != 3 || embed_dim % heads != 0) {
            throw ConfigError("preset violates the 3:1 embedding-to-heads ratio");
        }
    }
};

}  // namespace pointy
