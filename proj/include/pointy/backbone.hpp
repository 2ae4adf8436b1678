// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pointy/config.hpp"
#include "pointy/embed.hpp"
#include "pointy/geometry.hpp"
#include "pointy/nn.hpp"
#include "pointy/tensor.hpp"

namespace pointy {

// =====================================================================
//  Hierarchical transformer backbone
// =====================================================================

template <typename T>
struct BlockParams {
    LayerNormLayer<T> ln1;
    LayerNormLayer<T> ln2;
    LinearLayer<T> wq, wk, wv, wo;
    LinearLayer<T> mlp_in, mlp_out;
    std::optional<LinearLayer<T>> merge_proj;  // Linear merging only, (f*D -> D)

    BlockParams() = default;

    BlockParams(const ModelConfig& cfg, std::int64_t block_index, std::int64_t merge_factor, Rng& rng) {
        const auto d = cfg.embed_dim;
        const std::string prefix = "block" + std::to_string(block_index);
        ln1 = LayerNormLayer<T>(d, prefix + ".ln1");
        ln2 = LayerNormLayer<T>(d, prefix + ".ln2");
        wq = LinearLayer<T>(d, d, rng, prefix + ".wq");
        // a key bias shifts every score in a query's row equally and
        // softmax cancels it, leaving a permanently dead parameter
        wk = LinearLayer<T>(d, d, rng, prefix + ".wk", /*with_bias=*/false);
        wv = LinearLayer<T>(d, d, rng, prefix + ".wv");
        wo = LinearLayer<T>(d, d, rng, prefix + ".wo");
        mlp_in = LinearLayer<T>(d, cfg.mlp_ratio * d, rng, prefix + ".mlp_in");
        mlp_out = LinearLayer<T>(cfg.mlp_ratio * d, d, rng, prefix + ".mlp_out");
        if (cfg.merge_strategy == MergeStrategy::Linear && merge_factor > 1) {
            merge_proj = LinearLayer<T>(merge_factor * d, d, rng, prefix + ".merge_proj");
        }
    }

    void collect(std::vector<Tensor<T>>& out) const {
        ln1.collect(out);
        wq.collect(out);
        wk.collect(out);
        wv.collect(out);
        wo.collect(out);
        ln2.collect(out);
        mlp_in.collect(out);
        mlp_out.collect(out);
        if (merge_proj) merge_proj->collect(out);
    }
};

template <typename T>
struct ModelParams {
    ModelConfig config;
    EmbedParams<T> embed;
    std::vector<BlockParams<T>> blocks;
    LayerNormLayer<T> head_norm;
    LinearLayer<T> head;

    ModelParams() = default;

    ModelParams(const ModelConfig& cfg, Rng& rng) : config(cfg) {
        cfg.validate();
        embed = EmbedParams<T>(cfg, rng);
        const auto schedule = cfg.effective_schedule();
        blocks.reserve(static_cast<std::size_t>(cfg.layers));
        for (std::int64_t b = 0; b < cfg.layers; ++b) {
            blocks.emplace_back(cfg, b, schedule[static_cast<std::size_t>(b)], rng);
        }
        head_norm = LayerNormLayer<T>(cfg.embed_dim, "head.norm");
        head = LinearLayer<T>(cfg.embed_dim, cfg.num_classes, rng, "head.proj");
    }

    /// All learned tensors in a fixed traversal order.
    std::vector<Tensor<T>> parameters() const {
        std::vector<Tensor<T>> out;
        embed.collect(out);
        for (const auto& b : blocks) b.collect(out);
        head_norm.collect(out);
        head.collect(out);
        return out;
    }

    std::int64_t parameter_count() const {
        std::int64_t n = 0;
        for (const auto& p : parameters()) n += p.numel();
        return n;
    }
};

/// Pre-norm block: x += MHA(LN(x)); x += MLP(LN(x)).
/// Scaled dot-product attention with H heads of width D/H.
template <typename T>
Tensor<T> attention_block(const Tensor<T>& tokens, const BlockParams<T>& block, const ModelConfig& cfg) {
    const auto d = cfg.embed_dim;
    const auto h = cfg.heads;
    if (d % h != 0) throw ConfigError("attention_block: embed_dim not divisible by heads");
    if (tokens.cols() != d) {
        throw DimensionError("attention_block: token width " + std::to_string(tokens.cols()) + " != embed dim " +
                             std::to_string(d));
    }
    const auto dh = d / h;
    const T att_scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

    Tensor<T> x = tokens;
    Tensor<T> normed = block.ln1.forward(x);
    Tensor<T> q = block.wq.forward(normed);
    Tensor<T> k = block.wk.forward(normed);
    Tensor<T> v = block.wv.forward(normed);

    std::vector<Tensor<T>> head_outputs;
    head_outputs.reserve(static_cast<std::size_t>(h));
    for (std::int64_t head = 0; head < h; ++head) {
        Tensor<T> qh = slice_cols(q, head * dh, dh);
        Tensor<T> kh = slice_cols(k, head * dh, dh);
        Tensor<T> vh = slice_cols(v, head * dh, dh);
        Tensor<T> scores = scale(matmul_nt(qh, kh), att_scale);
        Tensor<T> weights = softmax(scores, 1);
        head_outputs.push_back(matmul(weights, vh));
    }
    Tensor<T> attended = block.wo.forward(concat_cols(head_outputs));
    x = add(x, attended);

    Tensor<T> normed2 = block.ln2.forward(x);
    Tensor<T> hidden = detail::act(block.mlp_in.forward(normed2), cfg.activation);
    x = add(x, block.mlp_out.forward(hidden));
    return x;
}

/// Combines consecutive runs of `factor` tokens. Addition sums the run;
/// Linear maps the concatenated run (zero-padded when short) through a
/// learned (f*D -> D) projection. factor 1 is the identity.
template <typename T>
Tensor<T> token_merge(const Tensor<T>& tokens, std::int64_t factor, MergeStrategy strategy,
                      const LinearLayer<T>* merge_proj = nullptr) {
    if (factor < 1) throw ConfigError("token_merge: factor must be >= 1");
    if (factor == 1) return tokens;
    if (strategy == MergeStrategy::Addition) {
        return group_sum_rows(tokens, factor);
    }
    if (merge_proj == nullptr) throw ConfigError("token_merge: Linear strategy requires projection parameters");
    const auto t = tokens.rows();
    const auto d = tokens.cols();
    const auto groups = (t + factor - 1) / factor;
    Tensor<T> padded = (groups * factor == t) ? tokens : pad_rows(tokens, groups * factor);
    Tensor<T> stacked = reshape(padded, {groups, factor * d});
    return merge_proj->forward(stacked);
}

template <typename T>
struct ForwardResult {
    Tensor<T> tokens;  // final token matrix (P' x D)
    Tensor<T> pooled;  // mean over final tokens (1 x D), pre head-norm
    Tensor<T> logits;  // (1 x num_classes)
};

/// Runs the embedded token matrix through the block/merge stack.
template <typename T>
ForwardResult<T> forward_tokens(Tensor<T> tokens, const ModelParams<T>& params) {
    const auto& cfg = params.config;
    const auto schedule = cfg.effective_schedule();
    for (std::size_t b = 0; b < params.blocks.size(); ++b) {
        tokens = attention_block(tokens, params.blocks[b], cfg);
        const auto factor = schedule[b];
        const auto* proj = params.blocks[b].merge_proj ? &*params.blocks[b].merge_proj : nullptr;
        tokens = token_merge(tokens, factor, cfg.merge_strategy, proj);
    }
    ForwardResult<T> out;
    out.tokens = tokens;
    out.pooled = mean_rows(tokens);
    out.logits = params.head.forward(params.head_norm.forward(out.pooled));
    return out;
}

/// Cloud in, class logits out: tokenize -> L x (attention + merge) ->
/// mean pool -> head.
template <typename T>
ForwardResult<T> forward(const PointCloud& cloud, const ModelParams<T>& params) {
    Tensor<T> tokens = tokenize(cloud, params.config, params.embed);
    return forward_tokens(std::move(tokens), params);
}

// =====================================================================
//  Configuration-level accounting
// =====================================================================

struct CountReport {
    std::vector<std::pair<std::string, std::int64_t>> items;
    std::int64_t total = 0;

    void add(std::string name, std::int64_t n) {
        items.emplace_back(std::move(name), n);
        total += n;
    }

    std::int64_t item(const std::string& name) const {
        for (const auto& [k, v] : items) {
            if (k == name) return v;
        }
        throw IndexError("count report: no item '" + name + "'");
    }
};

/// Exact learned-scalar count, itemized; the sum of items is the total.
inline CountReport count_params(const ModelConfig& cfg) {
    cfg.validate();
    CountReport r;
    const auto d = cfg.embed_dim;
    const auto f = cfg.point_feature_dim();
    const auto h = cfg.embed_hidden;
    r.add("embed.point_mlp", (h * f + h) + (d * h + d));
    r.add("embed.residual_proj", d * 3 + d);
    if (cfg.use_positional) {
        if (cfg.pos_embed == PosEmbedKind::Mlp) {
            r.add("embed.pos_mlp", (d * 3 + d) + (d * d + d));
        } else {
            r.add("embed.pos_table", cfg.patch_count * d);
        }
    }
    const auto schedule = cfg.effective_schedule();
    for (std::int64_t b = 0; b < cfg.layers; ++b) {
        const std::string prefix = "block" + std::to_string(b);
        std::int64_t block = 0;
        block += 2 * (2 * d);                            // two layer norms
        block += 4 * d * d + 3 * d;                      // q/k/v/o projections, no key bias
        block += (cfg.mlp_ratio * d * d + cfg.mlp_ratio * d) + (d * cfg.mlp_ratio * d + d);
        r.add(prefix, block);
        const auto factor = schedule[static_cast<std::size_t>(b)];
        if (cfg.merge_strategy == MergeStrategy::Linear && factor > 1) {
            r.add(prefix + ".merge_proj", factor * d * d + d);
        }
    }
    r.add("head", 2 * d + (cfg.num_classes * d + cfg.num_classes));
    return r;
}

/// Analytic FLOP count at the given input resolution. Convention:
/// 2*m*n*k per (m x k)x(k x n) product (bias adds and activations not
/// counted), attention scores and value mixing included per head, FPS
/// and kNN counted as 8 FLOPs per point-pair distance. The itemization
/// sums exactly to the total.
inline CountReport count_flops(const ModelConfig& cfg, std::int64_t n_points) {
    cfg.validate();
    if (n_points < 1) throw ConfigError("count_flops: n_points must be positive");
    CountReport r;
    const auto d = cfg.embed_dim;
    const auto p = cfg.patch_count;
    const auto k = cfg.points_per_patch;
    const auto f = cfg.point_feature_dim();
    const auto h = cfg.embed_hidden;
    constexpr std::int64_t dist_cost = 8;  // 3 sub, 3 mul, 2 add

    r.add("fps", n_points * p * dist_cost);
    r.add("knn", n_points * p * dist_cost);
    r.add("embed.point_mlp", 2 * (p * k) * h * f + 2 * (p * k) * d * h);
    r.add("embed.residual_proj", 2 * p * d * 3);
    if (cfg.use_positional && cfg.pos_embed == PosEmbedKind::Mlp) {
        r.add("embed.pos_mlp", 2 * p * d * 3 + 2 * p * d * d);
    }
    const auto schedule = cfg.effective_schedule();
    std::int64_t t = p;
    for (std::int64_t b = 0; b < cfg.layers; ++b) {
        const std::string prefix = "block" + std::to_string(b);
        std::int64_t block = 0;
        block += 4 * 2 * t * d * d;          // q, k, v, o
        block += 2 * 2 * t * t * d;          // scores + value mixing across heads
        block += 2 * 2 * t * d * (cfg.mlp_ratio * d);
        r.add(prefix, block);
        const auto factor = schedule[static_cast<std::size_t>(b)];
        const auto merged = (t + factor - 1) / factor;
        if (cfg.merge_strategy == MergeStrategy::Linear && factor > 1) {
            r.add(prefix + ".merge_proj", 2 * merged * (factor * d) * d);
        }
        t = merged;
    }
    r.add("head", 2 * cfg.num_classes * d);
    return r;
}

}  // namespace pointy
