// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "pointy/config.hpp"
#include "pointy/geometry.hpp"
#include "pointy/nn.hpp"
#include "pointy/tensor.hpp"

namespace pointy {

// =====================================================================
//  Tokenizer-free patch embedding
// =====================================================================
//
// Each kNN patch runs through a scaled-down PointNet (shared point MLP,
// elementwise max over the patch), with two residual routes for raw
// geometry: absolute coordinates ride along in the per-point features,
// and a linear projection of the anchor is added to the token. A
// learned function of the anchor coordinates provides the positional
// embedding.

template <typename T>
struct EmbedParams {
    LinearLayer<T> point_mlp1;    // point features -> hidden
    LinearLayer<T> point_mlp2;    // hidden -> D
    LinearLayer<T> residual_proj; // anchor xyz -> D
    LinearLayer<T> pos_mlp1;      // anchor xyz -> D   (Mlp kind)
    LinearLayer<T> pos_mlp2;      // D -> D
    Tensor<T> pos_table;          // (P x D)           (Table kind)
    bool use_positional = true;
    PosEmbedKind pos_kind = PosEmbedKind::Mlp;
    Activation activation = Activation::GeLU;

    EmbedParams() = default;

    EmbedParams(const ModelConfig& cfg, Rng& rng)
        : point_mlp1(cfg.point_feature_dim(), cfg.embed_hidden, rng, "embed.point_mlp1"),
          point_mlp2(cfg.embed_hidden, cfg.embed_dim, rng, "embed.point_mlp2"),
          residual_proj(3, cfg.embed_dim, rng, "embed.residual_proj"),
          use_positional(cfg.use_positional),
          pos_kind(cfg.pos_embed),
          activation(cfg.activation) {
        if (use_positional) {
            if (pos_kind == PosEmbedKind::Mlp) {
                pos_mlp1 = LinearLayer<T>(3, cfg.embed_dim, rng, "embed.pos_mlp1");
                pos_mlp2 = LinearLayer<T>(cfg.embed_dim, cfg.embed_dim, rng, "embed.pos_mlp2");
            } else {
                pos_table = kaiming_init<T>({cfg.patch_count, cfg.embed_dim}, cfg.embed_dim, rng, "embed.pos_table");
            }
        }
    }

    void collect(std::vector<Tensor<T>>& out) const {
        point_mlp1.collect(out);
        point_mlp2.collect(out);
        residual_proj.collect(out);
        if (use_positional) {
            if (pos_kind == PosEmbedKind::Mlp) {
                pos_mlp1.collect(out);
                pos_mlp2.collect(out);
            } else {
                out.push_back(pos_table);
            }
        }
    }
};

/// Per-point features of one patch: concat(relative offset, absolute
/// position). Columns 1-3 carry local geometry, 4-6 the raw position.
inline std::vector<std::array<double, 6>> patch_point_features(const PatchSet& patches, std::int64_t p) {
    if (p < 0 || p >= patches.patch_count()) {
        throw IndexError("patch_point_features: patch " + std::to_string(p) + " out of range");
    }
    const auto& rel = patches.relative[static_cast<std::size_t>(p)];
    const auto& abs = patches.absolute[static_cast<std::size_t>(p)];
    std::vector<std::array<double, 6>> out(rel.size());
    for (std::size_t j = 0; j < rel.size(); ++j) {
        out[j] = {rel[j][0], rel[j][1], rel[j][2], abs[j][0], abs[j][1], abs[j][2]};
    }
    return out;
}

namespace detail {

template <typename T>
Tensor<T> act(const Tensor<T>& x, Activation a) {
    return a == Activation::GeLU ? gelu(x) : relu(x);
}

/// Flattens a PatchSet into the (P*k x F) leaf fed to the point MLP.
template <typename T>
Tensor<T> patch_feature_matrix(const PatchSet& patches, const PointCloud* extras_source) {
    const auto p_count = patches.patch_count();
    const auto k = patches.points_per_patch();
    const bool with_extras = extras_source != nullptr && extras_source->has_extras();
    const std::int64_t f = with_extras ? 9 : 6;
    std::vector<T> data;
    data.reserve(static_cast<std::size_t>(p_count * k * f));
    for (std::int64_t p = 0; p < p_count; ++p) {
        const auto& rel = patches.relative[static_cast<std::size_t>(p)];
        const auto& abs = patches.absolute[static_cast<std::size_t>(p)];
        const auto& idx = patches.neighbor_indices[static_cast<std::size_t>(p)];
        for (std::int64_t j = 0; j < k; ++j) {
            const auto& r = rel[static_cast<std::size_t>(j)];
            const auto& a = abs[static_cast<std::size_t>(j)];
            data.insert(data.end(), {static_cast<T>(r[0]), static_cast<T>(r[1]), static_cast<T>(r[2]),
                                     static_cast<T>(a[0]), static_cast<T>(a[1]), static_cast<T>(a[2])});
            if (with_extras) {
                const auto& e = extras_source->extras[static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])];
                data.insert(data.end(), {static_cast<T>(e[0]), static_cast<T>(e[1]), static_cast<T>(e[2])});
            }
        }
    }
    return Tensor<T>::from({p_count * k, f}, std::move(data));
}

template <typename T>
Tensor<T> anchor_matrix(const PatchSet& patches) {
    std::vector<T> data;
    data.reserve(patches.anchors.size() * 3);
    for (const auto& a : patches.anchors) {
        data.insert(data.end(), {static_cast<T>(a[0]), static_cast<T>(a[1]), static_cast<T>(a[2])});
    }
    return Tensor<T>::from({patches.patch_count(), 3}, std::move(data));
}

}  // namespace detail

/// Patches -> token matrix (P x D).
/// token_p = maxpool_k(point_mlp(features)) + residual_proj(anchor_p)
///           [+ positional(anchor_p)]
template <typename T>
Tensor<T> embed_patches(const PatchSet& patches, const EmbedParams<T>& params, bool use_positional,
                        const PointCloud* extras_source = nullptr) {
    const auto k = patches.points_per_patch();
    Tensor<T> feats = detail::patch_feature_matrix<T>(patches, extras_source);
    if (feats.cols() != params.point_mlp1.in_features()) {
        throw DimensionError("embed_patches: feature width " + std::to_string(feats.cols()) +
                             " does not match point MLP input " + std::to_string(params.point_mlp1.in_features()));
    }
    Tensor<T> h = params.point_mlp2.forward(detail::act(params.point_mlp1.forward(feats), params.activation));
    Tensor<T> tokens = group_max_rows(h, k);

    Tensor<T> anchors = detail::anchor_matrix<T>(patches);
    tokens = add(tokens, params.residual_proj.forward(anchors));

    if (use_positional) {
        if (!params.use_positional) {
            throw ConfigError("embed_patches: positional embedding requested but not initialized");
        }
        if (params.pos_kind == PosEmbedKind::Mlp) {
            Tensor<T> pos = params.pos_mlp2.forward(detail::act(params.pos_mlp1.forward(anchors), params.activation));
            tokens = add(tokens, pos);
        } else {
            if (params.pos_table.shape()[0] != patches.patch_count()) {
                throw DimensionError("embed_patches: positional table rows must equal patch count");
            }
            tokens = add(tokens, params.pos_table);
        }
    }
    return tokens;
}

/// Full patchification path: normalize -> FPS anchors -> kNN groups ->
/// patch embedding. Returns the (P x D) token matrix.
template <typename T>
Tensor<T> tokenize(const PointCloud& cloud, const ModelConfig& cfg, const EmbedParams<T>& params) {
    if (cloud.size() < cfg.patch_count) {
        throw DimensionError("tokenize: cloud has " + std::to_string(cloud.size()) + " points, need >= " +
                             std::to_string(cfg.patch_count));
    }
    PointCloud normalized = normalize_unit_range(cloud);
    const auto anchors = fps(normalized.points, cfg.patch_count);
    const auto patches = knn_group(normalized.points, anchors, cfg.points_per_patch);
    const PointCloud* extras = cfg.use_extras && normalized.has_extras() ? &normalized : nullptr;
    return embed_patches(patches, params, cfg.use_positional, extras);
}

}  // namespace pointy
