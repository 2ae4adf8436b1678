// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "pointy/backbone.hpp"
#include "pointy/data.hpp"

namespace pointy {

// =====================================================================
//  Zero-shot transfer protocol
// =====================================================================
//
// Discard the classification head, read the mean-pooled pre-head
// feature for every sample, average the target training split per
// class into prototypes, and rank classes for each test sample by
// cosine similarity. No fine-tuning anywhere.

template <typename T>
struct FeatureMatrix {
    std::vector<std::vector<T>> rows;  // M x D
    std::vector<std::int64_t> labels;  // M

    std::int64_t size() const { return static_cast<std::int64_t>(rows.size()); }
    std::int64_t dim() const { return rows.empty() ? 0 : static_cast<std::int64_t>(rows[0].size()); }
};

template <typename T>
struct PrototypeBank {
    std::vector<std::vector<T>> prototypes;  // C x D, unnormalized class means
    std::vector<std::string> class_names;
    std::vector<std::int64_t> counts;

    std::int64_t num_classes() const { return static_cast<std::int64_t>(prototypes.size()); }
    std::int64_t dim() const { return prototypes.empty() ? 0 : static_cast<std::int64_t>(prototypes[0].size()); }
};

/// Pooled pre-head features (after the final merge, before the head
/// LayerNorm), deterministic and unaugmented.
template <typename T>
FeatureMatrix<T> extract_features(const ModelParams<T>& model, const Dataset& dataset, int threads = 1) {
    dataset.validate();
    if (dataset.size() == 0) throw DimensionError("extract_features: empty dataset");
    for (const auto& cloud : dataset.clouds) {
        if (cloud.size() < model.config.patch_count) {
            throw ConfigError("extract_features: cloud '" + cloud.id + "' has " + std::to_string(cloud.size()) +
                              " points but the checkpoint needs >= " + std::to_string(model.config.patch_count));
        }
    }
    FeatureMatrix<T> out;
    out.rows.resize(static_cast<std::size_t>(dataset.size()));
    out.labels = dataset.labels;
    parallel_for(dataset.size(), threads, [&](std::int64_t i) {
        NoGradGuard ng;
        const auto result = forward(dataset.clouds[static_cast<std::size_t>(i)], model);
        out.rows[static_cast<std::size_t>(i)] = result.pooled.data();
    });
    return out;
}

/// Per-class arithmetic means; normalization happens inside cosine.
template <typename T>
PrototypeBank<T> build_prototypes(const FeatureMatrix<T>& features, const std::vector<std::string>& class_names) {
    const auto c = static_cast<std::int64_t>(class_names.size());
    const auto d = features.dim();
    if (features.size() == 0) throw DimensionError("build_prototypes: no features");
    PrototypeBank<T> bank;
    bank.class_names = class_names;
    bank.prototypes.assign(static_cast<std::size_t>(c), std::vector<T>(static_cast<std::size_t>(d), T(0)));
    bank.counts.assign(static_cast<std::size_t>(c), 0);
    for (std::int64_t i = 0; i < features.size(); ++i) {
        const auto label = features.labels[static_cast<std::size_t>(i)];
        if (label < 0 || label >= c) throw IndexError("build_prototypes: label " + std::to_string(label) + " out of range");
        auto& proto = bank.prototypes[static_cast<std::size_t>(label)];
        const auto& row = features.rows[static_cast<std::size_t>(i)];
        for (std::size_t j = 0; j < row.size(); ++j) proto[j] += row[j];
        ++bank.counts[static_cast<std::size_t>(label)];
    }
    for (std::int64_t ci = 0; ci < c; ++ci) {
        if (bank.counts[static_cast<std::size_t>(ci)] == 0) {
            throw IndexError("build_prototypes: class '" + class_names[static_cast<std::size_t>(ci)] +
                             "' has no training samples");
        }
        for (auto& v : bank.prototypes[static_cast<std::size_t>(ci)]) {
            v /= static_cast<T>(bank.counts[static_cast<std::size_t>(ci)]);
        }
    }
    return bank;
}

/// Classes sorted by descending cosine similarity, class index breaking
/// ties. Zero-norm vectors rank last with similarity -inf.
template <typename T>
std::vector<std::int64_t> rank_classes(const std::vector<T>& feature, const PrototypeBank<T>& bank,
                                       bool warn_degenerate = true) {
    if (static_cast<std::int64_t>(feature.size()) != bank.dim()) {
        throw DimensionError("rank_classes: feature dim " + std::to_string(feature.size()) +
                             " does not match prototypes " + std::to_string(bank.dim()));
    }
    double fn = 0.0;
    for (const auto v : feature) fn += static_cast<double>(v) * static_cast<double>(v);
    fn = std::sqrt(fn);
    const auto c = bank.num_classes();
    std::vector<std::pair<double, std::int64_t>> sims(static_cast<std::size_t>(c));
    for (std::int64_t ci = 0; ci < c; ++ci) {
        const auto& proto = bank.prototypes[static_cast<std::size_t>(ci)];
        double pn = 0.0, dot = 0.0;
        for (std::size_t j = 0; j < proto.size(); ++j) {
            pn += static_cast<double>(proto[j]) * static_cast<double>(proto[j]);
            dot += static_cast<double>(proto[j]) * static_cast<double>(feature[j]);
        }
        pn = std::sqrt(pn);
        double s;
        if (fn == 0.0 || pn == 0.0) {
            s = -std::numeric_limits<double>::infinity();
            if (warn_degenerate) {
                std::cerr << "warning: zero-norm " << (fn == 0.0 ? "feature" : "prototype") << " in cosine ranking\n";
            }
        } else {
            s = dot / (fn * pn);
        }
        sims[static_cast<std::size_t>(ci)] = {s, ci};
    }
    std::sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<std::int64_t> ranked(static_cast<std::size_t>(c));
    for (std::int64_t ci = 0; ci < c; ++ci) ranked[static_cast<std::size_t>(ci)] = sims[static_cast<std::size_t>(ci)].second;
    return ranked;
}

struct ZeroShotReport {
    std::vector<std::pair<std::int64_t, double>> topk;  // (k, accuracy %)
    std::int64_t num_classes = 0;
    std::int64_t num_test_samples = 0;
    std::vector<std::vector<std::int64_t>> rankings;    // per test sample
    std::vector<std::int64_t> true_labels;

    double accuracy_at(std::int64_t k) const {
        for (const auto& [kk, acc] : topk) {
            if (kk == k) return acc;
        }
        throw IndexError("zero-shot report: no entry for k=" + std::to_string(k));
    }
};

/// Prototypes from the target training split, Top-k accuracies on the
/// target test split.
template <typename T>
ZeroShotReport zeroshot_eval(const ModelParams<T>& model, const Dataset& target_train, const Dataset& target_test,
                             const std::vector<std::int64_t>& ks = {1, 3, 5}, int threads = 1) {
    if (target_train.num_classes() != target_test.num_classes()) {
        throw ConfigError("zeroshot_eval: splits disagree on the label space");
    }
    const auto train_features = extract_features(model, target_train, threads);
    const auto bank = build_prototypes(train_features, target_train.class_names);
    const auto test_features = extract_features(model, target_test, threads);

    ZeroShotReport report;
    report.num_classes = bank.num_classes();
    report.num_test_samples = test_features.size();
    report.true_labels = test_features.labels;
    report.rankings.resize(static_cast<std::size_t>(test_features.size()));
    for (std::int64_t i = 0; i < test_features.size(); ++i) {
        report.rankings[static_cast<std::size_t>(i)] = rank_classes(test_features.rows[static_cast<std::size_t>(i)], bank);
    }
    for (const auto k : ks) {
        if (k < 1) throw ConfigError("zeroshot_eval: k must be >= 1");
        const auto depth = std::min(k, report.num_classes);
        std::int64_t hits = 0;
        for (std::int64_t i = 0; i < test_features.size(); ++i) {
            const auto& ranked = report.rankings[static_cast<std::size_t>(i)];
            const auto truth = test_features.labels[static_cast<std::size_t>(i)];
            for (std::int64_t j = 0; j < depth; ++j) {
                if (ranked[static_cast<std::size_t>(j)] == truth) {
                    ++hits;
                    break;
                }
            }
        }
        report.topk.emplace_back(k, 100.0 * static_cast<double>(hits) / static_cast<double>(test_features.size()));
    }
    return report;
}

}  // namespace pointy
