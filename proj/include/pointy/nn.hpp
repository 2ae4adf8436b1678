// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pointy/rng.hpp"
#include "pointy/tensor.hpp"

namespace pointy {

// =====================================================================
//  Layers
// =====================================================================

/// Kaiming-normal tensor: samples ~ Normal(0, sqrt(2 / fan_in)).
template <typename T>
Tensor<T> kaiming_init(std::vector<std::int64_t> shape, std::int64_t fan_in, Rng& rng, std::string name) {
    if (fan_in <= 0) throw ConfigError("kaiming_init: fan_in must be positive");
    std::int64_t count = 1;
    for (auto e : shape) count *= e;
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    std::vector<T> data(static_cast<std::size_t>(count));
    for (auto& v : data) v = static_cast<T>(rng.normal(0.0, stddev));
    return Tensor<T>::param(std::move(shape), std::move(data), std::move(name));
}

template <typename T>
struct LinearLayer {
    Tensor<T> weight;  // (out x in)
    Tensor<T> bias;    // (out); a frozen zero constant when constructed bias-free

    LinearLayer() = default;

    LinearLayer(std::int64_t in, std::int64_t out, Rng& rng, const std::string& name, bool with_bias = true)
        : weight(kaiming_init<T>({out, in}, in, rng, name + ".weight")),
          bias(with_bias
                   ? Tensor<T>::param({out}, std::vector<T>(static_cast<std::size_t>(out), T(0)), name + ".bias")
                   : Tensor<T>::from({out}, std::vector<T>(static_cast<std::size_t>(out), T(0)))) {}

    std::int64_t in_features() const { return weight.shape()[1]; }
    std::int64_t out_features() const { return weight.shape()[0]; }
    bool has_bias() const { return bias.requires_grad(); }

    Tensor<T> forward(const Tensor<T>& x) const { return linear(x, weight, bias); }

    void collect(std::vector<Tensor<T>>& out) const {
        out.push_back(weight);
        if (has_bias()) out.push_back(bias);
    }
};

template <typename T>
struct LayerNormLayer {
    Tensor<T> gamma;
    Tensor<T> beta;
    T eps = T(1e-5);

    LayerNormLayer() = default;

    LayerNormLayer(std::int64_t dim, const std::string& name)
        : gamma(Tensor<T>::param({dim}, std::vector<T>(static_cast<std::size_t>(dim), T(1)), name + ".gamma")),
          beta(Tensor<T>::param({dim}, std::vector<T>(static_cast<std::size_t>(dim), T(0)), name + ".beta")) {}

    std::int64_t dim() const { return gamma.numel(); }

    Tensor<T> forward(const Tensor<T>& x) const { return layer_norm(x, gamma, beta, eps); }

    void collect(std::vector<Tensor<T>>& out) const {
        out.push_back(gamma);
        out.push_back(beta);
    }
};

// =====================================================================
//  AdamW
// =====================================================================

struct AdamWConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

/// Decoupled weight decay: p <- p - lr*wd*p - lr*mhat/(sqrt(vhat)+eps).
template <typename T>
class AdamW {
  public:
    AdamW() = default;

    AdamW(std::vector<Tensor<T>> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
        m_.resize(params_.size());
        v_.resize(params_.size());
        for (std::size_t i = 0; i < params_.size(); ++i) {
            m_[i].assign(params_[i].data().size(), T(0));
            v_[i].assign(params_[i].data().size(), T(0));
        }
    }

    const AdamWConfig& config() const { return cfg_; }
    std::uint64_t step_count() const { return step_; }
    const std::vector<Tensor<T>>& params() const { return params_; }

    void step() {
        ++step_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& p = params_[i];
            if (!p.has_grad()) {
                throw NumericError("adamw: parameter '" + p.name() + "' has no gradient");
            }
            const auto& g = p.grad();
            auto& data = p.data();
            auto& m = m_[i];
            auto& v = v_[i];
            for (std::size_t j = 0; j < data.size(); ++j) {
                const double gj = static_cast<double>(g[j]);
                m[j] = static_cast<T>(cfg_.beta1 * static_cast<double>(m[j]) + (1.0 - cfg_.beta1) * gj);
                v[j] = static_cast<T>(cfg_.beta2 * static_cast<double>(v[j]) + (1.0 - cfg_.beta2) * gj * gj);
                const double mhat = static_cast<double>(m[j]) / bc1;
                const double vhat = static_cast<double>(v[j]) / bc2;
                double pj = static_cast<double>(data[j]);
                pj -= cfg_.lr * cfg_.weight_decay * pj;
                pj -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
                data[j] = static_cast<T>(pj);
            }
        }
    }

    void zero_grads() {
        for (auto& p : params_) p.zero_grad();
    }

    // moment access for checkpointing
    std::vector<T>& moment1(std::size_t i) { return m_[i]; }
    std::vector<T>& moment2(std::size_t i) { return v_[i]; }
    const std::vector<T>& moment1(std::size_t i) const { return m_[i]; }
    const std::vector<T>& moment2(std::size_t i) const { return v_[i]; }
    void set_step_count(std::uint64_t s) { step_ = s; }

  private:
    std::vector<Tensor<T>> params_;
    std::vector<std::vector<T>> m_;
    std::vector<std::vector<T>> v_;
    AdamWConfig cfg_;
    std::uint64_t step_ = 0;
};

}  // namespace pointy
