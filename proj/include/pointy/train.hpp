// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pointy/backbone.hpp"
#include "pointy/data.hpp"
#include "pointy/io.hpp"
#include "pointy/nn.hpp"

namespace pointy {

// =====================================================================
//  Training regime
// =====================================================================
//
// Fixed-hyperparameter supervised classification: AdamW at a constant
// learning rate, batches of 16, cross-entropy, random z-rotation on the
// training split only, per-epoch test evaluation with best-accuracy
// tracking. Best accuracy is model selection on the test split — an
// optimistic protocol; report it as such.

struct TrainConfig {
    double lr = 1e-4;
    std::int64_t batch_size = 16;
    std::int64_t epochs = 100;
    std::uint64_t seed = 0;
    std::string precision = "f32";  // f32 | f64
    bool augment_rotation = true;   // training split only
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double early_stop_oa = -1.0;    // stop once test OA reaches this; <0 disables
    int threads = 1;

    void validate() const {
        if (lr <= 0.0) throw ConfigError("train config: lr must be positive");
        if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
        if (epochs < 1) throw ConfigError("train config: epochs must be >= 1");
        if (precision != "f32" && precision != "f64") {
            throw ConfigError("train config: precision must be f32 or f64, got '" + precision + "'");
        }
        if (threads < 1) throw ConfigError("train config: threads must be >= 1");
    }
};

struct EpochMetrics {
    std::int64_t epoch = 0;   // 1-based
    double train_loss = 0.0;
    double test_oa = 0.0;     // percent
    double wall_time_s = 0.0;
};

// ---- JSON round trips for configs and metrics ----

inline nlohmann::json to_json(const ModelConfig& c) {
    return nlohmann::json{{"embed_dim", c.embed_dim},
                          {"heads", c.heads},
                          {"layers", c.layers},
                          {"patch_count", c.patch_count},
                          {"points_per_patch", c.points_per_patch},
                          {"n_points", c.n_points},
                          {"merge_schedule", c.merge_schedule},
                          {"merge_strategy", to_string(c.merge_strategy)},
                          {"hierarchical", c.hierarchical},
                          {"activation", to_string(c.activation)},
                          {"use_positional", c.use_positional},
                          {"pos_embed", to_string(c.pos_embed)},
                          {"mlp_ratio", c.mlp_ratio},
                          {"num_classes", c.num_classes},
                          {"embed_hidden", c.embed_hidden},
                          {"use_extras", c.use_extras},
                          {"dropout", c.dropout}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.embed_dim = j.at("embed_dim").get<std::int64_t>();
    c.heads = j.at("heads").get<std::int64_t>();
    c.layers = j.at("layers").get<std::int64_t>();
    c.patch_count = j.at("patch_count").get<std::int64_t>();
    c.points_per_patch = j.at("points_per_patch").get<std::int64_t>();
    c.n_points = j.at("n_points").get<std::int64_t>();
    c.merge_schedule = j.at("merge_schedule").get<std::vector<std::int64_t>>();
    c.merge_strategy = merge_strategy_from_string(j.at("merge_strategy").get<std::string>());
    c.hierarchical = j.at("hierarchical").get<bool>();
    c.activation = activation_from_string(j.at("activation").get<std::string>());
    c.use_positional = j.at("use_positional").get<bool>();
    c.pos_embed = pos_embed_from_string(j.at("pos_embed").get<std::string>());
    c.mlp_ratio = j.at("mlp_ratio").get<std::int64_t>();
    c.num_classes = j.at("num_classes").get<std::int64_t>();
    c.embed_hidden = j.at("embed_hidden").get<std::int64_t>();
    c.use_extras = j.at("use_extras").get<bool>();
    c.dropout = j.at("dropout").get<double>();
    c.validate();
    return c;
}

inline nlohmann::json to_json(const TrainConfig& c) {
    return nlohmann::json{{"lr", c.lr},
                          {"batch_size", c.batch_size},
                          {"epochs", c.epochs},
                          {"seed", c.seed},
                          {"precision", c.precision},
                          {"augment_rotation", c.augment_rotation},
                          {"weight_decay", c.weight_decay},
                          {"beta1", c.beta1},
                          {"beta2", c.beta2},
                          {"adam_eps", c.adam_eps},
                          {"early_stop_oa", c.early_stop_oa},
                          {"threads", c.threads}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.lr = j.at("lr").get<double>();
    c.batch_size = j.at("batch_size").get<std::int64_t>();
    c.epochs = j.at("epochs").get<std::int64_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.precision = j.at("precision").get<std::string>();
    c.augment_rotation = j.at("augment_rotation").get<bool>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.adam_eps = j.at("adam_eps").get<double>();
    c.early_stop_oa = j.at("early_stop_oa").get<double>();
    c.threads = j.at("threads").get<int>();
    c.validate();
    return c;
}

// =====================================================================
//  Checkpoint
// =====================================================================

template <typename T>
struct Checkpoint {
    ModelConfig model_config;
    TrainConfig train_config;
    std::vector<std::string> param_names;
    std::vector<std::vector<std::int64_t>> param_shapes;
    std::vector<std::vector<T>> param_data;
    std::vector<std::vector<T>> opt_m;
    std::vector<std::vector<T>> opt_v;
    std::uint64_t opt_step = 0;
    std::uint64_t rng_state = 0;
    std::int64_t epoch = 0;  // epochs completed
    std::vector<EpochMetrics> history;
    std::string run_config_json;  // resolved CLI config, verbatim ("" if none)

    static Checkpoint capture(const ModelParams<T>& model, const AdamW<T>& opt, const TrainConfig& tcfg,
                              std::uint64_t rng_state, std::int64_t epoch,
                              const std::vector<EpochMetrics>& history, const std::string& run_config_json = "") {
        Checkpoint c;
        c.model_config = model.config;
        c.train_config = tcfg;
        const auto params = model.parameters();
        c.param_names.reserve(params.size());
        c.param_shapes.reserve(params.size());
        c.param_data.reserve(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            c.param_names.push_back(params[i].name());
            c.param_shapes.push_back(params[i].shape());
            c.param_data.push_back(params[i].data());
            c.opt_m.push_back(opt.moment1(i));
            c.opt_v.push_back(opt.moment2(i));
        }
        c.opt_step = opt.step_count();
        c.rng_state = rng_state;
        c.epoch = epoch;
        c.history = history;
        c.run_config_json = run_config_json;
        return c;
    }

    /// Rebuilds the model and overwrites every tensor from the snapshot.
    ModelParams<T> restore_params() const {
        Rng scratch(0);
        ModelParams<T> model(model_config, scratch);
        auto params = model.parameters();
        if (params.size() != param_data.size()) {
            throw FormatError("checkpoint: " + std::to_string(param_data.size()) + " tensors for a model with " +
                              std::to_string(params.size()));
        }
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (params[i].name() != param_names[i]) {
                throw FormatError("checkpoint: tensor '" + param_names[i] + "' where '" + params[i].name() +
                                  "' was expected");
            }
            if (params[i].shape() != param_shapes[i]) {
                throw FormatError("checkpoint: tensor '" + param_names[i] + "' has shape " +
                                  shape_str(param_shapes[i]) + ", expected " + shape_str(params[i].shape()));
            }
            params[i].data() = param_data[i];
        }
        return model;
    }

    AdamW<T> restore_optimizer(const ModelParams<T>& model) const {
        AdamW<T> opt(model.parameters(),
                     AdamWConfig{train_config.lr, train_config.beta1, train_config.beta2, train_config.adam_eps,
                                 train_config.weight_decay});
        for (std::size_t i = 0; i < param_data.size(); ++i) {
            opt.moment1(i) = opt_m[i];
            opt.moment2(i) = opt_v[i];
        }
        opt.set_step_count(opt_step);
        return opt;
    }
};

namespace detail {

template <typename T>
constexpr std::uint8_t dtype_code() {
    return std::is_same_v<T, float> ? 0 : 1;
}

template <typename T>
void write_tensor(io::ByteWriter& w, const std::string& name, const std::vector<std::int64_t>& shape,
                  const std::vector<T>& data) {
    if (name.size() > 0xFFFF) throw FormatError("checkpoint: tensor name too long");
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.str(name);
    w.u8(dtype_code<T>());
    w.u8(static_cast<std::uint8_t>(shape.size()));
    for (const auto e : shape) w.u64(static_cast<std::uint64_t>(e));
    for (const auto v : data) {
        if constexpr (std::is_same_v<T, float>) {
            w.f32(v);
        } else {
            w.f64(v);
        }
    }
}

template <typename T>
void read_tensor(io::ByteReader& r, std::string& name, std::vector<std::int64_t>& shape, std::vector<T>& data) {
    const auto name_len = r.u16("tensor name length");
    name = r.str(name_len, "tensor name");
    const auto dtype = r.u8("tensor dtype");
    if (dtype != dtype_code<T>()) {
        throw FormatError(r.origin() + ": tensor '" + name + "' has dtype code " + std::to_string(dtype) +
                          ", expected " + std::to_string(dtype_code<T>()) +
                          " (open the checkpoint with the matching --precision)");
    }
    const auto rank = r.u8("tensor rank");
    shape.clear();
    std::int64_t count = 1;
    for (std::uint8_t i = 0; i < rank; ++i) {
        const auto e = static_cast<std::int64_t>(r.u64("tensor extent"));
        if (e <= 0 || e > (1ll << 32)) throw FormatError(r.origin() + ": tensor '" + name + "' has invalid extent");
        shape.push_back(e);
        count *= e;
    }
    data.resize(static_cast<std::size_t>(count));
    for (auto& v : data) {
        if constexpr (std::is_same_v<T, float>) {
            v = r.f32("tensor data");
        } else {
            v = r.f64("tensor data");
        }
    }
}

}  // namespace detail

/// Binary checkpoint: magic "PTYC", u32 version, u64 JSON length + JSON
/// (configs, epoch, rng state, optimizer step, history), u32 tensor
/// count + framed parameter tensors, u32 count + framed optimizer
/// moments, CRC32 trailer. All integers little-endian.
template <typename T>
void save_checkpoint(const Checkpoint<T>& ckpt, const std::string& path) {
    io::ByteWriter w;
    w.str("PTYC");
    w.u32(1);
    nlohmann::json j{{"format", "pointy-checkpoint"},
                     {"model", to_json(ckpt.model_config)},
                     {"train", to_json(ckpt.train_config)},
                     {"epoch", ckpt.epoch},
                     {"rng_state", ckpt.rng_state},
                     {"adamw_step", ckpt.opt_step},
                     {"history", nlohmann::json::array()}};
    for (const auto& m : ckpt.history) {
        j["history"].push_back({{"epoch", m.epoch},
                                {"train_loss", m.train_loss},
                                {"test_oa", m.test_oa},
                                {"wall_time_s", m.wall_time_s}});
    }
    if (!ckpt.run_config_json.empty()) {
        j["run_config"] = nlohmann::json::parse(ckpt.run_config_json);
    }
    const std::string js = j.dump();
    w.u64(js.size());
    w.str(js);
    w.u32(static_cast<std::uint32_t>(ckpt.param_data.size()));
    for (std::size_t i = 0; i < ckpt.param_data.size(); ++i) {
        detail::write_tensor(w, ckpt.param_names[i], ckpt.param_shapes[i], ckpt.param_data[i]);
    }
    w.u32(static_cast<std::uint32_t>(2 * ckpt.param_data.size()));
    for (std::size_t i = 0; i < ckpt.param_data.size(); ++i) {
        detail::write_tensor(w, ckpt.param_names[i] + ".m", ckpt.param_shapes[i], ckpt.opt_m[i]);
        detail::write_tensor(w, ckpt.param_names[i] + ".v", ckpt.param_shapes[i], ckpt.opt_v[i]);
    }
    w.finish_to_file(path);
}

/// Reads only the embedded JSON header; used to pick the precision
/// before a full typed load.
inline nlohmann::json checkpoint_header(const std::string& path) {
    auto r = io::ByteReader::from_file(path);
    const std::string magic = r.str(4, "magic");
    if (magic != "PTYC") throw FormatError(path + ": bad magic at byte offset 0 (expected PTYC)");
    const auto version = r.u32("version");
    if (version != 1) throw FormatError(path + ": unsupported version " + std::to_string(version));
    const auto json_len = r.u64("config length");
    const std::string js = r.str(static_cast<std::size_t>(json_len), "config JSON");
    try {
        return nlohmann::json::parse(js);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": embedded config is not valid JSON: " + e.what());
    }
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path) {
    auto r = io::ByteReader::from_file(path);
    const std::string magic = r.str(4, "magic");
    if (magic != "PTYC") throw FormatError(path + ": bad magic at byte offset 0 (expected PTYC)");
    const auto version = r.u32("version");
    if (version != 1) {
        throw FormatError(path + ": unsupported version " + std::to_string(version) + " at byte offset 4");
    }
    const auto json_len = r.u64("config length");
    const std::string js = r.str(static_cast<std::size_t>(json_len), "config JSON");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(js);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": embedded config is not valid JSON: " + e.what());
    }
    Checkpoint<T> ckpt;
    try {
        ckpt.model_config = model_config_from_json(j.at("model"));
        ckpt.train_config = train_config_from_json(j.at("train"));
        ckpt.epoch = j.at("epoch").get<std::int64_t>();
        ckpt.rng_state = j.at("rng_state").get<std::uint64_t>();
        ckpt.opt_step = j.at("adamw_step").get<std::uint64_t>();
        for (const auto& m : j.at("history")) {
            ckpt.history.push_back(EpochMetrics{m.at("epoch").get<std::int64_t>(), m.at("train_loss").get<double>(),
                                                m.at("test_oa").get<double>(), m.at("wall_time_s").get<double>()});
        }
        if (j.contains("run_config")) ckpt.run_config_json = j.at("run_config").dump();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": embedded config missing fields: " + e.what());
    }
    const auto tensor_count = r.u32("tensor count");
    ckpt.param_names.resize(tensor_count);
    ckpt.param_shapes.resize(tensor_count);
    ckpt.param_data.resize(tensor_count);
    for (std::uint32_t i = 0; i < tensor_count; ++i) {
        detail::read_tensor(r, ckpt.param_names[i], ckpt.param_shapes[i], ckpt.param_data[i]);
    }
    const auto opt_count = r.u32("optimizer tensor count");
    if (opt_count != 2 * tensor_count) {
        throw FormatError(path + ": expected " + std::to_string(2 * tensor_count) + " optimizer tensors, found " +
                          std::to_string(opt_count));
    }
    ckpt.opt_m.resize(tensor_count);
    ckpt.opt_v.resize(tensor_count);
    for (std::uint32_t i = 0; i < tensor_count; ++i) {
        std::string name;
        std::vector<std::int64_t> shape;
        detail::read_tensor(r, name, shape, ckpt.opt_m[i]);
        if (name != ckpt.param_names[i] + ".m") {
            throw FormatError(path + ": optimizer tensor '" + name + "' out of order");
        }
        detail::read_tensor(r, name, shape, ckpt.opt_v[i]);
        if (name != ckpt.param_names[i] + ".v") {
            throw FormatError(path + ": optimizer tensor '" + name + "' out of order");
        }
    }
    r.check_crc("checkpoint");
    for (const auto& t : ckpt.param_data) check_finite(t, "checkpoint tensor");
    return ckpt;
}

// =====================================================================
//  Evaluation
// =====================================================================

/// Overall accuracy (%): unaugmented, no parameter mutation, argmax
/// ties resolved toward the lower class index.
template <typename T>
double evaluate(const ModelParams<T>& model, const Dataset& split, int threads = 1) {
    split.validate();
    if (split.size() == 0) throw DimensionError("evaluate: empty split");
    std::vector<std::int64_t> predicted(static_cast<std::size_t>(split.size()));
    parallel_for(split.size(), threads, [&](std::int64_t i) {
        NoGradGuard ng;
        const auto result = forward(split.clouds[static_cast<std::size_t>(i)], model);
        const auto& logits = result.logits.data();
        std::int64_t best = 0;
        for (std::size_t c = 1; c < logits.size(); ++c) {
            if (logits[c] > logits[static_cast<std::size_t>(best)]) best = static_cast<std::int64_t>(c);
        }
        predicted[static_cast<std::size_t>(i)] = best;
    });
    std::int64_t correct = 0;
    for (std::int64_t i = 0; i < split.size(); ++i) {
        if (predicted[static_cast<std::size_t>(i)] == split.labels[static_cast<std::size_t>(i)]) ++correct;
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(split.size());
}

// =====================================================================
//  Training loop
// =====================================================================

template <typename T>
struct TrainResult {
    Checkpoint<T> best;  // argmax test OA over this run's epochs (tie: earlier)
    Checkpoint<T> last;
    std::vector<EpochMetrics> history;
};

namespace detail {

template <typename T>
std::string param_stats(const ModelParams<T>& model) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    double abs_sum = 0.0;
    std::int64_t count = 0;
    std::string extreme;
    for (const auto& p : model.parameters()) {
        for (const auto v : p.data()) {
            const double d = static_cast<double>(v);
            if (d < lo) lo = d;
            if (d > hi) {
                hi = d;
                extreme = p.name();
            }
            abs_sum += std::abs(d);
            ++count;
        }
    }
    return "params min=" + format_double(lo, 6) + " max=" + format_double(hi, 6) + " (in '" + extreme +
           "') mean|.|=" + format_double(abs_sum / static_cast<double>(count), 6);
}

}  // namespace detail

/// Runs the full regime. With `resume`, continues bit-identically from
/// the checkpoint's epoch (optimizer moments and RNG state restored),
/// as if the run had never stopped; `best` then covers the continued
/// epochs only, while `history` spans the whole run.
template <typename T>
TrainResult<T> train(ModelParams<T>& model, const Dataset& train_split, const Dataset& test_split,
                     const TrainConfig& tcfg, const std::type_identity_t<Checkpoint<T>>* resume = nullptr,
                     std::ostream* log = nullptr, const std::string& run_config_json = "") {
    tcfg.validate();
    train_split.validate();
    test_split.validate();
    if (train_split.size() == 0 || test_split.size() == 0) {
        throw DimensionError("train: both splits must be non-empty");
    }
    for (const auto l : train_split.labels) {
        if (l >= model.config.num_classes) {
            throw ConfigError("train: label " + std::to_string(l) + " exceeds num_classes " +
                              std::to_string(model.config.num_classes));
        }
    }

    AdamW<T> opt(model.parameters(),
                 AdamWConfig{tcfg.lr, tcfg.beta1, tcfg.beta2, tcfg.adam_eps, tcfg.weight_decay});
    Rng rng(tcfg.seed);
    std::int64_t start_epoch = 0;
    std::vector<EpochMetrics> history;
    if (resume) {
        opt = resume->restore_optimizer(model);
        rng.set_state(resume->rng_state);
        start_epoch = resume->epoch;
        history = resume->history;
    }

    TrainResult<T> result;
    double best_oa = -1.0;
    const double two_pi = 2.0 * 3.14159265358979323846;
    const auto n = train_split.size();

    for (std::int64_t epoch = start_epoch; epoch < tcfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<std::int64_t> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), std::int64_t{0});
        rng.shuffle(order);

        double loss_weighted_sum = 0.0;
        for (std::int64_t start = 0; start < n; start += tcfg.batch_size) {
            const auto end = std::min(n, start + tcfg.batch_size);
            std::vector<Tensor<T>> logits;
            std::vector<std::int64_t> labels;
            logits.reserve(static_cast<std::size_t>(end - start));
            labels.reserve(static_cast<std::size_t>(end - start));
            const auto batch_index = start / tcfg.batch_size;
            try {
                for (std::int64_t i = start; i < end; ++i) {
                    const auto idx = order[static_cast<std::size_t>(i)];
                    PointCloud cloud = train_split.clouds[static_cast<std::size_t>(idx)];
                    if (tcfg.augment_rotation) {
                        cloud = rotate_z(cloud, rng.uniform(0.0, two_pi));
                    }
                    logits.push_back(forward(cloud, model).logits);
                    labels.push_back(train_split.labels[static_cast<std::size_t>(idx)]);
                }
                Tensor<T> batch_logits = concat_rows(logits);
                Tensor<T> loss = cross_entropy(batch_logits, labels);
                const double loss_value = static_cast<double>(loss.item());
                if (!std::isfinite(loss_value)) {
                    throw NumericError("non-finite loss");
                }
                loss.backward();
                opt.step();
                opt.zero_grads();
                loss_weighted_sum += loss_value * static_cast<double>(end - start);
            } catch (const NumericError& e) {
                throw NumericError("train: aborted at epoch " + std::to_string(epoch + 1) + " batch " +
                                   std::to_string(batch_index) + ": " + e.what() + "; " +
                                   detail::param_stats(model));
            }
        }

        const double train_loss = loss_weighted_sum / static_cast<double>(n);
        const double oa = evaluate(model, test_split, tcfg.threads);
        if (oa < 0.0 || oa > 100.0) throw NumericError("train: accuracy out of range");
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        history.push_back(EpochMetrics{epoch + 1, train_loss, oa, wall});
        if (log) {
            (*log) << "epoch " << (epoch + 1) << "/" << tcfg.epochs << " loss " << format_double(train_loss, 6)
                   << " test_oa " << format_double(oa, 6) << "% (" << format_double(wall, 4) << "s)\n";
        }
        if (oa > best_oa) {
            best_oa = oa;
            result.best = Checkpoint<T>::capture(model, opt, tcfg, rng.state(), epoch + 1, history, run_config_json);
        }
        if (tcfg.early_stop_oa >= 0.0 && oa >= tcfg.early_stop_oa) break;
    }

    result.last = Checkpoint<T>::capture(model, opt, tcfg, rng.state(), history.empty() ? start_epoch : history.back().epoch,
                                         history, run_config_json);
    if (best_oa < 0.0) result.best = result.last;
    result.history = history;
    return result;
}

// =====================================================================
//  Metrics CSV
// =====================================================================

inline void write_history_csv(const std::vector<EpochMetrics>& history, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path + "' for writing");
    out << "epoch,train_loss,test_oa,wall_time_s\n";
    for (const auto& m : history) {
        out << m.epoch << ',' << format_double(m.train_loss) << ',' << format_double(m.test_oa) << ','
            << format_double(m.wall_time_s, 6) << '\n';
    }
    if (!out) throw FormatError("write failed for '" + path + "'");
}

inline std::vector<EpochMetrics> read_history_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open '" + path + "'");
    std::vector<EpochMetrics> out;
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line != "epoch,train_loss,test_oa,wall_time_s") {
                throw FormatError(path + ":1: unexpected header '" + line + "'");
            }
            continue;
        }
        EpochMetrics m;
        char* cursor = line.data();
        char* next = nullptr;
        m.epoch = std::strtoll(cursor, &next, 10);
        auto expect_comma = [&](char*& c) {
            if (*c != ',') throw FormatError(path + ":" + std::to_string(line_no) + ": malformed row");
            ++c;
        };
        cursor = next;
        expect_comma(cursor);
        m.train_loss = std::strtod(cursor, &next);
        cursor = next;
        expect_comma(cursor);
        m.test_oa = std::strtod(cursor, &next);
        cursor = next;
        expect_comma(cursor);
        m.wall_time_s = std::strtod(cursor, &next);
        out.push_back(m);
    }
    return out;
}

}  // namespace pointy
