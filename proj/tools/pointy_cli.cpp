// SPDX-License-Identifier: Apache-2.0
//
// pointy — batch CLI for the point-cloud transformer toolkit.
//
// Commands: synth, train, eval, zeroshot, report, params.
// Exit codes: 0 success, 2 usage/config error, 3 numeric failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pointy/pointy.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pointy;

// rewrites the points=... field in a synth:classes=... spec
static Dataset gen_synthetic_from_spec_with_points(const std::string& spec, std::int64_t n_points,
                                                   std::uint64_t seed);

namespace {

// ---------------------------------------------------------------------
//  Run configuration: preset < config file < command-line flag
// ---------------------------------------------------------------------

struct RunConfig {
    std::string preset = "small";
    ModelConfig model = ModelConfig::small();
    TrainConfig train;
    std::string data;     // synth:... or manifest:path
    std::string out_dir;  // resolved output directory

    json to_json() const {
        return json{{"preset", preset},
                    {"model", pointy::to_json(model)},
                    {"train", pointy::to_json(train)},
                    {"data", data},
                    {"out_dir", out_dir}};
    }
};

std::string out_root() {
    const char* env = std::getenv("POINTY_OUT_DIR");
    return env && *env ? env : "pointy_out";
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// Flag holders; only values the user actually passed override the config.
struct ModelFlags {
    std::int64_t dim = 0, heads = 0, layers = 0, patches = 0, points_per_patch = 0, n_points = 0;
    std::int64_t num_classes = 0, embed_hidden = 0, mlp_ratio = 0;
    std::string merge, activation, pos_embed, merge_schedule;
    bool no_positional = false, no_hierarchical = false, use_extras = false;
};

struct TrainFlags {
    double lr = 0;
    std::int64_t batch_size = 0, epochs = 0;
    bool no_augment = false;
    double early_stop_oa = 0;
};

void add_model_flags(CLI::App* cmd, ModelFlags& f) {
    cmd->add_option("--dim", f.dim, "embedding dimension D");
    cmd->add_option("--heads", f.heads, "attention heads H");
    cmd->add_option("--layers", f.layers, "transformer blocks");
    cmd->add_option("--patches", f.patches, "patch count P");
    cmd->add_option("--points-per-patch", f.points_per_patch, "kNN group size k");
    cmd->add_option("--n-points", f.n_points, "input points per cloud");
    cmd->add_option("--num-classes", f.num_classes, "classifier width (default: from data)");
    cmd->add_option("--embed-hidden", f.embed_hidden, "point MLP hidden width");
    cmd->add_option("--mlp-ratio", f.mlp_ratio, "block MLP expansion");
    cmd->add_option("--merge", f.merge, "token merging: addition|linear");
    cmd->add_option("--merge-schedule", f.merge_schedule, "per-block merge factors, e.g. 2,2,2,2,2,1");
    cmd->add_option("--activation", f.activation, "gelu|relu");
    cmd->add_option("--pos-embed", f.pos_embed, "positional embedding: mlp|table");
    cmd->add_flag("--no-positional", f.no_positional, "disable the positional embedding");
    cmd->add_flag("--no-hierarchical", f.no_hierarchical, "disable token merging");
    cmd->add_flag("--use-extras", f.use_extras, "feed normals/colors into the point MLP");
}

std::size_t flag_count(const CLI::App* cmd, const std::string& name) {
    const auto* opt = cmd->get_option_no_throw(name);
    return opt ? opt->count() : 0;
}

void apply_model_flags(const CLI::App* cmd, const ModelFlags& f, ModelConfig& m) {
    if (cmd->count("--dim")) m.embed_dim = f.dim;
    if (cmd->count("--heads")) m.heads = f.heads;
    if (cmd->count("--layers")) {
        m.layers = f.layers;
        m.merge_schedule.resize(static_cast<std::size_t>(f.layers), 1);
    }
    if (cmd->count("--patches")) m.patch_count = f.patches;
    if (cmd->count("--points-per-patch")) m.points_per_patch = f.points_per_patch;
    if (cmd->count("--n-points")) m.n_points = f.n_points;
    if (cmd->count("--num-classes")) m.num_classes = f.num_classes;
    if (cmd->count("--embed-hidden")) m.embed_hidden = f.embed_hidden;
    if (cmd->count("--mlp-ratio")) m.mlp_ratio = f.mlp_ratio;
    if (cmd->count("--merge")) m.merge_strategy = merge_strategy_from_string(f.merge);
    if (cmd->count("--merge-schedule")) {
        m.merge_schedule.clear();
        for (const auto& part : split_csv(f.merge_schedule)) m.merge_schedule.push_back(std::stoll(part));
    }
    if (cmd->count("--activation")) m.activation = activation_from_string(f.activation);
    if (cmd->count("--pos-embed")) m.pos_embed = pos_embed_from_string(f.pos_embed);
    if (f.no_positional) m.use_positional = false;
    if (f.no_hierarchical) m.hierarchical = false;
    if (f.use_extras) m.use_extras = true;
}

// ---------------------------------------------------------------------
//  Data specs
// ---------------------------------------------------------------------

Dataset load_data_spec(const std::string& spec, std::int64_t n_points, std::uint64_t seed) {
    if (spec.rfind("synth:", 0) == 0) {
        const std::string body = spec.substr(6);
        if (body == "default") {
            return gen_synthetic({"sphere", "cube", "cylinder", "plane"}, 200, 512, 0.02, seed);
        }
        if (body == "transfer") {
            return gen_synthetic({"cone", "torus", "helix"}, 200, 512, 0.02, seed);
        }
        std::vector<std::string> classes;
        std::int64_t per_class = 10, points = 512;
        double sigma = 0.02;
        std::uint64_t synth_seed = seed;
        std::istringstream in(body);
        std::string field;
        while (std::getline(in, field, ';')) {
            const auto eq = field.find('=');
            if (eq == std::string::npos) throw ConfigError("data spec: expected key=value in '" + field + "'");
            const std::string key = field.substr(0, eq), value = field.substr(eq + 1);
            if (key == "classes") {
                classes = split_csv(value);
            } else if (key == "per_class") {
                per_class = std::stoll(value);
            } else if (key == "points") {
                points = std::stoll(value);
            } else if (key == "sigma") {
                sigma = std::stod(value);
            } else if (key == "seed") {
                synth_seed = std::stoull(value);
            } else {
                throw ConfigError("data spec: unknown key '" + key + "'");
            }
        }
        if (classes.empty()) throw ConfigError("data spec: synth requires classes=...");
        return gen_synthetic(classes, per_class, points, sigma, synth_seed);
    }
    if (spec.rfind("manifest:", 0) == 0) {
        return load_manifest(spec.substr(9), n_points, seed);
    }
    throw ConfigError("data spec '" + spec + "' must start with synth: or manifest:");
}

// ---------------------------------------------------------------------
//  Typed command bodies
// ---------------------------------------------------------------------

void print_count_report(const char* title, const CountReport& report) {
    std::cout << title << "\n";
    for (const auto& [name, value] : report.items) {
        std::cout << "  " << name << ": " << value << "\n";
    }
    std::cout << "  total: " << report.total << "\n";
}

template <typename T>
int run_train(RunConfig cfg, bool dry_run, std::ostream& log) {
    cfg.model.validate();
    if (dry_run) {
        print_count_report("parameters", count_params(cfg.model));
        print_count_report("flops (per forward)", count_flops(cfg.model, cfg.model.n_points));
        return 0;
    }
    Dataset dataset = load_data_spec(cfg.data, cfg.model.n_points, cfg.train.seed);
    if (cfg.model.num_classes != dataset.num_classes()) {
        throw ConfigError("model expects " + std::to_string(cfg.model.num_classes) + " classes but data has " +
                          std::to_string(dataset.num_classes()) + " (set --num-classes or fix the data spec)");
    }
    const auto sp = split(dataset, 0.85, cfg.train.seed);

    fs::create_directories(cfg.out_dir);
    const auto config_path = (fs::path(cfg.out_dir) / "config.json").string();
    std::ofstream(config_path) << cfg.to_json().dump(2) << "\n";

    Rng rng(cfg.train.seed);
    ModelParams<T> model(cfg.model, rng);
    log << "training " << cfg.preset << " D=" << cfg.model.embed_dim << " on " << cfg.data << " ("
        << sp.train.size() << " train / " << sp.test.size() << " test, " << dataset.num_classes()
        << " classes, " << model.parameter_count() << " params)\n";

    const auto result = train(model, sp.train, sp.test, cfg.train, nullptr, &log, cfg.to_json().dump());

    save_checkpoint(result.best, (fs::path(cfg.out_dir) / "best.ckpt").string());
    save_checkpoint(result.last, (fs::path(cfg.out_dir) / "last.ckpt").string());
    write_history_csv(result.history, (fs::path(cfg.out_dir) / "history.csv").string());
    double best_oa = 0.0;
    for (const auto& m : result.history) best_oa = std::max(best_oa, m.test_oa);
    log << "best test OA " << format_double(best_oa, 6) << "% over " << result.history.size()
        << " epochs; artifacts in " << cfg.out_dir << "\n";
    return 0;
}

std::string checkpoint_precision(const std::string& path) {
    const auto header = checkpoint_header(path);
    return header.at("train").at("precision").get<std::string>();
}

template <typename T>
int run_eval(const std::string& ckpt_path, const std::string& data_spec, std::uint64_t seed, int threads) {
    const auto ckpt = load_checkpoint<T>(ckpt_path);
    const auto model = ckpt.restore_params();
    Dataset dataset = load_data_spec(data_spec, ckpt.model_config.n_points, seed);
    const double oa = evaluate(model, dataset, threads);
    std::cout << "overall accuracy: " << format_double(oa, 6) << "% (" << dataset.size() << " samples)\n";
    return 0;
}

template <typename T>
int run_zeroshot(const std::string& ckpt_path, const std::string& data_spec, const std::vector<std::int64_t>& ks,
                 std::uint64_t seed, int threads, const std::string& out_path,
                 const std::string& rankings_csv) {
    const auto ckpt = load_checkpoint<T>(ckpt_path);
    const auto model = ckpt.restore_params();
    Dataset target = load_data_spec(data_spec, ckpt.model_config.n_points, seed);
    const auto sp = split(target, 0.85, seed);
    const auto report = zeroshot_eval(model, sp.train, sp.test, ks, threads);

    json j{{"checkpoint", ckpt_path},
           {"target", data_spec},
           {"num_classes", report.num_classes},
           {"num_test_samples", report.num_test_samples}};
    for (const auto& [k, acc] : report.topk) {
        j["top" + std::to_string(k)] = acc;
    }
    const std::string text = j.dump(2);
    std::cout << text << "\n";
    if (!out_path.empty()) {
        fs::create_directories(fs::path(out_path).parent_path().empty() ? "." : fs::path(out_path).parent_path());
        std::ofstream(out_path) << text << "\n";
    }
    if (!rankings_csv.empty()) {
        std::ofstream csv(rankings_csv);
        csv << "sample,true_class";
        for (std::int64_t c = 0; c < report.num_classes; ++c) csv << ",rank" << c;
        csv << "\n";
        for (std::size_t i = 0; i < report.rankings.size(); ++i) {
            csv << i << ',' << sp.test.class_names[static_cast<std::size_t>(report.true_labels[i])];
            for (const auto c : report.rankings[i]) csv << ',' << sp.test.class_names[static_cast<std::size_t>(c)];
            csv << "\n";
        }
    }
    return 0;
}

int run_report_merge(const std::vector<std::string>& inputs, const std::string& out_path) {
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + out_path + "' for writing");
    out << "run,epoch,metric,value\n";
    for (const auto& input : inputs) {
        const auto history = read_history_csv(input);
        const std::string run = fs::path(input).stem().string();
        for (const auto& m : history) {
            out << run << ',' << m.epoch << ",train_loss," << format_double(m.train_loss) << "\n";
            out << run << ',' << m.epoch << ",test_oa," << format_double(m.test_oa) << "\n";
        }
    }
    return 0;
}

template <typename T>
int run_report_sweep(RunConfig cfg, const std::string& sweep, const std::string& out_path, std::ostream& log) {
    const auto eq = sweep.find('=');
    if (eq == std::string::npos || sweep.substr(0, eq) != "points") {
        throw ConfigError("--sweep expects points=v1,v2,... got '" + sweep + "'");
    }
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + out_path + "' for writing");
    out << "run,n_points,metric,value\n";
    for (const auto& value : split_csv(sweep.substr(eq + 1))) {
        const auto n_points = std::stoll(value);
        RunConfig point_cfg = cfg;
        point_cfg.model.n_points = n_points;
        if (point_cfg.data.rfind("synth:classes=", 0) != 0) {
            throw ConfigError("--sweep requires an explicit synth:classes=... data spec so point counts can vary");
        }
        Dataset dataset = gen_synthetic_from_spec_with_points(point_cfg.data, n_points, point_cfg.train.seed);
        const auto sp = split(dataset, 0.85, point_cfg.train.seed);
        Rng rng(point_cfg.train.seed);
        ModelParams<T> model(point_cfg.model, rng);
        log << "sweep n_points=" << n_points << "\n";
        const auto result = train(model, sp.train, sp.test, point_cfg.train, nullptr, &log);
        double best_oa = 0.0;
        for (const auto& m : result.history) best_oa = std::max(best_oa, m.test_oa);
        out << "points_" << n_points << ',' << n_points << ",best_test_oa," << format_double(best_oa) << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pointy — lightweight point-cloud transformer toolkit"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    int threads = 1;
    std::string precision = "f32";
    std::string config_path;
    app.add_option("--seed", seed, "global seed")->capture_default_str();
    app.add_option("--threads", threads, "worker threads for evaluation paths")->capture_default_str();
    app.add_option("--precision", precision, "f32|f64")->check(CLI::IsMember({"f32", "f64"}));
    app.add_option("--config", config_path, "JSON run config (overridden by explicit flags)");

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "generate synthetic PCF files plus a manifest");
    synth->fallthrough();
    std::string synth_classes, synth_out;
    std::int64_t synth_per_class = 10, synth_points = 512;
    double synth_sigma = 0.02;
    synth->add_option("--classes", synth_classes, "comma-separated class names")->required();
    synth->add_option("--per-class", synth_per_class, "samples per class")->capture_default_str();
    synth->add_option("--points", synth_points, "points per cloud")->capture_default_str();
    synth->add_option("--sigma", synth_sigma, "coordinate noise")->capture_default_str();
    synth->add_option("--out", synth_out, "output directory")->required();

    // ---- train ----
    auto* train_cmd = app.add_subcommand("train", "train a classifier under the fixed regime");
    train_cmd->fallthrough();
    std::string train_preset, train_data, train_out;
    ModelFlags train_model_flags;
    TrainFlags train_train_flags;
    bool dry_run = false;
    train_cmd->add_option("--preset", train_preset, "small|base");
    train_cmd->add_option("--data", train_data, "synth:... or manifest:path");
    train_cmd->add_option("--out", train_out, "run directory (default $POINTY_OUT_DIR/train_seed<seed>)");
    train_cmd->add_option("--lr", train_train_flags.lr, "learning rate (fixed, no schedule)");
    train_cmd->add_option("--batch-size", train_train_flags.batch_size, "batch size");
    train_cmd->add_option("--epochs", train_train_flags.epochs, "epochs");
    train_cmd->add_option("--early-stop-oa", train_train_flags.early_stop_oa, "stop once test OA reaches this");
    train_cmd->add_flag("--no-augment", train_train_flags.no_augment, "disable z-rotation augmentation");
    train_cmd->add_flag("--dry-run", dry_run, "print parameter/FLOP accounting and exit");
    add_model_flags(train_cmd, train_model_flags);

    // ---- eval ----
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    eval_cmd->fallthrough();
    std::string eval_ckpt, eval_data;
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint path")->required();
    eval_cmd->add_option("--data", eval_data, "synth:... or manifest:path")->required();

    // ---- zeroshot ----
    auto* zs_cmd = app.add_subcommand("zeroshot", "prototype-based zero-shot transfer");
    zs_cmd->fallthrough();
    std::string zs_ckpt, zs_data, zs_topk = "1,3,5", zs_out, zs_rankings;
    zs_cmd->add_option("--checkpoint", zs_ckpt, "pre-trained checkpoint")->required();
    zs_cmd->add_option("--data", zs_data, "target dataset spec")->required();
    zs_cmd->add_option("--topk", zs_topk, "comma-separated k values")->capture_default_str();
    zs_cmd->add_option("--out", zs_out, "JSON report path");
    zs_cmd->add_option("--rankings", zs_rankings, "optional per-sample ranking CSV");

    // ---- report ----
    auto* report_cmd = app.add_subcommand("report", "merge histories / run ablation sweeps");
    report_cmd->fallthrough();
    std::string report_inputs, report_out, report_sweep, report_preset, report_data;
    ModelFlags report_model_flags;
    TrainFlags report_train_flags;
    report_cmd->add_option("--inputs", report_inputs, "comma-separated history CSVs");
    report_cmd->add_option("--out", report_out, "output CSV")->required();
    report_cmd->add_option("--sweep", report_sweep, "ablation sweep, e.g. points=256,512,1024,2048");
    report_cmd->add_option("--preset", report_preset, "small|base (sweep only)");
    report_cmd->add_option("--data", report_data, "data spec (sweep only)");
    report_cmd->add_option("--epochs", report_train_flags.epochs, "epochs per sweep point");
    report_cmd->add_option("--lr", report_train_flags.lr, "learning rate (sweep only)");
    report_cmd->add_option("--batch-size", report_train_flags.batch_size, "batch size (sweep only)");
    report_cmd->add_option("--early-stop-oa", report_train_flags.early_stop_oa, "early stop (sweep only)");
    add_model_flags(report_cmd, report_model_flags);

    // ---- params ----
    auto* params_cmd = app.add_subcommand("params", "parameter and FLOP accounting");
    params_cmd->fallthrough();
    std::string params_preset;
    ModelFlags params_model_flags;
    std::int64_t params_n_points = 0;
    params_cmd->add_option("--preset", params_preset, "small|base");
    params_cmd->add_option("--flops-points", params_n_points, "input resolution for FLOP accounting");
    add_model_flags(params_cmd, params_model_flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 2;
    }

    try {
        // resolve the run config: preset < config file < flags
        auto resolve = [&](const std::string& preset_flag, const CLI::App* cmd, const ModelFlags& mf,
                           const TrainFlags& tf, const std::string& data_flag,
                           const std::string& out_flag) -> RunConfig {
            RunConfig cfg;
            json file_cfg;
            if (!config_path.empty()) {
                std::ifstream in(config_path);
                if (!in) throw ConfigError("cannot open config '" + config_path + "'");
                in >> file_cfg;
            }
            std::string preset_name = "small";
            if (file_cfg.contains("preset")) preset_name = file_cfg["preset"].get<std::string>();
            if (!preset_flag.empty()) preset_name = preset_flag;
            cfg.preset = preset_name;
            cfg.model = ModelConfig::preset(preset_name);
            if (file_cfg.contains("model")) cfg.model = model_config_from_json(file_cfg["model"]);
            if (file_cfg.contains("train")) cfg.train = train_config_from_json(file_cfg["train"]);
            if (file_cfg.contains("data")) cfg.data = file_cfg["data"].get<std::string>();
            if (file_cfg.contains("out_dir")) cfg.out_dir = file_cfg["out_dir"].get<std::string>();

            apply_model_flags(cmd, mf, cfg.model);
            if (flag_count(cmd, "--lr")) cfg.train.lr = tf.lr;
            if (flag_count(cmd, "--batch-size")) cfg.train.batch_size = tf.batch_size;
            if (flag_count(cmd, "--epochs")) cfg.train.epochs = tf.epochs;
            if (flag_count(cmd, "--early-stop-oa")) cfg.train.early_stop_oa = tf.early_stop_oa;
            if (tf.no_augment) cfg.train.augment_rotation = false;
            if (app.count("--seed")) cfg.train.seed = seed;
            if (app.count("--precision")) cfg.train.precision = precision;
            if (app.count("--threads")) cfg.train.threads = threads;
            if (!data_flag.empty()) cfg.data = data_flag;
            if (!out_flag.empty()) cfg.out_dir = out_flag;
            return cfg;
        };

        if (*synth) {
            const auto classes = split_csv(synth_classes);
            const auto ds = gen_synthetic(classes, synth_per_class, synth_points, synth_sigma, seed);
            fs::create_directories(synth_out);
            std::vector<ManifestRow> rows;
            for (std::int64_t i = 0; i < ds.size(); ++i) {
                const auto& cloud = ds.clouds[static_cast<std::size_t>(i)];
                const std::string name = cloud.id + ".pcf";
                save_pcf(cloud, (fs::path(synth_out) / name).string());
                rows.push_back({name, ds.class_names[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(i)])]});
            }
            write_manifest(rows, (fs::path(synth_out) / "manifest.csv").string());
            std::cout << "wrote " << ds.size() << " clouds + manifest to " << synth_out << "\n";
            return 0;
        }

        if (*train_cmd) {
            RunConfig cfg = resolve(train_preset, train_cmd, train_model_flags, train_train_flags, train_data,
                                    train_out);
            if (cfg.data.empty() && !dry_run) throw ConfigError("train: --data (or a config file) is required");
            if (cfg.out_dir.empty()) {
                cfg.out_dir = (fs::path(out_root()) / ("train_seed" + std::to_string(cfg.train.seed))).string();
            }
            if (!train_cmd->count("--num-classes") && !cfg.data.empty()) {
                // classifier width follows the data unless pinned explicitly
                Dataset probe = load_data_spec(cfg.data, cfg.model.n_points, cfg.train.seed);
                cfg.model.num_classes = probe.num_classes();
            }
            return cfg.train.precision == "f64" ? run_train<double>(cfg, dry_run, std::cout)
                                                : run_train<float>(cfg, dry_run, std::cout);
        }

        if (*eval_cmd) {
            const auto prec = checkpoint_precision(eval_ckpt);
            return prec == "f64" ? run_eval<double>(eval_ckpt, eval_data, seed, threads)
                                 : run_eval<float>(eval_ckpt, eval_data, seed, threads);
        }

        if (*zs_cmd) {
            std::vector<std::int64_t> ks;
            for (const auto& part : split_csv(zs_topk)) ks.push_back(std::stoll(part));
            const auto prec = checkpoint_precision(zs_ckpt);
            return prec == "f64"
                       ? run_zeroshot<double>(zs_ckpt, zs_data, ks, seed, threads, zs_out, zs_rankings)
                       : run_zeroshot<float>(zs_ckpt, zs_data, ks, seed, threads, zs_out, zs_rankings);
        }

        if (*report_cmd) {
            if (!report_sweep.empty()) {
                RunConfig cfg = resolve(report_preset, report_cmd, report_model_flags, report_train_flags,
                                        report_data, "");
                if (cfg.data.empty()) throw ConfigError("report --sweep requires --data");
                return cfg.train.precision == "f64"
                           ? run_report_sweep<double>(cfg, report_sweep, report_out, std::cout)
                           : run_report_sweep<float>(cfg, report_sweep, report_out, std::cout);
            }
            if (report_inputs.empty()) throw ConfigError("report: provide --inputs or --sweep");
            return run_report_merge(split_csv(report_inputs), report_out);
        }

        if (*params_cmd) {
            RunConfig cfg = resolve(params_preset, params_cmd, params_model_flags, TrainFlags{}, "", "");
            cfg.model.validate();
            print_count_report("parameters", count_params(cfg.model));
            const auto flop_points = params_cmd->count("--flops-points") ? params_n_points : cfg.model.n_points;
            print_count_report("flops (per forward)", count_flops(cfg.model, flop_points));
            return 0;
        }
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 2;
    } catch (const DimensionError& e) {
        std::cerr << "dimension error: " << e.what() << "\n";
        return 2;
    } catch (const IndexError& e) {
        std::cerr << "index error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

static Dataset gen_synthetic_from_spec_with_points(const std::string& spec, std::int64_t n_points,
                                                   std::uint64_t seed) {
    std::string body = spec.substr(6);
    std::string rebuilt = "synth:";
    bool replaced = false;
    std::istringstream in(body);
    std::string field;
    bool first = true;
    while (std::getline(in, field, ';')) {
        if (field.rfind("points=", 0) == 0) {
            field = "points=" + std::to_string(n_points);
            replaced = true;
        }
        rebuilt += (first ? "" : ";") + field;
        first = false;
    }
    if (!replaced) rebuilt += ";points=" + std::to_string(n_points);
    return load_data_spec(rebuilt, n_points, seed);
}
