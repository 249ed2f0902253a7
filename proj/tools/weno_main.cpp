// Command-line front end: dataset generation, training, evaluation, and the
// component-ablation grid. Every command is a pure function of its flags,
// config file, dataset bytes, and seed; the effective configuration is
// echoed into each output directory.
//
// Exit status: 0 success, 1 runtime failure, 2 usage error.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "weno/config_json.hpp"
#include "weno/dataset.hpp"
#include "weno/eval.hpp"
#include "weno/training.hpp"
#include "weno/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace weno;

namespace {

// Configuration and flag-validation mistakes; mapped to exit status 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Runs the assembly/validation phase of a command: argument-level failures
// become usage errors rather than runtime failures.
template <typename F>
void usage_phase(F&& f) {
    try {
        f();
    } catch (const UsageError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

struct ConfigFile {
    bool has_dataset = false;
    GenSpec dataset;
    bool has_train = false;
    TrainConfig train;
    std::string out;
    std::string data;
};

ConfigFile load_config_file(const std::string& path) {
    ConfigFile cf;
    if (path.empty()) return cf;
    const auto bytes = read_file(path);
    json j;
    try {
        j = json::parse(bytes.begin(), bytes.end());
    } catch (const json::parse_error& e) {
        throw UsageError("config file is not valid JSON: " + path + " (" + std::string(e.what()) +
                         ")");
    }
    if (!j.is_object()) throw UsageError("config file must hold a JSON object: " + path);
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        if (k != "dataset" && k != "train" && k != "out" && k != "data")
            throw UsageError("config: unknown key '" + k + "' in config file " + path);
    }
    if (j.contains("dataset")) {
        cf.dataset = gen_spec_from_json(j.at("dataset"), /*strict=*/true);
        cf.has_dataset = true;
    }
    if (j.contains("train")) {
        cf.train = train_config_from_json(j.at("train"), /*strict=*/true);
        cf.has_train = true;
    }
    if (j.contains("out")) cf.out = j.at("out").get<std::string>();
    if (j.contains("data")) cf.data = j.at("data").get<std::string>();
    return cf;
}

std::string resolve(const std::string& flag_value, const std::string& file_value,
                    const char* what) {
    if (!flag_value.empty()) return flag_value;
    if (!file_value.empty()) return file_value;
    throw UsageError(std::string("missing ") + what);
}

void write_text(const std::string& path, const std::string& text) {
    write_file_atomic(path, text.data(), text.size());
}

void echo_config(const std::string& out_dir, json effective) {
    write_text((fs::path(out_dir) / "effective-config.json").string(),
               effective.dump(2) + "\n");
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct AucReport {
    double teacher_bag = 0.0;
    double teacher_attention_instance = 0.0;
    double student_instance = 0.0;
    double student_bag = 0.0;
};

AucReport evaluate_all(const std::vector<Bag>& split, ParameterStore<float>& store,
                       const ModelConfig& model) {
    AucReport r;
    r.teacher_bag = evaluate_bag_level(split, store, model, BagScoreMode::teacher);
    r.teacher_attention_instance =
        evaluate_instance_level(split, store, model, InstanceScoreMode::teacher_attention);
    r.student_instance = evaluate_instance_level(split, store, model, InstanceScoreMode::student);
    r.student_bag = evaluate_bag_level(split, store, model, BagScoreMode::student_maxpool);
    return r;
}

void print_auc_report(const std::string& heading, const AucReport& r) {
    std::cout << heading << "\n"
              << "  teacher-bag-auc                 " << format_g9(r.teacher_bag) << "\n"
              << "  teacher-attention-instance-auc  " << format_g9(r.teacher_attention_instance)
              << "\n"
              << "  student-instance-auc            " << format_g9(r.student_instance) << "\n"
              << "  student-bag-auc                 " << format_g9(r.student_bag) << "\n";
}

std::string aucs_csv(const AucReport& r) {
    return "teacher-bag-auc,teacher-attention-instance-auc,student-instance-auc,student-bag-auc\n" +
           format_g9(r.teacher_bag) + "," + format_g9(r.teacher_attention_instance) + "," +
           format_g9(r.student_instance) + "," + format_g9(r.student_bag) + "\n";
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
    std::string config_path, out;
    std::optional<double> positive_ratio, separation;
    std::optional<long> bags, instances_per_bag, dim;
    std::optional<unsigned long long> seed;
};

int cmd_generate(const GenerateArgs& args) {
    GenSpec spec;
    std::string out;
    usage_phase([&] {
        const ConfigFile cf = load_config_file(args.config_path);
        if (cf.has_dataset) spec = cf.dataset;
        if (args.positive_ratio) spec.positive_ratio = *args.positive_ratio;
        if (args.bags) spec.train_bags = *args.bags;
        if (args.instances_per_bag) spec.instances_per_bag = *args.instances_per_bag;
        if (args.dim) spec.dim = *args.dim;
        if (args.separation) spec.separation = *args.separation;
        if (args.seed) spec.seed = *args.seed;
        out = resolve(args.out, cf.out, "--out");
        spec.validate();
    });

    const Dataset ds = generate_synthetic(spec);
    save_dataset(ds, out);
    json effective;
    effective["command"] = "generate";
    effective["dataset"] = gen_spec_to_json(spec);
    effective["out"] = out;
    echo_config(out, effective);

    const auto count_pos = [](const std::vector<Bag>& bags) {
        return std::count_if(bags.begin(), bags.end(), [](const Bag& b) { return b.label == 1; });
    };
    std::cout << "wrote MILDS-1 dataset to " << out << "\n"
              << "  dim " << ds.dim << ", instances per bag " << spec.instances_per_bag << "\n"
              << "  train " << ds.train.size() << " bags (" << count_pos(ds.train)
              << " positive)\n"
              << "  valid " << ds.valid.size() << " bags (" << count_pos(ds.valid)
              << " positive)\n"
              << "  test  " << ds.test.size() << " bags (" << count_pos(ds.test)
              << " positive)\n";
    for (const auto& w : ds.warnings) std::cout << "  warning: " << w << "\n";
    return 0;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
    std::string config_path, data, out, mode = "weno";
    std::optional<long> epochs;
    std::optional<double> lr, hpm_threshold;
    std::optional<long> hpm_warmup;
    std::optional<unsigned long long> seed;
    bool no_distill = false, no_share = false, no_hpm = false;
};

TrainConfig assemble_train_config(const TrainArgs& args, const ConfigFile& cf) {
    TrainConfig tc;
    if (cf.has_train) tc = cf.train;
    if (args.epochs) tc.epochs = *args.epochs;
    if (args.lr) tc.learning_rate = *args.lr;
    if (args.hpm_threshold) tc.hpm.threshold = *args.hpm_threshold;
    if (args.hpm_warmup) tc.hpm.warmup_epochs = *args.hpm_warmup;
    if (args.seed) tc.seed = *args.seed;
    if (args.mode == "baseline") tc.flags = {false, false, false};
    if (args.no_distill) tc.flags.distillation = false;
    if (args.no_share) tc.flags.shared_encoder = false;
    if (args.no_hpm) tc.flags.hpm = false;
    tc.validate();
    return tc;
}

RunHooks file_hooks(const std::string& out, long total_epochs) {
    RunHooks hooks;
    hooks.on_epoch = [](const EpochMetrics& m) {
        std::cout << "epoch " << m.epoch << ": teacher loss " << format_g9(m.teacher_loss)
                  << ", student loss " << format_g9(m.student_loss) << ", student instance AUC "
                  << format_g9(m.student_instance_auc) << ", drops " << m.hpm_drop_count << "\n";
    };
    hooks.on_checkpoint = [out, total_epochs](const CheckpointRecord& record) {
        const std::string name = record.epoch == total_epochs
                                     ? "checkpoint.ckpt"
                                     : "checkpoint-epoch-" + std::to_string(record.epoch) + ".ckpt";
        save_checkpoint(record, (fs::path(out) / name).string());
    };
    return hooks;
}

int cmd_train(const TrainArgs& args) {
    TrainConfig tc;
    std::string data_path, out;
    usage_phase([&] {
        const ConfigFile cf = load_config_file(args.config_path);
        tc = assemble_train_config(args, cf);
        data_path = resolve(args.data, cf.data, "--data");
        out = resolve(args.out, cf.out, "--out");
    });

    const Dataset ds = load_dataset(data_path);
    fs::create_directories(out);
    json effective;
    effective["command"] = "train";
    effective["data"] = data_path;
    effective["mode"] = args.mode;
    effective["train"] = train_config_to_json(tc);
    effective["out"] = out;
    echo_config(out, effective);

    const RunHooks hooks = file_hooks(out, tc.epochs);
    const RunResult result = args.mode == "supervised" ? run_fully_supervised(ds, tc, hooks)
                                                       : run_weno(ds, tc, hooks);
    write_metrics_csv(result.metrics, (fs::path(out) / "metrics.csv").string());

    ParameterStore<float> store = store_from_checkpoint(result.checkpoint);
    print_auc_report("final valid-split AUCs:",
                     evaluate_all(ds.valid, store, result.checkpoint.model_config));
    std::cout << "metrics: " << (fs::path(out) / "metrics.csv").string() << "\n"
              << "checkpoint: " << (fs::path(out) / "checkpoint.ckpt").string() << "\n";
    return 0;
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
    std::string config_path, data, checkpoint, split = "test", out;
};

int cmd_eval(const EvalArgs& args) {
    std::string data_path, ckpt_path;
    usage_phase([&] {
        const ConfigFile cf = load_config_file(args.config_path);
        data_path = resolve(args.data, cf.data, "--data");
        ckpt_path = args.checkpoint;
        if (ckpt_path.empty()) throw UsageError("missing --checkpoint");
    });

    const Dataset ds = load_dataset(data_path);
    const CheckpointRecord record = load_checkpoint(ckpt_path);
    if (record.model_config.encoder.input_dim != ds.dim)
        throw std::runtime_error(
            "checkpoint input dimension " + std::to_string(record.model_config.encoder.input_dim) +
            " does not match dataset dimension " + std::to_string(ds.dim));

    ParameterStore<float> store = store_from_checkpoint(record);
    const std::vector<Bag>& split = ds.split(args.split);
    const AucReport report = evaluate_all(split, store, record.model_config);
    print_auc_report(args.split + "-split AUCs (epoch " + std::to_string(record.epoch) + "):",
                     report);

    if (!args.out.empty()) {
        fs::create_directories(args.out);
        write_text((fs::path(args.out) / "aucs.csv").string(), aucs_csv(report));
        export_scores(split, store, record.model_config,
                      (fs::path(args.out) / "scores.csv").string());
        json effective;
        effective["command"] = "eval";
        effective["data"] = data_path;
        effective["checkpoint"] = ckpt_path;
        effective["split"] = args.split;
        effective["out"] = args.out;
        echo_config(args.out, effective);
        std::cout << "report: " << (fs::path(args.out) / "aucs.csv").string() << "\n"
                  << "scores: " << (fs::path(args.out) / "scores.csv").string() << "\n";
    }
    return 0;
}

// ------------------------------------------------------------------ ablate

struct AblateArgs {
    TrainArgs train;
    std::vector<unsigned long long> seeds = {1, 2, 3};
};

std::string row_slug(const std::string& name) {
    if (name == "none") return "none";
    if (name == "+D") return "d";
    if (name == "+D+S") return "ds";
    return "dsh";
}

int cmd_ablate(const AblateArgs& args) {
    TrainConfig base;
    std::string data_path, out;
    usage_phase([&] {
        const ConfigFile cf = load_config_file(args.train.config_path);
        base = assemble_train_config(args.train, cf);
        data_path = resolve(args.train.data, cf.data, "--data");
        out = resolve(args.train.out, cf.out, "--out");
        if (args.seeds.empty()) throw UsageError("--seeds needs at least one seed");
        if (args.train.mode != "weno")
            throw UsageError("ablate runs the weno pipeline; --mode is not supported here");
    });

    const Dataset ds = load_dataset(data_path);
    fs::create_directories(out);
    json effective;
    effective["command"] = "ablate";
    effective["data"] = data_path;
    effective["train"] = train_config_to_json(base);
    effective["seeds"] = args.seeds;
    effective["out"] = out;
    echo_config(out, effective);

    // rows: none, +D, +D+S, +D+S+H; the trained branch supplies the AUCs
    std::vector<std::string> names;
    std::vector<std::vector<double>> instance_aucs(4), bag_aucs(4);
    for (const auto seed : args.seeds) {
        TrainConfig cfg = base;
        cfg.seed = seed;
        const auto runs = run_ablation(ds, cfg);
        for (std::size_t row = 0; row < runs.size(); ++row) {
            const AblationRun& run = runs[row];
            if (names.size() < runs.size()) names.push_back(run.name);
            const EpochMetrics& last = run.result.metrics.back();
            const double inst = run.flags.distillation ? last.student_instance_auc
                                                       : last.teacher_attention_instance_auc;
            const double bag =
                run.flags.distillation ? last.student_bag_auc : last.teacher_bag_auc;
            instance_aucs[row].push_back(inst);
            bag_aucs[row].push_back(bag);
            write_metrics_csv(run.result.metrics,
                              (fs::path(out) / ("metrics-" + row_slug(run.name) + "-seed" +
                                                std::to_string(seed) + ".csv"))
                                  .string());
        }
    }

    std::string csv = "configuration,instance-auc,bag-auc\n";
    std::string text = "configuration  instance-auc  bag-auc\n";
    std::cout << "median AUCs over " << args.seeds.size() << " seed(s):\n" << text;
    for (std::size_t row = 0; row < names.size(); ++row) {
        const double inst = median(instance_aucs[row]);
        const double bag = median(bag_aucs[row]);
        csv += names[row] + "," + format_g9(inst) + "," + format_g9(bag) + "\n";
        std::string line = names[row];
        line.resize(15, ' ');
        line += format_g9(inst);
        line.resize(15 + 14, ' ');
        line += format_g9(bag);
        line += "\n";
        text += line;
        std::cout << line;
    }
    write_text((fs::path(out) / "ablation.csv").string(), csv);
    write_text((fs::path(out) / "ablation.txt").string(), text);
    std::cout << "table: " << (fs::path(out) / "ablation.csv").string() << "\n";
    return 0;
}

void add_train_flags(CLI::App* cmd, TrainArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON config file (flags override it)");
    cmd->add_option("--data", args.data, "MILDS-1 dataset directory");
    cmd->add_option("--epochs", args.epochs, "total training epochs");
    cmd->add_option("--lr", args.lr, "SGD learning rate (default 0.001)");
    cmd->add_option("--hpm-threshold", args.hpm_threshold,
                    "drop positive-bag instances whose student score exceeds this");
    cmd->add_option("--hpm-warmup", args.hpm_warmup, "epochs before mining activates");
    cmd->add_option("--seed", args.seed, "training seed");
    cmd->add_flag("--no-distill", args.no_distill, "disable the student branch");
    cmd->add_flag("--no-share", args.no_share, "give the student its own encoder");
    cmd->add_flag("--no-hpm", args.no_hpm, "disable hard-positive mining");
    cmd->add_option("--out", args.out, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"weakly-supervised MIL distillation"};
    app.require_subcommand(1);

    GenerateArgs gen_args;
    CLI::App* gen = app.add_subcommand("generate", "write a synthetic MILDS-1 dataset");
    gen->add_option("--config", gen_args.config_path, "JSON config file (flags override it)");
    gen->add_option("--out", gen_args.out, "output directory");
    gen->add_option("--positive-ratio", gen_args.positive_ratio,
                    "fraction of positive instances inside a positive bag");
    gen->add_option("--bags", gen_args.bags, "number of training bags");
    gen->add_option("--instances-per-bag", gen_args.instances_per_bag, "instances per bag");
    gen->add_option("--dim", gen_args.dim, "feature dimension");
    gen->add_option("--separation", gen_args.separation, "positive-mean distance from origin");
    gen->add_option("--seed", gen_args.seed, "generation seed");

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "train on a MILDS-1 dataset");
    add_train_flags(train, train_args);
    train->add_option("--mode", train_args.mode, "training pipeline")
        ->check(CLI::IsMember({"weno", "baseline", "supervised"}));

    EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    eval->add_option("--config", eval_args.config_path, "JSON config file (flags override it)");
    eval->add_option("--data", eval_args.data, "MILDS-1 dataset directory");
    eval->add_option("--checkpoint", eval_args.checkpoint, "checkpoint file");
    eval->add_option("--split", eval_args.split, "dataset split to evaluate")
        ->check(CLI::IsMember({"valid", "test"}));
    eval->add_option("--out", eval_args.out, "report directory (optional)");

    AblateArgs ablate_args;
    CLI::App* ablate = app.add_subcommand("ablate", "run the four-component comparison grid");
    add_train_flags(ablate, ablate_args.train);
    ablate->add_option("--seeds", ablate_args.seeds, "seeds for the median (default 1 2 3)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // prints help, exits 0
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints the parse error
        return 2;
    }

    try {
        if (gen->parsed()) return cmd_generate(gen_args);
        if (train->parsed()) return cmd_train(train_args);
        if (eval->parsed()) return cmd_eval(eval_args);
        if (ablate->parsed()) return cmd_ablate(ablate_args);
        std::cerr << "error: no command given\n";
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
