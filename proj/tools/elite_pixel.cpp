#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "elite/checkpoint.hpp"
#include "elite/errors.hpp"
#include "elite/metrics.hpp"
#include "elite/parallel.hpp"
#include "elite/selector.hpp"
#include "elite/stack_io.hpp"
#include "elite/synth.hpp"
#include "elite/train.hpp"

namespace fs = std::filesystem;
using namespace elite;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(FormatErrc::io_failure, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text) || !out.flush()) throw FormatError(FormatErrc::io_failure, "cannot write " + path.string());
}

// A bad option value is the caller's mistake, so it exits as a usage error.
template <typename Config>
void validated_option(const Config& cfg) {
    try {
        cfg.validate();
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
}

std::string fixed2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

// --- synth ------------------------------------------------------------------------

struct SynthArgs {
    std::string spec;
    std::string out;
    std::optional<std::uint64_t> seed;
};

int run_synth(const SynthArgs& a) {
    auto spec = synth::parse_scene_spec(read_text(a.spec));
    if (a.seed) {
        // Re-parse so a layout block is regenerated from the overriding seed.
        auto j = nlohmann::json::parse(read_text(a.spec));
        j["seed"] = *a.seed;
        spec = synth::parse_scene_spec(j.dump());
    }
    const auto scene = synth::generate_scene(spec);
    io::write_stack(scene.stack, a.out + ".tsstack");
    io::write_mask(scene.truth, a.out + ".mask");

    const auto hist = synth::class_histogram(spec.region);
    std::cout << "seed " << spec.seed << "\n";
    std::cout << "scene " << spec.height << "x" << spec.width << ", " << spec.epochs << " epochs\n";
    for (std::size_t c = 0; c < synth::kClassCount; ++c) {
        std::cout << "  " << synth::to_string(static_cast<synth::ScatterClass>(c)) << " " << hist[c] << "\n";
    }
    std::cout << "wrote " << a.out << ".tsstack and " << a.out << ".mask\n";
    return 0;
}

// --- label ------------------------------------------------------------------------

struct LabelArgs {
    std::string stack;
    std::string config;
    std::string out;
    std::optional<double> ps_threshold;
    std::optional<double> ds_threshold;
    std::optional<double> alpha;
    std::optional<std::string> rule;
};

selector::SelectorConfig selector_config(const LabelArgs& a) {
    selector::SelectorConfig cfg;
    if (!a.config.empty()) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_text(a.config));
        } catch (const nlohmann::json::parse_error& e) {
            throw InvalidArgument(std::string("selector config is not valid JSON: ") + e.what());
        }
        for (const auto& [key, value] : j.items()) {
            if (key == "ps_threshold") cfg.ps_threshold = value.get<double>();
            else if (key == "ds_threshold") cfg.ds_threshold = value.get<double>();
            else if (key == "alpha") cfg.alpha = value.get<double>();
            else if (key == "rule") cfg.rule = selector::acceptance_rule_from_string(value.get<std::string>());
            else throw InvalidArgument("unknown selector config key '" + key + "'");
        }
    }
    if (a.ps_threshold) cfg.ps_threshold = *a.ps_threshold;
    if (a.ds_threshold) cfg.ds_threshold = *a.ds_threshold;
    if (a.alpha) cfg.alpha = *a.alpha;
    if (a.rule) cfg.rule = selector::acceptance_rule_from_string(*a.rule);
    validated_option(cfg);
    return cfg;
}

int run_label(const LabelArgs& a) {
    const auto cfg = selector_config(a);
    const auto stack = io::read_stack(a.stack);
    const auto result = selector::elite_labels(stack, cfg);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    io::write_mask(result.mask, a.out);

    const auto elite = result.mask.elite_count();
    const auto valid = result.mask.valid_count();
    std::cout << "PS " << result.ps_count << "\n";
    std::cout << "DS candidates " << result.ds_count << ", accepted " << result.ds_accepted << "\n";
    std::cout << "elite " << elite << " of " << valid << " valid pixels\n";
    if (valid > 0) std::cout << "density " << metrics::pixel_density(elite, valid).text(metrics::Rounding::truncate) << "\n";
    return 0;
}

// --- train ------------------------------------------------------------------------

struct TrainArgs {
    std::vector<std::string> stacks;
    std::vector<std::string> masks;
    std::string hyperparams;
    std::string out;
    std::string history;
    std::string transfer_from;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> max_epochs;
};

int run_train(const TrainArgs& a) {
    if (a.stacks.size() != a.masks.size()) {
        throw UsageError("--stack and --mask must be given the same number of times");
    }
    train::HyperParams hp;
    if (!a.hyperparams.empty()) hp = train::parse_hyperparams(read_text(a.hyperparams));
    if (a.seed) hp.seed = *a.seed;
    if (a.max_epochs) hp.max_epochs = *a.max_epochs;
    validated_option(hp);
    const auto mode = io::feature_mode_from_string(hp.features);

    train::LabeledPatches all;
    for (std::size_t i = 0; i < a.stacks.size(); ++i) {
        const auto stack = io::read_stack(a.stacks[i]);
        const auto mask = io::read_mask(a.masks[i]);
        auto part = train::prepare_patches(stack, mask, hp.time_steps, mode);
        if (i == 0) all = std::move(part);
        else all.append(part);
    }
    const auto [train_idx, val_idx] = train::split_train_val(all.size(), hp.train_ratio, hp.seed);
    const auto train_set = all.select(train_idx);
    const auto val_set = all.select(val_idx);
    std::cout << "patches " << all.size() << ": " << train_set.size() << " train, " << val_set.size()
              << " validation; " << hp.time_steps << " time steps, " << hp.features << " features\n";

    const auto on_epoch = [](const train::EpochRecord& r) {
        std::printf("epoch %zu  train_loss %.6f  val_loss %.6f  val_f1 %.4f\n", r.epoch, r.train_loss, r.val_loss,
                    r.val_f1);
        std::fflush(stdout);
    };

    const fs::path history_path = a.history.empty() ? fs::path(a.out).replace_extension(".history.csv") : fs::path(a.history);
    try {
        train::FitResult result;
        if (!a.transfer_from.empty()) {
            result = train::transfer(nn::load_checkpoint(a.transfer_from), train_set, val_set, hp, on_epoch);
        } else {
            result = train::fit(nn::init_params(hp.model_config(), hp.seed), train_set, val_set, hp, on_epoch);
        }
        nn::save_checkpoint(result.checkpoint, a.out);
        write_text(history_path, result.history.to_csv());
        std::cout << "best epoch " << result.history.best_epoch << (result.history.stopped_early ? " (stopped early)" : "")
                  << "\nwrote " << a.out << " and " << history_path.string() << "\n";
    } catch (const train::TrainingDiverged& e) {
        nn::save_checkpoint(e.last_good(), a.out);
        write_text(history_path, e.history().to_csv());
        std::cerr << "training diverged; last good weights saved to " << a.out << "\n";
        throw;
    }
    return 0;
}

// --- predict ----------------------------------------------------------------------

struct PredictArgs {
    std::string stack;
    std::string checkpoint;
    std::string out;
    double threshold = 0.5;
};

int run_predict(const PredictArgs& a) {
    const auto ckpt = nn::load_checkpoint(a.checkpoint);
    const auto stack = io::read_stack(a.stack);
    const auto start = std::chrono::steady_clock::now();
    const auto pred = train::predict_scene(ckpt, stack, a.threshold);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    io::write_mask(pred.mask, a.out);
    std::cout << "elite " << pred.mask.elite_count() << " of " << pred.mask.valid_count() << " valid pixels\n";
    std::cout << "prediction time " << fixed2(seconds) << " s\n";
    return 0;
}

// --- evaluate ---------------------------------------------------------------------

struct EvaluateArgs {
    std::string pred;
    std::string truth;
    std::string out;
    std::string csv;
    std::string scene;
    std::string rounding = "truncate";
};

int run_evaluate(const EvaluateArgs& a) {
    const auto rounding = metrics::rounding_from_string(a.rounding);
    const auto pred = io::read_mask(a.pred);
    const auto truth = io::read_mask(a.truth);
    const auto counts = metrics::confusion(pred, truth);
    const auto s = metrics::scores(counts);
    const auto pd = metrics::pixel_density(counts.tp + counts.fp, counts.total());
    const auto td = metrics::pixel_density(counts.tp + counts.fn, counts.total());
    write_text(a.out, metrics::json_report(counts, s, pd, td, rounding));

    const std::string scene = a.scene.empty() ? fs::path(a.pred).stem().string() : a.scene;
    if (!a.csv.empty()) {
        const bool fresh = !fs::exists(a.csv) || fs::file_size(a.csv) == 0;
        std::ofstream out(a.csv, std::ios::binary | std::ios::app);
        if (!out) throw FormatError(FormatErrc::io_failure, "cannot write " + a.csv);
        if (fresh) out << metrics::csv_header();
        out << metrics::csv_row(scene, counts, s, pd, rounding);
    }
    std::cout << "accuracy " << s.accuracy.text(rounding) << "  precision " << s.precision.text(rounding) << "  recall "
              << s.recall.text(rounding) << "  f1 " << s.f1.text(rounding) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    elite::retain_freed_memory();
    CLI::App app{"Elite pixel selection for InSAR time series: synthesize, label, train, predict, evaluate"};
    app.require_subcommand(1);
    std::optional<std::size_t> threads;
    app.add_option("--threads", threads, "worker threads (default: ELITE_PIXEL_THREADS, else 1)")
        ->check(CLI::PositiveNumber);

    SynthArgs synth_args;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic stack and its truth mask");
    synth_cmd->add_option("spec", synth_args.spec, "scene spec JSON")->required()->check(CLI::ExistingFile);
    synth_cmd->add_option("-o,--out", synth_args.out, "output prefix; writes <prefix>.tsstack and <prefix>.mask")
        ->required();
    synth_cmd->add_option("--seed", synth_args.seed, "overrides the spec's seed");

    LabelArgs label_args;
    auto* label_cmd = app.add_subcommand("label", "classical PS/DS elite pixel selection");
    label_cmd->add_option("stack", label_args.stack, ".tsstack input")->required()->check(CLI::ExistingFile);
    label_cmd->add_option("-o,--out", label_args.out, ".mask output")->required();
    label_cmd->add_option("-c,--config", label_args.config, "selector config JSON")->check(CLI::ExistingFile);
    label_cmd->add_option("--ps-threshold", label_args.ps_threshold, "amplitude dispersion threshold");
    label_cmd->add_option("--ds-threshold", label_args.ds_threshold, "coherence dispersion threshold");
    label_cmd->add_option("--alpha", label_args.alpha, "Fisher test significance level");
    label_cmd->add_option("--rule", label_args.rule, "Fisher acceptance rule")
        ->check(CLI::IsMember({"paper_literal", "two_sided"}));

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "train the ConvLSTM selector on labelled stacks");
    train_cmd->add_option("--stack", train_args.stacks, ".tsstack input (repeatable)")
        ->required()
        ->check(CLI::ExistingFile);
    train_cmd->add_option("--mask", train_args.masks, "label .mask for the matching --stack (repeatable)")
        ->required()
        ->check(CLI::ExistingFile);
    train_cmd->add_option("--hyperparams", train_args.hyperparams, "hyperparameter JSON")->check(CLI::ExistingFile);
    train_cmd->add_option("-o,--out", train_args.out, "checkpoint output")->required();
    train_cmd->add_option("--history", train_args.history, "history CSV (default: <out>.history.csv)");
    train_cmd->add_option("--transfer-from", train_args.transfer_from, "continue from this checkpoint")
        ->check(CLI::ExistingFile);
    train_cmd->add_option("--seed", train_args.seed, "overrides the hyperparameter seed");
    train_cmd->add_option("--max-epochs", train_args.max_epochs, "overrides max_epochs")->check(CLI::PositiveNumber);

    PredictArgs predict_args;
    auto* predict_cmd = app.add_subcommand("predict", "predict an elite mask with a trained checkpoint");
    predict_cmd->add_option("stack", predict_args.stack, ".tsstack input")->required()->check(CLI::ExistingFile);
    predict_cmd->add_option("--checkpoint", predict_args.checkpoint, "trained checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    predict_cmd->add_option("-o,--out", predict_args.out, ".mask output")->required();
    predict_cmd->add_option("--threshold", predict_args.threshold, "elite when probability exceeds this")
        ->check(CLI::Range(0.0, 1.0));

    EvaluateArgs eval_args;
    auto* eval_cmd = app.add_subcommand("evaluate", "score a predicted mask against a reference mask");
    eval_cmd->add_option("pred", eval_args.pred, "predicted .mask")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("truth", eval_args.truth, "reference .mask")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("-o,--out", eval_args.out, "JSON report output")->required();
    eval_cmd->add_option("--csv", eval_args.csv, "append one CSV row here (header written when new)");
    eval_cmd->add_option("--scene", eval_args.scene, "scene name for the CSV row (default: prediction file stem)");
    eval_cmd->add_option("--rounding", eval_args.rounding, "truncate or half-away")
        ->check(CLI::IsMember({"truncate", "half-away"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    set_thread_count(threads ? *threads : thread_count_from_env());

    try {
        if (*synth_cmd) return run_synth(synth_args);
        if (*label_cmd) return run_label(label_args);
        if (*train_cmd) return run_train(train_args);
        if (*predict_cmd) return run_predict(predict_args);
        if (*eval_cmd) return run_evaluate(eval_args);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
