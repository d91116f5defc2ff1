// Command-line front end: preprocess, train, evaluate, ablate, synth, gradcheck.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "moxgate/ablation.hpp"
#include "moxgate/checkpoint.hpp"
#include "moxgate/config.hpp"
#include "moxgate/dataset_io.hpp"
#include "moxgate/errors.hpp"
#include "moxgate/gradcheck.hpp"
#include "moxgate/metrics.hpp"
#include "moxgate/rng.hpp"
#include "moxgate/synthetic.hpp"
#include "moxgate/train.hpp"

namespace {

using moxgate::AlignedDataset;
using moxgate::AppConfig;
using nlohmann::json;

struct CommonOptions {
    std::string config_path;
    std::string out_dir = ".";
    std::string data_path;
    std::string modalities;  // comma-separated subset selector
    std::vector<std::string> overrides;
    bool has_seed = false;
    std::uint64_t seed = 0;
};

void add_common(CLI::App* cmd, CommonOptions& opt) {
    cmd->add_option("--config", opt.config_path, "JSON configuration file");
    cmd->add_option("--out", opt.out_dir, "output directory (default: .)");
    cmd->add_option("--set", opt.overrides,
                    "config override as section.key=value (repeatable)");
    cmd->add_option("--seed", opt.seed, "seed override")->each([&](const std::string&) {
        opt.has_seed = true;
    });
    cmd->add_option("--data", opt.data_path, "dataset or manifest JSON (overrides config)");
    cmd->add_option("--modalities", opt.modalities,
                    "comma-separated modality subset, e.g. gene,mirna");
}

AppConfig load_config(const CommonOptions& opt) {
    json raw = json::object();
    if (!opt.config_path.empty()) {
        std::ifstream in(opt.config_path);
        if (!in) throw moxgate::ConfigError("cannot open config file: " + opt.config_path);
        try {
            in >> raw;
        } catch (const json::parse_error& e) {
            throw moxgate::ConfigError(opt.config_path + ": " + e.what());
        }
    }
    for (const std::string& kv : opt.overrides) {
        const std::size_t eq = kv.find('=');
        if (eq == std::string::npos) {
            throw moxgate::ConfigError("--set expects key=value, got '" + kv + "'");
        }
        moxgate::apply_override(raw, kv.substr(0, eq), kv.substr(eq + 1));
    }
    AppConfig cfg = moxgate::parse_app_config(raw);
    if (!opt.data_path.empty()) {
        cfg.data_mode = moxgate::DataMode::dataset_file;
        cfg.dataset_path = opt.data_path;
    }
    if (opt.has_seed) {
        cfg.train.seed = opt.seed;
        cfg.synthetic.seed = opt.seed;
    }
    return cfg;
}

AlignedDataset load_dataset(const AppConfig& cfg, const CommonOptions& opt) {
    AlignedDataset d = moxgate::load_dataset_from_config(cfg);
    if (!opt.modalities.empty()) {
        std::vector<std::size_t> keep;
        std::string label;
        std::stringstream ss(opt.modalities);
        while (std::getline(ss, label, ',')) {
            bool found = false;
            for (std::size_t i = 0; i < d.modalities.size(); ++i) {
                if (d.modalities[i].label == label) {
                    keep.push_back(i);
                    found = true;
                    break;
                }
            }
            if (!found) {
                throw moxgate::ConfigError("dataset has no modality '" + label + "'");
            }
        }
        if (keep.empty()) throw moxgate::ConfigError("--modalities selected nothing");
        d = d.subset_modalities(keep);
    }
    return d;
}

std::string out_file(const CommonOptions& opt, const std::string& name) {
    std::filesystem::create_directories(opt.out_dir);
    return (std::filesystem::path(opt.out_dir) / name).string();
}

int cmd_synth(const CommonOptions& opt, bool with_tsv) {
    AppConfig cfg = load_config(opt);
    AlignedDataset d = moxgate::generate_synthetic(cfg.synthetic);
    const std::string path = out_file(opt, "dataset.json");
    moxgate::save_dataset(path, d);
    std::cout << "wrote " << path << " (" << d.num_samples() << " samples, "
              << d.modalities.size() << " modalities, " << d.num_classes()
              << " classes)\n";
    if (with_tsv) {
        moxgate::export_dataset_tsv(d, opt.out_dir);
        std::cout << "wrote TSV matrices and labels.tsv to " << opt.out_dir << "\n";
    }
    return 0;
}

int cmd_preprocess(const CommonOptions& opt) {
    AppConfig cfg = load_config(opt);
    if (cfg.data_mode != moxgate::DataMode::matrices) {
        throw moxgate::ConfigError("preprocess requires a data.matrices section");
    }
    moxgate::PipelineResult result = moxgate::run_pipeline(cfg.source);
    const std::string path = out_file(opt, "manifest.json");
    moxgate::save_manifest(path, cfg.source, result);
    std::cout << "wrote " << path << "\n";
    for (const auto& counts : result.stage_counts) {
        std::cout << "  " << counts.label << ": ";
        for (std::size_t i = 0; i < counts.loaded.size(); ++i) {
            if (i) std::cout << ", ";
            std::cout << counts.loaded[i] << "->" << counts.after_drop[i];
        }
        std::cout << " features per cohort; " << counts.after_intersect << " shared\n";
    }
    const AlignedDataset& d = result.dataset;
    std::cout << "  samples: " << d.num_samples() << " ("
              << d.indices_of(moxgate::Split::train).size() << " train, "
              << d.indices_of(moxgate::Split::val).size() << " val, "
              << d.indices_of(moxgate::Split::test).size() << " test), "
              << d.num_classes() << " classes\n";
    return 0;
}

int cmd_train(const CommonOptions& opt) {
    AppConfig cfg = load_config(opt);
    AlignedDataset d = load_dataset(cfg, opt);
    moxgate::TrainResult result = moxgate::train_model(d, cfg.train_run());

    const std::string log_path = out_file(opt, "train_log.csv");
    moxgate::write_train_log_csv(log_path, result.log);

    moxgate::Rng rng(cfg.train.seed);
    const std::string ckpt_path = out_file(opt, "checkpoint.json");
    moxgate::save_checkpoint(ckpt_path, result.best_model, nullptr, rng.serialize_state(),
                             result.optimizer_steps);

    std::vector<std::pair<std::string, moxgate::MetricsReport>> sections;
    sections.emplace_back("val",
                          moxgate::evaluate_split(result.best_model, d, moxgate::Split::val));
    if (!d.indices_of(moxgate::Split::test).empty()) {
        sections.emplace_back(
            "test", moxgate::evaluate_split(result.best_model, d, moxgate::Split::test));
    }
    moxgate::write_metrics_csv(out_file(opt, "metrics.csv"), sections, d.class_names);

    std::cout << "trained " << result.log.size() << " epochs (best epoch "
              << result.best_epoch << ", val weighted-F1 " << result.best_val_weighted_f1
              << ")\n";
    for (const auto& [name, report] : sections) {
        std::cout << "[" << name << "]\n"
                  << moxgate::format_metrics_table(report, d.class_names);
    }
    std::cout << "wrote " << log_path << ", " << ckpt_path << ", "
              << out_file(opt, "metrics.csv") << "\n";
    return 0;
}

int cmd_evaluate(const CommonOptions& opt, const std::string& checkpoint_path,
                 const std::string& split_name) {
    AppConfig cfg = load_config(opt);
    AlignedDataset d = load_dataset(cfg, opt);
    moxgate::CheckpointData ckpt = moxgate::load_checkpoint(checkpoint_path);
    const moxgate::Split split = moxgate::split_from_name(split_name);
    moxgate::MetricsReport report = moxgate::evaluate_split(ckpt.model, d, split);
    std::vector<std::pair<std::string, moxgate::MetricsReport>> sections{
        {split_name, report}};
    moxgate::write_metrics_csv(out_file(opt, "metrics.csv"), sections, d.class_names);
    std::cout << "[" << split_name << "]\n"
              << moxgate::format_metrics_table(report, d.class_names);
    return 0;
}

int cmd_ablate(const CommonOptions& opt) {
    AppConfig cfg = load_config(opt);
    AlignedDataset d = load_dataset(cfg, opt);
    moxgate::AblationTable table = moxgate::run_ablation(d, cfg.train_run(), cfg.ablation);
    moxgate::write_ablation_csv(out_file(opt, "ablation.csv"), table);
    std::cout << moxgate::format_ablation_text(table);
    std::cout << "wrote " << out_file(opt, "ablation.csv") << "\n";
    return 0;
}

int cmd_gradcheck(std::uint64_t seed) {
    const moxgate::GradCheckReport report = moxgate::run_gradcheck(seed);
    for (const auto& item : report.items) {
        std::printf("%-40s %.3e\n", item.name.c_str(), item.max_rel_err);
    }
    std::printf("max relative error: %.3e (%s)\n", report.max_rel_err,
                report.worst_item.c_str());
    if (!report.passed()) {
        std::printf("FAIL: max relative error >= 1e-4\n");
        return 1;
    }
    std::printf("PASS: all gradients within 1e-4 of central finite differences\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MoXGATE: modality-aware cross-attention for multi-omic "
                 "cancer-subtype classification"};
    app.require_subcommand(1);

    CommonOptions synth_opt, pre_opt, train_opt, eval_opt, ablate_opt;
    bool synth_tsv = false;
    std::string eval_checkpoint, eval_split = "test";
    std::uint64_t gradcheck_seed = 11;

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    add_common(synth, synth_opt);
    synth->add_flag("--tsv", synth_tsv, "also export TSV matrices + labels");

    CLI::App* pre = app.add_subcommand("preprocess", "run the ingest pipeline -> manifest");
    add_common(pre, pre_opt);

    CLI::App* train = app.add_subcommand("train", "train a model and write a checkpoint");
    add_common(train, train_opt);

    CLI::App* eval = app.add_subcommand("evaluate", "evaluate a checkpoint on a split");
    add_common(eval, eval_opt);
    eval->add_option("--checkpoint", eval_checkpoint, "checkpoint JSON")->required();
    eval->add_option("--split", eval_split, "train|val|test (default test)");

    CLI::App* ablate = app.add_subcommand("ablate", "run the configured ablation protocol");
    add_common(ablate, ablate_opt);

    CLI::App* grad = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    grad->add_option("--seed", gradcheck_seed, "seed for the random probes");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
            return app.exit(e);  // --help
        }
        app.exit(e);
        return 2;
    }

    try {
        if (synth->parsed()) return cmd_synth(synth_opt, synth_tsv);
        if (pre->parsed()) return cmd_preprocess(pre_opt);
        if (train->parsed()) return cmd_train(train_opt);
        if (eval->parsed()) return cmd_evaluate(eval_opt, eval_checkpoint, eval_split);
        if (ablate->parsed()) return cmd_ablate(ablate_opt);
        if (grad->parsed()) return cmd_gradcheck(gradcheck_seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
