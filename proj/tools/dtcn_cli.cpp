#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "dtcn/experiments.hpp"

namespace fs = std::filesystem;
using namespace dtcn;

namespace {

ExperimentConfig config_or_default(const std::string& config_path) {
    return config_path.empty() ? default_config() : load_config(config_path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deep-JSCRC semantic relay simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;
    app.add_option("--config", config_path, "experiment config (JSON)")->expected(1);
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed, "override seed")->each([&](const std::string&) { seed_set = true; });

    auto* gen = app.add_subcommand("generate-data", "generate a synthetic dataset and save it");
    auto* train = app.add_subcommand("train", "three-phase centralized training");
    std::string train_mode = "dtcn";
    double train_snr = 10.0;
    train->add_option("--mode", train_mode, "dtcn | jscc_image_only | jscc_text_only");
    train->add_option("--snr", train_snr, "matched train/eval SNR in dB");
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    std::string ckpt_dir, ckpt_stem;
    double eval_snr = 10.0;
    eval_cmd->add_option("--checkpoint-dir", ckpt_dir, "checkpoint directory")->required();
    eval_cmd->add_option("--stem", ckpt_stem, "checkpoint stem")->required();
    eval_cmd->add_option("--snr", eval_snr, "evaluation SNR in dB");
    auto* sweep = app.add_subcommand("sweep", "full mode x SNR x seed sweep");
    auto* fed = app.add_subcommand("federated", "federated training run");
    double fed_snr = 10.0;
    fed->add_option("--snr", fed_snr, "matched train/eval SNR in dB");
    auto* balance = app.add_subcommand("balance-sim", "workload balance simulation over a trace");
    std::string trace_path;
    double capacity = 1.0, alpha = 0.5;
    balance->add_option("--trace", trace_path, "trace CSV: tick,device_id,workload")->required();
    balance->add_option("--capacity", capacity, "per-device capacity (work units/tick)");
    balance->add_option("--alpha", alpha, "EWMA smoothing factor");
    auto* validate = app.add_subcommand("validate-config", "validate a config file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) {
            if (config_path.empty()) {
                std::cerr << "validate-config requires --config\n";
                return 2;
            }
            auto errors = validate_config_file(config_path);
            if (errors.empty()) {
                std::cout << "ok\n";
                return 0;
            }
            for (const auto& e : errors) std::cerr << "error: " << e << "\n";
            return 1;
        }

        ExperimentConfig cfg = config_or_default(config_path);
        if (seed_set) {
            cfg.dataset.seed = seed;
            cfg.train.seed = seed;
            cfg.seeds = {seed};
        }
        fs::create_directories(out_dir);

        if (gen->parsed()) {
            SyntheticData data = generate_synthetic(cfg.dataset);
            save_dataset(data.train, (fs::path(out_dir) / "train.ds").string());
            save_dataset(data.test, (fs::path(out_dir) / "test.ds").string());
            std::cout << "wrote " << data.train.size() << " train / " << data.test.size()
                      << " test samples to " << out_dir << "\n";
        } else if (train->parsed()) {
            SyntheticData data = generate_synthetic(cfg.dataset);
            PipelineConfig pc = cfg.pipeline;
            pc.img_dim = cfg.dataset.img_dim;
            pc.txt_dim = cfg.dataset.txt_dim;
            pc.num_classes = static_cast<std::size_t>(cfg.dataset.num_classes);
            pc.mode = pipeline_mode_from_string(train_mode);
            pc.snr1_db = pc.snr2_db = train_snr;
            PipelineModels models = PipelineModels::create(pc, cfg.train.seed);
            TrainConfig tc = cfg.train;
            tc.train_snr_db = train_snr;
            auto records = train_all_phases(models, data.train, tc);
            append_metrics_csv((fs::path(out_dir) / "metrics.csv").string(), records);
            const std::string stem = train_mode + "_seed" + std::to_string(tc.seed);
            save_pipeline_checkpoint(models, (fs::path(out_dir) / "checkpoints").string(), stem);
            const double acc = evaluate(models, data.test, train_snr, tc.seed);
            std::cout << "test accuracy at " << train_snr << " dB: " << acc << "\n"
                      << "checkpoint stem: " << stem << "\n";
        } else if (eval_cmd->parsed()) {
            PipelineModels models = load_pipeline_checkpoint(ckpt_dir, ckpt_stem);
            SyntheticData data = generate_synthetic(cfg.dataset);
            const double acc = evaluate(models, data.test, eval_snr, cfg.train.seed);
            std::cout << "test accuracy at " << eval_snr << " dB: " << acc << "\n";
        } else if (sweep->parsed()) {
            SweepResult result = run_sweep(cfg, out_dir);
            std::cout << "wrote " << result.rows.size() << " rows to " << out_dir
                      << "/results.csv\n";
        } else if (fed->parsed()) {
            SyntheticData data = generate_synthetic(cfg.dataset);
            PipelineConfig pc = cfg.pipeline;
            pc.img_dim = cfg.dataset.img_dim;
            pc.txt_dim = cfg.dataset.txt_dim;
            pc.num_classes = static_cast<std::size_t>(cfg.dataset.num_classes);
            pc.snr1_db = pc.snr2_db = fed_snr;
            PipelineModels models = PipelineModels::create(pc, cfg.train.seed);
            TrainConfig tc = cfg.train;
            tc.train_snr_db = fed_snr;
            FederatedResult fr = run_federated(cfg.fl, models, data.train, data.test, tc);
            write_round_reports_csv((fs::path(out_dir) / "rounds.csv").string(), fr.reports);
            std::cout << "final global accuracy: " << fr.reports.back().global_accuracy << "\n";
        } else if (balance->parsed()) {
            BalanceSimConfig bc{capacity, alpha};
            BalanceSimReport report =
                run_balance_sim(trace_path, bc, (fs::path(out_dir) / "balance.csv").string());
            std::cout << "ticks: " << report.ticks << "\n"
                      << "max normalized load (unbalanced): " << report.unbalanced_max_norm_load
                      << "\n"
                      << "max normalized load (balanced):   " << report.balanced_max_norm_load
                      << "\n"
                      << "mean normalized load (unbalanced): " << report.unbalanced_mean_norm_load
                      << "\n"
                      << "mean normalized load (balanced):   " << report.balanced_mean_norm_load
                      << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
