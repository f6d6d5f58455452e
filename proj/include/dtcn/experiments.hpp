#pragma once

#include <string>
#include <vector>

#include "dtcn/data.hpp"
#include "dtcn/federated.hpp"
#include "dtcn/jscrc.hpp"
#include "dtcn/training.hpp"

namespace dtcn {

struct ExperimentConfig {
    SyntheticSpec dataset;
    PipelineConfig pipeline;  // dims; mode and SNRs are set per sweep cell
    TrainConfig train;
    std::vector<double> snr_sweep{-10.0, -5.0, 0.0, 5.0, 10.0};
    std::vector<PipelineMode> modes{PipelineMode::dtcn, PipelineMode::jscc_image_only,
                                    PipelineMode::jscc_text_only};
    double mask_fraction = 0.5;
    bool masked_eval = true;
    bool upper_bound = true;
    bool fl_enabled = false;
    FederatedConfig fl;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
};

ExperimentConfig default_config();

// Parse a JSON config; unknown keys rejected, missing keys take defaults.
ExperimentConfig load_config(const std::string& path);
// Structural + semantic validation; returns one message per violation,
// empty when the file is valid.
std::vector<std::string> validate_config_file(const std::string& path);

struct SweepRow {
    std::string mode;
    double snr_db = 0.0;
    bool masked = false;
    bool fl = false;
    bool upper_bound = false;
    std::uint64_t seed = 0;
    double accuracy = 0.0;
    std::string checkpoint;
};

struct SweepResult {
    std::vector<SweepRow> rows;
};

// Train (three phases, matched SNR) and evaluate every requested
// (mode, snr, variant, seed) cell. Writes results.csv, results.json, and
// checkpoints/ under out_dir. Byte-identical outputs for identical
// (config, seeds).
SweepResult run_sweep(const ExperimentConfig& config, const std::string& out_dir);

void write_sweep_csv(const SweepResult& result, const std::string& path);

// Checkpoints: one ParameterSet file per role plus a dimensions manifest.
void save_pipeline_checkpoint(const PipelineModels& models, const std::string& dir,
                              const std::string& stem);
PipelineModels load_pipeline_checkpoint(const std::string& dir, const std::string& stem);

struct BalanceSimConfig {
    double default_capacity = 1.0;
    double ewma_alpha = 0.5;
};

struct BalanceSimReport {
    double unbalanced_max_norm_load = 0.0;
    double balanced_max_norm_load = 0.0;
    double unbalanced_mean_norm_load = 0.0;
    double balanced_mean_norm_load = 0.0;
    std::size_t ticks = 0;
};

// Per-tick predict -> plan -> apply over a workload trace
// (CSV rows: tick,device_id,workload). Emits per-device rows
// tick,device_id,pre_load,post_load,allocation to out_csv when nonempty.
BalanceSimReport run_balance_sim(const std::string& trace_path, const BalanceSimConfig& cfg,
                                 const std::string& out_csv = "");

}  // namespace dtcn
