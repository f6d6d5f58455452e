#pragma once

#include <string>
#include <vector>

#include "dtcn/data.hpp"
#include "dtcn/jscrc.hpp"

namespace dtcn {

struct TrainConfig {
    int epochs1 = 30;
    int epochs2 = 20;
    int epochs3 = 20;
    double lr1 = 0.05;
    double lr2 = 0.02;
    double lr3 = 0.02;
    std::size_t batch_size = 32;
    double train_snr_db = 10.0;
    std::uint64_t seed = 1;
};

struct MetricsRecord {
    int phase = 0;
    int epoch = 0;
    double loss = 0.0;
    double accuracy = 0.0;
    double snr_db = 0.0;
    double wall_seconds = 0.0;
};

// Differentiable classification graph with channels and JSC codecs bypassed
// (features feed the fusion path directly). Shared by phase 1 and the
// federated one-step identity check.
Var direct_path_logits(Tape& t, const Tensor& x_img, const Tensor& x_txt,
                       const PipelineModels& models, bool trainable);

// Phase 1: semantic encoder, modality-B encoder, fusion net, and fusion
// semantic decoder trained end-to-end without channels, cross-entropy loss.
std::vector<MetricsRecord> train_phase1(PipelineModels& models, const Dataset& data,
                                        const TrainConfig& cfg);

// Phase 2: each JSC encoder/decoder pair trained per hop as an autoencoder
// through its AWGN hop, L1 loss against the pre-channel feature. Phase-1
// modules stay frozen.
std::vector<MetricsRecord> train_phase2(PipelineModels& models, const Dataset& data,
                                        const TrainConfig& cfg);

// Phase 3: joint training of all modules through the full noisy pipeline,
// cross-entropy loss.
std::vector<MetricsRecord> train_phase3(PipelineModels& models, const Dataset& data,
                                        const TrainConfig& cfg);

std::vector<MetricsRecord> train_all_phases(PipelineModels& models, const Dataset& data,
                                            const TrainConfig& cfg);

// Fraction of argmax predictions equal to labels; channels seeded
// deterministically from `seed`. Errors on an empty test set.
double evaluate(const PipelineModels& models, const Dataset& test_data, double snr_db,
                std::uint64_t seed);
// Same model evaluated with zero channel noise.
double evaluate_noiseless(const PipelineModels& models, const Dataset& test_data);

// Append records to a CSV (header written when the file is new):
// phase,epoch,loss,accuracy,snr_db,wall_seconds
void append_metrics_csv(const std::string& path, const std::vector<MetricsRecord>& records);

}  // namespace dtcn
