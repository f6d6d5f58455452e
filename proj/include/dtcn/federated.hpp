#pragma once

#include <vector>

#include "dtcn/data.hpp"
#include "dtcn/training.hpp"

namespace dtcn {

enum class Partition { iid_equal, label_skew };

struct FederatedConfig {
    int n_clients = 10;
    int rounds = 5;  // rounds per training phase
    int local_epochs = 1;
    std::vector<double> client_weights;  // empty -> shard-size proportional
    Partition partition = Partition::iid_equal;
    std::uint64_t seed = 1;
    // Optional early stop: halt a phase when global accuracy improves by less
    // than this many percentage points over 3 consecutive rounds. Negative
    // disables.
    double stop_improvement_pp = -1.0;
};

struct RoundReport {
    int round = 0;
    int phase = 0;
    std::vector<double> client_losses;
    double global_accuracy = 0.0;
    long long bytes_exchanged = 0;  // 8 * total params * 2 * n_clients
};

// iid_equal: seeded shuffle into near-equal shards (sizes differ by <= 1).
// label_skew: each client receives the samples of a seeded subset of classes.
std::vector<Dataset> partition_dataset(const Dataset& data, const FederatedConfig& cfg);

// Copy of the global parameters advanced by `local_epochs` of the given
// training phase on the client shard. Returns the client's final loss too.
struct LocalUpdate {
    ParameterSet params;
    double final_loss = 0.0;
};
LocalUpdate local_update(const PipelineModels& model_template, const ParameterSet& global_params,
                         const Dataset& client_data, int phase, const TrainConfig& tc,
                         int local_epochs);

// Elementwise sum of w_i * params_i; weights must be normalized.
ParameterSet weighted_average(const std::vector<std::pair<ParameterSet, double>>& locals);

struct FederatedResult {
    PipelineModels models;
    std::vector<RoundReport> reports;
};

// Rounds of broadcast -> local update -> weighted average -> evaluate, run
// per training phase in phase order. Empty shards are skipped with their
// weight redistributed proportionally.
FederatedResult run_federated(const FederatedConfig& cfg, const PipelineModels& model_template,
                              const Dataset& train_data, const Dataset& test_data,
                              const TrainConfig& tc);

void write_round_reports_csv(const std::string& path, const std::vector<RoundReport>& reports);

}  // namespace dtcn
