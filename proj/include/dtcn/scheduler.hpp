#pragma once

#include <string>
#include <vector>

#include "dtcn/autodiff.hpp"
#include "dtcn/jscrc.hpp"

namespace dtcn {

// Per-device view held by the cluster scheduler.
struct DeviceState {
    std::string id;
    double workload = 0.0;   // pending work units
    double predicted = 0.0;  // upcoming workload
    double capacity = 1.0;   // work units per tick
    std::vector<double> history;
};

struct Transfer {
    std::size_t from = 0;
    std::size_t to = 0;
    double amount = 0.0;
};

struct TransferPlan {
    std::vector<Transfer> transfers;
    bool empty() const { return transfers.empty(); }
};

struct ContributionScore {
    std::string device_id;
    double score = 0.0;
};

// Exponentially weighted moving average over the history, oldest first.
double predict_workload(const std::vector<double>& history, double alpha = 0.5);

// Water-filling toward the common normalized level
// L = sum(w_i + predicted_i) / sum(capacity_i): devices above L*capacity
// donate their surplus greedily to devices below it.
TransferPlan balance_workloads(const std::vector<DeviceState>& devices);

// Applies u_i = (w_i + predicted_i) + incoming_i - outgoing_i into workload
// (predicted is folded in and reset). Total load is conserved. Throws when
// a device's outgoing transfers exceed its available load.
void apply_transfers(std::vector<DeviceState>& devices, const TransferPlan& plan);

// Mean over batch rows of the L2 norm of d(loss)/d(features). Call after
// Tape::backward on a loss the features participated in.
ContributionScore contribution_score(const std::string& device_id, const Tape& tape, Var features);

// allocation_i = budget * score_i / sum(scores); all-zero scores split evenly.
std::vector<double> allocate_resources(const std::vector<ContributionScore>& scores, double budget);

// Two-phase joint device-server inference: device-side local encoding, then
// server-side fusion and classification. Logits are bit-identical to
// end_to_end under the same seed.
struct JointInferenceReport {
    double local_seconds = 0.0;
    double global_seconds = 0.0;
    std::size_t raw_input_dim = 0;       // per-sample modality-A dimension
    std::size_t transmitted_dim = 0;     // per-sample symbols on the device hop
    long long local_bytes = 0;           // device -> relay
    long long global_bytes = 0;          // relay -> receiver
    long long total_bytes() const { return local_bytes + global_bytes; }
};

Tensor joint_inference(const PipelineModels& models, const Tensor& x_img, const Tensor& x_txt,
                       std::uint64_t master_seed, std::uint64_t batch_index,
                       JointInferenceReport* report = nullptr);

}  // namespace dtcn
