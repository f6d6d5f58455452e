#include "dtcn/scheduler.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace dtcn {

double predict_workload(const std::vector<double>& history, double alpha) {
    if (history.empty()) throw std::invalid_argument("predict_workload: empty history");
    if (alpha <= 0.0 || alpha > 1.0)
        throw std::invalid_argument("predict_workload: alpha must be in (0,1]");
    double s = history.front();
    for (std::size_t i = 1; i < history.size(); ++i) s = alpha * history[i] + (1.0 - alpha) * s;
    return s;
}

TransferPlan balance_workloads(const std::vector<DeviceState>& devices) {
    if (devices.empty()) throw std::invalid_argument("balance_workloads: no devices");
    TransferPlan plan;
    if (devices.size() == 1) return plan;

    double total_load = 0.0, total_cap = 0.0;
    for (const auto& d : devices) {
        if (d.capacity <= 0.0)
            throw std::invalid_argument("balance_workloads: non-positive capacity on " + d.id);
        total_load += d.workload + d.predicted;
        total_cap += d.capacity;
    }
    const double level = total_load / total_cap;

    // surplus > 0: donor; surplus < 0: receiver
    std::vector<double> surplus(devices.size());
    for (std::size_t i = 0; i < devices.size(); ++i)
        surplus[i] = (devices[i].workload + devices[i].predicted) - level * devices[i].capacity;

    constexpr double kEps = 1e-12;
    std::size_t donor = 0, receiver = 0;
    while (true) {
        while (donor < devices.size() && surplus[donor] <= kEps) ++donor;
        while (receiver < devices.size() && surplus[receiver] >= -kEps) ++receiver;
        if (donor >= devices.size() || receiver >= devices.size()) break;
        const double amount = std::min(surplus[donor], -surplus[receiver]);
        plan.transfers.push_back({donor, receiver, amount});
        surplus[donor] -= amount;
        surplus[receiver] += amount;
    }
    return plan;
}

void apply_transfers(std::vector<DeviceState>& devices, const TransferPlan& plan) {
    std::vector<double> incoming(devices.size(), 0.0), outgoing(devices.size(), 0.0);
    for (const auto& t : plan.transfers) {
        if (t.from >= devices.size() || t.to >= devices.size() || t.from == t.to)
            throw std::invalid_argument("apply_transfers: invalid transfer endpoints");
        if (t.amount < 0.0) throw std::invalid_argument("apply_transfers: negative transfer");
        outgoing[t.from] += t.amount;
        incoming[t.to] += t.amount;
    }
    for (std::size_t i = 0; i < devices.size(); ++i) {
        const double available = devices[i].workload + devices[i].predicted;
        if (outgoing[i] > available + 1e-9)
            throw std::invalid_argument("apply_transfers: infeasible plan, device " +
                                        devices[i].id + " sends " + std::to_string(outgoing[i]) +
                                        " but holds " + std::to_string(available));
    }
    for (std::size_t i = 0; i < devices.size(); ++i) {
        devices[i].workload =
            devices[i].workload + devices[i].predicted + incoming[i] - outgoing[i];
        devices[i].predicted = 0.0;
    }
}

ContributionScore contribution_score(const std::string& device_id, const Tape& tape, Var features) {
    if (!features.valid())
        throw std::invalid_argument("contribution_score: features not on tape");
    const Tensor g = tape.grad(features.id);
    const std::size_t m = g.rows(), n = g.cols();
    if (m == 0) return {device_id, 0.0};
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        double sq = 0.0;
        for (std::size_t j = 0; j < n; ++j) sq += g.data[i * n + j] * g.data[i * n + j];
        total += std::sqrt(sq);
    }
    return {device_id, total / static_cast<double>(m)};
}

std::vector<double> allocate_resources(const std::vector<ContributionScore>& scores,
                                       double budget) {
    if (budget < 0.0) throw std::invalid_argument("allocate_resources: negative budget");
    if (scores.empty()) throw std::invalid_argument("allocate_resources: no scores");
    double total = 0.0;
    for (const auto& s : scores) {
        if (!(s.score >= 0.0) || !std::isfinite(s.score))
            throw std::invalid_argument("allocate_resources: invalid score for " + s.device_id);
        total += s.score;
    }
    std::vector<double> alloc(scores.size());
    if (total == 0.0) {
        for (auto& a : alloc) a = budget / static_cast<double>(scores.size());
    } else {
        for (std::size_t i = 0; i < scores.size(); ++i)
            alloc[i] = budget * scores[i].score / total;
    }
    return alloc;
}

Tensor joint_inference(const PipelineModels& models, const Tensor& x_img, const Tensor& x_txt,
                       std::uint64_t master_seed, std::uint64_t batch_index,
                       JointInferenceReport* report) {
    using Clock = std::chrono::steady_clock;
    const auto t0 = Clock::now();
    Tensor rx1 = device_local_stage(x_img, x_txt, models, master_seed, batch_index);
    const auto t1 = Clock::now();
    Tensor logits = server_global_stage(rx1, x_txt, models, master_seed, batch_index);
    const auto t2 = Clock::now();
    if (report) {
        const std::size_t batch = logits.rows();
        report->local_seconds = std::chrono::duration<double>(t1 - t0).count();
        report->global_seconds = std::chrono::duration<double>(t2 - t1).count();
        report->raw_input_dim = models.cfg.img_dim;
        report->transmitted_dim = models.cfg.has_image_branch() ? models.cfg.n_sym1 : 0;
        report->local_bytes =
            static_cast<long long>(batch * report->transmitted_dim * sizeof(double));
        report->global_bytes = static_cast<long long>(batch * models.cfg.n_sym2 * sizeof(double));
    }
    return logits;
}

}  // namespace dtcn
