#include "dtcn/federated.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace dtcn {

std::vector<Dataset> partition_dataset(const Dataset& data, const FederatedConfig& cfg) {
    const auto n_clients = static_cast<std::size_t>(cfg.n_clients);
    if (cfg.n_clients < 1) throw std::invalid_argument("partition_dataset: need >= 1 client");
    if (data.size() < n_clients)
        throw std::invalid_argument("partition_dataset: dataset smaller than client count");
    std::vector<Dataset> shards;
    shards.reserve(n_clients);
    if (cfg.partition == Partition::iid_equal) {
        std::vector<std::size_t> idx(data.size());
        std::iota(idx.begin(), idx.end(), 0);
        Rng rng(combine_seed(cfg.seed, 0x5711F));
        std::shuffle(idx.begin(), idx.end(), rng);
        const std::size_t base = data.size() / n_clients;
        const std::size_t extra = data.size() % n_clients;
        std::size_t pos = 0;
        for (std::size_t c = 0; c < n_clients; ++c) {
            const std::size_t take = base + (c < extra ? 1 : 0);
            shards.push_back(data.select({idx.begin() + static_cast<std::ptrdiff_t>(pos),
                                          idx.begin() + static_cast<std::ptrdiff_t>(pos + take)}));
            pos += take;
        }
    } else {
        // label_skew: classes permuted with the seed, then dealt round-robin
        // to clients; each client keeps only its classes' samples.
        std::vector<int> class_perm(static_cast<std::size_t>(data.num_classes));
        std::iota(class_perm.begin(), class_perm.end(), 0);
        Rng rng(combine_seed(cfg.seed, 0x5C1A55));
        std::shuffle(class_perm.begin(), class_perm.end(), rng);
        std::vector<std::size_t> owner(static_cast<std::size_t>(data.num_classes));
        for (std::size_t r = 0; r < class_perm.size(); ++r)
            owner[static_cast<std::size_t>(class_perm[r])] = r % n_clients;
        std::vector<std::vector<std::size_t>> rows(n_clients);
        for (std::size_t i = 0; i < data.size(); ++i)
            rows[owner[static_cast<std::size_t>(data.labels[i])]].push_back(i);
        for (std::size_t c = 0; c < n_clients; ++c) shards.push_back(data.select(rows[c]));
    }
    return shards;
}

LocalUpdate local_update(const PipelineModels& model_template, const ParameterSet& global_params,
                         const Dataset& client_data, int phase, const TrainConfig& tc,
                         int local_epochs) {
    PipelineModels m = model_template;
    m.load_all(global_params);
    TrainConfig local = tc;
    local.epochs1 = local.epochs2 = local.epochs3 = local_epochs;
    std::vector<MetricsRecord> recs;
    if (local_epochs > 0) {
        switch (phase) {
            case 1: recs = train_phase1(m, client_data, local); break;
            case 2: recs = train_phase2(m, client_data, local); break;
            case 3: recs = train_phase3(m, client_data, local); break;
            default: throw std::invalid_argument("local_update: phase must be 1, 2, or 3");
        }
    }
    return {m.all_params(), recs.empty() ? 0.0 : recs.back().loss};
}

ParameterSet weighted_average(const std::vector<std::pair<ParameterSet, double>>& locals) {
    if (locals.empty()) throw std::invalid_argument("weighted_average: empty input");
    double wsum = 0.0;
    for (const auto& [ps, w] : locals) {
        if (w < 0.0) throw std::invalid_argument("weighted_average: negative weight");
        wsum += w;
    }
    if (std::abs(wsum - 1.0) > 1e-9)
        throw std::invalid_argument("weighted_average: weights sum to " + std::to_string(wsum) +
                                    ", expected 1");
    std::vector<std::pair<const ParameterSet*, double>> refs;
    refs.reserve(locals.size());
    for (const auto& [ps, w] : locals) refs.emplace_back(&ps, w);
    return ParameterSet::weighted_average(refs);
}

FederatedResult run_federated(const FederatedConfig& cfg, const PipelineModels& model_template,
                              const Dataset& train_data, const Dataset& test_data,
                              const TrainConfig& tc) {
    auto shards = partition_dataset(train_data, cfg);

    std::vector<double> weights = cfg.client_weights;
    if (weights.empty()) {
        weights.resize(shards.size());
        for (std::size_t c = 0; c < shards.size(); ++c)
            weights[c] = static_cast<double>(shards[c].size()) / static_cast<double>(train_data.size());
    }
    if (weights.size() != shards.size())
        throw std::invalid_argument("run_federated: client_weights length != n_clients");
    // Drop empty shards and renormalize the remaining weights.
    std::vector<std::size_t> active;
    double wsum = 0.0;
    for (std::size_t c = 0; c < shards.size(); ++c)
        if (shards[c].size() > 0) {
            active.push_back(c);
            wsum += weights[c];
        }
    if (active.empty()) throw std::invalid_argument("run_federated: all client shards empty");
    if (wsum <= 0.0) throw std::invalid_argument("run_federated: active client weights sum to 0");

    FederatedResult result{model_template, {}};
    ParameterSet global = result.models.all_params();
    const long long bytes_per_round =
        8LL * static_cast<long long>(global.total_scalars()) * 2LL * cfg.n_clients;

    int round_counter = 0;
    for (int phase = 1; phase <= 3; ++phase) {
        int rounds = cfg.rounds;
        if (rounds <= 0) {
            const int phase_epochs = phase == 1 ? tc.epochs1 : (phase == 2 ? tc.epochs2 : tc.epochs3);
            rounds = (phase_epochs + cfg.local_epochs - 1) / cfg.local_epochs;
        }
        double best_acc = -1.0;
        int stalled = 0;
        for (int r = 0; r < rounds; ++r) {
            TrainConfig round_tc = tc;
            round_tc.seed = combine_seed(tc.seed, static_cast<std::uint64_t>(phase),
                                         static_cast<std::uint64_t>(r));
            std::vector<std::pair<ParameterSet, double>> locals;
            RoundReport report;
            report.round = round_counter;
            report.phase = phase;
            for (std::size_t c : active) {
                LocalUpdate lu =
                    local_update(result.models, global, shards[c], phase, round_tc, cfg.local_epochs);
                report.client_losses.push_back(lu.final_loss);
                locals.emplace_back(std::move(lu.params), weights[c] / wsum);
            }
            global = weighted_average(locals);
            result.models.load_all(global);
            report.global_accuracy =
                evaluate(result.models, test_data, tc.train_snr_db,
                         combine_seed(cfg.seed, 0xFEDE, static_cast<std::uint64_t>(round_counter)));
            report.bytes_exchanged = bytes_per_round;
            result.reports.push_back(std::move(report));
            ++round_counter;

            if (cfg.stop_improvement_pp >= 0.0) {
                const double acc = result.reports.back().global_accuracy;
                if (acc > best_acc + cfg.stop_improvement_pp / 100.0) {
                    best_acc = acc;
                    stalled = 0;
                } else if (++stalled >= 3) {
                    break;
                }
            }
        }
    }
    return result;
}

void write_round_reports_csv(const std::string& path, const std::vector<RoundReport>& reports) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("round reports: cannot open " + path);
    os.precision(17);
    std::size_t max_clients = 0;
    for (const auto& r : reports) max_clients = std::max(max_clients, r.client_losses.size());
    os << "round,phase";
    for (std::size_t c = 0; c < max_clients; ++c) os << ",client" << c << "_loss";
    os << ",global_accuracy,bytes_exchanged\n";
    for (const auto& r : reports) {
        os << r.round << ',' << r.phase;
        for (std::size_t c = 0; c < max_clients; ++c)
            os << ',' << (c < r.client_losses.size() ? r.client_losses[c] : 0.0);
        os << ',' << r.global_accuracy << ',' << r.bytes_exchanged << '\n';
    }
}

}  // namespace dtcn
