#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "dtcn/scheduler.hpp"
#include "dtcn/training.hpp"
#include "test_util.hpp"

using namespace dtcn;
using testutil::random_tensor;

namespace {

DeviceState dev(std::string id, double workload, double capacity = 1.0, double predicted = 0.0) {
    DeviceState d;
    d.id = std::move(id);
    d.workload = workload;
    d.capacity = capacity;
    d.predicted = predicted;
    return d;
}

double post_balance_makespan(std::vector<DeviceState> devices) {
    apply_transfers(devices, balance_workloads(devices));
    double worst = 0.0;
    for (const auto& d : devices) worst = std::max(worst, d.workload / d.capacity);
    return worst;
}

// brute-force minimal achievable max normalized load: continuous work can
// always be spread to the exact water level
double minmax_oracle(const std::vector<DeviceState>& devices) {
    double load = 0.0, cap = 0.0;
    for (const auto& d : devices) {
        load += d.workload + d.predicted;
        cap += d.capacity;
    }
    return load / cap;
}

PipelineConfig sched_pipeline() {
    PipelineConfig cfg;
    cfg.img_dim = 8;
    cfg.txt_dim = 6;
    cfg.num_classes = 4;
    cfg.d_sem = 6;
    cfg.d_txt = 4;
    cfg.d_fused = 8;
    cfg.n_sym1 = 10;
    cfg.n_sym2 = 16;
    cfg.hidden = 12;
    return cfg;
}

}  // namespace

TEST_CASE("predict_workload: EWMA oracles") {
    CHECK(predict_workload({4.0}) == 4.0);
    // alpha 0.5 over {2, 4}: 0.5*4 + 0.5*2 = 3
    CHECK(predict_workload({2.0, 4.0}, 0.5) == doctest::Approx(3.0).epsilon(1e-15));
    // alpha 0.25 over {8, 0, 4}: s1 = 0.25*0+0.75*8 = 6; s2 = 0.25*4+0.75*6 = 5.5
    CHECK(predict_workload({8.0, 0.0, 4.0}, 0.25) == doctest::Approx(5.5).epsilon(1e-15));
    // alpha 1 tracks the last observation exactly
    CHECK(predict_workload({9.0, 1.0, 7.0}, 1.0) == 7.0);
    CHECK_THROWS_AS(predict_workload({}), std::invalid_argument);
    CHECK_THROWS_AS(predict_workload({1.0}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(predict_workload({1.0}, 1.5), std::invalid_argument);
}

TEST_CASE("balance_workloads: already balanced cluster plans nothing") {
    std::vector<DeviceState> devices{dev("a", 5.0), dev("b", 5.0), dev("c", 5.0)};
    CHECK(balance_workloads(devices).empty());
    // balanced per unit capacity, not per device
    std::vector<DeviceState> hetero{dev("a", 2.0, 1.0), dev("b", 4.0, 2.0)};
    CHECK(balance_workloads(hetero).empty());
}

TEST_CASE("balance_workloads: symmetric two-device split") {
    std::vector<DeviceState> devices{dev("hot", 10.0), dev("cold", 0.0)};
    TransferPlan plan = balance_workloads(devices);
    REQUIRE(plan.transfers.size() == 1);
    CHECK(plan.transfers[0].from == 0);
    CHECK(plan.transfers[0].to == 1);
    CHECK(plan.transfers[0].amount == doctest::Approx(5.0).epsilon(1e-12));
    apply_transfers(devices, plan);
    CHECK(devices[0].workload == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(devices[1].workload == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("balance_workloads: three devices with capacities reach the min-max oracle") {
    // loads 9, 3, 0 with capacities 1, 2, 1 -> level = 12/4 = 3
    // targets: 3, 6, 3
    std::vector<DeviceState> devices{dev("a", 9.0, 1.0), dev("b", 3.0, 2.0), dev("c", 0.0, 1.0)};
    const double oracle = minmax_oracle(devices);
    CHECK(oracle == doctest::Approx(3.0).epsilon(1e-15));
    std::vector<DeviceState> after = devices;
    apply_transfers(after, balance_workloads(devices));
    CHECK(after[0].workload == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(after[1].workload == doctest::Approx(6.0).epsilon(1e-9));
    CHECK(after[2].workload == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(post_balance_makespan(devices) <= oracle + 1e-6);
}

TEST_CASE("balance_workloads: predicted workload participates in the level") {
    std::vector<DeviceState> devices{dev("a", 1.0, 1.0, 7.0), dev("b", 2.0, 1.0, 0.0)};
    // effective loads 8 and 2 -> level 5, transfer 3 from a to b
    TransferPlan plan = balance_workloads(devices);
    REQUIRE(plan.transfers.size() == 1);
    CHECK(plan.transfers[0].amount == doctest::Approx(3.0).epsilon(1e-12));
    apply_transfers(devices, plan);
    CHECK(devices[0].workload == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(devices[1].workload == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(devices[0].predicted == 0.0);
    CHECK(devices[1].predicted == 0.0);
}

TEST_CASE("balance + apply: conservation and min-max optimality on random instances") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> load(0.0, 100.0);
    std::uniform_real_distribution<double> cap(0.5, 4.0);
    std::uniform_int_distribution<int> count(2, 12);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<DeviceState> devices;
        const int n = count(rng);
        for (int i = 0; i < n; ++i)
            devices.push_back(dev("d" + std::to_string(i), load(rng), cap(rng), load(rng) / 10.0));
        double total_before = 0.0, max_before = 0.0;
        for (const auto& d : devices) {
            total_before += d.workload + d.predicted;
            max_before = std::max(max_before, (d.workload + d.predicted) / d.capacity);
        }
        const double oracle = minmax_oracle(devices);
        std::vector<DeviceState> after = devices;
        apply_transfers(after, balance_workloads(devices));
        double total_after = 0.0, max_after = 0.0;
        for (const auto& d : after) {
            total_after += d.workload;
            max_after = std::max(max_after, d.workload / d.capacity);
        }
        CHECK(std::abs(total_after - total_before) <= 1e-9);
        CHECK(max_after <= max_before + 1e-9);
        CHECK(max_after <= oracle + 1e-6);
    }
}

TEST_CASE("apply_transfers: infeasible and malformed plans are rejected") {
    std::vector<DeviceState> devices{dev("a", 1.0), dev("b", 1.0)};
    TransferPlan plan;
    SUBCASE("outgoing exceeds held load") {
        plan.transfers.push_back({0, 1, 5.0});
        CHECK_THROWS_AS(apply_transfers(devices, plan), std::invalid_argument);
    }
    SUBCASE("self transfer") {
        plan.transfers.push_back({0, 0, 0.5});
        CHECK_THROWS_AS(apply_transfers(devices, plan), std::invalid_argument);
    }
    SUBCASE("endpoint out of range") {
        plan.transfers.push_back({0, 7, 0.5});
        CHECK_THROWS_AS(apply_transfers(devices, plan), std::invalid_argument);
    }
    SUBCASE("negative amount") {
        plan.transfers.push_back({0, 1, -0.5});
        CHECK_THROWS_AS(apply_transfers(devices, plan), std::invalid_argument);
    }
}

TEST_CASE("contribution_score: exact oracles") {
    SUBCASE("features disconnected from the loss score zero") {
        Tape t;
        Var f = t.leaf(Tensor({3, 4}, 1.0));
        Var p = t.param("p", Tensor({1, 1}, {2.0}));
        t.backward(sum(mul(p, p)));
        CHECK(contribution_score("idle", t, f).score == 0.0);
    }
    SUBCASE("loss = sum(features) gives per-row gradient of ones, score sqrt(d)") {
        Tape t;
        Var f = t.leaf(Tensor({5, 9}, 0.3));
        t.backward(sum(f));
        CHECK(contribution_score("dev", t, f).score ==
              doctest::Approx(std::sqrt(9.0)).epsilon(1e-12));
    }
    SUBCASE("loss = 0.5*sum(f^2): row gradient is the row itself") {
        Tape t;
        Tensor fv({2, 2}, {3.0, 4.0, 0.0, 0.0});
        Var f = t.leaf(fv);
        t.backward(scale(sum(mul(f, f)), 0.5));
        // row norms 5 and 0 -> mean 2.5
        CHECK(contribution_score("dev", t, f).score == doctest::Approx(2.5).epsilon(1e-12));
    }
    SUBCASE("invalid features handle") {
        Tape t;
        CHECK_THROWS_AS(contribution_score("dev", t, Var{}), std::invalid_argument);
    }
}

TEST_CASE("contribution_score: informative modality outscores pure noise (seed majority)") {
    int informative_wins = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SyntheticSpec s;
        s.num_classes = 4;
        s.img_dim = 8;
        s.txt_dim = 8;
        s.noise_img = 0.1;
        s.noise_txt = 0.1;
        s.txt_informativeness = 0.0;  // modality B carries no class signal
        s.n_train = 160;
        s.n_test = 40;
        s.seed = seed;
        SyntheticData d = generate_synthetic(s);
        PipelineConfig pc = sched_pipeline();
        pc.txt_dim = 8;
        PipelineModels m = PipelineModels::create(pc, seed);
        TrainConfig tc;
        tc.epochs1 = 15;
        tc.seed = seed;
        train_phase1(m, d.train, tc);

        Tape t;
        Var fi = m.tx->semantic_encoder.forward(t, t.leaf(d.train.x_img), false);
        Var ft = m.relay.modB_encoder->forward(t, t.leaf(d.train.x_txt), false);
        Var fused = m.relay.fusion_net.forward(t, concat_cols(fi, ft), false);
        Var logits = m.rx.fusion_semantic_decoder.forward(t, fused, false);
        t.backward(cross_entropy(logits, d.train.labels));
        const double a = contribution_score("imager", t, fi).score;
        const double b = contribution_score("texter", t, ft).score;
        if (a > b) ++informative_wins;
    }
    CHECK(informative_wins >= 3);
}

TEST_CASE("allocate_resources: proportional split, scale invariance, degenerate cases") {
    std::vector<ContributionScore> scores{{"a", 2.0}, {"b", 6.0}, {"c", 0.0}};
    auto alloc = allocate_resources(scores, 16.0);
    REQUIRE(alloc.size() == 3);
    CHECK(alloc[0] == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(alloc[1] == doctest::Approx(12.0).epsilon(1e-15));
    CHECK(alloc[2] == 0.0);

    SUBCASE("allocations always sum to the budget") {
        double s = 0.0;
        for (double a : alloc) s += a;
        CHECK(s == doctest::Approx(16.0).epsilon(1e-12));
    }
    SUBCASE("scaling all scores leaves allocations unchanged") {
        std::vector<ContributionScore> scaled = scores;
        for (auto& sc : scaled) sc.score *= 37.5;
        CHECK(allocate_resources(scaled, 16.0) == alloc);
    }
    SUBCASE("all-zero scores split evenly") {
        std::vector<ContributionScore> zero{{"a", 0.0}, {"b", 0.0}};
        auto even = allocate_resources(zero, 10.0);
        CHECK(even == std::vector<double>{5.0, 5.0});
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(allocate_resources(scores, -1.0), std::invalid_argument);
        CHECK_THROWS_AS(allocate_resources({}, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(allocate_resources({{"a", -2.0}}, 1.0), std::invalid_argument);
    }
}

TEST_CASE("joint_inference: bit-identical to the monolithic pipeline") {
    PipelineModels m = PipelineModels::create(sched_pipeline(), 13);
    std::mt19937_64 rng(3);
    Tensor xi = random_tensor({6, 8}, rng);
    Tensor xt = random_tensor({6, 6}, rng);
    JointInferenceReport report;
    Tensor split = joint_inference(m, xi, xt, 77, 4, &report);
    Tensor mono = end_to_end(xi, xt, m, 77, 4);
    CHECK(split.data == mono.data);

    CHECK(report.raw_input_dim == 8);
    CHECK(report.transmitted_dim == 10);  // n_sym1
    CHECK(report.local_bytes == 8LL * 6 * 10);
    CHECK(report.global_bytes == 8LL * 6 * 16);  // n_sym2
    CHECK(report.total_bytes() == report.local_bytes + report.global_bytes);
    CHECK(report.local_seconds >= 0.0);
    CHECK(report.global_seconds >= 0.0);
}

TEST_CASE("joint_inference: all pipeline modes stay coherent with end_to_end") {
    std::mt19937_64 rng(4);
    Tensor xi = random_tensor({3, 8}, rng);
    Tensor xt = random_tensor({3, 6}, rng);
    for (PipelineMode mode :
         {PipelineMode::dtcn, PipelineMode::jscc_image_only, PipelineMode::jscc_text_only}) {
        PipelineConfig pc = sched_pipeline();
        pc.mode = mode;
        PipelineModels m = PipelineModels::create(pc, 19);
        CHECK(joint_inference(m, xi, xt, 5, 0).data == end_to_end(xi, xt, m, 5, 0).data);
    }
}
