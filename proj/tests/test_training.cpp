#include <cstdio>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "dtcn/training.hpp"
#include "test_util.hpp"

using namespace dtcn;

namespace {

SyntheticSpec small_spec() {
    SyntheticSpec s;
    s.num_classes = 4;
    s.img_dim = 8;
    s.txt_dim = 6;
    s.noise_img = 0.25;
    s.noise_txt = 0.25;
    s.n_train = 240;
    s.n_test = 160;
    s.seed = 11;
    return s;
}

PipelineConfig small_pipeline(const SyntheticSpec& s) {
    PipelineConfig cfg;
    cfg.img_dim = s.img_dim;
    cfg.txt_dim = s.txt_dim;
    cfg.num_classes = static_cast<std::size_t>(s.num_classes);
    cfg.d_sem = 6;
    cfg.d_txt = 4;
    cfg.d_fused = 8;
    cfg.n_sym1 = 10;
    cfg.n_sym2 = 16;
    cfg.hidden = 12;
    return cfg;
}

TrainConfig quick_cfg(int e1, int e2, int e3) {
    TrainConfig tc;
    tc.epochs1 = e1;
    tc.epochs2 = e2;
    tc.epochs3 = e3;
    tc.seed = 5;
    return tc;
}

}  // namespace

TEST_CASE("train_phase1: loss decreases and accuracy beats chance on separable data") {
    SyntheticData d = generate_synthetic(small_spec());
    PipelineModels m = PipelineModels::create(small_pipeline(small_spec()), 3);
    auto recs = train_phase1(m, d.train, quick_cfg(8, 0, 0));
    REQUIRE(recs.size() == 8);
    CHECK(recs.front().phase == 1);
    CHECK(recs.front().epoch == 1);
    CHECK(recs.back().loss < recs.front().loss);
    CHECK(recs.back().accuracy > 0.5);  // chance is 0.25
    for (const auto& r : recs) CHECK(r.wall_seconds >= 0.0);
}

TEST_CASE("train_phase1: lr = 0 leaves every parameter bit-identical") {
    SyntheticData d = generate_synthetic(small_spec());
    PipelineModels m = PipelineModels::create(small_pipeline(small_spec()), 3);
    ParameterSet before = m.all_params();
    TrainConfig tc = quick_cfg(2, 0, 0);
    tc.lr1 = 0.0;
    train_phase1(m, d.train, tc);
    ParameterSet after = m.all_params();
    REQUIRE(after.size() == before.size());
    for (const auto& e : before.entries()) CHECK(after.at(e.name).data == e.tensor.data);
}

TEST_CASE("training is deterministic for a fixed seed") {
    SyntheticData d = generate_synthetic(small_spec());
    PipelineModels a = PipelineModels::create(small_pipeline(small_spec()), 3);
    PipelineModels b = PipelineModels::create(small_pipeline(small_spec()), 3);
    TrainConfig tc = quick_cfg(2, 2, 2);
    auto ra = train_all_phases(a, d.train, tc);
    auto rb = train_all_phases(b, d.train, tc);
    REQUIRE(ra.size() == rb.size());
    for (std::size_t i = 0; i < ra.size(); ++i) {
        CHECK(ra[i].loss == rb[i].loss);
        CHECK(ra[i].accuracy == rb[i].accuracy);
    }
    ParameterSet pa = a.all_params();
    ParameterSet pb = b.all_params();
    for (const auto& e : pa.entries()) CHECK(pb.at(e.name).data == e.tensor.data);
}

TEST_CASE("train_phase2: phase-1 modules stay bit-identical (freeze contract)") {
    SyntheticData d = generate_synthetic(small_spec());
    PipelineModels m = PipelineModels::create(small_pipeline(small_spec()), 3);
    train_phase1(m, d.train, quick_cfg(3, 0, 0));
    ParameterSet frozen = m.all_params();
    train_phase2(m, d.train, quick_cfg(0, 3, 0));
    ParameterSet after = m.all_params();
    auto is_jsc = [](const std::string& name) {
        return name.rfind("tx.jsc.", 0) == 0 || name.rfind("relay.jscdec.", 0) == 0 ||
               name.rfind("relay.jsc2.", 0) == 0 || name.rfind("rx.jscdec2.", 0) == 0;
    };
    bool some_jsc_moved = false;
    for (const auto& e : frozen.entries()) {
        if (is_jsc(e.name)) {
            if (after.at(e.name).data != e.tensor.data) some_jsc_moved = true;
        } else {
            CHECK_MESSAGE(after.at(e.name).data == e.tensor.data, e.name);
        }
    }
    CHECK(some_jsc_moved);
}

TEST_CASE("train_phase2: codecs learn near-identity reconstruction on a clean hop") {
    SyntheticSpec s = small_spec();
    SyntheticData d = generate_synthetic(s);
    PipelineConfig pc = small_pipeline(s);
    pc.snr1_db = pc.snr2_db = 300.0;  // effectively noise-free hops
    PipelineModels m = PipelineModels::create(pc, 3);
    train_phase1(m, d.train, quick_cfg(5, 0, 0));

    auto hop1_recon_err = [&]() {
        Tensor feat = m.tx->semantic_encoder.forward_value(d.train.x_img);
        SemanticFrame f = normalize_power(
            {m.tx->jsc_encoder.forward_value(feat), HopTag::device_to_relay});
        Tensor rec = m.relay.jsc_decoder->forward_value(f.symbols);
        double err = 0.0;
        for (std::size_t i = 0; i < feat.size(); ++i) err += std::abs(rec.data[i] - feat.data[i]);
        return err / static_cast<double>(feat.size());
    };
    const double before = hop1_recon_err();
    TrainConfig tc = quick_cfg(0, 50, 0);
    tc.train_snr_db = 300.0;
    tc.lr2 = 0.05;
    train_phase2(m, d.train, tc);
    const double after = hop1_recon_err();
    CHECK(after < 0.25 * before);
    CHECK(after < 0.15);
}

TEST_CASE("train_phase3: joint tuning does not hurt matched-SNR accuracy") {
    SyntheticData d = generate_synthetic(small_spec());
    PipelineModels m = PipelineModels::create(small_pipeline(small_spec()), 3);
    TrainConfig tc = quick_cfg(6, 10, 0);
    tc.train_snr_db = 5.0;
    m.cfg.snr1_db = m.cfg.snr2_db = 5.0;
    train_phase1(m, d.train, tc);
    train_phase2(m, d.train, tc);
    const double before = evaluate(m, d.test, 5.0, 99);
    TrainConfig tc3 = quick_cfg(0, 0, 10);
    tc3.train_snr_db = 5.0;
    train_phase3(m, d.train, tc3);
    const double after = evaluate(m, d.test, 5.0, 99);
    CHECK(after >= before - 0.02);
    CHECK(after > 0.5);
}

TEST_CASE("evaluate: accuracy is monotone in SNR for a trained model (trend over seeds)") {
    SyntheticData d = generate_synthetic(small_spec());
    PipelineModels m = PipelineModels::create(small_pipeline(small_spec()), 3);
    TrainConfig tc = quick_cfg(6, 10, 6);
    tc.train_snr_db = 5.0;
    train_all_phases(m, d.train, tc);
    double low = 0.0, high = 0.0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        low += evaluate(m, d.test, -15.0, seed);
        high += evaluate(m, d.test, 10.0, seed);
    }
    CHECK(high > low);
    CHECK(evaluate_noiseless(m, d.test) >= high / 3.0 - 0.05);
}

TEST_CASE("evaluate: perfect and chance oracles") {
    SyntheticSpec s = small_spec();
    s.num_classes = 4;
    s.noise_img = 0.0;
    s.noise_txt = 0.0;
    s.n_train = 64;
    s.n_test = 2000;
    SyntheticData d = generate_synthetic(s);

    SUBCASE("untrained model at strong noise sits at chance within 3pp") {
        PipelineModels m = PipelineModels::create(small_pipeline(s), 77);
        const double acc = evaluate(m, d.test, -30.0, 5);
        CHECK(acc > 0.25 - 0.03);
        CHECK(acc < 0.25 + 0.03);
    }
    SUBCASE("noiseless prototypes are perfectly learnable") {
        PipelineModels m = PipelineModels::create(small_pipeline(s), 3);
        TrainConfig tc = quick_cfg(50, 0, 0);
        tc.lr1 = 0.1;
        train_phase1(m, d.train, tc);
        // direct-path training on noise-free prototypes reaches 100% train acc
        Tape t;
        auto preds = argmax_rows(direct_path_logits(t, d.train.x_img, d.train.x_txt, m, false).value());
        std::size_t correct = 0;
        for (std::size_t i = 0; i < preds.size(); ++i)
            if (preds[i] == d.train.labels[i]) ++correct;
        CHECK(correct == d.train.size());
    }
}

TEST_CASE("evaluate: empty test set is an error") {
    PipelineModels m = PipelineModels::create(small_pipeline(small_spec()), 3);
    Dataset empty;
    empty.x_img = Tensor({0, 8});
    empty.x_txt = Tensor({0, 6});
    empty.num_classes = 4;
    CHECK_THROWS_AS(evaluate(m, empty, 0.0, 1), std::invalid_argument);
}

TEST_CASE("append_metrics_csv: header once, one line per record") {
    const std::string path = "test_metrics_tmp.csv";
    std::remove(path.c_str());
    std::vector<MetricsRecord> recs{{1, 1, 2.5, 0.3, 10.0, 0.01}, {1, 2, 2.0, 0.4, 10.0, 0.01}};
    append_metrics_csv(path, recs);
    append_metrics_csv(path, {{2, 1, 1.5, 0.5, 10.0, 0.02}});
    std::ifstream in(path);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    in.close();
    std::remove(path.c_str());
    REQUIRE(lines.size() == 4);
    CHECK(lines[0] == "phase,epoch,loss,accuracy,snr_db,wall_seconds");
    CHECK(lines[1].rfind("1,1,2.5", 0) == 0);
    CHECK(lines[3].rfind("2,1,1.5", 0) == 0);
}
