#include "dtcn/training.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace dtcn {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<Mlp*> all_nets(PipelineModels& m) {
    std::vector<Mlp*> nets;
    if (m.tx) {
        nets.push_back(&m.tx->semantic_encoder);
        nets.push_back(&m.tx->jsc_encoder);
    }
    if (m.relay.jsc_decoder) nets.push_back(&*m.relay.jsc_decoder);
    if (m.relay.modB_encoder) nets.push_back(&*m.relay.modB_encoder);
    nets.push_back(&m.relay.fusion_net);
    nets.push_back(&m.relay.jsc_encoder2);
    nets.push_back(&m.rx.jsc_decoder2);
    nets.push_back(&m.rx.fusion_semantic_decoder);
    return nets;
}

void apply_grads(PipelineModels& m, const ParameterSet& grads, double lr) {
    for (Mlp* net : all_nets(m))
        for (auto& e : net->params().entries())
            if (grads.contains(e.name)) {
                const Tensor& g = grads.at(e.name);
                for (std::size_t i = 0; i < e.tensor.data.size(); ++i)
                    e.tensor.data[i] -= lr * g.data[i];
            }
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

Dataset take_batch(const Dataset& data, const std::vector<std::size_t>& order, std::size_t begin,
                   std::size_t end) {
    std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                  order.begin() + static_cast<std::ptrdiff_t>(end));
    return data.select(rows);
}

void require_nonempty(const Dataset& data, const char* what) {
    if (data.size() == 0) throw std::invalid_argument(std::string(what) + ": empty dataset");
}

}  // namespace

Var direct_path_logits(Tape& t, const Tensor& x_img, const Tensor& x_txt,
                       const PipelineModels& models, bool trainable) {
    const PipelineConfig& cfg = models.cfg;
    const std::size_t batch = cfg.has_image_branch() ? x_img.rows() : x_txt.rows();
    Var sem = cfg.has_image_branch()
                  ? models.tx->semantic_encoder.forward(t, t.leaf(x_img), trainable)
                  : t.leaf(Tensor({batch, cfg.d_sem}));
    Var txt = cfg.has_text_branch()
                  ? models.relay.modB_encoder->forward(t, t.leaf(x_txt), trainable)
                  : t.leaf(Tensor({batch, cfg.d_txt}));
    Var fused = models.relay.fusion_net.forward(t, concat_cols(sem, txt), trainable);
    return models.rx.fusion_semantic_decoder.forward(t, fused, trainable);
}

std::vector<MetricsRecord> train_phase1(PipelineModels& models, const Dataset& data,
                                        const TrainConfig& cfg) {
    require_nonempty(data, "train_phase1");
    std::vector<MetricsRecord> records;
    const auto t0 = Clock::now();
    for (int epoch = 0; epoch < cfg.epochs1; ++epoch) {
        auto order = epoch_order(data.size(), combine_seed(cfg.seed, 1, static_cast<std::uint64_t>(epoch)));
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t b = 0; b < data.size(); b += cfg.batch_size) {
            const std::size_t e = std::min(b + cfg.batch_size, data.size());
            Dataset batch = take_batch(data, order, b, e);
            Tape t;
            Var logits = direct_path_logits(t, batch.x_img, batch.x_txt, models, true);
            Var loss = cross_entropy(logits, batch.labels);
            t.backward(loss);
            apply_grads(models, t.param_grads(), cfg.lr1);
            loss_sum += loss.value().item() * static_cast<double>(batch.size());
            auto preds = argmax_rows(logits.value());
            for (std::size_t i = 0; i < preds.size(); ++i)
                if (preds[i] == batch.labels[i]) ++correct;
        }
        records.push_back({1, epoch + 1, loss_sum / static_cast<double>(data.size()),
                           static_cast<double>(correct) / static_cast<double>(data.size()),
                           cfg.train_snr_db, seconds_since(t0)});
    }
    return records;
}

std::vector<MetricsRecord> train_phase2(PipelineModels& models, const Dataset& data,
                                        const TrainConfig& cfg) {
    require_nonempty(data, "train_phase2");
    const PipelineConfig& pc = models.cfg;
    models.cfg.snr1_db = cfg.train_snr_db;
    models.cfg.snr2_db = cfg.train_snr_db;

    // Pre-channel features from the frozen phase-1 modules.
    Tensor feat_sem, feat_fused;
    {
        Tensor sem = pc.has_image_branch() ? models.tx->semantic_encoder.forward_value(data.x_img)
                                           : Tensor({data.size(), pc.d_sem});
        Tensor txt = pc.has_text_branch() ? models.relay.modB_encoder->forward_value(data.x_txt)
                                          : Tensor({data.size(), pc.d_txt});
        Tape t;
        Tensor fused_in = concat_cols(t.leaf(sem), t.leaf(txt)).value();
        feat_fused = models.relay.fusion_net.forward_value(fused_in);
        feat_sem = std::move(sem);
    }

    std::vector<MetricsRecord> records;
    const auto t0 = Clock::now();
    std::uint64_t batch_counter = 0;
    for (int epoch = 0; epoch < cfg.epochs2; ++epoch) {
        auto order = epoch_order(data.size(), combine_seed(cfg.seed, 2, static_cast<std::uint64_t>(epoch)));
        double loss_sum = 0.0;
        std::size_t loss_terms = 0;
        for (std::size_t b = 0; b < data.size(); b += cfg.batch_size) {
            const std::size_t e = std::min(b + cfg.batch_size, data.size());
            std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(b),
                                          order.begin() + static_cast<std::ptrdiff_t>(e));
            ++batch_counter;
            if (pc.has_image_branch()) {
                Tensor f({rows.size(), pc.d_sem});
                for (std::size_t r = 0; r < rows.size(); ++r)
                    std::copy_n(feat_sem.data.data() + rows[r] * pc.d_sem, pc.d_sem,
                                f.data.data() + r * pc.d_sem);
                Tape t;
                Var target = t.leaf(f);
                Var sym = normalize_rows_power(models.tx->jsc_encoder.forward(t, target, true));
                Rng rng(derive_hop_seed(combine_seed(cfg.seed, 2), HopTag::device_to_relay,
                                        batch_counter));
                Var noisy = add_constant(sym, draw_awgn_noise(sym.value().shape, cfg.train_snr_db, rng));
                Var recon = models.relay.jsc_decoder->forward(t, noisy, true);
                Var loss = l1(recon, target);
                t.backward(loss);
                apply_grads(models, t.param_grads(), cfg.lr2);
                loss_sum += loss.value().item();
                ++loss_terms;
            }
            {
                Tensor f({rows.size(), pc.d_fused});
                for (std::size_t r = 0; r < rows.size(); ++r)
                    std::copy_n(feat_fused.data.data() + rows[r] * pc.d_fused, pc.d_fused,
                                f.data.data() + r * pc.d_fused);
                Tape t;
                Var target = t.leaf(f);
                Var sym = normalize_rows_power(models.relay.jsc_encoder2.forward(t, target, true));
                Rng rng(derive_hop_seed(combine_seed(cfg.seed, 2), HopTag::relay_to_receiver,
                                        batch_counter));
                Var noisy = add_constant(sym, draw_awgn_noise(sym.value().shape, cfg.train_snr_db, rng));
                Var recon = models.rx.jsc_decoder2.forward(t, noisy, true);
                Var loss = l1(recon, target);
                t.backward(loss);
                apply_grads(models, t.param_grads(), cfg.lr2);
                loss_sum += loss.value().item();
                ++loss_terms;
            }
        }
        const double acc = evaluate(models, data, cfg.train_snr_db,
                                    combine_seed(cfg.seed, 0xACC2, static_cast<std::uint64_t>(epoch)));
        records.push_back({2, epoch + 1, loss_sum / static_cast<double>(loss_terms), acc,
                           cfg.train_snr_db, seconds_since(t0)});
    }
    return records;
}

std::vector<MetricsRecord> train_phase3(PipelineModels& models, const Dataset& data,
                                        const TrainConfig& cfg) {
    require_nonempty(data, "train_phase3");
    models.cfg.snr1_db = cfg.train_snr_db;
    models.cfg.snr2_db = cfg.train_snr_db;
    std::vector<MetricsRecord> records;
    const auto t0 = Clock::now();
    std::uint64_t batch_counter = 0;
    for (int epoch = 0; epoch < cfg.epochs3; ++epoch) {
        auto order = epoch_order(data.size(), combine_seed(cfg.seed, 3, static_cast<std::uint64_t>(epoch)));
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t b = 0; b < data.size(); b += cfg.batch_size) {
            const std::size_t e = std::min(b + cfg.batch_size, data.size());
            Dataset batch = take_batch(data, order, b, e);
            ++batch_counter;
            Tape t;
            Var logits = end_to_end_tape(t, batch.x_img, batch.x_txt, models,
                                         combine_seed(cfg.seed, 3), batch_counter, true);
            Var loss = cross_entropy(logits, batch.labels);
            t.backward(loss);
            apply_grads(models, t.param_grads(), cfg.lr3);
            loss_sum += loss.value().item() * static_cast<double>(batch.size());
            auto preds = argmax_rows(logits.value());
            for (std::size_t i = 0; i < preds.size(); ++i)
                if (preds[i] == batch.labels[i]) ++correct;
        }
        records.push_back({3, epoch + 1, loss_sum / static_cast<double>(data.size()),
                           static_cast<double>(correct) / static_cast<double>(data.size()),
                           cfg.train_snr_db, seconds_since(t0)});
    }
    return records;
}

std::vector<MetricsRecord> train_all_phases(PipelineModels& models, const Dataset& data,
                                            const TrainConfig& cfg) {
    std::vector<MetricsRecord> all = train_phase1(models, data, cfg);
    auto p2 = train_phase2(models, data, cfg);
    all.insert(all.end(), p2.begin(), p2.end());
    auto p3 = train_phase3(models, data, cfg);
    all.insert(all.end(), p3.begin(), p3.end());
    return all;
}

double evaluate(const PipelineModels& models, const Dataset& test_data, double snr_db,
                std::uint64_t seed) {
    if (test_data.size() == 0) throw std::invalid_argument("evaluate: empty test set");
    PipelineModels m = models;
    m.cfg.snr1_db = snr_db;
    m.cfg.snr2_db = snr_db;
    constexpr std::size_t kEvalBatch = 256;
    std::size_t correct = 0;
    std::uint64_t batch_index = 0;
    for (std::size_t b = 0; b < test_data.size(); b += kEvalBatch) {
        const std::size_t e = std::min(b + kEvalBatch, test_data.size());
        std::vector<std::size_t> rows(e - b);
        std::iota(rows.begin(), rows.end(), b);
        Dataset batch = test_data.select(rows);
        Tensor logits = end_to_end(batch.x_img, batch.x_txt, m, combine_seed(seed, 0xE7A1),
                                   batch_index++);
        auto preds = argmax_rows(logits);
        for (std::size_t i = 0; i < preds.size(); ++i)
            if (preds[i] == batch.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(test_data.size());
}

double evaluate_noiseless(const PipelineModels& models, const Dataset& test_data) {
    return evaluate(models, test_data, std::numeric_limits<double>::infinity(), 0);
}

void append_metrics_csv(const std::string& path, const std::vector<MetricsRecord>& records) {
    const bool fresh = !std::filesystem::exists(path);
    std::ofstream os(path, std::ios::app);
    if (!os) throw std::runtime_error("metrics: cannot open " + path);
    if (fresh) os << "phase,epoch,loss,accuracy,snr_db,wall_seconds\n";
    os.precision(17);
    for (const auto& r : records)
        os << r.phase << ',' << r.epoch << ',' << r.loss << ',' << r.accuracy << ',' << r.snr_db
           << ',' << r.wall_seconds << '\n';
}

}  // namespace dtcn
