#include "dtcn/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "dtcn/scheduler.hpp"
#include "json.hpp"

namespace dtcn {

namespace fs = std::filesystem;
using nlohmann::json;

ExperimentConfig default_config() { return ExperimentConfig{}; }

namespace {

class ConfigReader {
public:
    ConfigReader(const json& root, std::vector<std::string>& errors)
        : root_(root), errors_(errors) {}

    void check_keys(const json& obj, const std::string& path,
                    const std::vector<std::string>& allowed) {
        if (!obj.is_object()) {
            error(path, "expected an object");
            return;
        }
        for (const auto& [key, _] : obj.items())
            if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
                error(path.empty() ? key : path + "." + key, "unknown key");
    }

    template <typename T>
    void get(const json& obj, const std::string& path, const char* key, T& out) {
        if (!obj.is_object() || !obj.contains(key)) return;
        try {
            out = obj.at(key).get<T>();
        } catch (const json::exception&) {
            error(path + "." + key, "wrong type");
        }
    }

    void require(bool ok, const std::string& path, const std::string& msg) {
        if (!ok) error(path, msg);
    }

    void error(const std::string& path, const std::string& msg) {
        errors_.push_back(path + ": " + msg);
    }

private:
    const json& root_;
    std::vector<std::string>& errors_;
};

ExperimentConfig parse_config(const json& j, std::vector<std::string>& errors) {
    ExperimentConfig cfg;
    ConfigReader r(j, errors);
    r.check_keys(j, "", {"dataset", "pipeline", "train", "snr_sweep", "modes", "mask_fraction",
                         "masked_eval", "upper_bound", "fl_enabled", "fl", "seeds"});
    if (!j.is_object()) return cfg;

    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        r.check_keys(d, "dataset",
                     {"num_classes", "img_dim", "txt_dim", "separation", "noise_img", "noise_txt",
                      "txt_informativeness", "n_train", "n_test", "seed"});
        r.get(d, "dataset", "num_classes", cfg.dataset.num_classes);
        r.get(d, "dataset", "img_dim", cfg.dataset.img_dim);
        r.get(d, "dataset", "txt_dim", cfg.dataset.txt_dim);
        r.get(d, "dataset", "separation", cfg.dataset.separation);
        r.get(d, "dataset", "noise_img", cfg.dataset.noise_img);
        r.get(d, "dataset", "noise_txt", cfg.dataset.noise_txt);
        r.get(d, "dataset", "txt_informativeness", cfg.dataset.txt_informativeness);
        r.get(d, "dataset", "n_train", cfg.dataset.n_train);
        r.get(d, "dataset", "n_test", cfg.dataset.n_test);
        r.get(d, "dataset", "seed", cfg.dataset.seed);
    }
    r.require(cfg.dataset.num_classes >= 2, "dataset.num_classes", "need at least 2 classes");
    r.require(cfg.dataset.img_dim >= 1, "dataset.img_dim", "must be positive");
    r.require(cfg.dataset.txt_dim >= 1, "dataset.txt_dim", "must be positive");
    r.require(cfg.dataset.txt_informativeness >= 0.0 && cfg.dataset.txt_informativeness <= 1.0,
              "dataset.txt_informativeness", "must be in [0,1]");
    r.require(cfg.dataset.n_train >= 1, "dataset.n_train", "must be positive");
    r.require(cfg.dataset.n_test >= 1, "dataset.n_test", "must be positive");

    if (j.contains("pipeline")) {
        const json& p = j.at("pipeline");
        r.check_keys(p, "pipeline", {"d_sem", "d_txt", "d_fused", "n_sym1", "n_sym2", "hidden"});
        r.get(p, "pipeline", "d_sem", cfg.pipeline.d_sem);
        r.get(p, "pipeline", "d_txt", cfg.pipeline.d_txt);
        r.get(p, "pipeline", "d_fused", cfg.pipeline.d_fused);
        r.get(p, "pipeline", "n_sym1", cfg.pipeline.n_sym1);
        r.get(p, "pipeline", "n_sym2", cfg.pipeline.n_sym2);
        r.get(p, "pipeline", "hidden", cfg.pipeline.hidden);
    }
    for (auto [v, name] : {std::pair<std::size_t, const char*>{cfg.pipeline.d_sem, "pipeline.d_sem"},
                           {cfg.pipeline.d_txt, "pipeline.d_txt"},
                           {cfg.pipeline.d_fused, "pipeline.d_fused"},
                           {cfg.pipeline.n_sym1, "pipeline.n_sym1"},
                           {cfg.pipeline.n_sym2, "pipeline.n_sym2"},
                           {cfg.pipeline.hidden, "pipeline.hidden"}})
        r.require(v >= 1, name, "must be positive");

    if (j.contains("train")) {
        const json& t = j.at("train");
        r.check_keys(t, "train", {"epochs1", "epochs2", "epochs3", "lr1", "lr2", "lr3",
                                  "batch_size", "train_snr_db", "seed"});
        r.get(t, "train", "epochs1", cfg.train.epochs1);
        r.get(t, "train", "epochs2", cfg.train.epochs2);
        r.get(t, "train", "epochs3", cfg.train.epochs3);
        r.get(t, "train", "lr1", cfg.train.lr1);
        r.get(t, "train", "lr2", cfg.train.lr2);
        r.get(t, "train", "lr3", cfg.train.lr3);
        r.get(t, "train", "batch_size", cfg.train.batch_size);
        r.get(t, "train", "train_snr_db", cfg.train.train_snr_db);
        r.get(t, "train", "seed", cfg.train.seed);
    }
    r.require(cfg.train.epochs1 >= 1, "train.epochs1", "must be positive");
    r.require(cfg.train.epochs2 >= 1, "train.epochs2", "must be positive");
    r.require(cfg.train.epochs3 >= 1, "train.epochs3", "must be positive");
    r.require(cfg.train.lr1 >= 0.0, "train.lr1", "must be nonnegative");
    r.require(cfg.train.lr2 >= 0.0, "train.lr2", "must be nonnegative");
    r.require(cfg.train.lr3 >= 0.0, "train.lr3", "must be nonnegative");
    r.require(cfg.train.batch_size >= 1, "train.batch_size", "must be positive");

    if (j.contains("snr_sweep")) {
        try {
            cfg.snr_sweep = j.at("snr_sweep").get<std::vector<double>>();
        } catch (const json::exception&) {
            r.error("snr_sweep", "expected an array of numbers");
        }
    }
    r.require(!cfg.snr_sweep.empty(), "snr_sweep", "must be nonempty");

    if (j.contains("modes")) {
        cfg.modes.clear();
        if (!j.at("modes").is_array()) {
            r.error("modes", "expected an array of mode names");
        } else {
            for (const auto& m : j.at("modes")) {
                try {
                    cfg.modes.push_back(pipeline_mode_from_string(m.get<std::string>()));
                } catch (const std::exception&) {
                    r.error("modes", "unknown mode " + m.dump());
                }
            }
        }
    }
    r.require(!cfg.modes.empty(), "modes", "must be nonempty");

    r.get(j, "", "mask_fraction", cfg.mask_fraction);
    r.require(cfg.mask_fraction >= 0.0 && cfg.mask_fraction <= 1.0, "mask_fraction",
              "must be in [0,1]");
    r.get(j, "", "masked_eval", cfg.masked_eval);
    r.get(j, "", "upper_bound", cfg.upper_bound);
    r.get(j, "", "fl_enabled", cfg.fl_enabled);

    if (j.contains("fl")) {
        const json& f = j.at("fl");
        r.check_keys(f, "fl", {"n_clients", "rounds", "local_epochs", "client_weights",
                               "partition", "seed", "stop_improvement_pp"});
        r.get(f, "fl", "n_clients", cfg.fl.n_clients);
        r.get(f, "fl", "rounds", cfg.fl.rounds);
        r.get(f, "fl", "local_epochs", cfg.fl.local_epochs);
        r.get(f, "fl", "client_weights", cfg.fl.client_weights);
        r.get(f, "fl", "seed", cfg.fl.seed);
        r.get(f, "fl", "stop_improvement_pp", cfg.fl.stop_improvement_pp);
        if (f.contains("partition")) {
            std::string p;
            r.get(f, "fl", "partition", p);
            if (p == "iid_equal")
                cfg.fl.partition = Partition::iid_equal;
            else if (p == "label_skew")
                cfg.fl.partition = Partition::label_skew;
            else
                r.error("fl.partition", "must be iid_equal or label_skew");
        }
        r.require(cfg.fl.n_clients >= 1, "fl.n_clients", "must be positive");
        r.require(cfg.fl.local_epochs >= 1, "fl.local_epochs", "must be positive");
        if (!cfg.fl.client_weights.empty()) {
            r.require(cfg.fl.client_weights.size() == static_cast<std::size_t>(cfg.fl.n_clients),
                      "fl.client_weights", "length must equal fl.n_clients");
            double sum = 0.0;
            bool nonneg = true;
            for (double w : cfg.fl.client_weights) {
                sum += w;
                nonneg = nonneg && w >= 0.0;
            }
            r.require(nonneg, "fl.client_weights", "weights must be nonnegative");
            r.require(std::abs(sum - 1.0) <= 1e-12, "fl.client_weights",
                      "weights sum to " + std::to_string(sum) + ", expected 1");
        }
    }

    if (j.contains("seeds")) {
        try {
            cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        } catch (const json::exception&) {
            r.error("seeds", "expected an array of nonnegative integers");
        }
    }
    r.require(!cfg.seeds.empty(), "seeds", "must be nonempty");

    return cfg;
}

json read_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open " + path);
    return json::parse(is);
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
    std::vector<std::string> errors;
    ExperimentConfig cfg = parse_config(read_json_file(path), errors);
    if (!errors.empty()) {
        std::ostringstream os;
        os << "config " << path << " invalid:";
        for (const auto& e : errors) os << "\n  " << e;
        throw std::invalid_argument(os.str());
    }
    return cfg;
}

std::vector<std::string> validate_config_file(const std::string& path) {
    std::vector<std::string> errors;
    json j;
    try {
        j = read_json_file(path);
    } catch (const std::exception& e) {
        errors.push_back(e.what());
        return errors;
    }
    parse_config(j, errors);
    return errors;
}

void save_pipeline_checkpoint(const PipelineModels& models, const std::string& dir,
                              const std::string& stem) {
    fs::create_directories(dir);
    const std::string base = (fs::path(dir) / stem).string();
    if (models.tx) {
        ParameterSet tx_ps;
        models.tx->semantic_encoder.export_to(tx_ps);
        models.tx->jsc_encoder.export_to(tx_ps);
        save_params(tx_ps, base + "_tx.ckpt");
    }
    ParameterSet relay_ps;
    if (models.relay.jsc_decoder) models.relay.jsc_decoder->export_to(relay_ps);
    if (models.relay.modB_encoder) models.relay.modB_encoder->export_to(relay_ps);
    models.relay.fusion_net.export_to(relay_ps);
    models.relay.jsc_encoder2.export_to(relay_ps);
    save_params(relay_ps, base + "_relay.ckpt");
    ParameterSet rx_ps;
    models.rx.jsc_decoder2.export_to(rx_ps);
    models.rx.fusion_semantic_decoder.export_to(rx_ps);
    save_params(rx_ps, base + "_rx.ckpt");

    const PipelineConfig& c = models.cfg;
    json manifest = {{"mode", to_string(c.mode)},
                     {"img_dim", c.img_dim},
                     {"txt_dim", c.txt_dim},
                     {"num_classes", c.num_classes},
                     {"d_sem", c.d_sem},
                     {"d_txt", c.d_txt},
                     {"d_fused", c.d_fused},
                     {"n_sym1", c.n_sym1},
                     {"n_sym2", c.n_sym2},
                     {"hidden", c.hidden},
                     {"snr1_db", c.snr1_db},
                     {"snr2_db", c.snr2_db}};
    std::ofstream os(base + "_manifest.json");
    os << manifest.dump(2) << "\n";
}

PipelineModels load_pipeline_checkpoint(const std::string& dir, const std::string& stem) {
    const std::string base = (fs::path(dir) / stem).string();
    std::ifstream is(base + "_manifest.json");
    if (!is) throw std::runtime_error("checkpoint: missing manifest " + base + "_manifest.json");
    json m = json::parse(is);
    PipelineConfig cfg;
    cfg.mode = pipeline_mode_from_string(m.at("mode").get<std::string>());
    cfg.img_dim = m.at("img_dim").get<std::size_t>();
    cfg.txt_dim = m.at("txt_dim").get<std::size_t>();
    cfg.num_classes = m.at("num_classes").get<std::size_t>();
    cfg.d_sem = m.at("d_sem").get<std::size_t>();
    cfg.d_txt = m.at("d_txt").get<std::size_t>();
    cfg.d_fused = m.at("d_fused").get<std::size_t>();
    cfg.n_sym1 = m.at("n_sym1").get<std::size_t>();
    cfg.n_sym2 = m.at("n_sym2").get<std::size_t>();
    cfg.hidden = m.at("hidden").get<std::size_t>();
    cfg.snr1_db = m.at("snr1_db").get<double>();
    cfg.snr2_db = m.at("snr2_db").get<double>();
    PipelineModels models = PipelineModels::create(cfg, 0);
    if (models.tx) {
        ParameterSet tx_ps = load_params(base + "_tx.ckpt");
        models.tx->semantic_encoder.load_from(tx_ps);
        models.tx->jsc_encoder.load_from(tx_ps);
    }
    ParameterSet relay_ps = load_params(base + "_relay.ckpt");
    if (models.relay.jsc_decoder) models.relay.jsc_decoder->load_from(relay_ps);
    if (models.relay.modB_encoder) models.relay.modB_encoder->load_from(relay_ps);
    models.relay.fusion_net.load_from(relay_ps);
    models.relay.jsc_encoder2.load_from(relay_ps);
    ParameterSet rx_ps = load_params(base + "_rx.ckpt");
    models.rx.jsc_decoder2.load_from(rx_ps);
    models.rx.fusion_semantic_decoder.load_from(rx_ps);
    return models;
}

namespace {

std::string snr_label(double snr) {
    std::ostringstream os;
    os << snr;
    std::string s = os.str();
    for (auto& c : s)
        if (c == '-') c = 'm';
    return s;
}

}  // namespace

SweepResult run_sweep(const ExperimentConfig& config, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const std::string ckpt_dir = (fs::path(out_dir) / "checkpoints").string();
    SweepResult result;

    for (PipelineMode mode : config.modes) {
        for (std::uint64_t seed : config.seeds) {
            SyntheticSpec dspec = config.dataset;
            dspec.seed = combine_seed(config.dataset.seed, seed);
            SyntheticData data = generate_synthetic(dspec);
            for (double snr : config.snr_sweep) {
                PipelineConfig pc = config.pipeline;
                pc.img_dim = dspec.img_dim;
                pc.txt_dim = dspec.txt_dim;
                pc.num_classes = static_cast<std::size_t>(dspec.num_classes);
                pc.mode = mode;
                pc.snr1_db = snr;
                pc.snr2_db = snr;
                PipelineModels models =
                    PipelineModels::create(pc, combine_seed(seed, static_cast<std::uint64_t>(mode)));
                TrainConfig tc = config.train;
                tc.seed = seed;
                tc.train_snr_db = snr;
                train_all_phases(models, data.train, tc);

                const std::string stem = to_string(mode) + "_snr" + snr_label(snr) + "_seed" +
                                         std::to_string(seed);
                save_pipeline_checkpoint(models, ckpt_dir, stem);

                const std::uint64_t eval_seed = combine_seed(seed, 0xE7A1,
                                                             static_cast<std::uint64_t>(
                                                                 std::llround(snr * 1000.0)));
                SweepRow base{to_string(mode), snr, false, false, false, seed,
                              evaluate(models, data.test, snr, eval_seed),
                              "checkpoints/" + stem};
                result.rows.push_back(base);

                if (config.masked_eval) {
                    Dataset masked = mask_modality_a(data.test, config.mask_fraction,
                                                     combine_seed(seed, 0x3A5C));
                    SweepRow row = base;
                    row.masked = true;
                    row.accuracy = evaluate(models, masked, snr, eval_seed);
                    result.rows.push_back(row);
                }
                if (config.upper_bound) {
                    SweepRow row = base;
                    row.upper_bound = true;
                    row.accuracy = evaluate_noiseless(models, data.test);
                    result.rows.push_back(row);
                }
                if (config.fl_enabled) {
                    PipelineModels fresh = PipelineModels::create(
                        pc, combine_seed(seed, static_cast<std::uint64_t>(mode)));
                    FederatedConfig fl = config.fl;
                    fl.seed = combine_seed(config.fl.seed, seed);
                    FederatedResult fr = run_federated(fl, fresh, data.train, data.test, tc);
                    const std::string fl_stem = stem + "_fl";
                    save_pipeline_checkpoint(fr.models, ckpt_dir, fl_stem);
                    SweepRow row = base;
                    row.fl = true;
                    row.accuracy = evaluate(fr.models, data.test, snr, eval_seed);
                    row.checkpoint = "checkpoints/" + fl_stem;
                    result.rows.push_back(row);
                }
            }
        }
    }

    std::sort(result.rows.begin(), result.rows.end(), [](const SweepRow& a, const SweepRow& b) {
        return std::tie(a.mode, a.snr_db, a.masked, a.fl, a.upper_bound, a.seed) <
               std::tie(b.mode, b.snr_db, b.masked, b.fl, b.upper_bound, b.seed);
    });

    write_sweep_csv(result, (fs::path(out_dir) / "results.csv").string());
    json rows = json::array();
    for (const auto& r : result.rows)
        rows.push_back({{"mode", r.mode},
                        {"snr_db", r.snr_db},
                        {"masked", r.masked},
                        {"fl", r.fl},
                        {"upper_bound", r.upper_bound},
                        {"seed", r.seed},
                        {"accuracy", r.accuracy},
                        {"checkpoint", r.checkpoint}});
    std::ofstream js((fs::path(out_dir) / "results.json").string());
    js << rows.dump(2) << "\n";
    return result;
}

void write_sweep_csv(const SweepResult& result, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("sweep: cannot open " + path);
    os.precision(17);
    os << "mode,snr_db,masked,fl,upper_bound,seed,accuracy\n";
    for (const auto& r : result.rows)
        os << r.mode << ',' << r.snr_db << ',' << (r.masked ? 1 : 0) << ',' << (r.fl ? 1 : 0)
           << ',' << (r.upper_bound ? 1 : 0) << ',' << r.seed << ',' << r.accuracy << '\n';
}

BalanceSimReport run_balance_sim(const std::string& trace_path, const BalanceSimConfig& cfg,
                                 const std::string& out_csv) {
    std::ifstream is(trace_path);
    if (!is) throw std::runtime_error("balance-sim: cannot open trace " + trace_path);

    struct Arrival {
        long long tick;
        std::string device;
        double workload;
    };
    std::vector<Arrival> arrivals;
    std::vector<std::string> device_order;
    std::map<std::string, std::size_t> device_index;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line_no == 1 && line.rfind("tick,", 0) == 0) continue;  // optional header
        std::istringstream ls(line);
        std::string tick_s, dev, load_s;
        if (!std::getline(ls, tick_s, ',') || !std::getline(ls, dev, ',') ||
            !std::getline(ls, load_s))
            throw std::runtime_error("balance-sim: malformed trace row at line " +
                                     std::to_string(line_no));
        try {
            Arrival a{std::stoll(tick_s), dev, std::stod(load_s)};
            if (a.workload < 0.0) throw std::invalid_argument("negative workload");
            arrivals.push_back(a);
        } catch (const std::exception&) {
            throw std::runtime_error("balance-sim: malformed trace row at line " +
                                     std::to_string(line_no));
        }
        if (!device_index.count(dev)) {
            device_index[dev] = device_order.size();
            device_order.push_back(dev);
        }
    }
    if (arrivals.empty()) throw std::runtime_error("balance-sim: empty trace " + trace_path);
    std::stable_sort(arrivals.begin(), arrivals.end(),
                     [](const Arrival& a, const Arrival& b) { return a.tick < b.tick; });

    const std::size_t n = device_order.size();
    std::vector<DeviceState> balanced(n), unbalanced(n);
    for (std::size_t i = 0; i < n; ++i) {
        balanced[i].id = device_order[i];
        balanced[i].capacity = cfg.default_capacity;
        unbalanced[i] = balanced[i];
    }

    std::ofstream os;
    if (!out_csv.empty()) {
        os.open(out_csv);
        if (!os) throw std::runtime_error("balance-sim: cannot open " + out_csv);
        os.precision(17);
        os << "tick,device_id,pre_load,post_load,allocation\n";
    }

    BalanceSimReport report;
    double bal_sum = 0.0, unbal_sum = 0.0;
    std::size_t cursor = 0;
    const long long first_tick = arrivals.front().tick;
    const long long last_tick = arrivals.back().tick;
    for (long long tick = first_tick; tick <= last_tick; ++tick) {
        std::vector<double> arrived(n, 0.0);
        while (cursor < arrivals.size() && arrivals[cursor].tick == tick) {
            arrived[device_index[arrivals[cursor].device]] += arrivals[cursor].workload;
            ++cursor;
        }
        double bal_max = 0.0, unbal_max = 0.0;
        std::vector<double> pre(n);
        for (std::size_t i = 0; i < n; ++i) {
            unbalanced[i].workload += arrived[i];
            balanced[i].workload += arrived[i];
            balanced[i].history.push_back(arrived[i]);
            balanced[i].predicted = predict_workload(balanced[i].history, cfg.ewma_alpha);
            pre[i] = balanced[i].workload;
            unbal_max = std::max(unbal_max, unbalanced[i].workload / unbalanced[i].capacity);
        }
        // Plan on current + predicted load, then cap each donor's outgoing
        // transfers by the work it actually holds.
        TransferPlan plan = balance_workloads(balanced);
        std::vector<double> outgoing(n, 0.0);
        for (const auto& t : plan.transfers) outgoing[t.from] += t.amount;
        for (auto& t : plan.transfers)
            if (outgoing[t.from] > balanced[t.from].workload && outgoing[t.from] > 0.0)
                t.amount *= balanced[t.from].workload / outgoing[t.from];
        std::vector<double> predicted_backup(n);
        for (std::size_t i = 0; i < n; ++i) {
            predicted_backup[i] = balanced[i].predicted;
            balanced[i].predicted = 0.0;  // move only real work between queues
        }
        apply_transfers(balanced, plan);

        std::vector<ContributionScore> scores(n);
        double cap_budget = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = {balanced[i].id, predicted_backup[i]};
            cap_budget += balanced[i].capacity;
        }
        std::vector<double> alloc = allocate_resources(scores, cap_budget);

        for (std::size_t i = 0; i < n; ++i) {
            bal_max = std::max(bal_max, balanced[i].workload / balanced[i].capacity);
            if (os.is_open())
                os << tick << ',' << balanced[i].id << ',' << pre[i] << ',' << balanced[i].workload
                   << ',' << alloc[i] << '\n';
        }
        bal_sum += bal_max;
        unbal_sum += unbal_max;
        report.balanced_max_norm_load = std::max(report.balanced_max_norm_load, bal_max);
        report.unbalanced_max_norm_load = std::max(report.unbalanced_max_norm_load, unbal_max);
        ++report.ticks;

        // serve up to capacity
        for (std::size_t i = 0; i < n; ++i) {
            balanced[i].workload = std::max(0.0, balanced[i].workload - balanced[i].capacity);
            unbalanced[i].workload = std::max(0.0, unbalanced[i].workload - unbalanced[i].capacity);
        }
    }
    report.balanced_mean_norm_load = bal_sum / static_cast<double>(report.ticks);
    report.unbalanced_mean_norm_load = unbal_sum / static_cast<double>(report.ticks);
    return report;
}

}  // namespace dtcn
