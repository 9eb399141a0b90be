#include "dbcd/simulator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <thread>

namespace dbcd {
namespace {

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(count)));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = static_cast<std::size_t>(w); i < count;
                 i += static_cast<std::size_t>(workers)) {
                fn(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace

void ExperimentConfig::validate() const {
    if (rounds < 1) throw ValueOutOfRange("ExperimentConfig: rounds must be >= 1");
    if (layers < 1) throw ValueOutOfRange("ExperimentConfig: layers must be >= 1");
    if (hidden_dim < 1) throw ValueOutOfRange("ExperimentConfig: hidden_dim must be >= 1");
    if (threads < 1) throw ValueOutOfRange("ExperimentConfig: threads must be >= 1");
    hyper.validate();
    sgd.validate();
    agg.validate();
    if (data.source == DataSource::Blobs) {
        if (data.devices < 1) throw ValueOutOfRange("DataSpec: devices must be >= 1");
        if (data.per_device < 5) throw ValueOutOfRange("DataSpec: per_device must be >= 5");
        if (data.classes < 2) throw ValueOutOfRange("DataSpec: classes must be >= 2");
        if (data.heterogeneity < 0 || data.heterogeneity > 1) {
            throw ValueOutOfRange("DataSpec: heterogeneity must be in [0,1]");
        }
    }
    if (!(data.sparsity_r > 0) || data.sparsity_r > 100) {
        throw ValueOutOfRange("DataSpec: sparsity_r must be in (0, 100]");
    }
    if (comm_budget) {
        if (comm_budget->exchanges_per_hour < 1 || comm_budget->hours < 1) {
            throw ValueOutOfRange("CommBudget: hours and exchanges_per_hour must be >= 1");
        }
    }
}

Metrics evaluate(const MlpParams& params, const LocalDataset& data) {
    Metrics m;
    m.classes = params.output_dim();
    m.total = data.n();
    m.confusion.assign(m.classes * m.classes, 0);
    if (data.n() == 0) return m;

    const Matrix logits = forward(params, data.x);
    for (std::size_t j = 0; j < data.n(); ++j) {
        std::size_t pred = 0;
        for (std::size_t i = 1; i < m.classes; ++i) {
            if (logits(i, j) > logits(pred, j)) pred = i; // ties keep the lower index
        }
        const auto truth = static_cast<std::size_t>(data.y[j]);
        ++m.confusion[truth * m.classes + pred];
    }

    std::size_t correct = 0;
    double pre_sum = 0, rec_sum = 0;
    for (std::size_t c = 0; c < m.classes; ++c) {
        correct += m.confusion[c * m.classes + c];
        std::size_t row_total = 0, col_total = 0;
        for (std::size_t o = 0; o < m.classes; ++o) {
            row_total += m.confusion[c * m.classes + o];
            col_total += m.confusion[o * m.classes + c];
        }
        const auto diag = static_cast<double>(m.confusion[c * m.classes + c]);
        const double pre = col_total ? diag / static_cast<double>(col_total) : 0.0;
        const double rec = row_total ? diag / static_cast<double>(row_total) : 0.0;
        if (row_total == 0) m.absent_class = true;
        pre_sum += pre;
        rec_sum += rec;
        if (m.classes == 2 && c == 1) {
            m.pre_pos = pre;
            m.rec_pos = rec;
        }
    }
    m.acc = static_cast<double>(correct) / static_cast<double>(m.total);
    m.macro_pre = pre_sum / static_cast<double>(m.classes);
    m.macro_rec = rec_sum / static_cast<double>(m.classes);
    return m;
}

void MetricsLog::write_csv(std::ostream& out) const {
    out << "round,device,split,acc,mpre,mrec,objective,elapsed_ms\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.10g,%.3f", r.metrics.acc,
                      r.metrics.macro_pre, r.metrics.macro_rec, r.objective, r.elapsed_ms);
        out << r.round << ',';
        if (r.device < 0) {
            out << "GLOBAL";
        } else {
            out << r.device;
        }
        out << ',' << r.split << ',' << buf << '\n';
    }
}

std::string MetricsLog::to_csv() const {
    std::ostringstream ss;
    write_csv(ss);
    return ss.str();
}

namespace {

Metrics mean_metrics(const std::vector<Metrics>& per_device) {
    Metrics m;
    if (per_device.empty()) return m;
    for (const auto& d : per_device) {
        m.acc += d.acc;
        m.macro_pre += d.macro_pre;
        m.macro_rec += d.macro_rec;
        m.pre_pos += d.pre_pos;
        m.rec_pos += d.rec_pos;
        m.total += d.total;
        m.absent_class = m.absent_class || d.absent_class;
    }
    const auto n = static_cast<double>(per_device.size());
    m.acc /= n;
    m.macro_pre /= n;
    m.macro_rec /= n;
    m.pre_pos /= n;
    m.rec_pos /= n;
    m.classes = per_device.front().classes;
    return m;
}

FederatedDataset build_dataset(const ExperimentConfig& cfg) {
    FederatedDataset ds;
    switch (cfg.data.source) {
        case DataSource::Blobs:
            ds = gen_blobs(cfg.data.devices, cfg.data.per_device, cfg.data.dims, cfg.data.classes,
                           cfg.data.heterogeneity, cfg.seeds.data, cfg.data.separation);
            break;
        case DataSource::Idx: {
            const LocalDataset all = load_idx(cfg.data.idx_images, cfg.data.idx_labels);
            std::size_t classes = 0;
            for (int y : all.y) classes = std::max(classes, static_cast<std::size_t>(y) + 1);
            ds = distribute_evenly(all, classes, cfg.data.devices, cfg.seeds.data);
            break;
        }
        case DataSource::Csv:
            ds = load_dataset_csv(cfg.data.csv_dir);
            break;
    }
    if (cfg.data.sparsity_r < 100) {
        for (std::size_t a = 0; a < ds.device_count(); ++a) {
            ds.devices[a].train = subsample(
                ds.devices[a].train, {cfg.data.sparsity_r, mix_seed(cfg.seeds.data, 0x5a, a)});
        }
    }
    return ds;
}

// Everything one training run needs; both run_experiment and the budgeted
// simulation drive this engine.
struct Engine {
    const ExperimentConfig& cfg;
    FederatedDataset ds;
    bool centralized;
    std::size_t model_count; // devices, or 1 for centralized modes
    bool uses_bcd;
    bool uses_aggregation;

    std::vector<MlpParams> params;
    std::vector<AuxState> aux;
    std::vector<LocalDataset> train; // active training split per model
    LocalDataset pooled;             // centralized modes
    std::vector<NeighborSet> neighbor_sets;
    std::vector<std::vector<real>> neighbor_sims;
    // Published snapshot generations, newest first; index 0 is what a fully
    // synchronous read consumes. Older generations exist only under positive
    // staleness.
    std::vector<std::vector<MlpParams>> snapshot_history;

    RunResult result;
    int round = 0;
    double best_val_acc = -1;
    int stall_rounds = 0;

    explicit Engine(const ExperimentConfig& config) : cfg(config) {
        cfg.validate();
        ds = build_dataset(cfg);
        const std::size_t devices = ds.device_count();
        centralized = cfg.mode == TrainingMode::CSgd || cfg.mode == TrainingMode::CBcd;
        model_count = centralized ? 1 : devices;
        uses_bcd = cfg.mode == TrainingMode::CBcd || cfg.mode == TrainingMode::IBcd ||
                   cfg.mode == TrainingMode::DBcd;
        const std::size_t effective_m =
            (cfg.mode == TrainingMode::DBcd || cfg.mode == TrainingMode::DSgd) ? cfg.neighbors : 0;
        uses_aggregation = effective_m > 0 && cfg.agg.mode != AggregationMode::Off &&
                           !centralized && devices >= 2;

        std::vector<std::size_t> dims;
        dims.push_back(ds.input_dim);
        for (std::size_t i = 1; i < cfg.layers; ++i) dims.push_back(cfg.hidden_dim);
        dims.push_back(ds.class_count);

        params.reserve(model_count);
        for (std::size_t a = 0; a < model_count; ++a) {
            SeededRng rng(mix_seed(cfg.seeds.init, 0x171, a));
            params.push_back(init_params(dims, rng, cfg.init));
        }

        if (centralized) {
            std::vector<const LocalDataset*> parts;
            for (const auto& d : ds.devices) parts.push_back(&d.train);
            pooled = pool_datasets(parts);
            train.push_back(pooled);
        } else {
            for (auto& d : ds.devices) train.push_back(d.train);
        }

        if (uses_bcd) {
            aux.resize(model_count);
            for (std::size_t a = 0; a < model_count; ++a) {
                if (train[a].n() > 0) aux[a] = init_state(params[a], train[a]);
            }
        }

        if (uses_aggregation && devices >= 2) {
            DeviceGraph graph;
            if (!cfg.graph.cost_csv.empty()) {
                graph = load_cost_csv(cfg.graph.cost_csv);
            } else {
                SeededRng grng(mix_seed(cfg.seeds.graph, 0x96a9));
                graph = build_random_graph(devices, std::min(cfg.graph.max_degree, devices - 1),
                                           cfg.graph.cost_lo, cfg.graph.cost_hi, grng);
            }
            neighbor_sets.resize(devices);
            neighbor_sims.resize(devices);
            for (std::size_t a = 0; a < devices; ++a) {
                neighbor_sets[a] = select_neighbors(graph, a, effective_m);
                for (const std::size_t b : neighbor_sets[a].members) {
                    neighbor_sims[a].push_back(
                        similarity(ds.devices[a].profile, ds.devices[b].profile));
                }
            }
            snapshot_history.push_back(params);
        }

        result.aggregation_events.assign(model_count, 0);
    }

    void rebuild_aux() {
        if (!uses_bcd) return;
        for (std::size_t a = 0; a < model_count; ++a) {
            if (train[a].n() > 0) aux[a] = init_state(params[a], train[a]);
        }
    }

    void local_step() {
        parallel_for(model_count, cfg.threads, [&](std::size_t a) {
            if (train[a].n() == 0) return; // data-free devices only aggregate
            if (uses_bcd) {
                DeviceState state{std::move(params[a]), std::move(aux[a])};
                device_bcd_iteration(state, train[a], cfg.hyper);
                params[a] = std::move(state.params);
                aux[a] = std::move(state.aux);
            } else {
                SeededRng shuffle(mix_seed(cfg.seeds.init, static_cast<std::uint64_t>(round),
                                           0x5471u + a));
                for (int e = 0; e < cfg.sgd.epochs_per_round; ++e) {
                    params[a] = sgd_epoch(std::move(params[a]), train[a], cfg.sgd, shuffle);
                }
            }
        });
    }

    // Snapshot generation a device reads for one neighbor this round: 0 in
    // synchronous mode, otherwise a deterministic per-edge-per-round lag.
    std::size_t read_generation(std::size_t a, std::size_t b) const {
        if (cfg.agg.staleness == 0) return 0;
        const std::size_t lag =
            mix_seed(static_cast<std::uint64_t>(round), a, b) %
            static_cast<std::uint64_t>(cfg.agg.staleness + 1);
        return std::min(lag, snapshot_history.size() - 1);
    }

    void aggregate_round() {
        if (!uses_aggregation) return;
        std::vector<MlpParams> raw;
        if (cfg.agg.share == SnapshotShare::Raw) raw = params;
        std::vector<MlpParams> next(model_count);
        parallel_for(model_count, cfg.threads, [&](std::size_t a) {
            std::vector<const MlpParams*> nbrs;
            for (const std::size_t b : neighbor_sets[a].members) {
                nbrs.push_back(&snapshot_history[read_generation(a, b)][b]);
            }
            next[a] = aggregate(params[a], nbrs, neighbor_sims[a], cfg.agg);
            if (!nbrs.empty()) ++result.aggregation_events[a];
        });
        params = std::move(next);
        snapshot_history.insert(snapshot_history.begin(),
                                (cfg.agg.share == SnapshotShare::Raw) ? std::move(raw) : params);
        while (snapshot_history.size() > static_cast<std::size_t>(cfg.agg.staleness) + 1) {
            snapshot_history.pop_back();
        }
    }

    double model_objective(std::size_t a) const {
        if (train[a].n() == 0) return 0;
        if (uses_bcd) return objective_local(params[a], aux[a], train[a], cfg.hyper);
        return loss_value(forward(params[a], train[a].x), train[a].y,
                          LossKind::SoftmaxCrossEntropy);
    }

    // Per-device rows for both splits plus the GLOBAL mean rows.
    void evaluate_round(double elapsed_ms) {
        const std::size_t devices = ds.device_count();
        std::vector<Metrics> val_m(devices), test_m(devices);
        std::vector<double> objective(devices);
        const double central_obj = centralized ? model_objective(0) : 0;
        parallel_for(devices, cfg.threads, [&](std::size_t a) {
            const MlpParams& model = centralized ? params[0] : params[a];
            val_m[a] = evaluate(model, ds.devices[a].val);
            test_m[a] = evaluate(model, ds.devices[a].test);
            objective[a] = centralized ? central_obj : model_objective(a);
        });
        for (std::size_t a = 0; a < devices; ++a) {
            result.log.rows.push_back({round, static_cast<int>(a), "val", val_m[a], objective[a],
                                       elapsed_ms});
            result.log.rows.push_back({round, static_cast<int>(a), "test", test_m[a], objective[a],
                                       elapsed_ms});
        }
        double mean_obj = 0;
        for (double o : objective) mean_obj += o;
        mean_obj /= static_cast<double>(devices);
        result.final_val = mean_metrics(val_m);
        result.final_test = mean_metrics(test_m);
        result.log.rows.push_back({round, -1, "val", result.final_val, mean_obj, elapsed_ms});
        result.log.rows.push_back({round, -1, "test", result.final_test, mean_obj, elapsed_ms});
    }

    // Returns false when the plateau rule fires.
    bool note_round_result() {
        result.rounds_run = round;
        if (!cfg.termination.plateau_enabled) return true;
        if (result.final_val.acc > best_val_acc + cfg.termination.min_delta) {
            best_val_acc = result.final_val.acc;
            stall_rounds = 0;
        } else {
            ++stall_rounds;
            if (stall_rounds >= cfg.termination.patience) return false;
        }
        return true;
    }

    void run_round() {
        ++round;
        const auto t0 = std::chrono::steady_clock::now();
        local_step();
        aggregate_round();
        double elapsed = 0;
        if (cfg.timing == TimingMode::Wall) {
            elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                                t0)
                          .count();
        }
        evaluate_round(elapsed);
    }

    void finish() { result.final_params = params; }
};

} // namespace

RunResult run_experiment(const ExperimentConfig& cfg) {
    Engine engine(cfg);
    for (int k = 0; k < cfg.rounds; ++k) {
        engine.run_round();
        if (!engine.note_round_result()) break;
    }
    engine.finish();
    return std::move(engine.result);
}

RunResult run_budgeted_simulation(const ExperimentConfig& cfg) {
    if (!cfg.comm_budget) {
        return run_experiment(cfg);
    }
    Engine engine(cfg);
    const ArrivalSchedule schedule{cfg.comm_budget->hours};
    std::vector<LocalDataset> full_train = engine.train;
    engine.result.hourly_train_sizes.resize(static_cast<std::size_t>(schedule.hours));
    for (int t = 1; t <= schedule.hours; ++t) {
        for (std::size_t a = 0; a < engine.model_count; ++a) {
            engine.train[a] = available_at_hour(full_train[a], schedule, t);
            engine.result.hourly_train_sizes[static_cast<std::size_t>(t - 1)].push_back(
                engine.train[a].n());
        }
        engine.rebuild_aux();
        for (int c = 0; c < cfg.comm_budget->exchanges_per_hour; ++c) {
            engine.run_round();
            engine.result.rounds_run = engine.round;
        }
    }
    engine.finish();
    return std::move(engine.result);
}

void apply_sweep_value(ExperimentConfig& cfg, const std::string& param, double value) {
    static const std::set<double> m_grid{0, 5, 10, 50};
    static const std::set<double> l_grid{4, 8, 16, 32, 64};
    static const std::set<double> d_grid{32, 64, 128, 256};
    static const std::set<double> mu_grid{0.01, 0.1, 0.5, 0.9};
    static const std::set<double> ga_grid{0.1, 0.5, 1, 5, 10};

    const auto check = [&](const std::set<double>& grid) {
        if (!cfg.free_grid && grid.find(value) == grid.end()) {
            throw ValueOutOfRange("sweep: value " + std::to_string(value) +
                                  " outside the search grid for " + param +
                                  " (set free_grid to allow)");
        }
    };
    if (param == "neighbors" || param == "M") {
        check(m_grid);
        cfg.neighbors = static_cast<std::size_t>(value);
    } else if (param == "layers" || param == "L") {
        check(l_grid);
        cfg.layers = static_cast<std::size_t>(value);
    } else if (param == "hidden_dim" || param == "d") {
        check(d_grid);
        cfg.hidden_dim = static_cast<std::size_t>(value);
    } else if (param == "mu") {
        check(mu_grid);
        cfg.agg.mu = static_cast<real>(value);
        cfg.hyper.mu = static_cast<real>(value);
    } else if (param == "gamma") {
        check(ga_grid);
        cfg.hyper.gamma = static_cast<real>(value);
    } else if (param == "alpha") {
        check(ga_grid);
        cfg.hyper.alpha = static_cast<real>(value);
    } else if (param == "sparsity_r") {
        cfg.data.sparsity_r = value;
    } else {
        throw ValueOutOfRange("sweep: unknown parameter '" + param + "'");
    }
}

std::vector<SweepEntry> sweep(const ExperimentConfig& base, const std::string& param,
                              const std::vector<double>& values) {
    std::vector<SweepEntry> out;
    out.reserve(values.size());
    for (const double v : values) {
        ExperimentConfig cfg = base;
        apply_sweep_value(cfg, param, v);
        out.push_back({v, run_experiment(cfg)});
    }
    return out;
}

std::string sweep_summary_csv(const std::string& param, const std::vector<SweepEntry>& entries) {
    std::ostringstream ss;
    ss << "param,value,final_test_acc,final_test_mpre,final_test_mrec,rounds\n";
    char buf[128];
    for (const auto& e : entries) {
        std::snprintf(buf, sizeof buf, "%g,%.6f,%.6f,%.6f", e.value, e.result.final_test.acc,
                      e.result.final_test.macro_pre, e.result.final_test.macro_rec);
        ss << param << ',' << buf << ',' << e.result.rounds_run << '\n';
    }
    return ss.str();
}

} // namespace dbcd
