#include "dbcd/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace dbcd {
namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw SchemaError(path + ": expected an object");
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* k : allowed) {
            if (item.key() == k) {
                ok = true;
                break;
            }
        }
        if (!ok) throw SchemaError(path + ": unknown key '" + item.key() + "'");
    }
}

double get_number(const json& j, const std::string& path, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_number()) throw SchemaError(path + "/" + key + ": expected a number");
    return v.get<double>();
}

std::int64_t get_int(const json& j, const std::string& path, const char* key,
                     std::int64_t fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_number_integer()) throw SchemaError(path + "/" + key + ": expected an integer");
    return v.get<std::int64_t>();
}

bool get_bool(const json& j, const std::string& path, const char* key, bool fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_boolean()) throw SchemaError(path + "/" + key + ": expected a boolean");
    return v.get<bool>();
}

std::string get_string(const json& j, const std::string& path, const char* key,
                       const std::string& fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_string()) throw SchemaError(path + "/" + key + ": expected a string");
    return v.get<std::string>();
}

TrainingMode parse_mode(const std::string& s) {
    if (s == "csgd") return TrainingMode::CSgd;
    if (s == "dsgd") return TrainingMode::DSgd;
    if (s == "cbcd") return TrainingMode::CBcd;
    if (s == "ibcd") return TrainingMode::IBcd;
    if (s == "dbcd") return TrainingMode::DBcd;
    throw ValueOutOfRange("/mode: unknown mode '" + s + "'");
}

ParsedConfig from_json(const json& root) {
    ParsedConfig out;
    ExperimentConfig& cfg = out.experiment;

    check_keys(root, "", {"mode", "rounds", "layers", "hidden_dim", "neighbors", "init", "hyper",
                          "sgd", "aggregation", "data", "graph", "comm_budget", "termination",
                          "seeds", "threads", "timing", "free_grid", "sweep"});

    cfg.mode = parse_mode(get_string(root, "", "mode", "dbcd"));
    cfg.rounds = static_cast<int>(get_int(root, "", "rounds", 50));
    cfg.layers = static_cast<std::size_t>(get_int(root, "", "layers", 4));
    cfg.hidden_dim = static_cast<std::size_t>(get_int(root, "", "hidden_dim", 128));
    cfg.neighbors = static_cast<std::size_t>(get_int(root, "", "neighbors", 50));
    cfg.threads = static_cast<int>(get_int(root, "", "threads", 1));
    cfg.free_grid = get_bool(root, "", "free_grid", false);

    const std::string init = get_string(root, "", "init", "he");
    if (init == "he") {
        cfg.init = InitScheme::HeGaussian;
    } else if (init == "mirrored") {
        cfg.init = InitScheme::MirroredOrthogonal;
    } else {
        throw ValueOutOfRange("/init: expected 'he' or 'mirrored'");
    }

    const std::string timing = get_string(root, "", "timing", "none");
    if (timing == "none") {
        cfg.timing = TimingMode::None;
    } else if (timing == "wall") {
        cfg.timing = TimingMode::Wall;
    } else {
        throw ValueOutOfRange("/timing: expected 'none' or 'wall'");
    }

    if (root.contains("hyper")) {
        const json& h = root.at("hyper");
        check_keys(h, "/hyper",
                   {"gamma", "alpha", "mu", "lambda_w", "lambda_v", "loss", "vout_solver",
                    "vout_max_iter", "vout_tol", "u_out_alpha_coupling"});
        cfg.hyper.gamma = static_cast<real>(get_number(h, "/hyper", "gamma", 1));
        cfg.hyper.alpha = static_cast<real>(get_number(h, "/hyper", "alpha", 1));
        cfg.hyper.mu = static_cast<real>(get_number(h, "/hyper", "mu", 0.01));
        cfg.hyper.lambda_w = static_cast<real>(get_number(h, "/hyper", "lambda_w", 0));
        cfg.hyper.lambda_v = static_cast<real>(get_number(h, "/hyper", "lambda_v", 0));
        const std::string loss = get_string(h, "/hyper", "loss", "ce");
        if (loss == "ce") {
            cfg.hyper.loss = LossKind::SoftmaxCrossEntropy;
        } else if (loss == "squared") {
            cfg.hyper.loss = LossKind::Squared;
        } else {
            throw ValueOutOfRange("/hyper/loss: expected 'ce' or 'squared'");
        }
        const std::string solver = get_string(h, "/hyper", "vout_solver",
                                              loss == "squared" ? "closed_form" : "prox_gradient");
        if (solver == "closed_form") {
            cfg.hyper.vout.kind = VOutSolver::Kind::ClosedFormSquared;
        } else if (solver == "prox_gradient") {
            cfg.hyper.vout.kind = VOutSolver::Kind::ProxGradient;
        } else {
            throw ValueOutOfRange("/hyper/vout_solver: expected 'closed_form' or 'prox_gradient'");
        }
        cfg.hyper.vout.max_iter = static_cast<int>(get_int(h, "/hyper", "vout_max_iter", 50));
        cfg.hyper.vout.tol = get_number(h, "/hyper", "vout_tol", 1e-8);
        cfg.hyper.u_out_alpha_coupling = get_bool(h, "/hyper", "u_out_alpha_coupling", false);
    } else {
        cfg.hyper.vout.kind = VOutSolver::Kind::ProxGradient;
    }
    if (cfg.hyper.loss == LossKind::Squared) {
        cfg.hyper.vout.kind = VOutSolver::Kind::ClosedFormSquared;
    }

    if (root.contains("sgd")) {
        const json& s = root.at("sgd");
        check_keys(s, "/sgd", {"learning_rate", "batch_size", "epochs_per_round"});
        cfg.sgd.learning_rate = static_cast<real>(get_number(s, "/sgd", "learning_rate", 0.05));
        cfg.sgd.batch_size = static_cast<std::size_t>(get_int(s, "/sgd", "batch_size", 128));
        cfg.sgd.epochs_per_round = static_cast<int>(get_int(s, "/sgd", "epochs_per_round", 1));
    }

    cfg.agg.mu = cfg.hyper.mu;
    if (root.contains("aggregation")) {
        const json& a = root.at("aggregation");
        check_keys(a, "/aggregation", {"mode", "similarity_floor", "share", "staleness"});
        const std::string mode = get_string(a, "/aggregation", "mode", "similarity");
        if (mode == "similarity") {
            cfg.agg.mode = AggregationMode::SimilarityWeighted;
        } else if (mode == "mean") {
            cfg.agg.mode = AggregationMode::MeanAggregation;
        } else if (mode == "off") {
            cfg.agg.mode = AggregationMode::Off;
        } else {
            throw ValueOutOfRange("/aggregation/mode: expected 'similarity', 'mean', or 'off'");
        }
        cfg.agg.similarity_floor =
            static_cast<real>(get_number(a, "/aggregation", "similarity_floor", 0));
        cfg.agg.staleness = static_cast<int>(get_int(a, "/aggregation", "staleness", 0));
        const std::string share = get_string(a, "/aggregation", "share", "post_agg");
        if (share == "post_agg") {
            cfg.agg.share = SnapshotShare::PostAggregation;
        } else if (share == "raw") {
            cfg.agg.share = SnapshotShare::Raw;
        } else {
            throw ValueOutOfRange("/aggregation/share: expected 'post_agg' or 'raw'");
        }
    }

    if (root.contains("data")) {
        const json& d = root.at("data");
        check_keys(d, "/data",
                   {"source", "devices", "per_device", "dims", "classes", "heterogeneity",
                    "separation", "idx_images", "idx_labels", "csv_dir", "sparsity_r"});
        const std::string source = get_string(d, "/data", "source", "blobs");
        if (source == "blobs") {
            cfg.data.source = DataSource::Blobs;
        } else if (source == "idx") {
            cfg.data.source = DataSource::Idx;
        } else if (source == "csv") {
            cfg.data.source = DataSource::Csv;
        } else {
            throw ValueOutOfRange("/data/source: expected 'blobs', 'idx', or 'csv'");
        }
        cfg.data.devices = static_cast<std::size_t>(get_int(d, "/data", "devices", 10));
        cfg.data.per_device = static_cast<std::size_t>(get_int(d, "/data", "per_device", 200));
        cfg.data.dims = static_cast<std::size_t>(get_int(d, "/data", "dims", 8));
        cfg.data.classes = static_cast<std::size_t>(get_int(d, "/data", "classes", 3));
        cfg.data.heterogeneity = get_number(d, "/data", "heterogeneity", 0.5);
        cfg.data.separation = get_number(d, "/data", "separation", 4);
        cfg.data.idx_images = get_string(d, "/data", "idx_images", "");
        cfg.data.idx_labels = get_string(d, "/data", "idx_labels", "");
        cfg.data.csv_dir = get_string(d, "/data", "csv_dir", "");
        cfg.data.sparsity_r = get_number(d, "/data", "sparsity_r", 100);
    }

    if (root.contains("graph")) {
        const json& g = root.at("graph");
        check_keys(g, "/graph", {"max_degree", "cost_lo", "cost_hi", "cost_csv"});
        cfg.graph.max_degree = static_cast<std::size_t>(get_int(g, "/graph", "max_degree", 50));
        cfg.graph.cost_lo = static_cast<real>(get_number(g, "/graph", "cost_lo", 0.5));
        cfg.graph.cost_hi = static_cast<real>(get_number(g, "/graph", "cost_hi", 2.0));
        cfg.graph.cost_csv = get_string(g, "/graph", "cost_csv", "");
    }

    if (root.contains("comm_budget") && !root.at("comm_budget").is_null()) {
        const json& b = root.at("comm_budget");
        check_keys(b, "/comm_budget", {"exchanges_per_hour", "hours"});
        CommBudget budget;
        budget.exchanges_per_hour =
            static_cast<int>(get_int(b, "/comm_budget", "exchanges_per_hour", 60));
        budget.hours = static_cast<int>(get_int(b, "/comm_budget", "hours", 10));
        cfg.comm_budget = budget;
    }

    if (root.contains("termination")) {
        const json& t = root.at("termination");
        check_keys(t, "/termination", {"plateau_enabled", "patience", "min_delta"});
        cfg.termination.plateau_enabled = get_bool(t, "/termination", "plateau_enabled", true);
        cfg.termination.patience = static_cast<int>(get_int(t, "/termination", "patience", 10));
        cfg.termination.min_delta = get_number(t, "/termination", "min_delta", 1e-4);
    }

    if (root.contains("seeds")) {
        const json& s = root.at("seeds");
        check_keys(s, "/seeds", {"data", "init", "graph"});
        cfg.seeds.data = static_cast<std::uint64_t>(get_int(s, "/seeds", "data", 1));
        cfg.seeds.init = static_cast<std::uint64_t>(get_int(s, "/seeds", "init", 2));
        cfg.seeds.graph = static_cast<std::uint64_t>(get_int(s, "/seeds", "graph", 3));
    }

    if (root.contains("sweep")) {
        const json& s = root.at("sweep");
        check_keys(s, "/sweep", {"param", "values"});
        out.sweep.param = get_string(s, "/sweep", "param", "");
        if (s.contains("values")) {
            if (!s.at("values").is_array()) throw SchemaError("/sweep/values: expected an array");
            for (const auto& v : s.at("values")) {
                if (!v.is_number()) throw SchemaError("/sweep/values: expected numbers");
                out.sweep.values.push_back(v.get<double>());
            }
        }
    }

    try {
        cfg.validate();
    } catch (const ValueOutOfRange& e) {
        throw ValueOutOfRange(std::string("config: ") + e.what());
    }
    return out;
}

json apply_override(json root, const std::string& key, const std::string& value) {
    json parsed;
    try {
        parsed = json::parse(value);
    } catch (const json::parse_error&) {
        parsed = value; // plain strings stay strings
    }
    json* node = &root;
    std::stringstream ss(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    if (parts.empty()) throw SchemaError("override: empty key");
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        node = &(*node)[parts[i]];
    }
    (*node)[parts.back()] = parsed;
    return root;
}

} // namespace

ParsedConfig parse_config_text(const std::string& text, const Overrides& overrides) {
    json root = json::object();
    if (!text.empty()) {
        try {
            root = json::parse(text);
        } catch (const json::parse_error& e) {
            throw SchemaError(std::string("config: invalid JSON: ") + e.what());
        }
    }
    for (const auto& [key, value] : overrides) {
        root = apply_override(std::move(root), key, value);
    }
    return from_json(root);
}

ParsedConfig parse_config_file(const std::string& path, const Overrides& overrides) {
    if (path.empty()) return parse_config_text("", overrides);
    std::ifstream in(path);
    if (!in) throw Error("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), overrides);
}

namespace {

json to_json(const ParsedConfig& parsed) {
    const ExperimentConfig& cfg = parsed.experiment;
    json root;
    root["mode"] = training_mode_name(cfg.mode);
    root["rounds"] = cfg.rounds;
    root["layers"] = cfg.layers;
    root["hidden_dim"] = cfg.hidden_dim;
    root["neighbors"] = cfg.neighbors;
    root["init"] = cfg.init == InitScheme::MirroredOrthogonal ? "mirrored" : "he";
    root["threads"] = cfg.threads;
    root["timing"] = cfg.timing == TimingMode::Wall ? "wall" : "none";
    root["free_grid"] = cfg.free_grid;
    root["hyper"] = {
        {"gamma", cfg.hyper.gamma},
        {"alpha", cfg.hyper.alpha},
        {"mu", cfg.hyper.mu},
        {"lambda_w", cfg.hyper.lambda_w},
        {"lambda_v", cfg.hyper.lambda_v},
        {"loss", cfg.hyper.loss == LossKind::Squared ? "squared" : "ce"},
        {"vout_solver", cfg.hyper.vout.kind == VOutSolver::Kind::ClosedFormSquared
                            ? "closed_form"
                            : "prox_gradient"},
        {"vout_max_iter", cfg.hyper.vout.max_iter},
        {"vout_tol", cfg.hyper.vout.tol},
        {"u_out_alpha_coupling", cfg.hyper.u_out_alpha_coupling},
    };
    root["sgd"] = {
        {"learning_rate", cfg.sgd.learning_rate},
        {"batch_size", cfg.sgd.batch_size},
        {"epochs_per_round", cfg.sgd.epochs_per_round},
    };
    const char* agg_mode = "similarity";
    if (cfg.agg.mode == AggregationMode::MeanAggregation) agg_mode = "mean";
    if (cfg.agg.mode == AggregationMode::Off) agg_mode = "off";
    root["aggregation"] = {
        {"mode", agg_mode},
        {"similarity_floor", cfg.agg.similarity_floor},
        {"share", cfg.agg.share == SnapshotShare::Raw ? "raw" : "post_agg"},
        {"staleness", cfg.agg.staleness},
    };
    const char* source = "blobs";
    if (cfg.data.source == DataSource::Idx) source = "idx";
    if (cfg.data.source == DataSource::Csv) source = "csv";
    root["data"] = {
        {"source", source},
        {"devices", cfg.data.devices},
        {"per_device", cfg.data.per_device},
        {"dims", cfg.data.dims},
        {"classes", cfg.data.classes},
        {"heterogeneity", cfg.data.heterogeneity},
        {"separation", cfg.data.separation},
        {"idx_images", cfg.data.idx_images},
        {"idx_labels", cfg.data.idx_labels},
        {"csv_dir", cfg.data.csv_dir},
        {"sparsity_r", cfg.data.sparsity_r},
    };
    root["graph"] = {
        {"max_degree", cfg.graph.max_degree},
        {"cost_lo", cfg.graph.cost_lo},
        {"cost_hi", cfg.graph.cost_hi},
        {"cost_csv", cfg.graph.cost_csv},
    };
    if (cfg.comm_budget) {
        root["comm_budget"] = {
            {"exchanges_per_hour", cfg.comm_budget->exchanges_per_hour},
            {"hours", cfg.comm_budget->hours},
        };
    }
    root["termination"] = {
        {"plateau_enabled", cfg.termination.plateau_enabled},
        {"patience", cfg.termination.patience},
        {"min_delta", cfg.termination.min_delta},
    };
    root["seeds"] = {
        {"data", cfg.seeds.data},
        {"init", cfg.seeds.init},
        {"graph", cfg.seeds.graph},
    };
    if (!parsed.sweep.param.empty()) {
        root["sweep"] = {{"param", parsed.sweep.param}, {"values", parsed.sweep.values}};
    }
    return root;
}

json metrics_json(const Metrics& m) {
    json j;
    j["acc"] = m.acc;
    j["mpre"] = m.macro_pre;
    j["mrec"] = m.macro_rec;
    if (m.classes == 2) {
        j["pre_pos"] = m.pre_pos;
        j["rec_pos"] = m.rec_pos;
    }
    j["absent_class"] = m.absent_class;
    return j;
}

} // namespace

std::string config_echo_json(const ParsedConfig& cfg) {
    return to_json(cfg).dump(2) + "\n";
}

std::string run_summary_json(const ParsedConfig& cfg, const RunResult& result) {
    json j;
    j["mode"] = training_mode_name(cfg.experiment.mode);
    j["rounds_run"] = result.rounds_run;
    j["final_val"] = metrics_json(result.final_val);
    j["final_test"] = metrics_json(result.final_test);
    j["aggregation_events"] = result.aggregation_events;
    if (!result.hourly_train_sizes.empty()) {
        j["hourly_train_sizes"] = result.hourly_train_sizes;
    }
    j["config"] = to_json(cfg);
    return j.dump(2) + "\n";
}

} // namespace dbcd
