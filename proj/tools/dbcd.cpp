#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dbcd/config.hpp"
#include "dbcd/oracles.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitOracle = 3;
constexpr int kExitRuntime = 4;

struct CommonArgs {
    std::string config_path;
    std::string out_dir = "out";
    std::vector<std::string> sets;
    std::optional<std::int64_t> seed_data, seed_init, seed_graph;
    std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON config path");
    cmd->add_option("--out", args.out_dir, "Output directory");
    cmd->add_option("--set", args.sets, "Override as dotted key=value (repeatable)");
    cmd->add_option("--seed-data", args.seed_data, "Data seed");
    cmd->add_option("--seed-init", args.seed_init, "Parameter init seed");
    cmd->add_option("--seed-graph", args.seed_graph, "Graph seed");
    cmd->add_option("--threads", args.threads, "Worker threads");
}

dbcd::ParsedConfig load_config(const CommonArgs& args) {
    dbcd::Overrides overrides;
    for (const auto& s : args.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) {
            throw dbcd::SchemaError("--set expects key=value, got '" + s + "'");
        }
        overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    if (args.seed_data) overrides.emplace_back("seeds.data", std::to_string(*args.seed_data));
    if (args.seed_init) overrides.emplace_back("seeds.init", std::to_string(*args.seed_init));
    if (args.seed_graph) overrides.emplace_back("seeds.graph", std::to_string(*args.seed_graph));
    if (args.threads) overrides.emplace_back("threads", std::to_string(*args.threads));
    return dbcd::parse_config_file(args.config_path, overrides);
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw dbcd::Error("cannot write " + path);
    out << content;
}

void write_run_outputs(const dbcd::ParsedConfig& cfg, const dbcd::RunResult& result,
                       const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    write_file(out_dir + "/metrics.csv", result.log.to_csv());
    write_file(out_dir + "/summary.json", dbcd::run_summary_json(cfg, result));
    write_file(out_dir + "/config_echo.json", dbcd::config_echo_json(cfg));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Decentralized block-coordinate-descent trainer and simulator"};
    app.require_subcommand(1);

    CommonArgs run_args, sweep_args, sim_args, gen_args;
    std::string sweep_param;
    std::vector<double> sweep_values;
    int oracle_cases = 1000;
    std::uint64_t oracle_seed = 2024;

    CLI::App* run_cmd = app.add_subcommand("run", "Train once and write metrics");
    add_common(run_cmd, run_args);

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "Run a hyperparameter sweep");
    add_common(sweep_cmd, sweep_args);
    sweep_cmd->add_option("--param", sweep_param, "Swept parameter (overrides config)");
    sweep_cmd->add_option("--values", sweep_values, "Swept values (overrides config)");

    CLI::App* sim_cmd = app.add_subcommand("simulate", "Budgeted hourly simulation");
    add_common(sim_cmd, sim_args);

    CLI::App* oracle_cmd = app.add_subcommand("oracle-check", "Brute-force solver validation");
    oracle_cmd->add_option("--cases", oracle_cases, "Cases per suite");
    oracle_cmd->add_option("--seed", oracle_seed, "Suite seed");

    CLI::App* gen_cmd = app.add_subcommand("gen-data", "Generate a dataset and graph as CSV");
    add_common(gen_cmd, gen_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (run_cmd->parsed()) {
            const auto cfg = load_config(run_args);
            const auto result = dbcd::run_experiment(cfg.experiment);
            write_run_outputs(cfg, result, run_args.out_dir);
            std::cout << "final test acc " << result.final_test.acc << " after "
                      << result.rounds_run << " rounds -> " << run_args.out_dir << "\n";
        } else if (sweep_cmd->parsed()) {
            const auto cfg = load_config(sweep_args);
            const std::string param = sweep_param.empty() ? cfg.sweep.param : sweep_param;
            const std::vector<double> values =
                sweep_values.empty() ? cfg.sweep.values : sweep_values;
            if (param.empty() || values.empty()) {
                throw dbcd::SchemaError("sweep: need sweep.param and sweep.values (config or flags)");
            }
            const auto entries = dbcd::sweep(cfg.experiment, param, values);
            std::filesystem::create_directories(sweep_args.out_dir);
            write_file(sweep_args.out_dir + "/sweep_summary.csv",
                       dbcd::sweep_summary_csv(param, entries));
            write_file(sweep_args.out_dir + "/config_echo.json", dbcd::config_echo_json(cfg));
            for (const auto& e : entries) {
                std::ostringstream name;
                name << sweep_args.out_dir << "/" << param << "_" << e.value << "_metrics.csv";
                write_file(name.str(), e.result.log.to_csv());
            }
            std::cout << "swept " << param << " over " << values.size() << " values -> "
                      << sweep_args.out_dir << "\n";
        } else if (sim_cmd->parsed()) {
            auto cfg = load_config(sim_args);
            if (!cfg.experiment.comm_budget) {
                cfg.experiment.comm_budget = dbcd::CommBudget{};
            }
            const auto result = dbcd::run_budgeted_simulation(cfg.experiment);
            write_run_outputs(cfg, result, sim_args.out_dir);
            std::cout << "simulated " << cfg.experiment.comm_budget->hours << " hours, final test acc "
                      << result.final_test.acc << " -> " << sim_args.out_dir << "\n";
        } else if (oracle_cmd->parsed()) {
            const auto report = dbcd::oracle::run_oracle_suites(oracle_cases, oracle_seed);
            dbcd::oracle::print_report(report, std::cout);
            if (!report.all_pass()) return kExitOracle;
        } else if (gen_cmd->parsed()) {
            const auto cfg = load_config(gen_args);
            const auto& d = cfg.experiment.data;
            const auto ds = dbcd::gen_blobs(d.devices, d.per_device, d.dims, d.classes,
                                            d.heterogeneity, cfg.experiment.seeds.data);
            std::filesystem::create_directories(gen_args.out_dir);
            dbcd::save_dataset_csv(ds, gen_args.out_dir);
            dbcd::SeededRng grng(dbcd::mix_seed(cfg.experiment.seeds.graph, 0x96a9));
            const auto graph = dbcd::build_random_graph(
                ds.device_count(), std::min(cfg.experiment.graph.max_degree, ds.device_count() - 1),
                cfg.experiment.graph.cost_lo, cfg.experiment.graph.cost_hi, grng);
            dbcd::save_cost_csv(graph, gen_args.out_dir + "/cost.csv");
            write_file(gen_args.out_dir + "/config_echo.json", dbcd::config_echo_json(cfg));
            std::cout << "wrote " << ds.device_count() << " device datasets -> " << gen_args.out_dir
                      << "\n";
        }
    } catch (const dbcd::SchemaError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const dbcd::ValueOutOfRange& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}
