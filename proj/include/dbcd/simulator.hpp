#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dbcd/baselines.hpp"
#include "dbcd/bcd.hpp"
#include "dbcd/data.hpp"
#include "dbcd/network.hpp"

namespace dbcd {

enum class DataSource { Blobs, Idx, Csv };

struct DataSpec {
    DataSource source = DataSource::Blobs;
    std::size_t devices = 10;
    std::size_t per_device = 200;
    std::size_t dims = 8;
    std::size_t classes = 3;
    double heterogeneity = 0.5;
    double separation = 4;
    std::string idx_images;
    std::string idx_labels;
    std::string csv_dir;
    double sparsity_r = 100; // percent of each device's training split kept
};

struct GraphSpec {
    std::size_t max_degree = 50;
    real cost_lo = real(0.5);
    real cost_hi = real(2.0);
    std::string cost_csv; // load instead of generating when set
};

struct CommBudget {
    int exchanges_per_hour = 60;
    int hours = 10;
};

struct TerminationRule {
    bool plateau_enabled = true;
    int patience = 10;       // rounds without improvement before stopping
    double min_delta = 1e-4; // improvement threshold on global val accuracy
};

enum class TimingMode { None, Wall };

struct Seeds {
    std::uint64_t data = 1;
    std::uint64_t init = 2;
    std::uint64_t graph = 3;
};

struct ExperimentConfig {
    TrainingMode mode = TrainingMode::DBcd;
    int rounds = 50;
    std::size_t layers = 4;      // weight matrices, hidden plus output
    std::size_t hidden_dim = 128;
    std::size_t neighbors = 50;  // top-M neighbor count
    InitScheme init = InitScheme::HeGaussian;
    BcdHyper hyper;
    SgdConfig sgd;
    AggregationConfig agg;
    DataSpec data;
    GraphSpec graph;
    std::optional<CommBudget> comm_budget;
    TerminationRule termination;
    Seeds seeds;
    int threads = 1;
    TimingMode timing = TimingMode::None;
    bool free_grid = false; // allow sweep values outside the published grids

    void validate() const;
};

struct Metrics {
    double acc = 0;
    double macro_pre = 0;
    double macro_rec = 0;
    double pre_pos = 0; // binary tasks: precision/recall of class 1
    double rec_pos = 0;
    std::vector<std::size_t> confusion; // classes x classes, rows are truth
    std::size_t classes = 0;
    std::size_t total = 0;
    bool absent_class = false; // some class missing from the split
};

// Argmax prediction per column (ties to the lowest class index), confusion
// matrix, accuracy, macro precision/recall; absent classes contribute 0 and
// set the flag.
Metrics evaluate(const MlpParams& params, const LocalDataset& data);

struct LogRow {
    int round = 0;
    int device = -1; // -1 encodes the GLOBAL (unweighted device mean) row
    std::string split;
    Metrics metrics;
    double objective = 0;
    double elapsed_ms = 0;
};

struct MetricsLog {
    std::vector<LogRow> rows;

    void write_csv(std::ostream& out) const;
    std::string to_csv() const;
};

struct RunResult {
    MetricsLog log;
    int rounds_run = 0;
    Metrics final_val;  // global means at the last round
    Metrics final_test;
    std::vector<std::size_t> aggregation_events;            // per device
    std::vector<std::vector<std::size_t>> hourly_train_sizes; // [hour][device]
    std::vector<MlpParams> final_params;
};

RunResult run_experiment(const ExperimentConfig& cfg);

// Hourly simulation under a communication budget: hour t exposes the arrival
// prefix of each training split and allows exactly exchanges_per_hour
// local-step-plus-aggregate cycles. Log round numbering is global, so hour t
// covers rounds (t-1)*budget+1 .. t*budget.
RunResult run_budgeted_simulation(const ExperimentConfig& cfg);

struct SweepEntry {
    double value;
    RunResult result;
};

// Independent runs sharing all seeds except the swept parameter. Values are
// checked against the published search grids unless cfg.free_grid is set.
std::vector<SweepEntry> sweep(const ExperimentConfig& base, const std::string& param,
                              const std::vector<double>& values);

void apply_sweep_value(ExperimentConfig& cfg, const std::string& param, double value);

std::string sweep_summary_csv(const std::string& param, const std::vector<SweepEntry>& entries);

} // namespace dbcd
