#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "dbcd/config.hpp"

using namespace dbcd;

TEST_CASE("empty config yields all defaults") {
    const ParsedConfig cfg = parse_config_text("");
    CHECK(cfg.experiment.mode == TrainingMode::DBcd);
    CHECK(cfg.experiment.hyper.gamma == 1.0);
    CHECK(cfg.experiment.hyper.alpha == 1.0);
    CHECK(cfg.experiment.hyper.mu == doctest::Approx(0.01));
    CHECK(cfg.experiment.hidden_dim == 128);
    CHECK(cfg.experiment.layers == 4);
    CHECK(cfg.experiment.neighbors == 50);
    CHECK(cfg.experiment.sgd.learning_rate == doctest::Approx(0.05));
    CHECK(cfg.experiment.sgd.batch_size == 128);
}

TEST_CASE("override applies before validation") {
    const ParsedConfig cfg = parse_config_text("", {{"hyper.mu", "0.5"}});
    CHECK(cfg.experiment.hyper.mu == doctest::Approx(0.5));
    CHECK(cfg.experiment.agg.mu == doctest::Approx(0.5));
}

TEST_CASE("negative gamma rejected as ValueOutOfRange") {
    CHECK_THROWS_AS(parse_config_text(R"({"hyper": {"gamma": -1}})"), ValueOutOfRange);
}

TEST_CASE("unknown keys rejected with the exact key name") {
    try {
        parse_config_text(R"({"hyper": {"gama": 1}})");
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find("'gama'") != std::string::npos);
        CHECK(std::string(e.what()).find("/hyper") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config_text(R"({"roundz": 3})"), SchemaError);
}

TEST_CASE("invalid JSON rejected") {
    CHECK_THROWS_AS(parse_config_text("{not json"), SchemaError);
}

TEST_CASE("echo round-trips exactly") {
    const ParsedConfig cfg = parse_config_text(
        R"({"mode": "dsgd", "rounds": 12, "layers": 8, "hidden_dim": 64,
            "init": "mirrored",
            "hyper": {"gamma": 0.5, "alpha": 5, "mu": 0.1, "loss": "squared"},
            "aggregation": {"mode": "mean", "share": "raw"},
            "data": {"devices": 7, "per_device": 50, "sparsity_r": 10},
            "comm_budget": {"exchanges_per_hour": 30, "hours": 4},
            "sweep": {"param": "mu", "values": [0.01, 0.1]}})");
    const std::string echo = config_echo_json(cfg);
    const ParsedConfig back = parse_config_text(echo);
    CHECK(config_echo_json(back) == echo);
    CHECK(back.experiment.mode == TrainingMode::DSgd);
    CHECK(back.experiment.init == InitScheme::MirroredOrthogonal);
    CHECK(back.experiment.hyper.loss == LossKind::Squared);
    CHECK(back.experiment.agg.share == SnapshotShare::Raw);
    CHECK(back.experiment.comm_budget.has_value());
    CHECK(back.sweep.param == "mu");
    REQUIRE(back.sweep.values.size() == 2);
}

TEST_CASE("dotted overrides create nested sections") {
    const ParsedConfig cfg =
        parse_config_text("{}", {{"data.devices", "3"}, {"aggregation.mode", "off"}});
    CHECK(cfg.experiment.data.devices == 3);
    CHECK(cfg.experiment.agg.mode == AggregationMode::Off);
}

TEST_CASE("vout solver constraints") {
    CHECK_THROWS_AS(
        parse_config_text(R"({"hyper": {"loss": "ce", "vout_solver": "closed_form"}})"),
        ValueOutOfRange);
    const ParsedConfig cfg = parse_config_text(R"({"hyper": {"loss": "squared"}})");
    CHECK(cfg.experiment.hyper.vout.kind == VOutSolver::Kind::ClosedFormSquared);
}

TEST_CASE("timing and init enums validated") {
    CHECK_THROWS_AS(parse_config_text(R"({"timing": "fast"})"), ValueOutOfRange);
    CHECK_THROWS_AS(parse_config_text(R"({"init": "xavier"})"), ValueOutOfRange);
    const ParsedConfig cfg = parse_config_text(R"({"timing": "wall"})");
    CHECK(cfg.experiment.timing == TimingMode::Wall);
}

TEST_CASE("run summary json carries bookkeeping fields") {
    const ParsedConfig cfg = parse_config_text(
        R"({"rounds": 2, "layers": 2, "hidden_dim": 8,
            "data": {"devices": 3, "per_device": 30, "dims": 3},
            "termination": {"plateau_enabled": false}})");
    const RunResult result = run_experiment(cfg.experiment);
    const std::string summary = run_summary_json(cfg, result);
    CHECK(summary.find("\"rounds_run\": 2") != std::string::npos);
    CHECK(summary.find("\"final_test\"") != std::string::npos);
    CHECK(summary.find("\"aggregation_events\"") != std::string::npos);
}
