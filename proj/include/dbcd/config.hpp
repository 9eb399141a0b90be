#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dbcd/simulator.hpp"

namespace dbcd {

struct SweepSpec {
    std::string param;
    std::vector<double> values;
};

struct ParsedConfig {
    ExperimentConfig experiment;
    SweepSpec sweep;
};

using Overrides = std::vector<std::pair<std::string, std::string>>;

// JSON config with strict schema: unknown keys raise SchemaError naming the
// exact key, out-of-range values raise ValueOutOfRange with the JSON path.
// An empty text or path yields all defaults. Overrides are dotted paths
// ("hyper.mu=0.5") applied before validation.
ParsedConfig parse_config_text(const std::string& text, const Overrides& overrides = {});
ParsedConfig parse_config_file(const std::string& path, const Overrides& overrides = {});

// Full echo with every default materialized; parsing the echo reproduces the
// config exactly.
std::string config_echo_json(const ParsedConfig& cfg);

// Run summary for summary.json.
std::string run_summary_json(const ParsedConfig& cfg, const RunResult& result);

} // namespace dbcd
