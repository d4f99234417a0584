#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "pidyn/scenario.hpp"

namespace pidyn {

/// Column names of trace.csv for a scenario.
std::vector<std::string> trace_columns(const Scenario& scenario);

/// One header line plus one line per tick; numbers use 17 significant digits.
void write_trace_csv(std::ostream& out, const Scenario& scenario,
                     const std::vector<TraceRow>& trace);

/// Summary YAML: scenario identity, invariant checks, overall pass/fail and,
/// when the run aborted, the failure message.
std::string summary_yaml(const Scenario& scenario, const RunResult& result,
                         const std::string& failure = "");

std::string metrics_yaml(const RunMetrics& metrics, const Scenario& scenario);

/// Writes trace.csv, summary.yaml and metrics.yaml into `dir` (created if
/// needed) and returns whether every applicable check passed.
bool write_run_outputs(const std::string& dir, const Scenario& scenario, const RunResult& result,
                       const std::string& failure = "");

}  // namespace pidyn
