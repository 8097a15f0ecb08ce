#pragma once

// steady -> spectrum -> synthesize -> simulate -> report.
//
// Every stage writes <name>.json plus binary blocks into the output
// directory. The JSON lists the FNV-1a hash of each of its blocks under
// "files" and the hash of the upstream JSON under "upstream"; loaders verify
// both and abort with InputError on any mismatch. No timestamps are written,
// so identical inputs give byte-identical artifacts.

#include <exception>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nsstab/config.hpp"

namespace nsstab::pipeline {

namespace fs = std::filesystem;

/// Exit-code contract: 0 ok, 1 solver failure, 2 input error, 3 spectral
/// ambiguity, 4 synthesis failure, 5 nothing to stabilize.
int exit_code(const std::exception& e);

nlohmann::json cmd_steady(const RunConfig& cfg, const fs::path& out);
nlohmann::json cmd_spectrum(const RunConfig& cfg, const fs::path& out);
nlohmann::json cmd_synthesize(const RunConfig& cfg, const fs::path& out);

/// One trace per job. Without a sweep (workers == 0) the single job uses
/// the config as is and writes trace_<mode>.{csv,json}. With workers >= 1
/// the jobs are sweep.gammas x sweep.amplitudes (an empty list stands for
/// the configured value), run on that many threads, and written as
/// trace_<mode>_<k>.{csv,json}. Returns the per-job summaries in job order.
std::vector<nlohmann::json> cmd_simulate(const RunConfig& cfg, const fs::path& out,
                                         SimMode mode, int workers = 0);

/// Aggregates every trace_*.json in `dir` into report.json and
/// report_rates.csv. Traces whose CSV is missing, altered or unparsable are
/// skipped with a warning on stderr. Throws InputError when there is no
/// trace at all.
nlohmann::json cmd_report(const fs::path& dir);

/// Canonical text written for every JSON artifact.
std::string dump(const nlohmann::json& j);

}  // namespace nsstab::pipeline
