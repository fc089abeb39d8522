#pragma once

#include "repw/config.hpp"
#include "repw/report.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace repw {

struct CellWeights {
  std::uint64_t seed = 0;
  std::string method;
  std::string task;
  std::vector<Eigen::Index> source_rows;
  Eigen::VectorXd w;
};

/// Per-seed representation-learning summary. head_error is the p-weighted
/// L2(source) distance between the trained heads and the true ratio; NaN
/// without an oracle or when no network was trained.
struct SeedDiagnostics {
  std::uint64_t seed = 0;
  bool trained = false;
  int epochs = 0;
  int best_epoch = 0;
  double best_validation_loss = 0.0;
  double head_error = 0.0;
  double train_seconds = 0.0;
  std::string message;
};

struct CellTiming {
  std::uint64_t seed = 0;
  std::string method;
  double seconds = 0.0;
};

struct RunResult {
  std::vector<ResultRecord> records;
  std::vector<CellWeights> weights;
  std::vector<SeedDiagnostics> diagnostics;
  std::vector<CellTiming> timings;

  bool all_failed() const;
};

/// Loads the configured data and builds its tasks; returns the task labels.
/// Throws ConfigError when the data do not fit the task type.
std::vector<std::string> check_data(const RunConfig& cfg);

/// Runs every seed x method cell. A failing cell is recorded and the run
/// continues. Progress lines go to `log` when given.
RunResult run_pipeline(const RunConfig& cfg, std::ostream* log = nullptr);

/// results.tsv, table.txt, diagnostics.tsv, timings.tsv and, when enabled,
/// weights/seed-<s>/<method>.tsv. Only timings.tsv depends on wall time.
void write_outputs(const RunConfig& cfg, const RunResult& result, const std::string& dir);

}  // namespace repw
