#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace repw {

/// One seed x method x task cell. NaN marks a value that does not exist
/// (no outcomes, no oracle, failed cell).
struct ResultRecord {
  std::uint64_t seed = 0;
  std::string method;
  std::string task;
  std::string status = "ok";  // "ok" or "fail"
  long source_size = 0;
  long target_size = 0;
  double tau_hat = 0.0;
  double joint_bias = 0.0;  // same for every task of a (seed, method)
  bool converged = true;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
  std::string message;

  bool ok() const { return status == "ok"; }
};

/// Tab separated, header row, fixed column order, doubles as %.17g.
void write_results_tsv(const std::vector<ResultRecord>& records, std::ostream& out);
std::vector<ResultRecord> read_results_tsv(std::istream& in);

struct Summary {
  double mean = 0.0;
  double se = 0.0;  // sample SD / sqrt(n); NaN when n < 2
  std::size_t n = 0;
};

Summary summarize(const std::vector<double>& values);

/// Method rows in first-appearance order: successful seeds, joint bias and
/// the estimate of every task as "mean (SE)"; a column with no successful
/// seed reads FAIL(reason).
std::string format_table(const std::vector<ResultRecord>& records);

}  // namespace repw
