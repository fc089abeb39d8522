#pragma once

#include "repw/dataset.hpp"
#include "repw/qp.hpp"
#include "repw/repnet.hpp"
#include "repw/synthetic.hpp"
#include "repw/task.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace repw {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CsvSource {
  std::string path;  // resolved against the config file's directory
  CsvSchema schema;
};

struct RunConfig {
  std::optional<SyntheticSpec> synthetic;  // exactly one of synthetic / csv
  std::optional<CsvSource> csv;
  Framing task = Framing::ate;
  ArmWeighting arm_weighting = ArmWeighting::uniform;
  bool standardize = false;

  std::vector<std::string> methods;
  Eigen::Index rep_dim = 10;
  Eigen::Index hidden = 200;
  Activation activation = Activation::relu;
  TrainConfig train;

  std::vector<double> sigma{0.01};  // one value for every task, or one per task
  std::optional<double> gaussian_bandwidth;  // unset: median heuristic on the phi-images
  double logistic_lambda = 1e-4;
  SolverSettings solver;

  std::vector<std::uint64_t> seeds;
  std::string output_dir = "repw-out";
  bool write_weights = true;
  bool dump_qp = false;

  void validate() const;
};

/// Every method name the pipeline understands.
const std::vector<std::string>& known_methods();

RunConfig parse_config(const std::string& json_text, const std::string& base_dir = ".");
RunConfig load_config(const std::string& path);

}  // namespace repw
