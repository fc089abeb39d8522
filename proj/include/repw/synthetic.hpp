#pragma once

#include "repw/dataset.hpp"
#include "repw/task.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace repw {

enum class Framing { ate, att, transport };

std::string framing_name(Framing f);
Framing framing_from_name(const std::string& name);

/// X ~ N(0, I_d). Assignment (ATE, ATT) or trial selection (transport) has
/// probability e(x) = sigmoid(selection_strength * sum of the first
/// confounder_dim coordinates), so the population treated share is 1/2.
/// Outcome for arm a: 1 + outcome_strength * s(x) + 0.5 x0 x1 + a (1 + 0.5 x0)
/// over the confounders (terms needing a missing confounder are dropped),
/// plus N(0, noise_sd^2) noise.
///
/// Sample sizes: ate draws n_source rows per arm (the target is every row);
/// att draws n_source controls and n_target treated; transport draws
/// n_source trial rows (randomised 1:1) and n_target observational rows.
struct SyntheticSpec {
  Eigen::Index d = 10;
  Eigen::Index n_source = 2000;
  Eigen::Index n_target = 2000;
  Eigen::Index confounder_dim = 2;
  Framing framing = Framing::ate;
  double selection_strength = 0.5;
  double outcome_strength = 1.0;
  double noise_sd = 1.0;

  void validate() const;
};

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

struct SyntheticDraw {
  TaskFamily family;
  Dataset data;  // ate, att: the observational sample; transport: trial rows then observational rows
  std::vector<int> membership;  // per row of `data`: treatment (ate, att) or trial indicator (transport)
  std::vector<Eigen::VectorXd> target_outcome;  // per task: outcome model on its target rows
  std::vector<Eigen::VectorXd> source_ratio;    // per task: w* on its source rows
};

class SyntheticDGP {
 public:
  explicit SyntheticDGP(SyntheticSpec spec);
  const SyntheticSpec& spec() const { return spec_; }

  /// Bitwise reproducible for a given seed.
  SyntheticDraw draw(std::uint64_t seed) const;

  std::size_t tasks() const { return spec_.framing == Framing::ate ? 2 : 1; }
  Eigen::VectorXd propensity(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd outcome(const Eigen::MatrixXd& x, int arm) const;
  /// E_P[Y~ | x] for task `alpha` (the arm for ate).
  Eigen::VectorXd task_outcome(const Eigen::MatrixXd& x, std::size_t alpha) const;
  Eigen::VectorXd true_ratio(const Eigen::MatrixXd& x, std::size_t alpha) const;
  /// E_P[w*(X) | X_columns] for task `alpha`, by Gauss-Hermite quadrature over
  /// the confounders outside `columns`.
  Eigen::VectorXd projected_ratio(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& columns,
                                  std::size_t alpha) const;
  /// BSE of the coordinate projection onto `columns` by Monte Carlo over the
  /// source distribution of task `alpha`.
  McEstimate bse(const std::vector<Eigen::Index>& columns, std::size_t alpha, Eigen::Index draws = 100000,
                 std::uint64_t seed = 0) const;

 private:
  Eigen::VectorXd ratio_of(const Eigen::VectorXd& e, std::size_t alpha) const;

  SyntheticSpec spec_;
  Eigen::VectorXd gh_nodes_;
  Eigen::VectorXd gh_weights_;
};

}  // namespace repw
