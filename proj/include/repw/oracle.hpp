#pragma once

#include "repw/kernels.hpp"
#include "repw/representation.hpp"
#include "repw/task.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace repw {

/// Finite-support process: source probabilities p, target probabilities q
/// and the outcome model m(x) = E_P[Y~ | x] at every support point.
struct DiscreteDGP {
  Eigen::MatrixXd support;  // K x d
  Eigen::VectorXd p;
  Eigen::VectorXd q;
  Eigen::VectorXd m;
  double noise_sd = 0.0;

  Eigen::Index size() const { return support.rows(); }
  // Throws on the first violated invariant, including q_k > 0 with p_k = 0.
  void validate() const;
};

/// q_k / p_k, and 0 where p_k = 0 (those points carry no mass under either).
Eigen::VectorXd true_ratio(const DiscreteDGP& dgp);

/// Group id of every support point; points share a group iff their phi-images
/// are exactly equal. Ids are assigned in order of first appearance.
std::vector<Eigen::Index> phi_groups(const DiscreteDGP& dgp, const Representation& phi);

/// E_P[f(X) | phi(X)] at every support point. Groups without source mass get 0.
Eigen::VectorXd conditional_mean(const DiscreteDGP& dgp, const Representation& phi, const Eigen::VectorXd& f);

/// E_P[w*(X) | phi(X)], computed as the group's q-mass over its p-mass.
Eigen::VectorXd projected_ratio(const DiscreteDGP& dgp, const Representation& phi);

double bse(const DiscreteDGP& dgp, const Representation& phi);

struct ConfoundingForms {
  double product_form = 0.0;  // E_P[(m_phi - m)(w* - w*_phi)]
  double outcome_form = 0.0;  // -E_P[m (w* - w*_phi)]
  double direct = 0.0;        // E_Q[m_phi - m]
};

ConfoundingForms confounding_bias_forms(const DiscreteDGP& dgp, const Representation& phi);
double confounding_bias(const DiscreteDGP& dgp, const Representation& phi);

struct BiasReport {
  double total_bias = 0.0;
  double bias_wrt_representation = 0.0;
  double chosen_weights_bias = 0.0;
  double confounding_bias = 0.0;
  double bse = 0.0;
  double ipm_bound_term = 0.0;  // sharp class {E_P[m | phi]}
  double outcome_norm = 0.0;    // ||Y~||_{L2(P)}
  double corollary_bound = 0.0;
  double mmd_context = 0.0;     // energy-kernel MMD between phi-images
};

/// `w` holds one weight per support point with sum_k p_k w_k = 1.
BiasReport bias_decomposition(const DiscreteDGP& dgp, const Representation& phi, const Eigen::VectorXd& w);

/// "key=value" lines, one per field, in declaration order.
std::string to_key_value(const BiasReport& r);

struct BoundCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double slack() const { return rhs - lhs; }
};

/// |total bias| against the sharp IPM term plus ||Y~|| * BSE. Throws when w is
/// not a function of phi.
BoundCheck corollary_bound(const DiscreteDGP& dgp, const Representation& phi, const Eigen::VectorXd& w);

struct WeightingProblem {
  DiscreteDGP dgp;
  Representation phi;
  Eigen::VectorXd w;
};

/// Joint form: 1/2 sum_a p_a bias_a^2 against sum_a p_a ipm_a^2 plus
/// sup_a ||Y~_a||^2 * sum_a p_a bse_a^2.
BoundCheck corollary2(const std::vector<WeightingProblem>& problems, const Eigen::VectorXd& probs);

/// sqrt(sum_a p_a (mean_i w_i y~_i - mean_j m_a(x_j))^2) over sample tasks;
/// `target_outcome[a]` holds the outcome model on task a's target rows.
double joint_bias_metric(const TaskFamily& family, const std::vector<Eigen::VectorXd>& weights,
                         const std::vector<Eigen::VectorXd>& target_outcome);

enum class ScoreKind { balancing, prognostic, deconfounding };

struct ScoreCheck {
  bool passed = false;
  double magnitude = 0.0;
};

ScoreCheck check_generalized_score(const DiscreteDGP& dgp, const Representation& phi, ScoreKind which,
                                   double tolerance = 1e-10);

}  // namespace repw
