#pragma once

#include "repw/qp.hpp"
#include "repw/representation.hpp"
#include "repw/task.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace repw {

/// P(label = 1 | x) = sigmoid(c0 + c'x). coefficients(0) is the intercept.
struct LogisticModel {
  Eigen::VectorXd coefficients;
  double lambda = 0.0;
  int iterations = 0;

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
};

/// Damped Newton on mean negative log-likelihood + lambda/2 ||slope||^2; the
/// intercept is not penalised. Returns with gradient norm <= 1e-8.
LogisticModel fit_logistic(const Eigen::MatrixXd& x, const std::vector<int>& labels, double lambda = 1e-4,
                           const std::optional<Eigen::VectorXd>& initial = std::nullopt);

/// Class probabilities over a finite label set. Two classes use one binary
/// model; more use one-vs-rest models renormalised per row.
struct PropensityModel {
  std::vector<int> classes;
  std::vector<LogisticModel> models;

  /// n x |classes|, rows sum to one.
  Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const;
  Eigen::Index column(int label) const;
};

PropensityModel fit_propensity(const Eigen::MatrixXd& x, const std::vector<int>& labels, double lambda = 1e-4);

inline constexpr double kPropensityClip = 1e-6;

/// Weights proportional to ratio(p) with p clipped to [1e-6, 1 - 1e-6], then
/// rescaled to mean one.
///   att:       p = P(A=1|x) on controls,        w ~ p / (1 - p)
///   ate:       p = P(A=a|x) on arm a,           w ~ 1 / p
///   transport: p = P(S=1|x) on trial rows,      w ~ (1 - p) / p
enum class IpwKind { att, ate, transport };
WeightVector ipw_weights(IpwKind kind, const Eigen::VectorXd& p);

/// Exponential tilt w_i ~ exp(beta'x_i) matching the target covariate means.
WeightVector entropy_balance(const DesignTask& task, double tolerance = 1e-10, int max_iters = 200);

struct PcaModel {
  Eigen::VectorXd center;
  Eigen::MatrixXd loadings;  // d x k, orthonormal columns
  Eigen::VectorXd variances;

  Eigen::MatrixXd scores(const Eigen::MatrixXd& x) const;
};

/// Principal directions of the pooled sample. Each loading's largest-magnitude
/// entry is positive.
PcaModel fit_pca(const Eigen::MatrixXd& pool, Eigen::Index rep_dim);
Representation pca_representation(const Eigen::MatrixXd& pool, Eigen::Index rep_dim);

/// x -> predicted class-probability vector.
Representation ps_vector_representation(PropensityModel model);

WeightVector uniform_weights(const DesignTask& task);

}  // namespace repw
