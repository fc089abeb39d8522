#pragma once

#include "repw/representation.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <variant>

namespace repw {

// k(u, v) = -||u - v||_2. Conditionally positive definite only.
struct EnergyKernel {};
// k(u, v) = u'v
struct LinearKernel {};
// k(u, v) = exp(-||u - v||^2 / (2 h^2)), h > 0
struct GaussianKernel {
  double bandwidth = 1.0;
};

using Kernel = std::variant<EnergyKernel, LinearKernel, GaussianKernel>;

std::string kernel_name(const Kernel& k);
/// "energy", "linear" or "gaussian" (bandwidth filled in later).
Kernel kernel_from_name(const std::string& name, double bandwidth = 1.0);

template <typename DerivedU, typename DerivedV>
double kernel_eval(const Kernel& k, const Eigen::MatrixBase<DerivedU>& u, const Eigen::MatrixBase<DerivedV>& v) {
  if (u.size() != v.size())
    throw std::invalid_argument("kernel_eval: dimension mismatch (" + std::to_string(u.size()) + " vs " +
                                std::to_string(v.size()) + ")");
  return std::visit(
      [&](const auto& kern) -> double {
        using K = std::decay_t<decltype(kern)>;
        if constexpr (std::is_same_v<K, EnergyKernel>) {
          return -(u - v).norm();
        } else if constexpr (std::is_same_v<K, LinearKernel>) {
          return u.dot(v);
        } else {
          if (!(kern.bandwidth > 0.0)) throw std::invalid_argument("gaussian kernel: bandwidth must be positive");
          return std::exp(-(u - v).squaredNorm() / (2.0 * kern.bandwidth * kern.bandwidth));
        }
      },
      k);
}

/// Kernel matrix between the rows of `a` and the rows of `b`.
Eigen::MatrixXd cross_gram(const Kernel& k, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Symmetric kernel matrix of the rows of `a` (upper triangle mirrored).
Eigen::MatrixXd self_gram(const Kernel& k, const Eigen::MatrixXd& a);

struct GramBlock {
  Eigen::MatrixXd pp;  // source x source
  Eigen::MatrixXd pq;  // source x target
  Eigen::MatrixXd qq;  // target x target

  Eigen::Index source_size() const { return pp.rows(); }
  Eigen::Index target_size() const { return qq.rows(); }
};

/// Gram blocks of k composed with the representation phi.
GramBlock gram(const Kernel& k, const Representation& phi, const Eigen::MatrixXd& source_x,
               const Eigen::MatrixXd& target_x);

/// Weighted squared MMD between the source reweighted by w (mean one) and
/// the uniform target measure.
template <typename Derived>
double mmd_squared(const GramBlock& g, const Eigen::MatrixBase<Derived>& w) {
  const auto np = g.source_size();
  const auto nq = g.target_size();
  if (w.size() != np)
    throw std::invalid_argument("mmd_squared: weight length " + std::to_string(w.size()) + " != source size " +
                                std::to_string(np));
  const double fp = static_cast<double>(np);
  const double fq = static_cast<double>(nq);
  const Eigen::VectorXd wv = w;
  return wv.dot(g.pp * wv) / (fp * fp) - 2.0 * wv.dot(g.pq.rowwise().sum()) / (fp * fq) + g.qq.sum() / (fq * fq);
}

/// Median pairwise Euclidean distance of the pooled rows; pools larger than
/// `max_points` are thinned with a fixed stride.
double median_heuristic_bandwidth(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, Eigen::Index max_points = 1000);

}  // namespace repw
