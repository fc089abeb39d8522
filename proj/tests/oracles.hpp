#pragma once

// Test-side references and fixture generators. A reference never calls the
// library routine it is compared against.

#include "repw/oracle.hpp"
#include "repw/qp.hpp"
#include "repw/repnet.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Support point k sits at x = k, so a labelling of the points is a map on x.
struct Fixture {
  repw::DiscreteDGP dgp;
  std::vector<int> labels;  // phi-group of every support point
  repw::Representation phi;
};

inline repw::Representation lookup_phi(std::vector<int> labels) {
  return [labels](const MatrixXd& x) {
    MatrixXd z(x.rows(), 1);
    for (Index i = 0; i < x.rows(); ++i) z(i, 0) = labels.at(static_cast<std::size_t>(std::lround(x(i, 0))));
    return z;
  };
}

inline std::vector<int> random_merging(std::mt19937_64& rng, Index k) {
  std::uniform_int_distribution<int> groups(1, static_cast<int>(k));
  const int g = groups(rng);
  std::uniform_int_distribution<int> pick(0, g - 1);
  std::vector<int> labels(static_cast<std::size_t>(k));
  for (auto& l : labels) l = pick(rng);
  return labels;
}

// A point may carry no source mass only if it carries no target mass.
inline repw::DiscreteDGP random_dgp(std::mt19937_64& rng, Index k_max = 8) {
  std::uniform_int_distribution<Index> size(2, k_max);
  std::uniform_real_distribution<double> unit(0.05, 1.0);
  std::normal_distribution<double> normal(0.0, 2.0);
  std::bernoulli_distribution empty(0.1);
  repw::DiscreteDGP dgp;
  const Index k = size(rng);
  dgp.support.resize(k, 1);
  dgp.p.resize(k);
  dgp.q.resize(k);
  dgp.m.resize(k);
  for (Index i = 0; i < k; ++i) {
    dgp.support(i, 0) = static_cast<double>(i);
    const bool dead = i > 0 && empty(rng);
    dgp.p(i) = dead ? 0.0 : unit(rng);
    dgp.q(i) = dead ? 0.0 : unit(rng);
    dgp.m(i) = normal(rng);
  }
  dgp.p /= dgp.p.sum();
  dgp.q /= dgp.q.sum();
  dgp.noise_sd = std::uniform_real_distribution<double>(0.0, 1.5)(rng);
  return dgp;
}

// Probabilities are count / total with integer counts, so a sample holding
// every point count-many times has empirical means equal to the expectations.
struct CountedDGP {
  repw::DiscreteDGP dgp;
  std::vector<int> p_count, q_count;
};

inline CountedDGP random_counted_dgp(std::mt19937_64& rng, Index k_max = 8) {
  CountedDGP c;
  c.dgp = random_dgp(rng, k_max);
  const Index k = c.dgp.size();
  auto counts = [&](VectorXd& probs, std::vector<int>& out) {
    std::uniform_int_distribution<int> draw(1, 40);
    out.assign(static_cast<std::size_t>(k), 0);
    int sum = 0;
    for (Index i = 0; i < k; ++i)
      if (probs(i) > 0.0) sum += out[static_cast<std::size_t>(i)] = draw(rng);
    for (Index i = 0; i < k; ++i) probs(i) = static_cast<double>(out[static_cast<std::size_t>(i)]) / sum;
  };
  counts(c.dgp.p, c.p_count);
  counts(c.dgp.q, c.q_count);
  return c;
}

// f at every point repeated count-many times.
inline VectorXd replicate(const VectorXd& f, const std::vector<int>& count) {
  std::vector<double> out;
  for (std::size_t i = 0; i < count.size(); ++i) out.insert(out.end(), static_cast<std::size_t>(count[i]), f(static_cast<Index>(i)));
  return Eigen::Map<const VectorXd>(out.data(), static_cast<Index>(out.size()));
}

inline Fixture random_fixture(std::mt19937_64& rng, Index k_max = 8) {
  Fixture f;
  f.dgp = random_dgp(rng, k_max);
  f.labels = random_merging(rng, f.dgp.size());
  f.phi = lookup_phi(f.labels);
  return f;
}

inline VectorXd ratio(const repw::DiscreteDGP& dgp) {
  VectorXd r = VectorXd::Zero(dgp.size());
  for (Index i = 0; i < dgp.size(); ++i)
    if (dgp.p(i) > 0.0) r(i) = dgp.q(i) / dgp.p(i);
  return r;
}

// p-weighted mean of f over the points sharing each point's label.
inline VectorXd group_mean(const repw::DiscreteDGP& dgp, const std::vector<int>& labels, const VectorXd& f) {
  VectorXd out = VectorXd::Zero(dgp.size());
  for (Index i = 0; i < dgp.size(); ++i) {
    double num = 0.0, den = 0.0;
    for (Index j = 0; j < dgp.size(); ++j) {
      if (labels[static_cast<std::size_t>(j)] != labels[static_cast<std::size_t>(i)]) continue;
      num += dgp.p(j) * f(j);
      den += dgp.p(j);
    }
    if (den > 0.0) out(i) = num / den;
  }
  return out;
}

// Positive, constant within groups, P-mean one.
inline VectorXd random_group_weights(std::mt19937_64& rng, const repw::DiscreteDGP& dgp,
                                     const std::vector<int>& labels) {
  std::uniform_real_distribution<double> level(0.1, 3.0);
  std::vector<double> value(labels.size() + 1);
  for (auto& v : value) v = level(rng);
  VectorXd w(dgp.size());
  for (Index i = 0; i < dgp.size(); ++i) w(i) = value[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
  return w / dgp.p.dot(w);
}

inline double population_loss(const repw::DiscreteDGP& dgp, const VectorXd& v) {
  return dgp.p.dot(v.cwiseProduct(v)) - 2.0 * dgp.q.dot(v);
}

// Euclidean projection onto {w >= 0, sum w = total} by sorting.
inline VectorXd project_simplex(const VectorXd& y, double total) {
  std::vector<double> s(y.data(), y.data() + y.size());
  std::sort(s.begin(), s.end(), std::greater<>());
  double cumulative = 0.0, tau = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    cumulative += s[i];
    const double t = (cumulative - total) / static_cast<double>(i + 1);
    if (s[i] - t > 0.0) tau = t;
  }
  return (y.array() - tau).max(0.0).matrix();
}

// min 1/2 w'Sw + v'w over {w >= 0, sum w = total}, step 1/L. Stops early
// once an iteration no longer moves the iterate.
inline VectorXd projected_gradient(const MatrixXd& S, const VectorXd& v, double total, long max_iters = 1000000) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(S, Eigen::EigenvaluesOnly);
  const double step = 1.0 / eig.eigenvalues().cwiseAbs().maxCoeff();
  VectorXd w = VectorXd::Constant(S.rows(), total / static_cast<double>(S.rows()));
  for (long it = 0; it < max_iters; ++it) {
    VectorXd next = project_simplex(w - step * (S * w + v), total);
    const double moved = (next - w).cwiseAbs().maxCoeff();
    w.swap(next);
    if (moved == 0.0 || (it > 1000 && moved < 1e-16 * total)) break;
  }
  return w;
}

// Central differences of f at x, step h in every coordinate.
inline VectorXd central_difference(const std::function<double(const VectorXd&)>& f, const VectorXd& x,
                                   double h = 1e-5) {
  VectorXd g(x.size());
  VectorXd probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + h;
    const double up = f(probe);
    probe(i) = x(i) - h;
    const double down = f(probe);
    probe(i) = x(i);
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

inline double max_relative_error(const VectorXd& a, const VectorXd& b, double floor = 1e-3) {
  double worst = 0.0;
  for (Index i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a(i) - b(i)) / std::max({std::abs(a(i)), std::abs(b(i)), floor}));
  return worst;
}

inline MatrixXd normal_matrix(std::mt19937_64& rng, Index rows, Index cols, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  MatrixXd x(rows, cols);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  return x;
}

// Random KOM instance: shifted Gaussian samples, a random kernel, sigma 0.01.
inline repw::QPSpec random_kom_qp(std::mt19937_64& rng, Index max_source = 100) {
  std::uniform_int_distribution<Index> np(2, max_source), nq(1, 60), dim(1, 4), kind(0, 2);
  const Index d = dim(rng);
  const MatrixXd s = normal_matrix(rng, np(rng), d);
  MatrixXd t = normal_matrix(rng, nq(rng), d);
  t.array() += 0.5;
  repw::Kernel k = repw::EnergyKernel{};
  switch (kind(rng)) {
    case 1: k = repw::LinearKernel{}; break;
    case 2: k = repw::GaussianKernel{1.0}; break;
    default: break;
  }
  return repw::assemble_qp(repw::gram(k, repw::identity_representation(), s, t), 0.01);
}

// Smallest |pre-activation| of any hidden unit over the rows of x, from a
// plain layer-by-layer forward pass.
inline double min_abs_preactivation(const repw::RepNet& net, const MatrixXd& x) {
  auto act = [&](const MatrixXd& z) -> MatrixXd {
    if (net.architecture().activation == repw::Activation::relu) return z.cwiseMax(0.0);
    return z.array().tanh().matrix();
  };
  double worst = std::numeric_limits<double>::infinity();
  auto run = [&](const std::vector<repw::DenseLayer>& layers, MatrixXd h, bool affine_last) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      MatrixXd z = (h * layers[l].weight.transpose()).rowwise() + layers[l].bias.transpose();
      if (affine_last && l + 1 == layers.size()) return z;
      worst = std::min(worst, z.cwiseAbs().minCoeff());
      h = act(z);
    }
    return h;
  };
  const MatrixXd rep = run(net.trunk(), x, false);
  for (std::size_t k = 0; k < net.architecture().heads(); ++k) run(net.head(k), rep, true);
  return worst;
}

// Dense QP residuals from scratch: bound violation of Aw and stationarity.
struct Kkt {
  double primal = 0.0;
  double dual = 0.0;
};

inline Kkt kkt_residuals(const repw::QPSpec& spec, const VectorXd& w, const VectorXd& y) {
  const MatrixXd A = MatrixXd(spec.A);
  const VectorXd aw = A * w;
  Kkt k;
  for (Index i = 0; i < aw.size(); ++i) {
    const double clamped = std::min(std::max(aw(i), spec.l(i)), spec.u(i));
    k.primal = std::max(k.primal, std::abs(clamped - aw(i)));
  }
  k.dual = (spec.S * w + spec.v + A.transpose() * y).cwiseAbs().maxCoeff();
  return k;
}

}  // namespace oracle
