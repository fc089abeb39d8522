#include "repw/baselines.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>

namespace repw {

namespace {

double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd z(x.rows(), x.cols() + 1);
  z.col(0).setOnes();
  z.rightCols(x.cols()) = x;
  return z;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

}  // namespace

Eigen::VectorXd LogisticModel::predict(const Eigen::MatrixXd& x) const {
  if (x.cols() + 1 != coefficients.size()) throw std::invalid_argument("logistic: covariate dimension mismatch");
  const Eigen::VectorXd eta = (x * coefficients.tail(x.cols())).array() + coefficients(0);
  return eta.unaryExpr([](double t) { return sigmoid(t); });
}

LogisticModel fit_logistic(const Eigen::MatrixXd& x, const std::vector<int>& labels, double lambda,
                           const std::optional<Eigen::VectorXd>& initial) {
  const Eigen::Index n = x.rows();
  if (static_cast<Eigen::Index>(labels.size()) != n) throw std::invalid_argument("logistic: one label per row required");
  if (!(lambda >= 0.0)) throw std::invalid_argument("logistic: lambda must be nonnegative");
  if (!x.allFinite()) throw std::invalid_argument("logistic: non-finite covariates");
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int l = labels[static_cast<std::size_t>(i)];
    if (l != 0 && l != 1) throw std::invalid_argument("logistic: labels must be 0 or 1");
    y(i) = l;
  }
  if (y.sum() == 0.0 || y.sum() == static_cast<double>(n))
    throw std::invalid_argument("logistic: both classes must be present");

  const Eigen::MatrixXd z = with_intercept(x);
  const Eigen::Index p = z.cols();
  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(p, lambda);
  penalty(0) = 0.0;
  const double fn = static_cast<double>(n);

  auto objective = [&](const Eigen::VectorXd& c) {
    const Eigen::VectorXd eta = z * c;
    double f = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) f += softplus(eta(i)) - y(i) * eta(i);
    return f / fn + 0.5 * c.cwiseProduct(penalty).dot(c);
  };

  LogisticModel model;
  model.lambda = lambda;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(p);
  if (initial) {
    if (initial->size() != p) throw std::invalid_argument("logistic: initial coefficients have the wrong length");
    c = *initial;
  }
  double f = objective(c);
  constexpr int kMaxIters = 200;
  for (int it = 0;; ++it) {
    const Eigen::VectorXd eta = z * c;
    const Eigen::VectorXd prob = eta.unaryExpr([](double t) { return sigmoid(t); });
    const Eigen::VectorXd grad = z.transpose() * (prob - y) / fn + penalty.cwiseProduct(c);
    model.iterations = it;
    if (grad.norm() <= 1e-8) break;
    if (it == kMaxIters) {
      if (lambda == 0.0) throw std::runtime_error("logistic: no convergence, likely perfect separation; use lambda > 0");
      throw std::runtime_error("logistic: Newton did not converge (gradient norm " + fmt(grad.norm()) + ")");
    }
    const Eigen::VectorXd curv = prob.array() * (1.0 - prob.array());
    Eigen::MatrixXd h = z.transpose() * curv.asDiagonal() * z / fn;
    h.diagonal() += penalty;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    Eigen::VectorXd step = ldlt.solve(-grad);
    if (ldlt.info() != Eigen::Success || !step.allFinite() || grad.dot(step) >= 0.0) {
      h.diagonal().array() += 1e-10 + 1e-8 * h.diagonal().cwiseAbs().maxCoeff();
      step = h.ldlt().solve(-grad);
    }
    double t = 1.0;
    double f_new = objective(c + step);
    while (f_new > f + 1e-4 * t * grad.dot(step) && t > 1e-12) {
      t *= 0.5;
      f_new = objective(c + t * step);
    }
    if (t <= 1e-12) {
      // No further decrease representable; accept if the gradient is tiny.
      if (grad.norm() <= 1e-6) break;
      throw std::runtime_error("logistic: line search failed (gradient norm " + fmt(grad.norm()) + ")");
    }
    c += t * step;
    f = f_new;
  }
  if (!c.allFinite()) throw std::runtime_error("logistic: non-finite coefficients");
  if (lambda == 0.0) {
    const Eigen::VectorXd eta = z * c;
    bool separated = true;
    for (Eigen::Index i = 0; i < n && separated; ++i) separated = (y(i) == 1.0 ? eta(i) : -eta(i)) > 10.0;
    if (separated) throw std::runtime_error("logistic: perfect separation with lambda = 0; use lambda > 0");
  }
  model.coefficients = std::move(c);
  return model;
}

Eigen::MatrixXd PropensityModel::predict(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(classes.size()));
  if (classes.size() == 2) {
    out.col(1) = models.at(0).predict(x);
    out.col(0) = 1.0 - out.col(1).array();
    return out;
  }
  for (std::size_t k = 0; k < classes.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = models.at(k).predict(x);
  const Eigen::VectorXd total = out.rowwise().sum();
  return total.asDiagonal().inverse() * out;
}

Eigen::Index PropensityModel::column(int label) const {
  auto it = std::find(classes.begin(), classes.end(), label);
  if (it == classes.end()) throw std::invalid_argument("propensity: unknown class " + std::to_string(label));
  return static_cast<Eigen::Index>(it - classes.begin());
}

PropensityModel fit_propensity(const Eigen::MatrixXd& x, const std::vector<int>& labels, double lambda) {
  const std::set<int> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) throw std::invalid_argument("propensity: at least two classes required");
  PropensityModel m;
  m.classes.assign(distinct.begin(), distinct.end());
  auto indicator = [&](int cls) {
    std::vector<int> out(labels.size());
    std::transform(labels.begin(), labels.end(), out.begin(), [cls](int l) { return l == cls ? 1 : 0; });
    return out;
  };
  if (m.classes.size() == 2) {
    m.models.push_back(fit_logistic(x, indicator(m.classes[1]), lambda));
  } else {
    for (int cls : m.classes) m.models.push_back(fit_logistic(x, indicator(cls), lambda));
  }
  return m;
}

WeightVector ipw_weights(IpwKind kind, const Eigen::VectorXd& p) {
  if (p.size() == 0) throw std::invalid_argument("ipw: empty sample");
  if (!p.allFinite()) throw std::invalid_argument("ipw: non-finite propensities");
  const Eigen::ArrayXd c = p.array().max(kPropensityClip).min(1.0 - kPropensityClip);
  Eigen::VectorXd raw;
  switch (kind) {
    case IpwKind::att: raw = c / (1.0 - c); break;
    case IpwKind::ate: raw = c.inverse(); break;
    case IpwKind::transport: raw = (1.0 - c) / c; break;
  }
  WeightVector out;
  out.w = raw * (static_cast<double>(raw.size()) / raw.sum());
  out.certificate.converged = true;
  return out;
}

WeightVector entropy_balance(const DesignTask& task, double tolerance, int max_iters) {
  const Eigen::MatrixXd& x = task.source_x;
  if (x.rows() == 0 || task.target_x.rows() == 0) throw std::invalid_argument("entropy balancing: empty sample");
  if (task.target_x.cols() != x.cols()) throw std::invalid_argument("entropy balancing: dimension mismatch");
  const Eigen::RowVectorXd mu = task.target_x.colwise().mean();
  const Eigen::RowVectorXd lo = x.colwise().minCoeff();
  const Eigen::RowVectorXd hi = x.colwise().maxCoeff();
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const bool constant = lo(j) == hi(j);
    if (constant ? mu(j) != lo(j) : (mu(j) <= lo(j) || mu(j) >= hi(j)))
      throw std::runtime_error("entropy balancing: target mean outside source hull (coordinate " + std::to_string(j) +
                               ")");
  }
  const Eigen::MatrixXd c = x.rowwise() - mu;
  const Eigen::Index d = c.cols();

  // Dual: minimise log sum_i exp(beta'c_i); its gradient is the moment gap.
  auto softmax = [&](const Eigen::VectorXd& beta, double* logsum) {
    const Eigen::VectorXd t = c * beta;
    const double top = t.maxCoeff();
    Eigen::VectorXd s = (t.array() - top).exp();
    const double total = s.sum();
    if (logsum) *logsum = top + std::log(total);
    return Eigen::VectorXd(s / total);
  };

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
  double f = 0.0;
  Eigen::VectorXd s = softmax(beta, &f);
  Eigen::VectorXd gap = c.transpose() * s;
  int it = 0;
  for (; it < max_iters && gap.lpNorm<Eigen::Infinity>() > tolerance; ++it) {
    Eigen::MatrixXd h = c.transpose() * s.asDiagonal() * c - gap * gap.transpose();
    h.diagonal().array() += 1e-12 * std::max(1.0, h.diagonal().maxCoeff());
    const Eigen::VectorXd step = h.ldlt().solve(-gap);
    double t = 1.0, f_new = 0.0;
    Eigen::VectorXd s_new;
    for (;;) {
      s_new = softmax(beta + t * step, &f_new);
      if (f_new <= f + 1e-4 * t * gap.dot(step) || t < 1e-12) break;
      t *= 0.5;
    }
    beta += t * step;
    f = f_new;
    s = std::move(s_new);
    gap = c.transpose() * s;
    if (f < -50.0) throw std::runtime_error("entropy balancing: target mean outside source hull");
  }
  if (gap.lpNorm<Eigen::Infinity>() > tolerance)
    throw std::runtime_error("entropy balancing: Newton did not converge after " + std::to_string(it) +
                             " iterations (moment gap " + fmt(gap.lpNorm<Eigen::Infinity>()) + ")");
  WeightVector out;
  out.w = s * static_cast<double>(s.size());
  out.certificate.converged = true;
  out.certificate.iterations = it;
  out.certificate.primal_residual = gap.lpNorm<Eigen::Infinity>();
  return out;
}

Eigen::MatrixXd PcaModel::scores(const Eigen::MatrixXd& x) const {
  if (x.cols() != center.size()) throw std::invalid_argument("pca: dimension mismatch");
  return (x.rowwise() - center.transpose()) * loadings;
}

PcaModel fit_pca(const Eigen::MatrixXd& pool, Eigen::Index rep_dim) {
  if (rep_dim <= 0) throw std::invalid_argument("pca: representation size must be positive");
  if (rep_dim > pool.cols()) throw std::invalid_argument("pca: representation size exceeds the covariate dimension");
  if (pool.rows() < 2) throw std::invalid_argument("pca: at least two rows required");
  PcaModel m;
  m.center = pool.colwise().mean().transpose();
  const Eigen::MatrixXd centered = pool.rowwise() - m.center.transpose();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::VectorXd sv = svd.singularValues();
  const double cutoff = sv(0) * static_cast<double>(std::max(pool.rows(), pool.cols())) *
                        std::numeric_limits<double>::epsilon();
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv(rank) > cutoff) ++rank;
  if (rep_dim > rank)
    throw std::invalid_argument("pca: representation size " + std::to_string(rep_dim) + " exceeds the data rank " +
                                std::to_string(rank));
  m.loadings = svd.matrixV().leftCols(rep_dim);
  for (Eigen::Index k = 0; k < rep_dim; ++k) {
    Eigen::Index at;
    m.loadings.col(k).cwiseAbs().maxCoeff(&at);
    if (m.loadings(at, k) < 0.0) m.loadings.col(k) *= -1.0;
  }
  m.variances = sv.head(rep_dim).array().square() / static_cast<double>(pool.rows() - 1);
  return m;
}

Representation pca_representation(const Eigen::MatrixXd& pool, Eigen::Index rep_dim) {
  return [m = fit_pca(pool, rep_dim)](const Eigen::MatrixXd& x) { return m.scores(x); };
}

Representation ps_vector_representation(PropensityModel model) {
  return [m = std::move(model)](const Eigen::MatrixXd& x) { return m.predict(x); };
}

WeightVector uniform_weights(const DesignTask& task) {
  WeightVector out;
  out.w = Eigen::VectorXd::Ones(task.source_size());
  out.certificate.converged = true;
  return out;
}

}  // namespace repw
