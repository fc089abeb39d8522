#include "repw/synthetic.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <stdexcept>

namespace repw {

namespace {

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// Nodes and weights for E[f(U)], U ~ N(0, 1) (Golub-Welsch).
void gauss_hermite(int n, Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  nodes = es.eigenvalues();
  weights = es.eigenvectors().row(0).transpose().array().square();
}

}  // namespace

std::string framing_name(Framing f) {
  switch (f) {
    case Framing::ate: return "ate";
    case Framing::att: return "att";
    default: return "transport";
  }
}

Framing framing_from_name(const std::string& name) {
  if (name == "ate") return Framing::ate;
  if (name == "att") return Framing::att;
  if (name == "transport") return Framing::transport;
  throw std::invalid_argument("unknown task type '" + name + "' (expected ate, att or transport)");
}

void SyntheticSpec::validate() const {
  if (d <= 0) throw std::invalid_argument("synthetic: d must be positive");
  if (confounder_dim < 0 || confounder_dim > d) throw std::invalid_argument("synthetic: confounder_dim must lie in [0, d]");
  if (n_source <= 0 || (framing != Framing::ate && n_target <= 0))
    throw std::invalid_argument("synthetic: sample sizes must be positive");
  if (!std::isfinite(selection_strength) || !std::isfinite(outcome_strength))
    throw std::invalid_argument("synthetic: strengths must be finite");
  if (!(noise_sd >= 0.0)) throw std::invalid_argument("synthetic: noise_sd must be nonnegative");
}

SyntheticDGP::SyntheticDGP(SyntheticSpec spec) : spec_(spec) {
  spec_.validate();
  gauss_hermite(64, gh_nodes_, gh_weights_);
}

Eigen::VectorXd SyntheticDGP::propensity(const Eigen::MatrixXd& x) const {
  const Eigen::VectorXd s = x.leftCols(spec_.confounder_dim).rowwise().sum();
  return (spec_.selection_strength * s).unaryExpr([](double t) { return sigmoid(t); });
}

Eigen::VectorXd SyntheticDGP::outcome(const Eigen::MatrixXd& x, int arm) const {
  const Eigen::Index k = spec_.confounder_dim;
  Eigen::VectorXd m = Eigen::VectorXd::Ones(x.rows()) + spec_.outcome_strength * x.leftCols(k).rowwise().sum();
  if (k >= 2) m += 0.5 * x.col(0).cwiseProduct(x.col(1));
  if (arm != 0) {
    m.array() += arm;
    if (k >= 1) m += 0.5 * arm * x.col(0);
  }
  return m;
}

Eigen::VectorXd SyntheticDGP::task_outcome(const Eigen::MatrixXd& x, std::size_t alpha) const {
  switch (spec_.framing) {
    case Framing::ate: return outcome(x, static_cast<int>(alpha));
    case Framing::att: return outcome(x, 0);
    default: return outcome(x, 1) - outcome(x, 0);
  }
}

Eigen::VectorXd SyntheticDGP::ratio_of(const Eigen::VectorXd& e, std::size_t alpha) const {
  switch (spec_.framing) {
    case Framing::ate:
      return alpha == 1 ? Eigen::VectorXd(0.5 / e.array()) : Eigen::VectorXd(0.5 / (1.0 - e.array()));
    case Framing::att: return e.array() / (1.0 - e.array());
    default: return (1.0 - e.array()) / e.array();
  }
}

Eigen::VectorXd SyntheticDGP::true_ratio(const Eigen::MatrixXd& x, std::size_t alpha) const {
  if (alpha >= tasks()) throw std::invalid_argument("synthetic: unknown task index");
  return ratio_of(propensity(x), alpha);
}

Eigen::VectorXd SyntheticDGP::projected_ratio(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& columns,
                                              std::size_t alpha) const {
  if (alpha >= tasks()) throw std::invalid_argument("synthetic: unknown task index");
  std::vector<bool> kept(static_cast<std::size_t>(spec_.d), false);
  for (auto c : columns) {
    if (c < 0 || c >= spec_.d) throw std::out_of_range("synthetic: column out of range");
    kept[static_cast<std::size_t>(c)] = true;
  }
  Eigen::VectorXd s = Eigen::VectorXd::Zero(x.rows());
  Eigen::Index hidden = 0;
  for (Eigen::Index c = 0; c < spec_.confounder_dim; ++c) {
    if (kept[static_cast<std::size_t>(c)])
      s += x.col(c);
    else
      ++hidden;
  }
  // Under the population the hidden confounders sum to N(0, hidden),
  // independently of the kept coordinates.
  Eigen::VectorXd e(x.rows());
  const double spread = std::sqrt(static_cast<double>(hidden));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (hidden == 0) {
      e(i) = sigmoid(spec_.selection_strength * s(i));
      continue;
    }
    double acc = 0.0;
    for (Eigen::Index k = 0; k < gh_nodes_.size(); ++k)
      acc += gh_weights_(k) * sigmoid(spec_.selection_strength * (s(i) + spread * gh_nodes_(k)));
    e(i) = acc;
  }
  return ratio_of(e, alpha);
}

McEstimate SyntheticDGP::bse(const std::vector<Eigen::Index>& columns, std::size_t alpha, Eigen::Index draws,
                             std::uint64_t seed) const {
  if (draws < 2) throw std::invalid_argument("synthetic: at least two Monte Carlo draws required");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  Eigen::MatrixXd x(draws, spec_.d);
  Eigen::RowVectorXd row(spec_.d);
  for (Eigen::Index i = 0; i < draws;) {
    for (Eigen::Index j = 0; j < spec_.d; ++j) row(j) = normal(rng);
    const double e = propensity(row)(0);
    double accept = 1.0 - e;  // att source: controls
    if (spec_.framing == Framing::ate) accept = alpha == 1 ? e : 1.0 - e;
    if (spec_.framing == Framing::transport) accept = e;
    if (unif(rng) < accept) x.row(i++) = row;
  }
  const Eigen::ArrayXd sq = (true_ratio(x, alpha) - projected_ratio(x, columns, alpha)).array().square();
  const double mean = sq.mean();
  const double sd = std::sqrt((sq - mean).square().sum() / static_cast<double>(draws - 1));
  McEstimate out;
  out.value = std::sqrt(mean);
  // Delta method for the square root of a mean.
  out.std_error = mean > 0.0 ? sd / std::sqrt(static_cast<double>(draws)) / (2.0 * out.value) : 0.0;
  return out;
}

SyntheticDraw SyntheticDGP::draw(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  const Eigen::Index d = spec_.d;

  // Group 1: treated (ate, att) or trial (transport), with probability e(x).
  Eigen::Index need[2];
  if (spec_.framing == Framing::ate) {
    need[0] = need[1] = spec_.n_source;
  } else if (spec_.framing == Framing::att) {
    need[0] = spec_.n_source;
    need[1] = spec_.n_target;
  } else {
    need[0] = spec_.n_target;
    need[1] = spec_.n_source;
  }
  const Eigen::Index n = need[0] + need[1];
  Eigen::MatrixXd xs(n, d);
  std::vector<int> group;
  group.reserve(static_cast<std::size_t>(n));
  Eigen::Index have[2] = {0, 0};
  Eigen::RowVectorXd row(d);
  while (have[0] < need[0] || have[1] < need[1]) {
    for (Eigen::Index j = 0; j < d; ++j) row(j) = normal(rng);
    const int g = unif(rng) < propensity(row)(0) ? 1 : 0;
    if (have[g] == need[g]) continue;
    ++have[g];
    xs.row(static_cast<Eigen::Index>(group.size())) = row;
    group.push_back(g);
  }

  SyntheticDraw out;
  if (spec_.framing == Framing::transport) {
    // Trial rows first, then observational rows.
    std::vector<Eigen::Index> order;
    for (int g : {1, 0})
      for (std::size_t i = 0; i < group.size(); ++i)
        if (group[i] == g) order.push_back(static_cast<Eigen::Index>(i));
    Eigen::MatrixXd x(n, d);
    std::vector<int> arm(static_cast<std::size_t>(n)), trial(static_cast<std::size_t>(n));
    Eigen::VectorXd y(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      x.row(r) = xs.row(order[static_cast<std::size_t>(r)]);
      trial[static_cast<std::size_t>(r)] = group[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])];
      arm[static_cast<std::size_t>(r)] = unif(rng) < 0.5 ? 1 : 0;
    }
    for (Eigen::Index r = 0; r < n; ++r)
      y(r) = outcome(x.row(r), arm[static_cast<std::size_t>(r)])(0) + spec_.noise_sd * normal(rng);
    out.membership = trial;
    out.data = make_dataset(std::move(x), std::move(arm), std::move(y), std::move(trial));
    const auto [rct, obs] = split_by_indicator(out.data);
    out.family = build_transport_task(rct, obs);
  } else {
    Eigen::VectorXd y(n);
    for (Eigen::Index r = 0; r < n; ++r)
      y(r) = outcome(xs.row(r), group[static_cast<std::size_t>(r)])(0) + spec_.noise_sd * normal(rng);
    out.membership = group;
    out.data = make_dataset(std::move(xs), group, std::move(y));
    out.family = spec_.framing == Framing::ate ? build_ate_tasks(out.data) : build_att_task(out.data);
  }
  for (std::size_t a = 0; a < out.family.size(); ++a) {
    const auto& t = out.family.tasks[a].design;
    out.target_outcome.push_back(task_outcome(t.target_x, a));
    out.source_ratio.push_back(true_ratio(t.source_x, a));
  }
  return out;
}

}  // namespace repw
