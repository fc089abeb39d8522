#include "repw/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

namespace repw {

void DiscreteDGP::validate() const {
  const Eigen::Index k = support.rows();
  if (k == 0) throw std::invalid_argument("discrete dgp: empty support");
  if (p.size() != k || q.size() != k || m.size() != k)
    throw std::invalid_argument("discrete dgp: p, q and m need one entry per support point");
  if (!support.allFinite() || !m.allFinite()) throw std::invalid_argument("discrete dgp: non-finite support or outcome");
  if ((p.array() < 0.0).any() || (q.array() < 0.0).any())
    throw std::invalid_argument("discrete dgp: probabilities must be nonnegative");
  if (std::abs(p.sum() - 1.0) > 1e-12 || std::abs(q.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("discrete dgp: probabilities must sum to one");
  for (Eigen::Index i = 0; i < k; ++i)
    if (q(i) > 0.0 && p(i) == 0.0)
      throw std::invalid_argument("discrete dgp: target mass at support point " + std::to_string(i) +
                                  " has no source mass (not absolutely continuous)");
  if (!(noise_sd >= 0.0)) throw std::invalid_argument("discrete dgp: noise_sd must be nonnegative");
}

Eigen::VectorXd true_ratio(const DiscreteDGP& dgp) {
  dgp.validate();
  Eigen::VectorXd w(dgp.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = dgp.p(i) > 0.0 ? dgp.q(i) / dgp.p(i) : 0.0;
  return w;
}

std::vector<Eigen::Index> phi_groups(const DiscreteDGP& dgp, const Representation& phi) {
  const Eigen::MatrixXd z = phi(dgp.support);
  if (z.rows() != dgp.size()) throw std::invalid_argument("phi_groups: representation changed the number of rows");
  std::map<std::vector<double>, Eigen::Index> ids;
  std::vector<Eigen::Index> out;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    std::vector<double> key(static_cast<std::size_t>(z.cols()));
    // -0.0 and 0.0 are the same phi-value.
    for (Eigen::Index j = 0; j < z.cols(); ++j) key[static_cast<std::size_t>(j)] = z(i, j) == 0.0 ? 0.0 : z(i, j);
    auto [it, inserted] = ids.emplace(std::move(key), static_cast<Eigen::Index>(ids.size()));
    out.push_back(it->second);
  }
  return out;
}

namespace {

struct GroupSums {
  std::vector<Eigen::Index> group;
  Eigen::VectorXd p_mass;
  Eigen::VectorXd q_mass;
};

GroupSums group_sums(const DiscreteDGP& dgp, const Representation& phi) {
  GroupSums g;
  g.group = phi_groups(dgp, phi);
  const Eigen::Index n_groups = *std::max_element(g.group.begin(), g.group.end()) + 1;
  g.p_mass = Eigen::VectorXd::Zero(n_groups);
  g.q_mass = Eigen::VectorXd::Zero(n_groups);
  for (Eigen::Index i = 0; i < dgp.size(); ++i) {
    g.p_mass(g.group[static_cast<std::size_t>(i)]) += dgp.p(i);
    g.q_mass(g.group[static_cast<std::size_t>(i)]) += dgp.q(i);
  }
  return g;
}

// sup over the single function f of |E_{P^w}[f] - E_Q[f]|.
double singleton_ipm(const DiscreteDGP& dgp, const Eigen::VectorXd& w, const Eigen::VectorXd& f) {
  return std::abs(dgp.p.cwiseProduct(w).dot(f) - dgp.q.dot(f));
}

double outcome_norm(const DiscreteDGP& dgp) {
  return std::sqrt(dgp.p.dot((dgp.m.array().square() + dgp.noise_sd * dgp.noise_sd).matrix()));
}

void check_weights(const DiscreteDGP& dgp, const Eigen::VectorXd& w) {
  if (w.size() != dgp.size()) throw std::invalid_argument("bias: one weight per support point required");
  if ((w.array() < 0.0).any()) throw std::invalid_argument("bias: weights must be nonnegative");
  if (std::abs(dgp.p.dot(w) - 1.0) > 1e-9) throw std::invalid_argument("bias: weights must have P-mean one");
}

}  // namespace

Eigen::VectorXd conditional_mean(const DiscreteDGP& dgp, const Representation& phi, const Eigen::VectorXd& f) {
  dgp.validate();
  if (f.size() != dgp.size()) throw std::invalid_argument("conditional_mean: one value per support point required");
  const auto g = group_sums(dgp, phi);
  Eigen::VectorXd num = Eigen::VectorXd::Zero(g.p_mass.size());
  for (Eigen::Index i = 0; i < dgp.size(); ++i) num(g.group[static_cast<std::size_t>(i)]) += dgp.p(i) * f(i);
  Eigen::VectorXd out(dgp.size());
  for (Eigen::Index i = 0; i < dgp.size(); ++i) {
    const auto k = g.group[static_cast<std::size_t>(i)];
    out(i) = g.p_mass(k) > 0.0 ? num(k) / g.p_mass(k) : 0.0;
  }
  return out;
}

Eigen::VectorXd projected_ratio(const DiscreteDGP& dgp, const Representation& phi) {
  dgp.validate();
  const auto g = group_sums(dgp, phi);
  Eigen::VectorXd out(dgp.size());
  for (Eigen::Index i = 0; i < dgp.size(); ++i) {
    const auto k = g.group[static_cast<std::size_t>(i)];
    out(i) = g.p_mass(k) > 0.0 ? g.q_mass(k) / g.p_mass(k) : 0.0;
  }
  return out;
}

double bse(const DiscreteDGP& dgp, const Representation& phi) {
  const Eigen::VectorXd diff = true_ratio(dgp) - projected_ratio(dgp, phi);
  return std::sqrt(dgp.p.dot(diff.cwiseAbs2()));
}

ConfoundingForms confounding_bias_forms(const DiscreteDGP& dgp, const Representation& phi) {
  const Eigen::VectorXd w_star = true_ratio(dgp);
  const Eigen::VectorXd w_phi = projected_ratio(dgp, phi);
  const Eigen::VectorXd m_phi = conditional_mean(dgp, phi, dgp.m);
  const Eigen::VectorXd gap = w_star - w_phi;
  ConfoundingForms f;
  f.product_form = dgp.p.dot((m_phi - dgp.m).cwiseProduct(gap));
  f.outcome_form = -dgp.p.dot(dgp.m.cwiseProduct(gap));
  f.direct = dgp.q.dot(m_phi - dgp.m);
  return f;
}

double confounding_bias(const DiscreteDGP& dgp, const Representation& phi) {
  return confounding_bias_forms(dgp, phi).outcome_form;
}

BiasReport bias_decomposition(const DiscreteDGP& dgp, const Representation& phi, const Eigen::VectorXd& w) {
  dgp.validate();
  check_weights(dgp, w);
  const Eigen::VectorXd m_phi = conditional_mean(dgp, phi, dgp.m);
  const Eigen::VectorXd pw = dgp.p.cwiseProduct(w);
  BiasReport r;
  r.total_bias = pw.dot(dgp.m) - dgp.q.dot(dgp.m);
  r.bias_wrt_representation = pw.dot(m_phi) - dgp.q.dot(m_phi);
  r.chosen_weights_bias = pw.dot(dgp.m - m_phi);
  r.confounding_bias = dgp.q.dot(m_phi - dgp.m);
  r.bse = bse(dgp, phi);
  r.ipm_bound_term = singleton_ipm(dgp, w, m_phi);
  r.outcome_norm = outcome_norm(dgp);
  r.corollary_bound = r.ipm_bound_term + r.outcome_norm * r.bse;

  // Energy-kernel MMD between P^w and Q pushed through phi.
  const Eigen::MatrixXd z = phi(dgp.support);
  const Eigen::MatrixXd k = self_gram(EnergyKernel{}, z);
  const Eigen::VectorXd diff = pw - dgp.q;
  r.mmd_context = std::sqrt(std::max(0.0, diff.dot(k * diff)));
  return r;
}

std::string to_key_value(const BiasReport& r) {
  std::ostringstream out;
  auto put = [&](const char* key, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << key << '=' << buf << '\n';
  };
  put("total_bias", r.total_bias);
  put("bias_wrt_representation", r.bias_wrt_representation);
  put("chosen_weights_bias", r.chosen_weights_bias);
  put("confounding_bias", r.confounding_bias);
  put("bse", r.bse);
  put("ipm_bound_term", r.ipm_bound_term);
  put("outcome_norm", r.outcome_norm);
  put("corollary_bound", r.corollary_bound);
  put("mmd_context", r.mmd_context);
  return out.str();
}

namespace {

void require_phi_measurable(const DiscreteDGP& dgp, const Representation& phi, const Eigen::VectorXd& w) {
  const auto group = phi_groups(dgp, phi);
  std::map<Eigen::Index, double> seen;
  for (Eigen::Index i = 0; i < dgp.size(); ++i) {
    if (dgp.p(i) == 0.0) continue;
    auto [it, inserted] = seen.emplace(group[static_cast<std::size_t>(i)], w(i));
    if (!inserted && std::abs(it->second - w(i)) > 1e-12 * std::max(1.0, std::abs(w(i))))
      throw std::invalid_argument("corollary bound: weights are not a function of phi");
  }
}

}  // namespace

BoundCheck corollary_bound(const DiscreteDGP& dgp, const Representation& phi, const Eigen::VectorXd& w) {
  require_phi_measurable(dgp, phi, w);
  const auto r = bias_decomposition(dgp, phi, w);
  return {std::abs(r.total_bias), r.corollary_bound};
}

BoundCheck corollary2(const std::vector<WeightingProblem>& problems, const Eigen::VectorXd& probs) {
  if (problems.empty() || static_cast<std::size_t>(probs.size()) != problems.size())
    throw std::invalid_argument("corollary2: one probability per problem required");
  double lhs = 0.0, ipm2 = 0.0, bse2 = 0.0, sup_norm2 = 0.0;
  for (std::size_t a = 0; a < problems.size(); ++a) {
    const auto& pr = problems[a];
    require_phi_measurable(pr.dgp, pr.phi, pr.w);
    const auto r = bias_decomposition(pr.dgp, pr.phi, pr.w);
    const double pa = probs(static_cast<Eigen::Index>(a));
    lhs += pa * r.total_bias * r.total_bias;
    ipm2 += pa * r.ipm_bound_term * r.ipm_bound_term;
    bse2 += pa * r.bse * r.bse;
    sup_norm2 = std::max(sup_norm2, r.outcome_norm * r.outcome_norm);
  }
  return {0.5 * lhs, ipm2 + sup_norm2 * bse2};
}

double joint_bias_metric(const TaskFamily& family, const std::vector<Eigen::VectorXd>& weights,
                         const std::vector<Eigen::VectorXd>& target_outcome) {
  if (weights.size() != family.size() || target_outcome.size() != family.size())
    throw std::invalid_argument("joint bias: one weight vector and outcome vector per task required");
  double total = 0.0;
  for (std::size_t a = 0; a < family.size(); ++a) {
    const auto& task = family.tasks[a];
    if (!task.source_pseudo_y) throw std::invalid_argument("joint bias: task " + task.design.label + " has no pseudo-outcomes");
    const auto& y = *task.source_pseudo_y;
    if (weights[a].size() != y.size()) throw std::invalid_argument("joint bias: weight length mismatch");
    if (target_outcome[a].size() != task.design.target_size())
      throw std::invalid_argument("joint bias: outcome model length mismatch");
    const double gap = weights[a].dot(y) / static_cast<double>(y.size()) - target_outcome[a].mean();
    total += family.probs(static_cast<Eigen::Index>(a)) * gap * gap;
  }
  return std::sqrt(total);
}

ScoreCheck check_generalized_score(const DiscreteDGP& dgp, const Representation& phi, ScoreKind which,
                                   double tolerance) {
  ScoreCheck out;
  auto sup_on_support = [&](const Eigen::VectorXd& diff) {
    double m = 0.0;
    for (Eigen::Index i = 0; i < dgp.size(); ++i)
      if (dgp.p(i) > 0.0) m = std::max(m, std::abs(diff(i)));
    return m;
  };
  switch (which) {
    case ScoreKind::balancing: out.magnitude = sup_on_support(true_ratio(dgp) - projected_ratio(dgp, phi)); break;
    case ScoreKind::prognostic: out.magnitude = sup_on_support(dgp.m - conditional_mean(dgp, phi, dgp.m)); break;
    case ScoreKind::deconfounding: out.magnitude = std::abs(confounding_bias(dgp, phi)); break;
  }
  out.passed = out.magnitude <= tolerance;
  return out;
}

}  // namespace repw
