#include "repw/task.hpp"

#include <cmath>
#include <stdexcept>

namespace repw {

void WeightingTask::validate() const {
  if (design.source_x.rows() == 0) throw std::invalid_argument("task " + design.label + ": empty source sample");
  if (design.target_x.rows() == 0) throw std::invalid_argument("task " + design.label + ": empty target sample");
  if (design.source_x.cols() != design.target_x.cols())
    throw std::invalid_argument("task " + design.label + ": source and target covariate dimensions differ");
  if (source_pseudo_y && source_pseudo_y->size() != design.source_x.rows())
    throw std::invalid_argument("task " + design.label + ": pseudo-outcome length does not match source size");
}

void TaskFamily::validate() const {
  if (tasks.empty()) throw std::invalid_argument("task family is empty");
  if (static_cast<std::size_t>(probs.size()) != tasks.size())
    throw std::invalid_argument("task family: one probability per task required");
  if ((probs.array() < 0.0).any()) throw std::invalid_argument("task family: negative task probability");
  if (std::abs(probs.sum() - 1.0) > 1e-12) throw std::invalid_argument("task family: probabilities must sum to 1");
  for (const auto& t : tasks) t.validate();
}

DesignFamily TaskFamily::design() const {
  DesignFamily out;
  out.probs = probs;
  out.tasks.reserve(tasks.size());
  for (const auto& t : tasks) out.tasks.push_back(t.design);
  return out;
}

namespace {

Eigen::MatrixXd gather(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(i) = x.row(rows[i]);
  return out;
}

std::optional<Eigen::VectorXd> gather(const std::optional<Eigen::VectorXd>& y, const std::vector<Eigen::Index>& rows) {
  if (!y) return std::nullopt;
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(i) = (*y)(rows[i]);
  return out;
}

std::vector<Eigen::Index> all_rows(Eigen::Index n) {
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) rows[i] = i;
  return rows;
}

std::vector<Eigen::Index> arm_rows(const Dataset& ds, int arm) {
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < ds.rows(); ++i)
    if ((*ds.treatment)[i] == arm) rows.push_back(i);
  return rows;
}

}  // namespace

TaskFamily build_att_task(const Dataset& ds) {
  if (!ds.treatment) throw std::invalid_argument("ATT task: dataset has no treatment column");
  for (int a : ds.treatment_alphabet)
    if (a != 0 && a != 1) throw std::invalid_argument("ATT task: treatment must be binary (0 = control, 1 = treated)");
  auto control = arm_rows(ds, 0);
  auto treated = arm_rows(ds, 1);
  if (control.empty()) throw std::invalid_argument("ATT task: control arm empty");
  if (treated.empty()) throw std::invalid_argument("ATT task: treated arm empty");

  WeightingTask t;
  t.design.label = "att";
  t.design.source_x = gather(ds.covariates, control);
  t.design.target_x = gather(ds.covariates, treated);
  t.design.source_rows = std::move(control);
  t.design.target_rows = std::move(treated);
  t.source_pseudo_y = gather(ds.outcome, t.design.source_rows);

  TaskFamily family;
  family.tasks.push_back(std::move(t));
  family.probs = Eigen::VectorXd::Ones(1);
  family.validate();
  return family;
}

TaskFamily build_ate_tasks(const Dataset& ds, ArmWeighting weighting) {
  if (!ds.treatment) throw std::invalid_argument("ATE tasks: dataset has no treatment column");
  if (ds.treatment_alphabet.size() < 2) throw std::invalid_argument("ATE tasks: at least two treatment arms required");

  TaskFamily family;
  const auto everyone = all_rows(ds.rows());
  family.probs.resize(static_cast<Eigen::Index>(ds.treatment_alphabet.size()));
  for (std::size_t k = 0; k < ds.treatment_alphabet.size(); ++k) {
    const int a = ds.treatment_alphabet[k];
    auto rows = arm_rows(ds, a);
    if (rows.empty()) throw std::invalid_argument("ATE tasks: arm " + std::to_string(a) + " empty");
    WeightingTask t;
    t.design.label = "arm=" + std::to_string(a);
    t.design.arm = a;
    t.design.source_x = gather(ds.covariates, rows);
    t.design.target_x = ds.covariates;
    t.design.target_rows = everyone;
    t.source_pseudo_y = gather(ds.outcome, rows);
    family.probs(static_cast<Eigen::Index>(k)) =
        weighting == ArmWeighting::uniform ? 1.0 / static_cast<double>(ds.treatment_alphabet.size())
                                           : static_cast<double>(rows.size()) / static_cast<double>(ds.rows());
    t.design.source_rows = std::move(rows);
    family.tasks.push_back(std::move(t));
  }
  // Frequencies can drift from 1 by a few ulps.
  family.probs /= family.probs.sum();
  family.validate();
  return family;
}

double transport_pseudo_outcome(int a, double y, double pi) { return a * y / pi - (1 - a) * y / (1.0 - pi); }

TaskFamily build_transport_task(const Dataset& rct, const Dataset& obs) {
  if (!rct.treatment || !rct.outcome) throw std::invalid_argument("transport task: RCT needs treatment and outcome");
  if (rct.dim() != obs.dim())
    throw std::invalid_argument("transport task: dimension mismatch between RCT (" + std::to_string(rct.dim()) +
                                ") and observational data (" + std::to_string(obs.dim()) + ")");
  if (rct.rows() == 0 || obs.rows() == 0) throw std::invalid_argument("transport task: empty sample");
  Eigen::Index treated = 0;
  for (int a : *rct.treatment) {
    if (a != 0 && a != 1) throw std::invalid_argument("transport task: RCT treatment must be binary");
    treated += a;
  }
  const double pi = static_cast<double>(treated) / static_cast<double>(rct.rows());
  if (treated == 0 || treated == rct.rows()) throw std::invalid_argument("transport task: degenerate RCT assignment");

  WeightingTask t;
  t.design.label = "transport";
  t.design.source_x = rct.covariates;
  t.design.target_x = obs.covariates;
  t.design.source_rows = all_rows(rct.rows());
  t.design.target_rows = all_rows(obs.rows());
  Eigen::VectorXd ytilde(rct.rows());
  for (Eigen::Index i = 0; i < rct.rows(); ++i)
    ytilde(i) = transport_pseudo_outcome((*rct.treatment)[i], (*rct.outcome)(i), pi);
  t.source_pseudo_y = std::move(ytilde);

  TaskFamily family;
  family.tasks.push_back(std::move(t));
  family.probs = Eigen::VectorXd::Ones(1);
  family.validate();
  return family;
}

TaskFamily standardize(const TaskFamily& family) {
  TaskFamily out = family;
  for (auto& t : out.tasks) {
    const Eigen::RowVectorXd mean = t.design.source_x.colwise().mean();
    Eigen::RowVectorXd sd =
        ((t.design.source_x.rowwise() - mean).array().square().colwise().sum() /
         std::max<double>(1.0, static_cast<double>(t.design.source_x.rows() - 1)))
            .sqrt();
    for (Eigen::Index j = 0; j < sd.size(); ++j)
      if (!(sd(j) > 0.0)) sd(j) = 1.0;
    t.design.source_x = (t.design.source_x.rowwise() - mean).array().rowwise() / sd.array();
    t.design.target_x = (t.design.target_x.rowwise() - mean).array().rowwise() / sd.array();
  }
  return out;
}

}  // namespace repw
