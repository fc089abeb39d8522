#pragma once

#include "repw/dataset.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace repw {

/// The outcome-free part of a weighting task: what the design phase may see.
/// Every weighting and representation-learning routine takes this type, so
/// pseudo-outcomes cannot leak into weights.
struct DesignTask {
  std::string label;
  std::optional<int> arm;  // treatment arm for ATE tasks
  Eigen::MatrixXd source_x;
  Eigen::MatrixXd target_x;
  // Row positions in the originating dataset(s), kept for bookkeeping.
  std::vector<Eigen::Index> source_rows;
  std::vector<Eigen::Index> target_rows;

  Eigen::Index source_size() const { return source_x.rows(); }
  Eigen::Index target_size() const { return target_x.rows(); }
  Eigen::Index dim() const { return source_x.cols(); }
};

/// A source sample (covariates + pseudo-outcomes) and a target covariate
/// sample. Pseudo-outcomes are absent in the design phase.
struct WeightingTask {
  DesignTask design;
  std::optional<Eigen::VectorXd> source_pseudo_y;

  void validate() const;
};

struct DesignFamily {
  std::vector<DesignTask> tasks;
  Eigen::VectorXd probs;

  std::size_t size() const { return tasks.size(); }
};

/// Tasks indexed by alpha together with the distribution p over them.
struct TaskFamily {
  std::vector<WeightingTask> tasks;
  Eigen::VectorXd probs;

  std::size_t size() const { return tasks.size(); }
  void validate() const;
  // Outcome mask: the only way the weighting stages receive tasks.
  DesignFamily design() const;
};

enum class ArmWeighting { uniform, frequency };

TaskFamily build_att_task(const Dataset& ds);
TaskFamily build_ate_tasks(const Dataset& ds, ArmWeighting weighting = ArmWeighting::uniform);

/// Treated fraction of the trial is used as the assignment probability.
TaskFamily build_transport_task(const Dataset& rct, const Dataset& obs);

/// Transportability pseudo-outcome a*y/pi - (1-a)*y/(1-pi).
double transport_pseudo_outcome(int a, double y, double pi);

/// Z-scores every task with its own source mean and standard deviation,
/// applied to both source and target. Constant columns are only centred.
TaskFamily standardize(const TaskFamily& family);

}  // namespace repw
