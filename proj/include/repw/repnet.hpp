#pragma once

#include "repw/qp.hpp"
#include "repw/representation.hpp"
#include "repw/task.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace repw {

enum class Activation { relu, tanh };

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
};

/// x -> trunk -> phi(x) -> head_a -> scalar. The trunk's last width is the
/// representation size; an empty trunk makes phi the identity. Every head has
/// the same hidden widths and ends in an affine scalar output.
struct Architecture {
  Eigen::Index input_dim = 0;
  std::vector<Eigen::Index> trunk_widths;
  std::vector<Eigen::Index> head_widths;
  std::vector<std::string> head_labels;  // one per task
  Activation activation = Activation::relu;

  Eigen::Index rep_dim() const { return trunk_widths.empty() ? input_dim : trunk_widths.back(); }
  std::size_t heads() const { return head_labels.size(); }
  std::size_t parameter_count() const;
};

/// d -> hidden -> rep_dim -> hidden -> 1 with one head per label.
Architecture default_architecture(Eigen::Index input_dim, std::vector<std::string> head_labels,
                                  Eigen::Index rep_dim = 10, Eigen::Index hidden = 200);

class RepNet {
 public:
  RepNet() = default;
  /// Layers drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  RepNet(Architecture arch, std::uint64_t seed);
  static RepNet zeros(Architecture arch);

  const Architecture& architecture() const { return arch_; }
  std::size_t parameter_count() const { return arch_.parameter_count(); }

  struct Output {
    Eigen::VectorXd rep;
    double head = 0.0;
  };
  Output forward(const Eigen::VectorXd& x, std::size_t head) const;
  Output forward(const Eigen::VectorXd& x, const std::string& head_label) const;

  /// Row-wise phi: n x d in, n x rep_dim out.
  Eigen::MatrixXd represent(const Eigen::MatrixXd& x) const;
  /// Head `head` on every row of x.
  Eigen::VectorXd head_values(const Eigen::MatrixXd& x, std::size_t head) const;
  std::size_t head_index(const std::string& label) const;

  /// Flat parameter vector: trunk layers, then each head's layers; within a
  /// layer the column-major weight followed by the bias.
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& theta);

  std::vector<DenseLayer>& trunk() { return trunk_; }
  const std::vector<DenseLayer>& trunk() const { return trunk_; }
  std::vector<DenseLayer>& head(std::size_t k) { return heads_.at(k); }
  const std::vector<DenseLayer>& head(std::size_t k) const { return heads_.at(k); }

 private:
  Architecture arch_;
  std::vector<DenseLayer> trunk_;
  std::vector<std::vector<DenseLayer>> heads_;
};

/// Empirical AutoDML loss: mean(v_source^2) - 2 mean(v_target).
double autodml_loss(const Eigen::VectorXd& v_source, const Eigen::VectorXd& v_target);

/// p-weighted sum of per-task losses of head_a o phi. Heads are matched to
/// tasks by label.
double joint_autodml_loss(const RepNet& net, const DesignFamily& family);

struct LossGradient {
  double loss = 0.0;
  Eigen::VectorXd gradient;  // same layout as RepNet::parameters()
};

/// Exact backpropagated gradient of joint_autodml_loss.
LossGradient loss_gradient(const RepNet& net, const DesignFamily& family);

struct TrainConfig {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int patience = 3;
  int max_epochs = 300;
  double validation_fraction = 0.2;
  Eigen::Index batch_size = 0;  // 0: full batch
  double weight_decay = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainReport {
  int epochs_run = 0;
  int best_epoch = 0;  // 0 means the initial parameters were never beaten
  double best_validation_loss = 0.0;
  std::vector<double> validation_losses;  // index 0: before training
};

/// Adam on the joint loss with early stopping on a held-out split of every
/// source and target sample; returns the best-validation parameters.
RepNet train(RepNet net, const DesignFamily& family, const TrainConfig& cfg, TrainReport* report = nullptr);

/// Snapshot of the trunk; later changes to `net` do not affect it.
Representation extract_representation(const RepNet& net);

/// Head values clipped below at zero and rescaled to mean one.
Eigen::VectorXd normalize_head_values(const Eigen::VectorXd& head_values);

/// "NN head" weights for `task`, using the head carrying its label.
WeightVector nn_head_weights(const RepNet& net, const DesignTask& task);

struct RepresentationCandidate {
  Representation phi;
  std::vector<Eigen::Index> head_widths{32};
};

struct Selection {
  std::size_t index = 0;
  std::vector<double> losses;  // NaN for candidates whose head diverged
};

/// Fits a fresh head on each candidate's images and keeps the candidate
/// with the lowest achieved loss (ties within 1e-12 go to the earlier one).
Selection select_representation(const std::vector<RepresentationCandidate>& candidates, const DesignFamily& family,
                                const TrainConfig& cfg);

/// Binary format "RNW1", little endian: u32 trunk layer count, u32 head
/// count, u32 layers per head, u32 activation (0 relu, 1 tanh), then
/// (u32 in, u32 out) for every layer, then head labels as (u32 length,
/// bytes), then every layer's weight (row-major, out x in) and bias as f64.
void save_repnet(const RepNet& net, std::ostream& out);
RepNet load_repnet(std::istream& in);

}  // namespace repw
