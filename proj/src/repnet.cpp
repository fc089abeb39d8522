#include "repw/repnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <memory>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

namespace repw {

namespace {

using Layers = std::vector<DenseLayer>;

Layers make_layers(Eigen::Index in, const std::vector<Eigen::Index>& widths) {
  Layers layers;
  for (auto w : widths) {
    if (w <= 0) throw std::invalid_argument("architecture: layer widths must be positive");
    layers.push_back({Eigen::MatrixXd::Zero(w, in), Eigen::VectorXd::Zero(w)});
    in = w;
  }
  return layers;
}

std::vector<Eigen::Index> head_dims(const Architecture& arch) {
  auto dims = arch.head_widths;
  dims.push_back(1);
  return dims;
}

void for_each_layer(RepNet& net, const std::function<void(DenseLayer&)>& f) {
  for (auto& l : net.trunk()) f(l);
  for (std::size_t k = 0; k < net.architecture().heads(); ++k)
    for (auto& l : net.head(k)) f(l);
}

void for_each_layer(const RepNet& net, const std::function<void(const DenseLayer&)>& f) {
  for (const auto& l : net.trunk()) f(l);
  for (std::size_t k = 0; k < net.architecture().heads(); ++k)
    for (const auto& l : net.head(k)) f(l);
}

Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation a) {
  if (a == Activation::relu) return z.cwiseMax(0.0);
  return z.array().tanh().matrix();
}

// Derivative of the activation expressed through pre-activation z.
Eigen::MatrixXd activation_grad(const Eigen::MatrixXd& z, Activation a) {
  if (a == Activation::relu) return (z.array() > 0.0).cast<double>().matrix();
  return (1.0 - z.array().tanh().square()).matrix();
}

struct StackCache {
  std::vector<Eigen::MatrixXd> inputs;  // input to each layer
  std::vector<Eigen::MatrixXd> pre;     // pre-activation of each layer
};

// Columns are samples. When `affine_last` the final layer is not activated.
Eigen::MatrixXd run_stack(const Layers& layers, const Eigen::MatrixXd& in, Activation act, bool affine_last,
                          StackCache* cache) {
  Eigen::MatrixXd h = in;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::MatrixXd z = layers[l].weight * h;
    z.colwise() += layers[l].bias;
    const bool last = l + 1 == layers.size();
    if (cache) {
      cache->inputs.push_back(std::move(h));
      cache->pre.push_back(z);
    }
    h = (affine_last && last) ? std::move(z) : activate(z, act);
  }
  return h;
}

// Accumulates parameter gradients for dLoss/dOutput = d_out; returns dLoss/dInput.
Eigen::MatrixXd backprop_stack(const Layers& layers, const StackCache& cache, Eigen::MatrixXd d_out, Activation act,
                               bool affine_last, Layers& grads) {
  for (std::size_t li = layers.size(); li-- > 0;) {
    const bool last = li + 1 == layers.size();
    Eigen::MatrixXd dz = (affine_last && last) ? std::move(d_out)
                                                : Eigen::MatrixXd(d_out.cwiseProduct(activation_grad(cache.pre[li], act)));
    grads[li].weight.noalias() += dz * cache.inputs[li].transpose();
    grads[li].bias += dz.rowwise().sum();
    d_out = layers[li].weight.transpose() * dz;
  }
  return d_out;
}

struct Gradients {
  Layers trunk;
  std::vector<Layers> heads;
};

Gradients zero_like(const RepNet& net) {
  Gradients g;
  auto zero = [](const Layers& ls) {
    Layers out;
    for (const auto& l : ls)
      out.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())});
    return out;
  };
  g.trunk = zero(net.trunk());
  for (std::size_t k = 0; k < net.architecture().heads(); ++k) g.heads.push_back(zero(net.head(k)));
  return g;
}

// One task's samples with columns as samples.
struct TaskColumns {
  Eigen::MatrixXd source;
  Eigen::MatrixXd target;
  double prob = 1.0;
  std::size_t head = 0;
};

std::vector<TaskColumns> to_columns(const RepNet& net, const DesignFamily& family) {
  if (family.tasks.empty()) throw std::invalid_argument("repnet: empty task family");
  if (static_cast<std::size_t>(family.probs.size()) != family.tasks.size())
    throw std::invalid_argument("repnet: one task probability per task required");
  std::vector<TaskColumns> out;
  for (std::size_t t = 0; t < family.tasks.size(); ++t) {
    const auto& task = family.tasks[t];
    if (task.source_x.rows() == 0 || task.target_x.rows() == 0)
      throw std::invalid_argument("repnet: task " + task.label + " has an empty sample");
    if (task.dim() != net.architecture().input_dim || task.target_x.cols() != net.architecture().input_dim)
      throw std::invalid_argument("repnet: task " + task.label + " has the wrong covariate dimension");
    out.push_back({task.source_x.transpose(), task.target_x.transpose(), family.probs(static_cast<Eigen::Index>(t)),
                   net.head_index(task.label)});
  }
  return out;
}

// Joint loss of the given samples; accumulates gradients when `grads` is set.
double evaluate(const RepNet& net, const std::vector<TaskColumns>& tasks, Gradients* grads) {
  const auto act = net.architecture().activation;
  double loss = 0.0;
  for (const auto& t : tasks) {
    const auto& head = net.head(t.head);
    for (int side = 0; side < 2; ++side) {
      const Eigen::MatrixXd& x = side == 0 ? t.source : t.target;
      const double n = static_cast<double>(x.cols());
      if (x.cols() == 0) continue;
      StackCache trunk_cache, head_cache;
      const Eigen::MatrixXd rep = run_stack(net.trunk(), x, act, false, grads ? &trunk_cache : nullptr);
      const Eigen::MatrixXd out = run_stack(head, rep, act, true, grads ? &head_cache : nullptr);
      Eigen::MatrixXd d_out;
      if (side == 0) {
        loss += t.prob * out.squaredNorm() / n;
        if (grads) d_out = (2.0 * t.prob / n) * out;
      } else {
        loss -= 2.0 * t.prob * out.sum() / n;
        if (grads) d_out = Eigen::MatrixXd::Constant(1, x.cols(), -2.0 * t.prob / n);
      }
      if (grads) {
        Eigen::MatrixXd d_rep = backprop_stack(head, head_cache, std::move(d_out), act, true, grads->heads[t.head]);
        backprop_stack(net.trunk(), trunk_cache, std::move(d_rep), act, false, grads->trunk);
      }
    }
  }
  return loss;
}

Eigen::VectorXd flatten(const Gradients& g, std::size_t count) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(count));
  Eigen::Index off = 0;
  auto put = [&](const Layers& ls) {
    for (const auto& l : ls) {
      out.segment(off, l.weight.size()) = Eigen::Map<const Eigen::VectorXd>(l.weight.data(), l.weight.size());
      off += l.weight.size();
      out.segment(off, l.bias.size()) = l.bias;
      off += l.bias.size();
    }
  };
  put(g.trunk);
  for (const auto& h : g.heads) put(h);
  return out;
}

Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& idx, std::size_t begin,
                               std::size_t end) {
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(end - begin));
  for (std::size_t k = begin; k < end; ++k) out.col(static_cast<Eigen::Index>(k - begin)) = x.col(idx[k]);
  return out;
}

}  // namespace

std::size_t Architecture::parameter_count() const {
  std::size_t count = 0;
  Eigen::Index in = input_dim;
  for (auto w : trunk_widths) {
    count += static_cast<std::size_t>(w * in + w);
    in = w;
  }
  std::size_t head = 0;
  for (auto w : head_widths) {
    head += static_cast<std::size_t>(w * in + w);
    in = w;
  }
  head += static_cast<std::size_t>(in + 1);
  return count + head * heads();
}

Architecture default_architecture(Eigen::Index input_dim, std::vector<std::string> head_labels, Eigen::Index rep_dim,
                                  Eigen::Index hidden) {
  Architecture a;
  a.input_dim = input_dim;
  a.trunk_widths = {hidden, rep_dim};
  a.head_widths = {hidden};
  a.head_labels = std::move(head_labels);
  return a;
}

RepNet RepNet::zeros(Architecture arch) {
  if (arch.input_dim <= 0) throw std::invalid_argument("architecture: input dimension must be positive");
  if (arch.head_labels.empty()) throw std::invalid_argument("architecture: at least one head required");
  RepNet net;
  net.trunk_ = make_layers(arch.input_dim, arch.trunk_widths);
  for (std::size_t k = 0; k < arch.heads(); ++k) net.heads_.push_back(make_layers(arch.rep_dim(), head_dims(arch)));
  net.arch_ = std::move(arch);
  return net;
}

RepNet::RepNet(Architecture arch, std::uint64_t seed) : RepNet(zeros(std::move(arch))) {
  std::mt19937_64 rng(seed);
  for_each_layer(*this, [&](DenseLayer& l) {
    const double bound = std::sqrt(1.0 / static_cast<double>(l.weight.cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index j = 0; j < l.weight.cols(); ++j)
      for (Eigen::Index i = 0; i < l.weight.rows(); ++i) l.weight(i, j) = dist(rng);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = dist(rng);
  });
}

std::size_t RepNet::head_index(const std::string& label) const {
  auto it = std::find(arch_.head_labels.begin(), arch_.head_labels.end(), label);
  if (it == arch_.head_labels.end()) throw std::invalid_argument("repnet: no head for task '" + label + "'");
  return static_cast<std::size_t>(it - arch_.head_labels.begin());
}

RepNet::Output RepNet::forward(const Eigen::VectorXd& x, std::size_t head) const {
  if (x.size() != arch_.input_dim) throw std::invalid_argument("repnet: input dimension mismatch");
  if (head >= heads_.size()) throw std::invalid_argument("repnet: unknown head index " + std::to_string(head));
  Output out;
  const Eigen::MatrixXd rep = run_stack(trunk_, x, arch_.activation, false, nullptr);
  out.rep = rep.col(0);
  out.head = run_stack(heads_[head], rep, arch_.activation, true, nullptr)(0, 0);
  return out;
}

RepNet::Output RepNet::forward(const Eigen::VectorXd& x, const std::string& head_label) const {
  return forward(x, head_index(head_label));
}

Eigen::MatrixXd RepNet::represent(const Eigen::MatrixXd& x) const {
  if (x.cols() != arch_.input_dim) throw std::invalid_argument("repnet: input dimension mismatch");
  return run_stack(trunk_, x.transpose(), arch_.activation, false, nullptr).transpose();
}

Eigen::VectorXd RepNet::head_values(const Eigen::MatrixXd& x, std::size_t head) const {
  if (head >= heads_.size()) throw std::invalid_argument("repnet: unknown head index " + std::to_string(head));
  const Eigen::MatrixXd rep = represent(x).transpose();
  return run_stack(heads_[head], rep, arch_.activation, true, nullptr).row(0).transpose();
}

Eigen::VectorXd RepNet::parameters() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index off = 0;
  for_each_layer(*this, [&](const DenseLayer& l) {
    out.segment(off, l.weight.size()) = Eigen::Map<const Eigen::VectorXd>(l.weight.data(), l.weight.size());
    off += l.weight.size();
    out.segment(off, l.bias.size()) = l.bias;
    off += l.bias.size();
  });
  return out;
}

void RepNet::set_parameters(const Eigen::VectorXd& theta) {
  if (static_cast<std::size_t>(theta.size()) != parameter_count())
    throw std::invalid_argument("repnet: parameter vector has the wrong length");
  Eigen::Index off = 0;
  for_each_layer(*this, [&](DenseLayer& l) {
    Eigen::Map<Eigen::VectorXd>(l.weight.data(), l.weight.size()) = theta.segment(off, l.weight.size());
    off += l.weight.size();
    l.bias = theta.segment(off, l.bias.size());
    off += l.bias.size();
  });
}

double autodml_loss(const Eigen::VectorXd& v_source, const Eigen::VectorXd& v_target) {
  if (v_source.size() == 0 || v_target.size() == 0) throw std::invalid_argument("autodml_loss: empty sample");
  if (!v_source.allFinite() || !v_target.allFinite()) throw std::invalid_argument("autodml_loss: non-finite values");
  return v_source.squaredNorm() / static_cast<double>(v_source.size()) -
         2.0 * v_target.sum() / static_cast<double>(v_target.size());
}

double joint_autodml_loss(const RepNet& net, const DesignFamily& family) {
  double loss = 0.0;
  for (std::size_t t = 0; t < family.tasks.size(); ++t) {
    const auto& task = family.tasks[t];
    const auto head = net.head_index(task.label);
    loss += family.probs(static_cast<Eigen::Index>(t)) *
            autodml_loss(net.head_values(task.source_x, head), net.head_values(task.target_x, head));
  }
  return loss;
}

LossGradient loss_gradient(const RepNet& net, const DesignFamily& family) {
  const auto tasks = to_columns(net, family);
  auto grads = zero_like(net);
  LossGradient out;
  out.loss = evaluate(net, tasks, &grads);
  out.gradient = flatten(grads, net.parameter_count());
  return out;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning rate must be positive");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw std::invalid_argument("train: validation fraction must lie in (0, 1)");
  if (patience < 1) throw std::invalid_argument("train: patience must be at least 1");
  if (max_epochs < 0) throw std::invalid_argument("train: max_epochs must be nonnegative");
  if (batch_size < 0) throw std::invalid_argument("train: batch size must be nonnegative");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("train: invalid Adam betas");
  if (weight_decay < 0.0) throw std::invalid_argument("train: weight decay must be nonnegative");
}

RepNet train(RepNet net, const DesignFamily& family, const TrainConfig& cfg, TrainReport* report) {
  cfg.validate();
  const auto all = to_columns(net, family);
  std::mt19937_64 rng(cfg.seed);

  // Fixed split of every source and target sample into train / validation.
  struct Split {
    Eigen::MatrixXd train, valid;
  };
  auto split = [&](const Eigen::MatrixXd& x) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(x.cols()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    std::size_t n_valid = 0;
    if (idx.size() >= 2)
      n_valid = std::clamp<std::size_t>(
          static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(idx.size()))), 1,
          idx.size() - 1);
    if (n_valid == 0) return Split{x, x};
    return Split{gather_columns(x, idx, n_valid, idx.size()), gather_columns(x, idx, 0, n_valid)};
  };
  std::vector<TaskColumns> train_set, valid_set;
  for (const auto& t : all) {
    auto s = split(t.source);
    auto q = split(t.target);
    train_set.push_back({std::move(s.train), std::move(q.train), t.prob, t.head});
    valid_set.push_back({std::move(s.valid), std::move(q.valid), t.prob, t.head});
  }

  TrainReport rep;
  double best = evaluate(net, valid_set, nullptr);
  if (!std::isfinite(best)) throw std::runtime_error("train: initial validation loss is not finite");
  rep.validation_losses.push_back(best);
  Eigen::VectorXd theta = net.parameters();
  Eigen::VectorXd best_theta = theta;
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(theta.size());
  long step = 0;
  int since_best = 0;

  Eigen::Index largest = 0;
  for (const auto& t : train_set) largest = std::max({largest, t.source.cols(), t.target.cols()});
  const Eigen::Index batches =
      cfg.batch_size > 0 ? std::max<Eigen::Index>(1, (largest + cfg.batch_size - 1) / cfg.batch_size) : 1;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    // Per-epoch permutation of every sample; batch b takes the b-th slice of each.
    std::vector<std::vector<Eigen::Index>> perm_s, perm_t;
    if (batches > 1) {
      for (const auto& t : train_set) {
        for (auto* dst : {&perm_s, &perm_t}) {
          const auto n = (dst == &perm_s ? t.source : t.target).cols();
          std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
          std::iota(idx.begin(), idx.end(), Eigen::Index{0});
          std::shuffle(idx.begin(), idx.end(), rng);
          dst->push_back(std::move(idx));
        }
      }
    }
    for (Eigen::Index b = 0; b < batches; ++b) {
      double loss = 0.0;
      auto grads = zero_like(net);
      if (batches == 1) {
        loss = evaluate(net, train_set, &grads);
      } else {
        std::vector<TaskColumns> batch;
        for (std::size_t k = 0; k < train_set.size(); ++k) {
          auto slice = [&](const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& idx) {
            const auto n = static_cast<std::size_t>(x.cols());
            const auto lo = n * static_cast<std::size_t>(b) / static_cast<std::size_t>(batches);
            const auto hi = n * static_cast<std::size_t>(b + 1) / static_cast<std::size_t>(batches);
            return gather_columns(x, idx, lo, hi);
          };
          batch.push_back({slice(train_set[k].source, perm_s[k]), slice(train_set[k].target, perm_t[k]),
                           train_set[k].prob, train_set[k].head});
        }
        loss = evaluate(net, batch, &grads);
      }
      Eigen::VectorXd g = flatten(grads, net.parameter_count());
      if (!std::isfinite(loss) || !g.allFinite())
        throw std::runtime_error("train: loss became non-finite at epoch " + std::to_string(epoch) +
                                 "; try a smaller learning rate");
      if (cfg.weight_decay > 0.0) g += cfg.weight_decay * theta;
      ++step;
      m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * g;
      m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * g.cwiseAbs2();
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      theta.array() -= cfg.learning_rate * (m1.array() / c1) / ((m2.array() / c2).sqrt() + cfg.epsilon);
      net.set_parameters(theta);
    }

    const double val = evaluate(net, valid_set, nullptr);
    if (!std::isfinite(val))
      throw std::runtime_error("train: validation loss became non-finite at epoch " + std::to_string(epoch) +
                               "; try a smaller learning rate");
    rep.validation_losses.push_back(val);
    rep.epochs_run = epoch;
    if (val < best) {
      best = val;
      best_theta = theta;
      rep.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  rep.best_validation_loss = best;
  net.set_parameters(best_theta);
  if (report) *report = std::move(rep);
  return net;
}

Representation extract_representation(const RepNet& net) {
  auto snapshot = std::make_shared<const RepNet>(net);
  return [snapshot](const Eigen::MatrixXd& x) { return snapshot->represent(x); };
}

Eigen::VectorXd normalize_head_values(const Eigen::VectorXd& head_values) {
  Eigen::VectorXd w = head_values.cwiseMax(0.0);
  const double total = w.sum();
  if (!(total > 0.0)) throw std::runtime_error("nn head weights: degenerate head (no positive values)");
  return w * (static_cast<double>(w.size()) / total);
}

WeightVector nn_head_weights(const RepNet& net, const DesignTask& task) {
  WeightVector out;
  out.w = normalize_head_values(net.head_values(task.source_x, net.head_index(task.label)));
  out.certificate.converged = true;
  return out;
}

Selection select_representation(const std::vector<RepresentationCandidate>& candidates, const DesignFamily& family,
                                const TrainConfig& cfg) {
  if (candidates.empty()) throw std::invalid_argument("select_representation: no candidates");
  Selection sel;
  std::optional<std::size_t> winner;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    DesignFamily mapped = family;
    for (auto& t : mapped.tasks) {
      t.source_x = candidates[c].phi(t.source_x);
      t.target_x = candidates[c].phi(t.target_x);
    }
    Architecture arch;
    arch.input_dim = mapped.tasks.front().dim();
    arch.head_widths = candidates[c].head_widths;
    for (const auto& t : mapped.tasks) arch.head_labels.push_back(t.label);
    double loss = std::numeric_limits<double>::quiet_NaN();
    try {
      TrainConfig head_cfg = cfg;
      head_cfg.seed = cfg.seed + c;
      const RepNet head = train(RepNet(arch, head_cfg.seed), mapped, head_cfg);
      loss = joint_autodml_loss(head, mapped);
      if (!std::isfinite(loss)) loss = std::numeric_limits<double>::quiet_NaN();
    } catch (const std::runtime_error&) {
      // diverged: candidate is infeasible
    }
    sel.losses.push_back(loss);
    if (!std::isnan(loss) && (!winner || loss < sel.losses[*winner] - 1e-12)) winner = c;
  }
  if (!winner) throw std::runtime_error("select_representation: every candidate's head training diverged");
  sel.index = *winner;
  return sel;
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& out, double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("load_repnet: truncated file");
  return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
         static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("load_repnet: truncated file");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double x;
  std::memcpy(&x, &bits, 8);
  return x;
}

}  // namespace

void save_repnet(const RepNet& net, std::ostream& out) {
  const auto& arch = net.architecture();
  out.write("RNW1", 4);
  put_u32(out, static_cast<std::uint32_t>(arch.trunk_widths.size()));
  put_u32(out, static_cast<std::uint32_t>(arch.heads()));
  put_u32(out, static_cast<std::uint32_t>(arch.head_widths.size() + 1));
  put_u32(out, arch.activation == Activation::relu ? 0u : 1u);
  for_each_layer(net, [&](const DenseLayer& l) {
    put_u32(out, static_cast<std::uint32_t>(l.weight.cols()));
    put_u32(out, static_cast<std::uint32_t>(l.weight.rows()));
  });
  for (const auto& label : arch.head_labels) {
    put_u32(out, static_cast<std::uint32_t>(label.size()));
    out.write(label.data(), static_cast<std::streamsize>(label.size()));
  }
  for_each_layer(net, [&](const DenseLayer& l) {
    for (Eigen::Index i = 0; i < l.weight.rows(); ++i)
      for (Eigen::Index j = 0; j < l.weight.cols(); ++j) put_f64(out, l.weight(i, j));
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) put_f64(out, l.bias(i));
  });
  if (!out) throw std::runtime_error("save_repnet: write failed");
}

RepNet load_repnet(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "RNW1", 4) != 0) throw std::runtime_error("load_repnet: bad magic bytes");
  const auto trunk_layers = get_u32(in);
  const auto heads = get_u32(in);
  const auto head_layers = get_u32(in);
  const auto act = get_u32(in);
  if (heads == 0 || head_layers == 0 || act > 1) throw std::runtime_error("load_repnet: invalid header");
  std::vector<std::pair<std::uint32_t, std::uint32_t>> dims;
  for (std::uint32_t k = 0; k < trunk_layers + heads * head_layers; ++k) {
    const auto i = get_u32(in);
    const auto o = get_u32(in);
    dims.emplace_back(i, o);
  }
  Architecture arch;
  arch.activation = act == 0 ? Activation::relu : Activation::tanh;
  arch.input_dim = dims.front().first;
  for (std::uint32_t k = 0; k < trunk_layers; ++k) arch.trunk_widths.push_back(dims[k].second);
  for (std::uint32_t k = 0; k + 1 < head_layers; ++k) arch.head_widths.push_back(dims[trunk_layers + k].second);
  for (std::uint32_t h = 0; h < heads; ++h) {
    const auto len = get_u32(in);
    std::string label(len, '\0');
    if (!in.read(label.data(), len)) throw std::runtime_error("load_repnet: truncated file");
    arch.head_labels.push_back(std::move(label));
  }
  RepNet net = RepNet::zeros(arch);
  std::size_t k = 0;
  bool ok = true;
  for_each_layer(net, [&](DenseLayer& l) {
    if (static_cast<std::uint32_t>(l.weight.cols()) != dims[k].first ||
        static_cast<std::uint32_t>(l.weight.rows()) != dims[k].second)
      ok = false;
    ++k;
  });
  if (!ok) throw std::runtime_error("load_repnet: layer dimensions are inconsistent");
  for_each_layer(net, [&](DenseLayer& l) {
    for (Eigen::Index i = 0; i < l.weight.rows(); ++i)
      for (Eigen::Index j = 0; j < l.weight.cols(); ++j) l.weight(i, j) = get_f64(in);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = get_f64(in);
  });
  return net;
}

}  // namespace repw
