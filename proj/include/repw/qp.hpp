#pragma once

#include "repw/kernels.hpp"
#include "repw/task.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <iosfwd>
#include <vector>

namespace repw {

/// min 1/2 w'Sw + v'w  subject to  l <= Aw <= u.
///
/// As produced by assemble_qp, each task block contributes an identity block
/// (w >= 0) followed by one all-ones row pinning the block sum to its source
/// size, so the weights have mean one within every task.
struct QPSpec {
  Eigen::MatrixXd S;
  Eigen::VectorXd v;
  Eigen::SparseMatrix<double> A;
  Eigen::VectorXd l;
  Eigen::VectorXd u;
  // Source size of every task block, in order. Empty for hand-built specs.
  std::vector<Eigen::Index> block_sizes;

  Eigen::Index variables() const { return S.rows(); }
  Eigen::Index constraints() const { return A.rows(); }
  void validate() const;
};

struct SolverSettings {
  double rho = 0.1;
  double sigma = 1e-6;  // proximal term keeping the linear system definite
  double alpha = 1.6;   // over-relaxation
  double eps_abs = 1e-6;
  double eps_rel = 1e-6;
  int max_iters = 20000;
  int adaptive_rho_interval = 50;
  int check_interval = 10;
  bool polish = true;
  int max_polish_rounds = 25;
};

struct SolverCertificate {
  double primal_residual = 0.0;  // ||proj_[l,u](Aw) - Aw||_inf
  double dual_residual = 0.0;    // ||Sw + v + A'y||_inf
  double objective = 0.0;
  int iterations = 0;
  int refactorizations = 0;
  bool converged = false;
  bool polished = false;
};

/// Per-source-sample weights. `duals` holds the constraint multipliers when
/// the weights come from solve_qp (empty otherwise).
struct WeightVector {
  Eigen::VectorXd w;
  SolverCertificate certificate;
  Eigen::VectorXd duals;
};

QPSpec assemble_qp(const GramBlock& g, double sigma);

struct QPBlock {
  GramBlock gram;
  double sigma = 0.01;
};

/// Block-diagonal S and A; v, l and u stacked task by task.
QPSpec assemble_joint_qp(const std::vector<QPBlock>& blocks);

/// Operator-splitting (ADMM) solve with adaptive rho, followed by an
/// active-set polish of the ADMM iterate. Never throws on non-convergence;
/// check certificate.converged.
WeightVector solve_qp(const QPSpec& spec, const SolverSettings& settings = {});

double qp_objective(const QPSpec& spec, const Eigen::VectorXd& w);

/// Kernel optimal matching on phi-images: gram -> assemble -> solve, then
/// negatives clipped to zero and exact renormalisation to mean one.
WeightVector kom_weights(const DesignTask& task, const Kernel& k, const Representation& phi, double sigma,
                         const SolverSettings& settings = {});

/// Clip at zero and rescale to mean one inside each block.
Eigen::VectorXd clip_and_normalize(const Eigen::VectorXd& w, const std::vector<Eigen::Index>& block_sizes);

/// Plain-text dump: a header line per matrix ("S m m", "v m", "A rows m",
/// "l rows", "u rows") followed by its rows, space separated, row-major.
/// Infinite bounds are written as "inf" / "-inf".
void dump_qp(const QPSpec& spec, std::ostream& out);

}  // namespace repw
