#include "repw/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace repw {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
using RowMajorSparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;

double inf_norm(const Eigen::VectorXd& x) { return x.size() == 0 ? 0.0 : x.cwiseAbs().maxCoeff(); }

Eigen::VectorXd project_box(const Eigen::VectorXd& z, const Eigen::VectorXd& l, const Eigen::VectorXd& u) {
  return z.cwiseMax(l).cwiseMin(u);
}

bool is_equality(double lo, double hi) { return lo == hi; }

// Row with a single nonzero: a simple bound on one variable.
struct BoundRow {
  bool simple = false;
  Eigen::Index col = -1;
  double coef = 0.0;
};

std::vector<BoundRow> classify_rows(const RowMajorSparse& a) {
  std::vector<BoundRow> rows(static_cast<std::size_t>(a.rows()));
  for (Eigen::Index i = 0; i < a.outerSize(); ++i) {
    int nnz = 0;
    BoundRow r;
    for (RowMajorSparse::InnerIterator it(a, i); it; ++it) {
      if (it.value() == 0.0) continue;
      ++nnz;
      r.col = it.col();
      r.coef = it.value();
    }
    r.simple = nnz == 1;
    rows[static_cast<std::size_t>(i)] = r;
  }
  return rows;
}

struct Residuals {
  double primal, dual, eps_primal, eps_dual;
};

// Certificate quantities for the original (unscaled) problem.
Residuals certify(const QPSpec& spec, const Eigen::VectorXd& w, const Eigen::VectorXd& y, double eps_abs,
                  double eps_rel) {
  const Eigen::VectorXd aw = spec.A * w;
  const Eigen::VectorXd sw = spec.S * w;
  const Eigen::VectorXd aty = spec.A.transpose() * y;
  Residuals r{};
  r.primal = inf_norm(project_box(aw, spec.l, spec.u) - aw);
  r.dual = inf_norm(sw + spec.v + aty);
  r.eps_primal = eps_abs + eps_rel * inf_norm(aw);
  r.eps_dual = eps_abs + eps_rel * std::max({inf_norm(sw), inf_norm(aty), inf_norm(spec.v)});
  return r;
}

// K = S + sigma I + A' diag(rho) A, assembled densely row by row of A.
Eigen::MatrixXd kkt_matrix(const Eigen::MatrixXd& s, double sigma, const RowMajorSparse& a, const Eigen::VectorXd& rho) {
  Eigen::MatrixXd k = s;
  k.diagonal().array() += sigma;
  std::vector<std::pair<Eigen::Index, double>> entries;
  for (Eigen::Index i = 0; i < a.outerSize(); ++i) {
    entries.clear();
    for (RowMajorSparse::InnerIterator it(a, i); it; ++it) entries.emplace_back(it.col(), it.value());
    const double r = rho(i);
    for (const auto& [cj, aj] : entries)
      for (const auto& [ck, ak] : entries) k(cj, ck) += r * aj * ak;
  }
  return k;
}

class Factorization {
 public:
  void compute(const Eigen::MatrixXd& k) {
    llt_.compute(k);
    use_ldlt_ = llt_.info() != Eigen::Success;
    if (use_ldlt_) {
      ldlt_.compute(k);
      if (ldlt_.info() != Eigen::Success) throw std::runtime_error("solve_qp: linear system factorization failed");
    }
  }
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
    if (use_ldlt_) return ldlt_.solve(b);
    return llt_.solve(b);
  }

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::LDLT<Eigen::MatrixXd> ldlt_;
  bool use_ldlt_ = false;
};

Eigen::VectorXd row_rho(const Eigen::VectorXd& l, const Eigen::VectorXd& u, double rho) {
  Eigen::VectorXd r(l.size());
  for (Eigen::Index i = 0; i < l.size(); ++i) {
    if (l(i) == -kInf && u(i) == kInf)
      r(i) = 1e-6;
    else if (is_equality(l(i), u(i)))
      r(i) = 1e3 * rho;
    else
      r(i) = rho;
  }
  return r;
}

// Adds mu a a' to S and -mu b a to v for every equality row a'w = b until S
// is positive definite. On the feasible set this shifts the objective by a
// constant, so minimisers and multipliers are unchanged.
void convexify(Eigen::MatrixXd& s, Eigen::VectorXd& v, const RowMajorSparse& a, const Eigen::VectorXd& l,
               const Eigen::VectorXd& u) {
  if (Eigen::LLT<Eigen::MatrixXd>(s).info() == Eigen::Success) return;
  const Eigen::Index n = s.rows();
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd eb = Eigen::VectorXd::Zero(n);
  double min_norm = kInf;
  std::vector<std::pair<Eigen::Index, double>> entries;
  for (Eigen::Index i = 0; i < a.outerSize(); ++i) {
    if (!is_equality(l(i), u(i))) continue;
    entries.clear();
    for (RowMajorSparse::InnerIterator it(a, i); it; ++it) entries.emplace_back(it.col(), it.value());
    double norm = 0.0;
    for (const auto& [cj, aj] : entries) {
      norm += aj * aj;
      eb(cj) += l(i) * aj;
      for (const auto& [ck, ak] : entries) e(cj, ck) += aj * ak;
    }
    if (norm > 0.0) min_norm = std::min(min_norm, norm);
  }
  if (min_norm == kInf) return;
  const double row_sum = s.cwiseAbs().rowwise().sum().maxCoeff();
  double mu = row_sum > 0.0 ? 4.0 * row_sum / min_norm : 1.0;
  for (int attempt = 0; attempt < 12; ++attempt, mu *= 4.0) {
    Eigen::MatrixXd t = s + mu * e;
    if (Eigen::LLT<Eigen::MatrixXd>(t).info() != Eigen::Success) continue;
    s = std::move(t);
    v -= mu * eb;
    return;
  }
}

struct PolishOutcome {
  bool ok = false;
  Eigen::VectorXd x;
  Eigen::VectorXd y;
};

// Active-set refinement started from the ADMM guess. Row state: -1 at lower
// bound, +1 at upper bound, 0 inactive. Equality rows stay at -1.
PolishOutcome polish(const Eigen::MatrixXd& s, const Eigen::VectorXd& v, const RowMajorSparse& a,
                     const Eigen::VectorXd& l, const Eigen::VectorXd& u, const Eigen::VectorXd& z,
                     const Eigen::VectorXd& y0, int max_rounds) {
  const Eigen::Index n = s.rows();
  const Eigen::Index nc = a.rows();
  const auto rows = classify_rows(a);
  std::vector<int> state(static_cast<std::size_t>(nc), 0);
  for (Eigen::Index i = 0; i < nc; ++i) {
    if (is_equality(l(i), u(i)))
      state[i] = -1;
    else if (z(i) - l(i) < -y0(i))
      state[i] = -1;
    else if (u(i) - z(i) < y0(i))
      state[i] = 1;
  }

  for (int round = 0; round < max_rounds; ++round) {
    // Fix variables pinned by active simple bounds.
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    std::vector<char> fixed(static_cast<std::size_t>(n), 0);
    std::vector<Eigen::Index> general;
    for (Eigen::Index i = 0; i < nc; ++i) {
      if (state[i] == 0) continue;
      const double bound = state[i] < 0 ? l(i) : u(i);
      if (rows[i].simple) {
        if (fixed[rows[i].col]) {
          state[i] = 0;  // duplicate bound on an already fixed variable
          continue;
        }
        fixed[rows[i].col] = 1;
        x(rows[i].col) = bound / rows[i].coef;
      } else {
        general.push_back(i);
      }
    }
    std::vector<Eigen::Index> free_vars, fixed_vars;
    for (Eigen::Index j = 0; j < n; ++j) (fixed[j] ? fixed_vars : free_vars).push_back(j);
    const auto nf = static_cast<Eigen::Index>(free_vars.size());
    const auto ng = static_cast<Eigen::Index>(general.size());

    Eigen::MatrixXd s_ff(nf, nf);
    Eigen::VectorXd rhs(nf);
    for (Eigen::Index p = 0; p < nf; ++p) {
      const auto jp = free_vars[p];
      double r = -v(jp);
      for (auto jx : fixed_vars) r -= s(jp, jx) * x(jx);
      rhs(p) = r;
      for (Eigen::Index q = 0; q < nf; ++q) s_ff(p, q) = s(jp, free_vars[q]);
    }
    std::vector<Eigen::Index> free_pos(static_cast<std::size_t>(n), -1);
    for (Eigen::Index p = 0; p < nf; ++p) free_pos[free_vars[p]] = p;
    Eigen::MatrixXd g_f = Eigen::MatrixXd::Zero(ng, nf);
    Eigen::VectorXd b_g(ng);
    for (Eigen::Index gi = 0; gi < ng; ++gi) {
      const auto i = general[gi];
      double b = state[i] < 0 ? l(i) : u(i);
      for (RowMajorSparse::InnerIterator it(a, i); it; ++it) {
        if (fixed[it.col()])
          b -= it.value() * x(it.col());
        else
          g_f(gi, free_pos[it.col()]) = it.value();
      }
      b_g(gi) = b;
    }

    Eigen::VectorXd x_f(nf), lambda(ng);
    Eigen::LLT<Eigen::MatrixXd> llt(s_ff);
    if (llt.info() == Eigen::Success) {
      const Eigen::VectorXd sinv_r = llt.solve(rhs);
      if (ng > 0) {
        const Eigen::MatrixXd sinv_gt = llt.solve(g_f.transpose());
        const Eigen::MatrixXd m = g_f * sinv_gt;
        lambda = m.fullPivLu().solve(g_f * sinv_r - b_g);
        x_f = sinv_r - sinv_gt * lambda;
      } else {
        x_f = sinv_r;
      }
    } else {
      Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nf + ng, nf + ng);
      kkt.topLeftCorner(nf, nf) = s_ff;
      kkt.topRightCorner(nf, ng) = g_f.transpose();
      kkt.bottomLeftCorner(ng, nf) = g_f;
      Eigen::VectorXd b(nf + ng);
      b << rhs, b_g;
      const Eigen::VectorXd sol = kkt.partialPivLu().solve(b);
      x_f = sol.head(nf);
      lambda = sol.tail(ng);
    }
    if (!x_f.allFinite() || !lambda.allFinite()) return {};
    for (Eigen::Index p = 0; p < nf; ++p) x(free_vars[p]) = x_f(p);

    // Multipliers: general rows from the reduced system, simple bounds from
    // stationarity of their variable.
    Eigen::VectorXd y = Eigen::VectorXd::Zero(nc);
    for (Eigen::Index gi = 0; gi < ng; ++gi) y(general[gi]) = lambda(gi);
    const Eigen::VectorXd grad = s * x + v + a.transpose() * y;
    for (Eigen::Index i = 0; i < nc; ++i)
      if (state[i] != 0 && rows[i].simple) y(i) = -grad(rows[i].col) / rows[i].coef;

    const Eigen::VectorXd ax = a * x;
    const double tol_d = 1e-10 * std::max(1.0, inf_norm(grad));
    bool changed = false;
    for (Eigen::Index i = 0; i < nc; ++i) {
      if (is_equality(l(i), u(i))) continue;
      const double tol_p = 1e-10 * std::max({1.0, std::abs(l(i)) < kInf ? std::abs(l(i)) : 0.0,
                                             std::abs(u(i)) < kInf ? std::abs(u(i)) : 0.0});
      if (state[i] == 0) {
        if (ax(i) < l(i) - tol_p) {
          state[i] = -1;
          changed = true;
        } else if (ax(i) > u(i) + tol_p) {
          state[i] = 1;
          changed = true;
        }
      } else if ((state[i] < 0 && y(i) > tol_d) || (state[i] > 0 && y(i) < -tol_d)) {
        state[i] = 0;
        changed = true;
      }
    }
    if (!changed) return {true, x, y};
  }
  return {};
}

}  // namespace

void QPSpec::validate() const {
  const auto m = S.rows();
  if (S.cols() != m || v.size() != m || A.cols() != m)
    throw std::invalid_argument("QPSpec: inconsistent variable dimensions");
  if (l.size() != A.rows() || u.size() != A.rows()) throw std::invalid_argument("QPSpec: inconsistent constraint dimensions");
  if (!S.allFinite() || !v.allFinite()) throw std::invalid_argument("QPSpec: non-finite objective entries");
  for (Eigen::Index k = 0; k < A.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it)
      if (!std::isfinite(it.value())) throw std::invalid_argument("QPSpec: non-finite constraint matrix entry");
  for (Eigen::Index i = 0; i < l.size(); ++i) {
    if (std::isnan(l(i)) || std::isnan(u(i)) || l(i) > u(i)) throw std::invalid_argument("QPSpec: invalid bounds");
  }
  const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
  if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) throw std::invalid_argument("QPSpec: S is not symmetric");
}

QPSpec assemble_qp(const GramBlock& g, double sigma) {
  return assemble_joint_qp({QPBlock{g, sigma}});
}

QPSpec assemble_joint_qp(const std::vector<QPBlock>& blocks) {
  if (blocks.empty()) throw std::invalid_argument("assemble_joint_qp: no blocks");
  Eigen::Index m = 0;
  for (const auto& b : blocks) {
    const auto np = b.gram.source_size();
    const auto nq = b.gram.target_size();
    if (np == 0 || nq == 0) throw std::invalid_argument("assemble_qp: empty source or target");
    if (b.gram.pq.rows() != np || b.gram.pq.cols() != nq || b.gram.pp.cols() != np || b.gram.qq.cols() != nq)
      throw std::invalid_argument("assemble_qp: inconsistent gram block shapes");
    if (!b.gram.pp.allFinite() || !b.gram.pq.allFinite()) throw std::invalid_argument("assemble_qp: non-finite gram entries");
    if (!(b.sigma >= 0.0)) throw std::invalid_argument("assemble_qp: sigma must be nonnegative");
    m += np;
  }
  const auto rows = m + static_cast<Eigen::Index>(blocks.size());

  QPSpec spec;
  spec.S = Eigen::MatrixXd::Zero(m, m);
  spec.v.resize(m);
  spec.l.resize(rows);
  spec.u.resize(rows);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(2 * m));

  Eigen::Index off = 0, row = 0;
  for (const auto& b : blocks) {
    const auto np = b.gram.source_size();
    const double fp = static_cast<double>(np);
    const double fq = static_cast<double>(b.gram.target_size());
    auto block = spec.S.block(off, off, np, np);
    block = (2.0 / (fp * fp)) * b.gram.pp;
    block.diagonal().array() += 2.0 * b.sigma * b.sigma;
    spec.v.segment(off, np) = -(2.0 / (fp * fq)) * b.gram.pq.rowwise().sum();
    for (Eigen::Index i = 0; i < np; ++i) {
      trips.emplace_back(row + i, off + i, 1.0);
      trips.emplace_back(row + np, off + i, 1.0);
      spec.l(row + i) = 0.0;
      spec.u(row + i) = kInf;
    }
    spec.l(row + np) = fp;
    spec.u(row + np) = fp;
    spec.block_sizes.push_back(np);
    off += np;
    row += np + 1;
  }
  spec.A.resize(rows, m);
  spec.A.setFromTriplets(trips.begin(), trips.end());
  return spec;
}

double qp_objective(const QPSpec& spec, const Eigen::VectorXd& w) { return 0.5 * w.dot(spec.S * w) + spec.v.dot(w); }

WeightVector solve_qp(const QPSpec& spec, const SolverSettings& settings) {
  spec.validate();
  const Eigen::Index n = spec.variables();
  const Eigen::Index nc = spec.constraints();
  const RowMajorSparse a = spec.A;

  // Cost scaling brings S to unit order; tolerances apply to the scaled problem.
  double col_norm = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) col_norm += spec.S.col(j).cwiseAbs().maxCoeff();
  col_norm /= static_cast<double>(std::max<Eigen::Index>(n, 1));
  double cost_scale = std::max(col_norm, inf_norm(spec.v));
  cost_scale = cost_scale > 0.0 ? std::clamp(1.0 / cost_scale, 1e-4, 1e4) : 1.0;
  Eigen::MatrixXd s = cost_scale * spec.S;
  Eigen::VectorXd v = cost_scale * spec.v;
  convexify(s, v, a, spec.l, spec.u);

  double rho = settings.rho;
  Eigen::VectorXd rho_vec = row_rho(spec.l, spec.u, rho);
  Factorization fact;
  fact.compute(kkt_matrix(s, settings.sigma, a, rho_vec));

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd z = project_box(Eigen::VectorXd::Zero(nc), spec.l, spec.u);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(nc);

  WeightVector out;
  auto& cert = out.certificate;
  bool admm_converged = false;
  int iter = 0;
  for (iter = 1; iter <= settings.max_iters; ++iter) {
    const Eigen::VectorXd rhs = settings.sigma * x - v + a.transpose() * (rho_vec.cwiseProduct(z) - y);
    const Eigen::VectorXd x_tilde = fact.solve(rhs);
    const Eigen::VectorXd z_tilde = a * x_tilde;
    x = settings.alpha * x_tilde + (1.0 - settings.alpha) * x;
    const Eigen::VectorXd z_relaxed = settings.alpha * z_tilde + (1.0 - settings.alpha) * z;
    const Eigen::VectorXd z_next = project_box(z_relaxed + y.cwiseQuotient(rho_vec), spec.l, spec.u);
    y += rho_vec.cwiseProduct(z_relaxed - z_next);
    z = z_next;

    const bool check = iter % settings.check_interval == 0 || iter % settings.adaptive_rho_interval == 0 ||
                       iter == settings.max_iters;
    if (!check) continue;
    const Eigen::VectorXd ax = a * x;
    const Eigen::VectorXd sx = s * x;
    const Eigen::VectorXd aty = a.transpose() * y;
    const double prim = inf_norm(ax - z);
    const double dual = inf_norm(sx + v + aty);
    const double prim_scale = std::max(inf_norm(ax), inf_norm(z));
    const double dual_scale = std::max({inf_norm(sx), inf_norm(aty), inf_norm(v)});
    if (prim <= settings.eps_abs + settings.eps_rel * prim_scale &&
        dual <= settings.eps_abs + settings.eps_rel * dual_scale) {
      admm_converged = true;
      break;
    }
    if (iter % settings.adaptive_rho_interval == 0) {
      const double num = prim / std::max(prim_scale, 1e-30);
      const double den = dual / std::max(dual_scale, 1e-30);
      double rho_new = rho * std::sqrt(num / std::max(den, 1e-30));
      rho_new = std::clamp(rho_new, 1e-6, 1e6);
      if (rho_new > 5.0 * rho || rho_new < 0.2 * rho) {
        rho = rho_new;
        rho_vec = row_rho(spec.l, spec.u, rho);
        fact.compute(kkt_matrix(s, settings.sigma, a, rho_vec));
        ++cert.refactorizations;
      }
    }
  }
  cert.iterations = std::min(iter, settings.max_iters);

  Eigen::VectorXd w = x;
  Eigen::VectorXd duals = y / cost_scale;
  if (admm_converged && settings.polish) {
    const auto p = polish(s, v, a, spec.l, spec.u, z, y, settings.max_polish_rounds);
    if (p.ok) {
      const Eigen::VectorXd py = p.y / cost_scale;
      const auto before = certify(spec, w, duals, settings.eps_abs, settings.eps_rel);
      const auto after = certify(spec, p.x, py, settings.eps_abs, settings.eps_rel);
      if (after.primal <= std::max(before.primal, after.eps_primal) && after.dual <= std::max(before.dual, after.eps_dual)) {
        w = p.x;
        duals = py;
        cert.polished = true;
      }
    }
  }
  const auto res = certify(spec, w, duals, settings.eps_abs, settings.eps_rel);
  cert.primal_residual = res.primal;
  cert.dual_residual = res.dual;
  cert.objective = qp_objective(spec, w);
  // The scaled ADMM test can pass while the unscaled certificate is looser
  // than eps only when cost_scale < 1; report the certificate honestly.
  cert.converged = admm_converged && res.primal <= res.eps_primal && res.dual <= res.eps_dual;
  out.w = std::move(w);
  out.duals = std::move(duals);
  return out;
}

Eigen::VectorXd clip_and_normalize(const Eigen::VectorXd& w, const std::vector<Eigen::Index>& block_sizes) {
  Eigen::VectorXd out = w.cwiseMax(0.0);
  Eigen::Index off = 0;
  for (auto size : block_sizes) {
    auto seg = out.segment(off, size);
    const double total = seg.sum();
    if (!(total > 0.0)) throw std::runtime_error("clip_and_normalize: block has no positive weight");
    seg *= static_cast<double>(size) / total;
    off += size;
  }
  if (off != w.size()) throw std::invalid_argument("clip_and_normalize: block sizes do not cover the weight vector");
  return out;
}

WeightVector kom_weights(const DesignTask& task, const Kernel& k, const Representation& phi, double sigma,
                         const SolverSettings& settings) {
  const auto spec = assemble_qp(gram(k, phi, task.source_x, task.target_x), sigma);
  auto sol = solve_qp(spec, settings);
  sol.w = clip_and_normalize(sol.w, spec.block_sizes);
  return sol;
}

void dump_qp(const QPSpec& spec, std::ostream& out) {
  const auto prec = out.precision(17);
  auto write_value = [&](double x) {
    if (x == kInf)
      out << "inf";
    else if (x == -kInf)
      out << "-inf";
    else
      out << x;
  };
  out << "S " << spec.S.rows() << ' ' << spec.S.cols() << '\n';
  for (Eigen::Index i = 0; i < spec.S.rows(); ++i) {
    for (Eigen::Index j = 0; j < spec.S.cols(); ++j) {
      if (j) out << ' ';
      write_value(spec.S(i, j));
    }
    out << '\n';
  }
  out << "v " << spec.v.size() << '\n';
  for (Eigen::Index i = 0; i < spec.v.size(); ++i) {
    if (i) out << ' ';
    write_value(spec.v(i));
  }
  out << '\n';
  const Eigen::MatrixXd a = spec.A;
  out << "A " << a.rows() << ' ' << a.cols() << '\n';
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (j) out << ' ';
      write_value(a(i, j));
    }
    out << '\n';
  }
  for (const auto& [name, vec] : {std::pair{"l", &spec.l}, std::pair{"u", &spec.u}}) {
    out << name << ' ' << vec->size() << '\n';
    for (Eigen::Index i = 0; i < vec->size(); ++i) {
      if (i) out << ' ';
      write_value((*vec)(i));
    }
    out << '\n';
  }
  out.precision(prec);
}

}  // namespace repw
