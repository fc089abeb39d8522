#include "repw/kernels.hpp"

#include <algorithm>
#include <vector>

namespace repw {

Representation identity_representation() {
  return [](const Eigen::MatrixXd& x) { return x; };
}

Representation coordinate_projection(std::vector<Eigen::Index> columns) {
  return [columns = std::move(columns)](const Eigen::MatrixXd& x) {
    Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t j = 0; j < columns.size(); ++j) {
      if (columns[j] < 0 || columns[j] >= x.cols()) throw std::out_of_range("coordinate_projection: column out of range");
      out.col(static_cast<Eigen::Index>(j)) = x.col(columns[j]);
    }
    return out;
  };
}

Representation constant_representation(Eigen::VectorXd value) {
  return [value = std::move(value)](const Eigen::MatrixXd& x) {
    return Eigen::MatrixXd(value.transpose().replicate(x.rows(), 1));
  };
}

std::string kernel_name(const Kernel& k) {
  switch (k.index()) {
    case 0: return "energy";
    case 1: return "linear";
    default: return "gaussian";
  }
}

Kernel kernel_from_name(const std::string& name, double bandwidth) {
  if (name == "energy") return EnergyKernel{};
  if (name == "linear") return LinearKernel{};
  if (name == "gaussian") return GaussianKernel{bandwidth};
  throw std::invalid_argument("unknown kernel '" + name + "'");
}

namespace {

// Pairwise distances are computed directly rather than through the
// ||a||^2 + ||b||^2 - 2ab expansion so identical rows give exactly zero.
template <typename F>
Eigen::MatrixXd pairwise(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, F&& f) {
  const Eigen::MatrixXd at = a.transpose();
  const Eigen::MatrixXd bt = b.transpose();
  Eigen::MatrixXd out(a.rows(), b.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i) out(i, j) = f((at.col(i) - bt.col(j)).squaredNorm());
  return out;
}

template <typename F>
Eigen::MatrixXd pairwise_sym(const Eigen::MatrixXd& a, F&& f) {
  const Eigen::MatrixXd at = a.transpose();
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i <= j; ++i) {
      const double v = f((at.col(i) - at.col(j)).squaredNorm());
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return out;
}

void check_bandwidth(const Kernel& k) {
  if (auto* g = std::get_if<GaussianKernel>(&k); g && !(g->bandwidth > 0.0))
    throw std::invalid_argument("gaussian kernel: bandwidth must be positive");
}

}  // namespace

Eigen::MatrixXd cross_gram(const Kernel& k, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("cross_gram: dimension mismatch");
  check_bandwidth(k);
  if (std::holds_alternative<LinearKernel>(k)) return a * b.transpose();
  if (std::holds_alternative<EnergyKernel>(k)) return pairwise(a, b, [](double d2) { return -std::sqrt(d2); });
  const double h = std::get<GaussianKernel>(k).bandwidth;
  const double c = 1.0 / (2.0 * h * h);
  return pairwise(a, b, [c](double d2) { return std::exp(-d2 * c); });
}

Eigen::MatrixXd self_gram(const Kernel& k, const Eigen::MatrixXd& a) {
  check_bandwidth(k);
  if (std::holds_alternative<LinearKernel>(k)) {
    Eigen::MatrixXd out = a * a.transpose();
    // GEMM does not guarantee bitwise symmetry.
    out = out.triangularView<Eigen::Upper>();
    out.triangularView<Eigen::StrictlyLower>() = out.transpose();
    return out;
  }
  if (std::holds_alternative<EnergyKernel>(k)) return pairwise_sym(a, [](double d2) { return -std::sqrt(d2); });
  const double h = std::get<GaussianKernel>(k).bandwidth;
  const double c = 1.0 / (2.0 * h * h);
  return pairwise_sym(a, [c](double d2) { return std::exp(-d2 * c); });
}

GramBlock gram(const Kernel& k, const Representation& phi, const Eigen::MatrixXd& source_x,
               const Eigen::MatrixXd& target_x) {
  const Eigen::MatrixXd ps = phi(source_x);
  const Eigen::MatrixXd pt = phi(target_x);
  if (ps.rows() != source_x.rows() || pt.rows() != target_x.rows())
    throw std::invalid_argument("gram: representation changed the number of rows");
  if (!ps.allFinite() || !pt.allFinite()) throw std::invalid_argument("gram: representation produced non-finite values");
  GramBlock g;
  g.pp = self_gram(k, ps);
  g.pq = cross_gram(k, ps, pt);
  g.qq = self_gram(k, pt);
  return g;
}

double median_heuristic_bandwidth(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, Eigen::Index max_points) {
  Eigen::MatrixXd pooled(a.rows() + b.rows(), a.cols());
  pooled << a, b;
  const Eigen::Index n = pooled.rows();
  const Eigen::Index stride = std::max<Eigen::Index>(1, (n + max_points - 1) / max_points);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < n; i += stride) keep.push_back(i);
  std::vector<double> d;
  d.reserve(keep.size() * (keep.size() - 1) / 2);
  for (std::size_t i = 0; i < keep.size(); ++i)
    for (std::size_t j = i + 1; j < keep.size(); ++j) d.push_back((pooled.row(keep[i]) - pooled.row(keep[j])).norm());
  if (d.empty()) return 1.0;
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  // All points coincide: any positive bandwidth gives the same kernel.
  return *mid > 0.0 ? *mid : 1.0;
}

}  // namespace repw
