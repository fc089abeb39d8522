#include "repw/kernels.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd normal_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> normal;
  MatrixXd x(r, c);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  return x;
}

VectorXd mean_one_weights(std::mt19937_64& rng, Eigen::Index n) {
  std::uniform_real_distribution<double> u(0.0, 2.0);
  VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) w(i) = u(rng);
  return w / w.mean();
}

const repw::Kernel kAll[] = {repw::EnergyKernel{}, repw::LinearKernel{}, repw::GaussianKernel{1.3}};

}  // namespace

TEST_CASE("kernel evaluations") {
  const VectorXd u = (VectorXd(2) << 1, 2).finished();
  const VectorXd v = (VectorXd(2) << 3, 4).finished();
  CHECK(repw::kernel_eval(repw::EnergyKernel{}, u, u) == 0.0);
  CHECK(repw::kernel_eval(repw::LinearKernel{}, u, v) == 11.0);
  CHECK(repw::kernel_eval(repw::EnergyKernel{}, VectorXd::Zero(2), v - VectorXd::Zero(2)) == doctest::Approx(-5.0));
  const double g = repw::kernel_eval(repw::GaussianKernel{2.0}, u, v);
  CHECK(g == doctest::Approx(std::exp(-8.0 / 8.0)));
  CHECK_THROWS_AS(repw::kernel_eval(repw::LinearKernel{}, u, VectorXd::Zero(3)), std::invalid_argument);
  CHECK_THROWS_AS(repw::kernel_eval(repw::GaussianKernel{0.0}, u, v), std::invalid_argument);
}

TEST_CASE("kernel names round trip") {
  for (const auto& k : kAll) CHECK(repw::kernel_name(repw::kernel_from_name(repw::kernel_name(k))) == repw::kernel_name(k));
  CHECK_THROWS_AS(repw::kernel_from_name("cosine"), std::invalid_argument);
}

TEST_CASE("gram of orthonormal rows under the linear kernel is the identity") {
  const MatrixXd e = MatrixXd::Identity(2, 2);
  const auto g = repw::gram(repw::LinearKernel{}, repw::identity_representation(), e, e);
  CHECK(g.pp == MatrixXd::Identity(2, 2));
}

TEST_CASE("constant representation gives all-zero energy blocks") {
  std::mt19937_64 rng(1);
  const auto g = repw::gram(repw::EnergyKernel{}, repw::constant_representation(VectorXd::Ones(3)),
                            normal_matrix(rng, 4, 2), normal_matrix(rng, 3, 2));
  CHECK(g.pp.cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.pq.cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.qq.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gram block shapes and symmetry") {
  std::mt19937_64 rng(2);
  for (const auto& k : kAll) {
    const auto g = repw::gram(k, repw::identity_representation(), normal_matrix(rng, 5, 3), normal_matrix(rng, 4, 3));
    CHECK(g.pq.rows() == 5);
    CHECK(g.pq.cols() == 4);
    CHECK((g.pp - g.pp.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((g.qq - g.qq.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("gram through phi equals gram of the images") {
  std::mt19937_64 rng(3);
  const MatrixXd s = normal_matrix(rng, 6, 4), t = normal_matrix(rng, 5, 4);
  const auto phi = repw::coordinate_projection({2, 0});
  for (const auto& k : kAll) {
    const auto a = repw::gram(k, phi, s, t);
    const auto b = repw::gram(k, repw::identity_representation(), phi(s), phi(t));
    CHECK(a.pp == b.pp);
    CHECK(a.pq == b.pq);
    CHECK(a.qq == b.qq);
  }
}

TEST_CASE("gram rejects non-finite images") {
  const repw::Representation bad = [](const MatrixXd& x) { return MatrixXd::Constant(x.rows(), 1, std::nan("")); };
  CHECK_THROWS_AS(repw::gram(repw::LinearKernel{}, bad, MatrixXd::Zero(2, 1), MatrixXd::Zero(2, 1)),
                  std::invalid_argument);
}

TEST_CASE("mmd of identical samples with uniform weights is zero") {
  std::mt19937_64 rng(4);
  const MatrixXd x = normal_matrix(rng, 7, 3);
  for (const auto& k : kAll) {
    const auto g = repw::gram(k, repw::identity_representation(), x, x);
    CHECK(std::abs(repw::mmd_squared(g, VectorXd::Ones(7))) <= 1e-12);
  }
}

TEST_CASE("linear mmd is the squared distance between weighted means") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    const MatrixXd s = normal_matrix(rng, 6, 3), t = normal_matrix(rng, 4, 3);
    const VectorXd w = mean_one_weights(rng, 6);
    const auto g = repw::gram(repw::LinearKernel{}, repw::identity_representation(), s, t);
    const VectorXd gap = (s.transpose() * w) / 6.0 - t.colwise().mean().transpose();
    CHECK(repw::mmd_squared(g, w) == doctest::Approx(gap.squaredNorm()).epsilon(1e-10));
  }
}

TEST_CASE("energy mmd of two single points") {
  MatrixXd s = MatrixXd::Zero(1, 2), t(1, 2);
  t << 3, 4;
  const auto g = repw::gram(repw::EnergyKernel{}, repw::identity_representation(), s, t);
  CHECK(repw::mmd_squared(g, VectorXd::Ones(1)) == doctest::Approx(10.0));
}

TEST_CASE("gaussian mmd is nonnegative") {
  std::mt19937_64 rng(6);
  for (int rep = 0; rep < 100; ++rep) {
    const MatrixXd s = normal_matrix(rng, 8, 2), t = normal_matrix(rng, 5, 2) * 0.5;
    const auto g = repw::gram(repw::GaussianKernel{0.7}, repw::identity_representation(), s, t);
    CHECK(repw::mmd_squared(g, mean_one_weights(rng, 8)) >= -1e-9);
  }
}

TEST_CASE("mmd is invariant to a joint permutation of source rows and weights") {
  std::mt19937_64 rng(7);
  const MatrixXd s = normal_matrix(rng, 9, 3), t = normal_matrix(rng, 6, 3);
  const VectorXd w = mean_one_weights(rng, 9);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(9);
  perm.setIdentity();
  std::shuffle(perm.indices().data(), perm.indices().data() + 9, rng);
  for (const auto& k : kAll) {
    const auto a = repw::gram(k, repw::identity_representation(), s, t);
    const auto b = repw::gram(k, repw::identity_representation(), perm * s, t);
    CHECK(repw::mmd_squared(a, w) == doctest::Approx(repw::mmd_squared(b, perm * w)).epsilon(1e-12));
  }
}

TEST_CASE("mmd rejects a weight vector of the wrong length") {
  const auto g = repw::gram(repw::LinearKernel{}, repw::identity_representation(), MatrixXd::Zero(3, 1),
                            MatrixXd::Zero(2, 1));
  CHECK_THROWS_AS(repw::mmd_squared(g, VectorXd::Ones(2)), std::invalid_argument);
}

TEST_CASE("median heuristic") {
  MatrixXd a(2, 1), b(1, 1);
  a << 0, 1;
  b << 3;
  // distances 1, 3, 2
  CHECK(repw::median_heuristic_bandwidth(a, b) == 2.0);
  CHECK(repw::median_heuristic_bandwidth(MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 2)) == 1.0);
}
