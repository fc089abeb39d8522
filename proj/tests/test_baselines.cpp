#include "repw/baselines.hpp"
#include "repw/oracle.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <random>

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

repw::DesignTask design(MatrixXd s, MatrixXd t) {
  repw::DesignTask task;
  task.label = "t";
  task.source_x = std::move(s);
  task.target_x = std::move(t);
  return task;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

TEST_CASE("logistic fit on a sign rule with a margin") {
  std::mt19937_64 rng(1);
  MatrixXd x = oracle::normal_matrix(rng, 200, 2);
  std::vector<int> y(200);
  for (Eigen::Index i = 0; i < 200; ++i) {
    x(i, 0) += x(i, 0) >= 0 ? 0.5 : -0.5;
    y[static_cast<std::size_t>(i)] = x(i, 0) > 0 ? 1 : 0;
  }
  const auto model = repw::fit_logistic(x, y, 1.0);
  CHECK(model.coefficients.allFinite());
  const VectorXd p = model.predict(x);
  int right = 0;
  for (Eigen::Index i = 0; i < 200; ++i) right += (p(i) > 0.5) == (y[static_cast<std::size_t>(i)] == 1);
  CHECK(right >= 180);
}

TEST_CASE("logistic with a constant covariate recovers the class-rate logit") {
  const MatrixXd x = MatrixXd::Ones(10, 1);
  const std::vector<int> y{1, 1, 1, 0, 0, 0, 0, 0, 0, 0};
  const auto model = repw::fit_logistic(x, y, 1e-4);
  // intercept and slope are only identified through their sum on a constant
  // column; the penalty pushes the slope to zero
  CHECK(std::abs(model.coefficients(1)) <= 1e-3);
  CHECK(std::abs(model.predict(x)(0) - 0.3) <= 1e-6);
  const auto pure = repw::fit_logistic(MatrixXd::Zero(10, 1), y, 1e-4);
  CHECK(std::abs(pure.coefficients(0) - std::log(0.3 / 0.7)) <= 1e-6);
  CHECK(std::abs(pure.coefficients(1)) <= 1e-12);
}

TEST_CASE("logistic on labels independent of x stays near one half") {
  std::mt19937_64 rng(2);
  const MatrixXd x = oracle::normal_matrix(rng, 400, 3);
  std::vector<int> y(400);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<int>(i % 2);
  const VectorXd p = repw::fit_logistic(x, y, 1.0).predict(x);
  CHECK((p.array() - 0.5).abs().maxCoeff() <= 0.1);
}

TEST_CASE("penalised logistic optimum does not depend on the start") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 10; ++rep) {
    const MatrixXd x = oracle::normal_matrix(rng, 80, 3);
    std::vector<int> y(80);
    std::bernoulli_distribution coin(0.4);
    for (auto& l : y) l = coin(rng) ? 1 : 0;
    const auto a = repw::fit_logistic(x, y, 0.1);
    const auto b = repw::fit_logistic(x, y, 0.1, VectorXd(oracle::normal_matrix(rng, 4, 1, 3.0).col(0)));
    CHECK((a.coefficients - b.coefficients).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("logistic gradient vanishes at the returned optimum") {
  std::mt19937_64 rng(4);
  const MatrixXd x = oracle::normal_matrix(rng, 60, 2);
  std::vector<int> y(60);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x(static_cast<Eigen::Index>(i), 1) + 0.7 * std::sin(3.0 * i) > 0;
  const double lambda = 0.05;
  const auto model = repw::fit_logistic(x, y, lambda);
  // independent gradient of mean NLL + lambda/2 ||slope||^2
  VectorXd g = VectorXd::Zero(3);
  for (Eigen::Index i = 0; i < 60; ++i) {
    const double r = sigmoid(model.coefficients(0) + x.row(i).dot(model.coefficients.tail(2))) - y[static_cast<std::size_t>(i)];
    g(0) += r / 60.0;
    g.tail(2) += r * x.row(i).transpose() / 60.0;
  }
  g.tail(2) += lambda * model.coefficients.tail(2);
  CHECK(g.norm() <= 1e-8);
}

TEST_CASE("unpenalised logistic on separable data reports separation") {
  MatrixXd x(4, 1);
  x << -2, -1, 1, 2;
  CHECK_THROWS_WITH_AS(repw::fit_logistic(x, {0, 0, 1, 1}, 0.0), doctest::Contains("lambda > 0"), std::runtime_error);
  CHECK_THROWS_AS(repw::fit_logistic(x, {1, 1, 1, 1}, 1.0), std::invalid_argument);
}

TEST_CASE("ipw examples") {
  const VectorXd p = (VectorXd(2) << 0.25, 0.5).finished();
  const auto w = repw::ipw_weights(repw::IpwKind::ate, p);
  CHECK(w.w(0) == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
  CHECK(w.w(1) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(repw::ipw_weights(repw::IpwKind::att, VectorXd::Constant(5, 0.3)).w == VectorXd::Ones(5));
  CHECK(repw::ipw_weights(repw::IpwKind::transport, VectorXd::Constant(3, 0.8)).w == VectorXd::Ones(3));
  const auto clipped = repw::ipw_weights(repw::IpwKind::ate, (VectorXd(2) << 0.0, 1.0).finished());
  CHECK(clipped.w.allFinite());
  CHECK(clipped.w.mean() == doctest::Approx(1.0));
}

TEST_CASE("ipw weights are nonnegative with mean one") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto kind : {repw::IpwKind::att, repw::IpwKind::ate, repw::IpwKind::transport}) {
    VectorXd p(30);
    for (auto& v : p) v = u(rng);
    const VectorXd w = repw::ipw_weights(kind, p).w;
    CHECK(w.minCoeff() >= 0.0);
    CHECK(std::abs(w.mean() - 1.0) <= 1e-14);
  }
}

TEST_CASE("ipw with the true selection probability recovers the density ratio") {
  // p = (1/4, 1/2, 1/4) realised exactly by four source rows; equal sample
  // shares make P(S = 1 | x) = p / (p + q)
  const VectorXd p = (VectorXd(3) << 0.25, 0.5, 0.25).finished();
  const VectorXd q = (VectorXd(3) << 0.1, 0.3, 0.6).finished();
  const std::vector<int> rows{0, 1, 1, 2};
  VectorXd e(4), truth(4);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int k = rows[i];
    e(static_cast<Eigen::Index>(i)) = p(k) / (p(k) + q(k));
    truth(static_cast<Eigen::Index>(i)) = q(k) / p(k);
  }
  const VectorXd w = repw::ipw_weights(repw::IpwKind::transport, e).w;
  CHECK((w - truth).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("entropy balancing examples") {
  MatrixXd s(2, 1), t(4, 1);
  s << 0, 1;
  t << 0, 1, 1, 1;
  const auto w = repw::entropy_balance(design(s, t));
  CHECK(std::abs(w.w(0) - 0.5) <= 1e-8);
  CHECK(std::abs(w.w(1) - 1.5) <= 1e-8);

  std::mt19937_64 rng(6);
  MatrixXd x = oracle::normal_matrix(rng, 20, 2);
  x.rowwise() -= x.colwise().mean();
  MatrixXd centred = oracle::normal_matrix(rng, 15, 2);
  centred.rowwise() -= centred.colwise().mean();
  CHECK((repw::entropy_balance(design(x, centred)).w.array() - 1.0).abs().maxCoeff() <= 1e-8);

  MatrixXd far(1, 1);
  far << 1.5;
  CHECK_THROWS_WITH_AS(repw::entropy_balance(design(s, far)), doctest::Contains("outside source hull"),
                       std::runtime_error);
}

TEST_CASE("entropy balancing matches target moments with positive weights") {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const MatrixXd s = oracle::normal_matrix(rng, 100, 3);
    MatrixXd t = oracle::normal_matrix(rng, 50, 3);
    t.array() += 0.3;
    const VectorXd w = repw::entropy_balance(design(s, t)).w;
    CHECK(w.minCoeff() > 0.0);
    const VectorXd gap = (s.transpose() * w) / 100.0 - t.colwise().mean().transpose();
    CHECK(gap.cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("pca loadings are orthonormal") {
  std::mt19937_64 rng(8);
  const MatrixXd x = oracle::normal_matrix(rng, 50, 5) * oracle::normal_matrix(rng, 5, 5);
  const auto model = repw::fit_pca(x, 3);
  CHECK((model.loadings.transpose() * model.loadings - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-10);
  for (Eigen::Index j = 0; j < 3; ++j) {
    Eigen::Index at;
    model.loadings.col(j).cwiseAbs().maxCoeff(&at);
    CHECK(model.loadings(at, j) > 0.0);
  }
}

TEST_CASE("pca of rank one data keeps the full variance") {
  std::mt19937_64 rng(9);
  const VectorXd t = oracle::normal_matrix(rng, 30, 1).col(0);
  MatrixXd x(30, 2);
  x.col(0) = 2.0 * t.array() + 1.0;
  x.col(1) = -t.array() + 4.0;
  const MatrixXd scores = repw::pca_representation(x, 1)(x);
  const MatrixXd c = x.rowwise() - x.colwise().mean();
  const double total = c.squaredNorm() / 29.0;
  const double first = scores.col(0).squaredNorm() / 29.0;
  CHECK(std::abs(first - total) <= 1e-10);
  CHECK_THROWS_AS(repw::fit_pca(x, 2), std::invalid_argument);
}

TEST_CASE("full rank pca scores keep the covariance spectrum") {
  std::mt19937_64 rng(10);
  const MatrixXd x = oracle::normal_matrix(rng, 200, 4);
  const MatrixXd scores = repw::pca_representation(x, 4)(x);
  const MatrixXd c = x.rowwise() - x.colwise().mean();
  Eigen::SelfAdjointEigenSolver<MatrixXd> a(c.transpose() * c / 199.0), b(scores.transpose() * scores / 199.0);
  CHECK((a.eigenvalues() - b.eigenvalues()).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("pca scores are translation invariant") {
  std::mt19937_64 rng(11);
  const MatrixXd x = oracle::normal_matrix(rng, 40, 3);
  const Eigen::RowVectorXd shift = (Eigen::RowVectorXd(3) << 5, -2, 0.5).finished();
  const MatrixXd moved = x.rowwise() + shift;
  CHECK((repw::pca_representation(x, 2)(x) - repw::pca_representation(moved, 2)(moved)).cwiseAbs().maxCoeff() <=
        1e-10);
}

TEST_CASE("propensity vector rows are probability vectors") {
  std::mt19937_64 rng(12);
  const MatrixXd x = oracle::normal_matrix(rng, 100, 2);
  std::vector<int> two(100), three(100);
  for (std::size_t i = 0; i < 100; ++i) {
    two[i] = x(static_cast<Eigen::Index>(i), 0) + 0.3 * std::cos(7.0 * i) > 0;
    three[i] = static_cast<int>(i % 3);
  }
  for (const auto& labels : {two, three}) {
    const MatrixXd z = repw::ps_vector_representation(repw::fit_propensity(x, labels))(x);
    CHECK(z.cols() == static_cast<Eigen::Index>(labels == two ? 2 : 3));
    CHECK((z.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("a constant covariate gives a constant propensity vector") {
  const MatrixXd x = MatrixXd::Constant(8, 1, 2.0);
  const MatrixXd z = repw::ps_vector_representation(repw::fit_propensity(x, {0, 1, 1, 0, 1, 0, 0, 0}))(x);
  CHECK((z.rowwise() - z.row(0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("the true propensity vector is a balancing score") {
  // log(p/q) is linear in x on the support x = 0, 1, 2
  repw::DiscreteDGP dgp;
  dgp.support = (MatrixXd(3, 1) << 0, 1, 2).finished();
  dgp.p = (VectorXd(3) << 0.5, 0.3, 0.2).finished();
  dgp.q = (VectorXd(3) << 0.5, 0.6, 0.8).finished() / 1.9;
  dgp.m = (VectorXd(3) << 1, -1, 3).finished();
  repw::LogisticModel truth;
  truth.coefficients = (VectorXd(2) << std::log(1.9), -std::log(2.0)).finished();
  const VectorXd implied = truth.predict(dgp.support);
  for (Eigen::Index k = 0; k < 3; ++k) CHECK(std::abs(implied(k) - dgp.p(k) / (dgp.p(k) + dgp.q(k))) <= 1e-14);
  repw::PropensityModel model;
  model.classes = {0, 1};
  model.models = {truth};
  const auto phi = repw::ps_vector_representation(model);
  CHECK(std::abs(repw::bse(dgp, phi)) <= 1e-10);
}

TEST_CASE("uniform weights") {
  std::mt19937_64 rng(13);
  const auto task = design(oracle::normal_matrix(rng, 7, 2), oracle::normal_matrix(rng, 3, 2));
  const auto w = repw::uniform_weights(task);
  CHECK(w.w == VectorXd::Ones(7));
  CHECK(w.w.mean() == 1.0);
  CHECK(repw::clip_and_normalize(w.w, {7}) == w.w);
}
