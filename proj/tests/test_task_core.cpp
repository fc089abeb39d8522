#include "repw/dataset.hpp"
#include "repw/task.hpp"

#include <doctest.h>

#include <algorithm>
#include <functional>
#include <random>
#include <set>
#include <sstream>

using Eigen::MatrixXd;
using Eigen::VectorXd;
using repw::Dataset;

namespace {

Dataset random_dataset(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d, int arms) {
  std::normal_distribution<double> normal;
  MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  std::vector<int> a(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) a[static_cast<std::size_t>(i)] = static_cast<int>(i % arms);
  std::shuffle(a.begin(), a.end(), rng);
  VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = normal(rng);
  return repw::make_dataset(x, a, y);
}

std::string expect_error(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("att task partitions rows into controls and treated") {
  MatrixXd x(3, 1);
  x << 10, 20, 30;
  const auto ds = repw::make_dataset(x, std::vector<int>{0, 0, 1}, VectorXd((VectorXd(3) << 1, 2, 9).finished()));
  const auto fam = repw::build_att_task(ds);
  REQUIRE(fam.size() == 1);
  const auto& t = fam.tasks[0];
  CHECK(t.design.source_rows == std::vector<Eigen::Index>{0, 1});
  CHECK(t.design.target_rows == std::vector<Eigen::Index>{2});
  CHECK((*t.source_pseudo_y)(0) == 1.0);
  CHECK((*t.source_pseudo_y)(1) == 2.0);
  CHECK(t.design.target_x(0, 0) == 30.0);
  CHECK(fam.probs(0) == 1.0);
}

TEST_CASE("att task with no controls names the empty arm") {
  const auto ds = repw::make_dataset(MatrixXd::Zero(3, 1), std::vector<int>{1, 1, 1});
  CHECK(expect_error([&] { repw::build_att_task(ds); }).find("control arm empty") != std::string::npos);
}

TEST_CASE("att task sizes follow the treated count") {
  std::mt19937_64 rng(5);
  MatrixXd x = MatrixXd::Random(100, 3);
  std::vector<int> a(100, 0);
  for (int i = 0; i < 40; ++i) a[static_cast<std::size_t>(i)] = 1;
  std::shuffle(a.begin(), a.end(), rng);
  const auto fam = repw::build_att_task(repw::make_dataset(x, a));
  CHECK(fam.tasks[0].design.source_size() == 60);
  CHECK(fam.tasks[0].design.target_size() == 40);
  CHECK_FALSE(fam.tasks[0].source_pseudo_y.has_value());
}

TEST_CASE("ate tasks have one task per arm over the whole sample") {
  MatrixXd x = MatrixXd::Random(10, 2);
  const auto ds = repw::make_dataset(x, std::vector<int>{0, 1, 0, 0, 1, 0, 1, 0, 1, 0});
  const auto fam = repw::build_ate_tasks(ds);
  REQUIRE(fam.size() == 2);
  CHECK(fam.tasks[0].design.source_size() == 6);
  CHECK(fam.tasks[1].design.source_size() == 4);
  CHECK(fam.tasks[0].design.target_size() == 10);
  CHECK(fam.tasks[1].design.target_size() == 10);
  CHECK(fam.tasks[0].design.label == "arm=0");
  CHECK(*fam.tasks[1].design.arm == 1);
}

TEST_CASE("three arms get uniform task probabilities by default") {
  std::mt19937_64 rng(1);
  const auto fam = repw::build_ate_tasks(random_dataset(rng, 30, 2, 3));
  REQUIRE(fam.size() == 3);
  for (int k = 0; k < 3; ++k) CHECK(fam.probs(k) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("frequency arm weighting uses arm shares") {
  const auto ds = repw::make_dataset(MatrixXd::Random(10, 2), std::vector<int>{0, 1, 0, 0, 1, 0, 1, 0, 1, 0});
  const auto fam = repw::build_ate_tasks(ds, repw::ArmWeighting::frequency);
  CHECK(fam.probs(0) == doctest::Approx(0.6));
  CHECK(fam.probs(1) == doctest::Approx(0.4));
}

TEST_CASE("ate target covariates are identical across tasks") {
  std::mt19937_64 rng(2);
  const auto fam = repw::build_ate_tasks(random_dataset(rng, 50, 3, 2));
  CHECK(fam.tasks[0].design.target_x == fam.tasks[1].design.target_x);
}

TEST_CASE("a declared arm with no rows is an error naming the arm") {
  auto ds = repw::make_dataset(MatrixXd::Random(4, 1), std::vector<int>{0, 1, 0, 1});
  ds.treatment_alphabet = {0, 1, 2};
  CHECK(expect_error([&] { repw::build_ate_tasks(ds); }).find("arm 2 empty") != std::string::npos);
}

TEST_CASE("arm source rows partition the sample exactly once") {
  std::mt19937_64 rng(3);
  for (int arms : {2, 3, 4}) {
    const auto ds = random_dataset(rng, 37, 2, arms);
    const auto fam = repw::build_ate_tasks(ds);
    std::multiset<Eigen::Index> seen;
    for (const auto& t : fam.tasks) seen.insert(t.design.source_rows.begin(), t.design.source_rows.end());
    CHECK(seen.size() == 37);
    for (Eigen::Index i = 0; i < 37; ++i) CHECK(seen.count(i) == 1);
  }
  const auto ds = random_dataset(rng, 21, 2, 2);
  const auto att = repw::build_att_task(ds);
  std::set<Eigen::Index> rows(att.tasks[0].design.source_rows.begin(), att.tasks[0].design.source_rows.end());
  rows.insert(att.tasks[0].design.target_rows.begin(), att.tasks[0].design.target_rows.end());
  CHECK(rows.size() == 21);
}

TEST_CASE("transport pseudo-outcome") {
  CHECK(repw::transport_pseudo_outcome(1, 2.0, 0.5) == 4.0);
  CHECK(repw::transport_pseudo_outcome(0, 2.0, 0.5) == -4.0);
  CHECK(repw::transport_pseudo_outcome(1, 1.0, 0.25) == 4.0);
}

TEST_CASE("transport task mean pseudo-outcome is the difference in means") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  const Eigen::Index n = 57;
  std::vector<int> a(static_cast<std::size_t>(n));
  VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a[static_cast<std::size_t>(i)] = i % 3 == 0 ? 1 : 0;
    y(i) = normal(rng) + a[static_cast<std::size_t>(i)];
  }
  const auto rct = repw::make_dataset(MatrixXd::Random(n, 2), a, y);
  const auto obs = repw::make_dataset(MatrixXd::Random(20, 2));
  const auto fam = repw::build_transport_task(rct, obs);
  double s1 = 0, s0 = 0;
  int n1 = 0, n0 = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (a[static_cast<std::size_t>(i)]) {
      s1 += y(i);
      ++n1;
    } else {
      s0 += y(i);
      ++n0;
    }
  }
  CHECK(fam.tasks[0].source_pseudo_y->mean() == doctest::Approx(s1 / n1 - s0 / n0).epsilon(1e-12));
  CHECK(fam.tasks[0].design.target_size() == 20);
}

TEST_CASE("transport task rejects degenerate assignment and dimension mismatch") {
  const auto rct = repw::make_dataset(MatrixXd::Random(4, 2), std::vector<int>{1, 1, 1, 1}, VectorXd::Ones(4));
  CHECK(expect_error([&] { repw::build_transport_task(rct, repw::make_dataset(MatrixXd::Random(3, 2))); })
            .find("degenerate RCT assignment") != std::string::npos);
  const auto ok = repw::make_dataset(MatrixXd::Random(4, 2), std::vector<int>{1, 0, 1, 0}, VectorXd::Ones(4));
  CHECK(expect_error([&] { repw::build_transport_task(ok, repw::make_dataset(MatrixXd::Random(3, 3))); })
            .find("dimension mismatch") != std::string::npos);
}

TEST_CASE("builders are deterministic") {
  std::mt19937_64 r1(9), r2(9);
  const auto a = repw::build_ate_tasks(random_dataset(r1, 40, 3, 2));
  const auto b = repw::build_ate_tasks(random_dataset(r2, 40, 3, 2));
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a.tasks[k].design.source_x == b.tasks[k].design.source_x);
    CHECK(*a.tasks[k].source_pseudo_y == *b.tasks[k].source_pseudo_y);
    CHECK(a.tasks[k].design.source_rows == b.tasks[k].design.source_rows);
  }
}

TEST_CASE("design view carries no outcomes") {
  std::mt19937_64 rng(6);
  const auto fam = repw::build_ate_tasks(random_dataset(rng, 20, 2, 2));
  const repw::DesignFamily design = fam.design();
  REQUIRE(design.size() == 2);
  CHECK(design.tasks[0].source_x == fam.tasks[0].design.source_x);
  CHECK(design.probs == fam.probs);
}

TEST_CASE("task family validation") {
  std::mt19937_64 rng(7);
  auto fam = repw::build_ate_tasks(random_dataset(rng, 20, 2, 2));
  fam.probs(0) = 0.7;
  CHECK_THROWS_AS(fam.validate(), std::invalid_argument);
  fam.probs << 0.5, 0.5;
  fam.tasks[0].source_pseudo_y = VectorXd::Zero(1);
  CHECK_THROWS_AS(fam.validate(), std::invalid_argument);
}

TEST_CASE("standardize uses source statistics for both samples") {
  MatrixXd s(3, 2), t(2, 2);
  s << 1, 5, 2, 5, 3, 5;
  t << 4, 6, 2, 5;
  repw::TaskFamily fam;
  repw::WeightingTask task;
  task.design.label = "att";
  task.design.source_x = s;
  task.design.target_x = t;
  fam.tasks.push_back(task);
  fam.probs = VectorXd::Ones(1);
  const auto z = repw::standardize(fam);
  CHECK(z.tasks[0].design.source_x(0, 0) == doctest::Approx(-1.0));
  CHECK(z.tasks[0].design.target_x(0, 0) == doctest::Approx(2.0));
  // constant column is only centred
  CHECK(z.tasks[0].design.source_x(1, 1) == 0.0);
  CHECK(z.tasks[0].design.target_x(0, 1) == 1.0);
}

TEST_CASE("dataset invariants") {
  CHECK_THROWS_AS(repw::make_dataset(MatrixXd::Constant(2, 1, std::nan(""))), std::invalid_argument);
  CHECK_THROWS_AS(repw::make_dataset(MatrixXd::Zero(2, 1), std::vector<int>{0}), std::invalid_argument);
  CHECK_THROWS_AS(repw::make_dataset(MatrixXd::Zero(2, 1), std::nullopt, VectorXd::Zero(3)), std::invalid_argument);
  const auto ds = repw::make_dataset(MatrixXd::Zero(3, 1), std::vector<int>{2, 0, 2});
  CHECK(ds.treatment_alphabet == std::vector<int>{0, 2});
}

TEST_CASE("split by indicator") {
  MatrixXd x(4, 1);
  x << 1, 2, 3, 4;
  const auto ds = repw::make_dataset(x, std::nullopt, std::nullopt, std::vector<int>{1, 0, 1, 0});
  const auto [rct, obs] = repw::split_by_indicator(ds);
  CHECK(rct.rows() == 2);
  CHECK(rct.covariates(1, 0) == 3.0);
  CHECK(obs.covariates(0, 0) == 2.0);
}

TEST_CASE("csv loads a small file") {
  std::istringstream in("x0,x1,a,y\n1,2,0,0.5\n3,4,1,1.5\n5,6,0,2.5\n");
  repw::CsvSchema schema;
  schema.covariates = {"x0", "x1"};
  schema.treatment = "a";
  schema.outcome = "y";
  const auto ds = repw::parse_dataset_csv(in, schema);
  CHECK(ds.rows() == 3);
  CHECK(ds.dim() == 2);
  CHECK(ds.covariates(2, 1) == 6.0);
  CHECK((*ds.outcome)(1) == 1.5);
  CHECK((*ds.treatment)[1] == 1);
}

TEST_CASE("csv reports the location of a bad cell") {
  std::istringstream in("x0,x1\n1,2\nNaN,4\n");
  repw::CsvSchema schema;
  schema.covariates = {"x0", "x1"};
  try {
    repw::parse_dataset_csv(in, schema);
    FAIL("expected a csv error");
  } catch (const repw::CsvError& e) {
    CHECK(e.row() == 2);
    CHECK(e.column() == "x0");
  }
}

TEST_CASE("csv errors for missing columns and ragged rows") {
  repw::CsvSchema schema;
  schema.covariates = {"x0", "z"};
  std::istringstream missing("x0,x1\n1,2\n");
  CHECK_THROWS_AS(repw::parse_dataset_csv(missing, schema), repw::CsvError);
  schema.covariates = {"x0"};
  std::istringstream ragged("x0,x1\n1,2\n3\n");
  try {
    repw::parse_dataset_csv(ragged, schema);
    FAIL("expected a csv error");
  } catch (const repw::CsvError& e) {
    CHECK(e.row() == 2);
  }
}

TEST_CASE("csv collects a three-label treatment alphabet") {
  std::istringstream in("x,a\n0,0\n1,2\n2,1\n3,2\n");
  repw::CsvSchema schema;
  schema.covariates = {"x"};
  schema.treatment = "a";
  const auto ds = repw::parse_dataset_csv(in, schema);
  CHECK(ds.treatment_alphabet.size() == 3);
}
