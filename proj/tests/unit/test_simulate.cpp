#include <cmath>
#include <vector>

#include "doctest.h"
#include "dpmreg/errors.hpp"
#include "dpmreg/postprocess.hpp"
#include "dpmreg/simulate.hpp"

using namespace dpmreg;

TEST_CASE("benchmark component recipe") {
  const auto c4 = paper_components(50, 4);
  REQUIRE(c4.size() == 4);
  CHECK(c4[3].mu == 4.0);
  CHECK((c4[3].beta.head(2).array() == 3.0).all());
  CHECK((c4[3].beta.tail(48).array() == 0.0).all());
  CHECK((c4[3].m.array() == 8.0).all());
  CHECK(c4[0].mu == 10.0);
  CHECK((c4[0].beta.head(5).array() == 3.0).all());
  CHECK(c4[0].beta[5] == 0.0);

  const auto c10 = paper_components(20, 10);
  CHECK(c10[6].mu == -4.0);
  CHECK((c10[6].beta.head(2).array() == -3.0).all());
  CHECK(c10[6].beta[2] == 0.0);
  CHECK((c10[9].beta.head(5).array() == -3.0).all());

  CHECK_THROWS_AS(paper_components(3, 4), InvalidParameter);
  CHECK_THROWS_AS(paper_components(10, 11), InvalidParameter);
}

TEST_CASE("benchmark datasets") {
  const TrainTest tt = generate_paper_train_test(200, 50, 4, 7);
  CHECK(tt.train.data.n() == 200);
  CHECK(tt.test.data.n() == 100);
  CHECK(tt.train.data.column_names.front() == "x1");
  CHECK(tt.train.data.column_names.back() == "x50");
  const Eigen::MatrixXd B = tt.train.truth.true_betas();
  for (int i = 0; i < 200; ++i) CHECK(B.row(i) == tt.train.truth.components[tt.train.truth.labels[i]].beta.transpose());
  const auto nz = tt.train.truth.true_nonzero();
  CHECK(nz.count() == (B.array() != 0.0).count());

  const TrainTest again = generate_paper_train_test(200, 50, 4, 7);
  CHECK(again.train.data.X == tt.train.data.X);
  CHECK(again.test.data.y == tt.test.data.y);
  const TrainTest other = generate_paper_train_test(200, 50, 4, 8);
  CHECK(other.train.data.y != tt.train.data.y);
}

TEST_CASE("generic mixtures") {
  SUBCASE("constant model variance") {
    ComponentSpec c{2.0, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2)};
    const SimulatedData s = generate_generic_mixture({c}, 20000, 0.01, 3);
    const double mean = s.data.y.mean();
    const double var = (s.data.y.array() - mean).square().sum() / (20000 - 1);
    CHECK(var == doctest::Approx(0.01).epsilon(0.05));
  }
  SUBCASE("separated components are recoverable") {
    ComponentSpec a{0.0, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, -10.0), Eigen::VectorXd::Ones(1)};
    ComponentSpec b{0.0, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 10.0), Eigen::VectorXd::Ones(1)};
    const SimulatedData s = generate_generic_mixture({a, b}, 500, 1.0, 4);
    // Nearest-centre assignment.
    std::vector<int> guess(500);
    for (int i = 0; i < 500; ++i) guess[i] = s.data.X(i, 0) > 0.0 ? 1 : 0;
    CHECK(adjusted_rand_index(Partition(guess), Partition(s.truth.labels)) > 0.99);
  }
  CHECK_THROWS(generate_generic_mixture({}, 10, 1.0, 1));
}
