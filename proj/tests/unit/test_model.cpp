#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "dpmreg/errors.hpp"
#include "dpmreg/model.hpp"
#include "dpmreg/simulate.hpp"

using namespace dpmreg;

namespace {

Dataset small_dataset(int n, int p, std::uint64_t seed) {
  RngStream rng(seed);
  Dataset d;
  d.X.resize(n, p);
  d.y.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int l = 0; l < p; ++l) d.X(i, l) = rng.standard_normal();
    d.y[i] = 1.0 + d.X(i, 0) + 0.1 * rng.standard_normal();
  }
  return d;
}

// Collects warnings for the lifetime of the guard.
struct WarningCapture {
  std::vector<std::string> messages;
  WarningHandler previous;
  WarningCapture() {
    previous = set_warning_handler([this](const std::string& m) { messages.push_back(m); });
  }
  ~WarningCapture() { set_warning_handler(previous); }
};

}  // namespace

TEST_CASE("baseline names round trip") {
  for (auto b : {Baseline::Horseshoe, Baseline::NormalGamma, Baseline::NormalFull, Baseline::HorseshoeLinear})
    CHECK(parse_baseline(to_string(b)) == b);
  CHECK_THROWS_AS(parse_baseline("lasso"), InvalidParameter);
}

TEST_CASE("dataset validation") {
  Dataset d = small_dataset(5, 2, 1);
  CHECK_NOTHROW(d.validate());
  d.y.resize(4);
  CHECK_THROWS_AS(d.validate(), DataError);
  d = small_dataset(5, 2, 1);
  d.X(2, 1) = std::nan("");
  CHECK_THROWS_AS(d.validate(), DataError);
}

TEST_CASE("hyperparameter validation") {
  Hyperparams h;
  CHECK_NOTHROW(h.validate());
  CHECK(h.wishart_df(3) == 4.0);
  h.alpha_scale = 0.0;
  CHECK_THROWS_AS(h.validate(), InvalidParameter);
}

TEST_CASE("partition canonicalization") {
  const std::vector<int> raw{7, 7, 3, 9, 3};
  const Partition p(raw);
  CHECK(p.labels() == std::vector<int>{0, 0, 1, 2, 1});
  CHECK(p.num_clusters() == 3);
  CHECK(p.cluster_sizes() == std::vector<int>{2, 2, 1});
  const std::vector<int> relabeled{1, 1, 0, 2, 0};
  CHECK(p == Partition(relabeled));
}

TEST_CASE("init_state invariants and determinism") {
  const Dataset d = small_dataset(10, 3, 2);
  Hyperparams h;
  RngStream r1(9), r2(9);
  const MixtureState s = init_state(d, h, r1);
  const MixtureState t = init_state(d, h, r2);
  CHECK(s.d == t.d);
  CHECK(s.sigma2 == t.sigma2);
  CHECK(s.alpha == t.alpha);
  CHECK(s.truncation() == s.occupied_extent());
  CHECK(s.sigma2 > 0.0);
  CHECK(s.alpha > 0.0);
  for (std::size_t j = 0; j < s.clusters.size(); ++j) {
    const auto& loc = std::get<HsLocals>(s.clusters[j].locals);
    CHECK((loc.gamma2.array() > 0.0).all());
    CHECK((loc.nu.array() > 0.0).all());
    CHECK(loc.zeta2 > 0.0);
    CHECK(loc.xi > 0.0);
    CHECK((s.clusters[j].tau.array() > 0.0).all());
    CHECK(s.clusters[j].beta == t.clusters[j].beta);
  }
  for (int label : s.d) {
    CHECK(label >= 0);
    CHECK(label < 10);
  }
}

TEST_CASE("init_state per baseline") {
  Hyperparams h;
  SUBCASE("normal-gamma with n < p + 1 uses the minimum-norm scale") {
    h.baseline = Baseline::NormalGamma;
    const Dataset d = small_dataset(5, 10, 3);
    RngStream rng(1);
    const MixtureState s = init_state(d, h, rng);
    CHECK(s.ng_V == doctest::Approx(compute_ng_V(d)));
    for (const auto& c : s.clusters) CHECK((std::get<NgLocals>(c.locals).psi.array() > 0.0).all());
  }
  SUBCASE("normal-full carries eta and Sigma^{-1}") {
    h.baseline = Baseline::NormalFull;
    const Dataset d = small_dataset(12, 3, 4);
    RngStream rng(1);
    const MixtureState s = init_state(d, h, rng);
    REQUIRE(s.normal.has_value());
    CHECK(s.normal->eta.size() == 4);
    CHECK(s.normal->precision.rows() == 4);
  }
  SUBCASE("linear benchmark starts with one cluster") {
    h.baseline = Baseline::HorseshoeLinear;
    const Dataset d = small_dataset(12, 3, 4);
    RngStream rng(1);
    const MixtureState s = init_state(d, h, rng);
    CHECK(s.truncation() == 1);
    CHECK(s.num_occupied() == 1);
  }
  SUBCASE("constant column warns") {
    Dataset d = small_dataset(12, 3, 4);
    d.X.col(1).setConstant(2.0);
    WarningCapture cap;
    RngStream rng(1);
    init_state(d, h, rng);
    CHECK(cap.messages.size() == 1);
  }
}

TEST_CASE("normal-gamma scale V") {
  SUBCASE("exact least squares") {
    Dataset d = small_dataset(60, 4, 5);
    d.y = d.X * Eigen::VectorXd::Ones(4);
    CHECK(compute_ng_V(d) == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("minimum norm against a pseudo-inverse") {
    const Dataset d = small_dataset(4, 10, 6);
    Eigen::MatrixXd design(4, 11);
    design.col(0).setOnes();
    design.rightCols(10) = d.X;
    const Eigen::VectorXd coef = design.completeOrthogonalDecomposition().pseudoInverse() * d.y;
    const double want = coef.tail(10).squaredNorm() / 4.0;
    CHECK(std::abs(compute_ng_V(d) - want) < 1e-8);
  }
  SUBCASE("all-zero response floors with a warning") {
    Dataset d = small_dataset(20, 2, 7);
    d.y.setZero();
    WarningCapture cap;
    CHECK(compute_ng_V(d) == 1e-12);
    CHECK(!cap.messages.empty());
  }
}

TEST_CASE("expected number of clusters under the prior") {
  CHECK(expected_clusters_prior(2.0, 2) == doctest::Approx(1.0 + 2.0 / 3.0));
  CHECK(expected_clusters_prior(5.0, 1) == 1.0);
  // The first term is always 1; the rest is bounded by the integral of
  // alpha / (alpha + t) over [0, n - 1].
  const double v = expected_clusters_prior(0.1, 372);
  CHECK(v > 1.0);
  CHECK(v < 1.0 + 0.1 * std::log((0.1 + 371.0) / 0.1));
  CHECK_THROWS_AS(expected_clusters_prior(0.0, 3), InvalidParameter);
}

TEST_CASE("prior draws for each baseline") {
  Hyperparams h;
  RngStream rng(8);
  const ClusterParams c = draw_cluster_from_prior(h, 3, 1.0, 0.0, nullptr, rng);
  CHECK(c.beta.size() == 3);
  CHECK(c.m.size() == 3);
  h.baseline = Baseline::NormalFull;
  CHECK_THROWS_AS(draw_cluster_from_prior(h, 3, 1.0, 0.0, nullptr, rng), InvalidParameter);
}
