#include <algorithm>
#include <cmath>
#include <vector>

#include "checks.hpp"
#include "doctest.h"
#include "dpmreg/distributions.hpp"
#include "dpmreg/errors.hpp"
#include "dpmreg/postprocess.hpp"
#include "dpmreg/predict.hpp"
#include "dpmreg/sampler.hpp"
#include "dpmreg/simulate.hpp"

using namespace dpmreg;

namespace {

ClusterMembers members_of(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  ClusterMembers m;
  m.X = X;
  m.y = y;
  m.design.resize(X.rows(), X.cols() + 1);
  m.design.col(0).setOnes();
  m.design.rightCols(X.cols()) = X;
  return m;
}

Eigen::MatrixXd wavy(int rows, int cols, double shift) {
  Eigen::MatrixXd X(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int l = 0; l < cols; ++l) X(i, l) = std::sin(0.9 * i + 1.9 * l + shift);
  return X;
}

Eigen::VectorXd ols(const ClusterMembers& m) {
  return (m.design.transpose() * m.design).ldlt().solve(m.design.transpose() * m.y);
}

bool same_draws(const PosteriorDraws& a, const PosteriorDraws& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t s = 0; s < a.size(); ++s) {
    const auto &x = a.draws[s], &y = b.draws[s];
    if (x.labels != y.labels || x.sigma2 != y.sigma2 || x.alpha != y.alpha) return false;
    for (std::size_t j = 0; j < x.clusters.size(); ++j)
      if (x.clusters[j].mu != y.clusters[j].mu || x.clusters[j].beta != y.clusters[j].beta) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("every conditional matches its oracle (reduced draws)") {
  for (const auto& r : checks::conditional_checks(20000, 202)) {
    INFO(r.name << " KS " << r.value);
    CHECK(r.pass);
  }
}

TEST_CASE("stick weights and slices") {
  MixtureState s;
  s.d.assign(30, 0);
  s.alpha = 0.01;
  RngStream rng(1);
  double v1 = 0.0;
  int max_n = 0;
  for (int k = 0; k < 200; ++k) {
    update_weights_and_slices(s, rng, 1000);
    v1 += s.v[0];
    max_n = std::max(max_n, static_cast<int>(s.w.size()));
  }
  CHECK(v1 / 200 > 0.95);
  CHECK(max_n <= 3);

  SUBCASE("coverage invariant and determinism") {
    MixtureState a;
    a.d = {0, 1, 1, 3, 2, 0, 5};
    a.alpha = 2.0;
    MixtureState b = a;
    RngStream r1(5), r2(5);
    update_weights_and_slices(a, r1, 1000);
    update_weights_and_slices(b, r2, 1000);
    CHECK(a.w == b.w);
    CHECK(a.u == b.u);
    double total = 0.0;
    for (double w : a.w) total += w;
    CHECK(1.0 - total == doctest::Approx(a.remaining_mass).epsilon(1e-9));
    CHECK(a.remaining_mass < a.u.minCoeff());
    for (std::size_t i = 0; i < a.d.size(); ++i) CHECK(a.w[a.d[i]] > a.u[i]);
  }
  SUBCASE("cap") {
    MixtureState a;
    a.d = {0, 1, 2, 3, 4, 5, 6, 7};
    a.alpha = 50.0;
    RngStream r(3);
    CHECK_THROWS_AS(update_weights_and_slices(a, r, 8), NumericalError);
  }
}

TEST_CASE("horseshoe coefficient limits") {
  RngStream rng(2);
  const Eigen::MatrixXd X = wavy(30, 2, 0.3);
  Eigen::VectorXd y(30);
  for (int i = 0; i < 30; ++i) y[i] = 1.0 + 2.0 * X(i, 0) - X(i, 1) + 0.3 * std::cos(2.3 * i);
  const ClusterMembers m = members_of(X, y);
  const Eigen::VectorXd b_ols = ols(m);

  SUBCASE("diffuse locals reproduce least squares") {
    ClusterParams c;
    c.beta = Eigen::VectorXd::Zero(2);
    c.locals = HsLocals{Eigen::Vector2d(1e6, 1e6), 1e6, Eigen::Vector2d(1, 1), 1.0};
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    const int S = 20000;
    for (int k = 0; k < S; ++k) {
      hs_update_coefficients(c, m, 0.1, 1e8, rng);
      mean += Eigen::Vector3d(c.mu, c.beta[0], c.beta[1]);
    }
    mean /= S;
    CHECK((mean - b_ols).cwiseAbs().maxCoeff() < 0.02);
  }
  SUBCASE("tight locals shrink toward zero") {
    const ClusterMembers one = members_of(X.topRows(1).leftCols(1), y.head(1));
    ClusterParams c;
    c.beta = Eigen::VectorXd::Zero(1);
    c.locals = HsLocals{Eigen::VectorXd::Constant(1, 1e-4), 1e-3, Eigen::VectorXd::Ones(1), 1.0};
    double mean = 0.0;
    for (int k = 0; k < 5000; ++k) {
      hs_update_coefficients(c, one, 1.0, 100.0, rng);
      mean += c.beta[0];
    }
    CHECK(std::abs(mean / 5000) < 0.01);
  }
  SUBCASE("empty cluster draws from the prior") {
    const ClusterMembers none = members_of(Eigen::MatrixXd(0, 2), Eigen::VectorXd(0));
    ClusterParams c;
    c.beta = Eigen::VectorXd::Zero(2);
    c.locals = HsLocals{Eigen::Vector2d(0.5, 2.0), 0.8, Eigen::Vector2d(1, 1), 1.0};
    std::vector<double> mu, b1;
    for (int k = 0; k < 40000; ++k) {
      hs_update_coefficients(c, none, 0.7, 100.0, rng);
      mu.push_back(c.mu);
      b1.push_back(c.beta[1]);
    }
    double vmu = 0, vb = 0;
    for (std::size_t k = 0; k < mu.size(); ++k) {
      vmu += mu[k] * mu[k];
      vb += b1[k] * b1[k];
    }
    CHECK(vmu / 40000 == doctest::Approx(100.0).epsilon(0.03));
    CHECK(vb / 40000 == doctest::Approx(0.8 * 0.7 * 2.0).epsilon(0.03));
  }
}

TEST_CASE("horseshoe locals with zero coefficients stay finite") {
  RngStream rng(3);
  ClusterParams c;
  c.beta = Eigen::VectorXd::Zero(4);
  c.locals = HsLocals{Eigen::VectorXd::Ones(4), 1.0, Eigen::VectorXd::Ones(4), 1.0};
  for (int k = 0; k < 2000; ++k) hs_update_locals(c, 1.0, rng);
  const auto& loc = std::get<HsLocals>(c.locals);
  CHECK(loc.gamma2.allFinite());
  CHECK((loc.gamma2.array() > 0).all());
  CHECK(std::isfinite(loc.zeta2));
  CHECK(loc.zeta2 > 0);
}

TEST_CASE("normal-gamma pieces") {
  RngStream rng(4);
  double s = 0.0;
  for (int k = 0; k < 100000; ++k) s += ng::draw_gamma_inv2(1.0, Eigen::Vector2d(1.0, 1.0), 2.0, rng);
  CHECK(std::abs(s / 100000 - 2.0) < 0.03);

  for (int k = 0; k < 1000; ++k) {
    const double psi = ng::draw_psi(0.7, 1.3, 0.0, rng);
    REQUIRE(std::isfinite(psi));
    REQUIRE(psi > 0.0);
  }

  SUBCASE("SVD branch moments are PSD and exact") {
    const Eigen::MatrixXd X = wavy(1, 3, 0.2);
    const ClusterMembers m = members_of(X, Eigen::VectorXd::Constant(1, 0.7));
    Eigen::VectorXd prior(4);
    prior << 100.0, 0.5, 2.0, 0.01;
    const auto mom = ng::svd_branch_moments(prior, m, 0.6);
    const Eigen::MatrixXd sym = 0.5 * (mom.cov + mom.cov.transpose());
    CHECK(Eigen::LLT<Eigen::MatrixXd>(sym + 1e-12 * Eigen::MatrixXd::Identity(4, 4)).info() == Eigen::Success);
    const Eigen::MatrixXd prec = m.design.transpose() * m.design / 0.6 +
                                 Eigen::MatrixXd(prior.cwiseInverse().asDiagonal());
    const Eigen::MatrixXd cov = prec.inverse();
    CHECK((mom.cov - cov).cwiseAbs().maxCoeff() < 1e-8 * cov.cwiseAbs().maxCoeff());
    CHECK((mom.mean - cov * m.design.transpose() * m.y / 0.6).cwiseAbs().maxCoeff() < 1e-8);
  }
  SUBCASE("precision and SVD branches agree at n_j = p + 2") {
    const Eigen::MatrixXd X = wavy(5, 3, 0.5);
    Eigen::VectorXd y(5);
    y << 0.3, -1.0, 2.0, 0.4, 1.1;
    const ClusterMembers m = members_of(X, y);
    ClusterParams a, b;
    a.beta = b.beta = Eigen::VectorXd::Zero(3);
    a.locals = b.locals = NgLocals{1.0, 1.0, Eigen::Vector3d(0.4, 1.5, 0.02)};
    Eigen::Vector4d ma = Eigen::Vector4d::Zero(), mb = Eigen::Vector4d::Zero();
    const int S = 40000;
    for (int k = 0; k < S; ++k) {
      ng_update_coefficients(a, m, 0.5, 100.0, rng, ng::Branch::Precision);
      ng_update_coefficients(b, m, 0.5, 100.0, rng, ng::Branch::Svd);
      ma += Eigen::Vector4d(a.mu, a.beta[0], a.beta[1], a.beta[2]);
      mb += Eigen::Vector4d(b.mu, b.beta[0], b.beta[1], b.beta[2]);
    }
    CHECK(((ma - mb) / S).cwiseAbs().maxCoeff() < 0.03);
  }
  SUBCASE("diffuse local variances reproduce least squares") {
    const Eigen::MatrixXd X = wavy(40, 2, 0.1);
    Eigen::VectorXd y(40);
    for (int i = 0; i < 40; ++i) y[i] = -1.0 + 0.5 * X(i, 0) + 3.0 * X(i, 1) + 0.2 * std::sin(3.1 * i);
    const ClusterMembers m = members_of(X, y);
    ClusterParams c;
    c.beta = Eigen::VectorXd::Zero(2);
    c.locals = NgLocals{1.0, 1.0, Eigen::Vector2d(1e8, 1e8)};
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (int k = 0; k < 20000; ++k) {
      ng_update_coefficients(c, m, 0.1, 1e8, rng);
      mean += Eigen::Vector3d(c.mu, c.beta[0], c.beta[1]);
    }
    CHECK((mean / 20000 - ols(m)).cwiseAbs().maxCoeff() < 0.02);
  }
}

TEST_CASE("normal-full hyperprior updates") {
  RngStream rng(5);
  Hyperparams h;
  const Eigen::Vector3d c(1.0, -2.0, 0.5);
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  const int S = 40000;
  for (int k = 0; k < S; ++k) {
    NormalGlobals g{Eigen::Vector3d::Zero(), Eigen::Matrix3d::Identity()};
    normalfull_update_hyper(g, {c}, h, rng);
    mean += g.eta;
    REQUIRE(Eigen::LLT<Eigen::MatrixXd>(g.precision).info() == Eigen::Success);
  }
  CHECK(((mean / S) - c * 100.0 / 101.0).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("covariate parameter updates") {
  RngStream rng(6);
  Hyperparams h;
  SUBCASE("no members gives the prior") {
    ClusterParams c;
    std::vector<double> taus;
    double m2 = 0.0;
    for (int k = 0; k < 40000; ++k) {
      update_covariate_params(c, Eigen::MatrixXd(0, 1), h, rng);
      taus.push_back(c.tau[0]);
      m2 += c.m[0] * c.m[0] / c.tau[0];
    }
    std::sort(taus.begin(), taus.end());
    // IG(1, 2) has median 2 / ln 2.
    CHECK(taus[20000] == doctest::Approx(2.0 / std::log(2.0)).epsilon(0.03));
    CHECK(m2 / 40000 == doctest::Approx(1.0 / h.n0).epsilon(0.03));
  }
  SUBCASE("one member at m0 centres m on m0") {
    ClusterParams c;
    double s = 0.0;
    for (int k = 0; k < 40000; ++k) {
      update_covariate_params(c, Eigen::MatrixXd::Constant(1, 1, h.m0), h, rng);
      s += c.m[0];
    }
    CHECK(std::abs(s / 40000 - h.m0) < 0.02);
  }
  SUBCASE("large samples concentrate") {
    Eigen::MatrixXd X(10000, 1);
    for (int i = 0; i < 10000; ++i) X(i, 0) = sample_normal(5.0, 2.0, rng);
    ClusterParams c;
    update_covariate_params(c, X, h, rng);
    CHECK(c.m[0] == doctest::Approx(5.0).epsilon(0.05));
    CHECK(c.tau[0] == doctest::Approx(2.0).epsilon(0.05));
  }
}

TEST_CASE("allocation updates") {
  RngStream rng(7);
  MixtureState s;
  ClusterParams c;
  c.mu = 1.0;
  c.beta = Eigen::VectorXd::Constant(1, 0.5);
  c.m = Eigen::VectorXd::Zero(1);
  c.tau = Eigen::VectorXd::Ones(1);
  s.clusters = {c, c};
  s.w = {0.4, 0.35};
  s.d = {0};
  s.sigma2 = 1.0;
  Dataset d;
  d.X = Eigen::MatrixXd::Constant(1, 1, 0.3);
  d.y = Eigen::VectorXd::Constant(1, 0.2);
  SUBCASE("identical clusters split evenly") {
    s.u = Eigen::VectorXd::Constant(1, 0.1);
    int ones = 0;
    for (int k = 0; k < 10000; ++k) {
      update_allocations(s, d, rng);
      ones += s.d[0];
    }
    CHECK(std::abs(ones / 10000.0 - 0.5) < 0.015);
  }
  SUBCASE("single candidate is deterministic") {
    s.u = Eigen::VectorXd::Constant(1, 0.37);
    for (int k = 0; k < 100; ++k) {
      update_allocations(s, d, rng);
      REQUIRE(s.d[0] == 0);
    }
  }
  SUBCASE("no candidate is an error") {
    s.u = Eigen::VectorXd::Constant(1, 0.5);
    CHECK_THROWS_AS(update_allocations(s, d, rng), NumericalError);
  }
}

TEST_CASE("error variance and DP mass updates") {
  RngStream rng(8);
  SUBCASE("perfect fit under normal-gamma gives IG(7, 2)") {
    Dataset d;
    d.X = wavy(10, 1, 0.0);
    d.y = 2.0 + 3.0 * d.X.col(0).array();
    MixtureState s;
    ClusterParams c;
    c.mu = 2.0;
    c.beta = Eigen::VectorXd::Constant(1, 3.0);
    s.clusters = {c};
    s.d.assign(10, 0);
    Hyperparams h;
    h.baseline = Baseline::NormalGamma;
    double total = 0.0;
    for (int k = 0; k < 100000; ++k) {
      update_sigma2(s, d, h, rng);
      total += s.sigma2;
    }
    CHECK(std::abs(total / 100000 - 2.0 / 6.0) < 0.01);
  }
  SUBCASE("alpha stays positive for a single observation") {
    MixtureState s;
    s.alpha = 1.0;
    Hyperparams h;
    for (int k = 0; k < 1000; ++k) {
      update_alpha(s, 1, 1, h, rng);
      REQUIRE(s.alpha > 0.0);
    }
  }
}

TEST_CASE("full sweeps keep the state consistent") {
  const SimulatedData sim = generate_paper_dataset(60, 6, 2, 3);
  for (auto b : {Baseline::Horseshoe, Baseline::NormalGamma, Baseline::NormalFull}) {
    Hyperparams h;
    h.baseline = b;
    RngStream rng(11);
    MixtureState s = init_state(sim.data, h, rng);
    for (int it = 0; it < 30; ++it) {
      sweep(s, sim.data, h, rng, default_truncation_cap(60));
      REQUIRE(s.w.size() == s.clusters.size());
      REQUIRE(s.remaining_mass < s.u.minCoeff());
      for (std::size_t i = 0; i < s.d.size(); ++i) REQUIRE(s.w[s.d[i]] > s.u[i]);
      REQUIRE(s.sigma2 > 0.0);
      REQUIRE(s.alpha > 0.0);
      REQUIRE(std::isfinite(complete_log_likelihood(s, sim.data)));
    }
  }
}

TEST_CASE("run_chain") {
  const SimulatedData sim = generate_paper_dataset(40, 5, 2, 4);
  Hyperparams h;
  ChainConfig cfg;
  cfg.iterations = 60;
  cfg.burn_in = 20;
  cfg.thin = 2;
  cfg.seed = 17;
  SUBCASE("determinism and retention") {
    std::vector<TraceRow> trace;
    const PosteriorDraws a = run_chain(sim.data, h, cfg, [&](const TraceRow& r) { trace.push_back(r); });
    const PosteriorDraws b = run_chain(sim.data, h, cfg);
    CHECK(a.size() == 20);
    CHECK(trace.size() == 60);
    CHECK(same_draws(a, b));
    CHECK_NOTHROW(a.validate());
    for (const auto& d : a.draws) CHECK(Partition(d.labels).labels() == d.labels);
  }
  SUBCASE("invalid configuration") {
    cfg.burn_in = 60;
    CHECK_THROWS_AS(run_chain(sim.data, h, cfg), InvalidParameter);
  }
}

TEST_CASE("single-component posterior for sigma^2 covers the truth") {
  ComponentSpec comp{1.0, Eigen::VectorXd::Constant(1, 2.0), Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1)};
  const SimulatedData sim = generate_generic_mixture({comp}, 10, 0.5, 21);
  for (auto b : {Baseline::Horseshoe, Baseline::HorseshoeLinear}) {
    Hyperparams h;
    h.baseline = b;
    ChainConfig cfg;
    cfg.iterations = 4000;
    cfg.burn_in = 1000;
    cfg.seed = 5;
    const PosteriorDraws d = run_chain(sim.data, h, cfg);
    double m = 0.0, m2 = 0.0;
    for (const auto& x : d.draws) {
      m += x.sigma2;
      m2 += x.sigma2 * x.sigma2;
    }
    m /= static_cast<double>(d.size());
    const double sd = std::sqrt(m2 / static_cast<double>(d.size()) - m * m);
    CHECK(std::abs(m - 0.5) < 3.0 * sd);
  }
}

TEST_CASE("linear benchmark matches the mixture with a tiny DP mass") {
  ComponentSpec comp{0.5, Eigen::Vector3d(1.0, 0.0, -2.0), Eigen::Vector3d::Zero(), Eigen::Vector3d::Ones()};
  const SimulatedData train = generate_generic_mixture({comp}, 60, 0.25, 31);
  const SimulatedData test = generate_generic_mixture({comp}, 30, 0.25, 32);
  ChainConfig cfg;
  cfg.iterations = 3000;
  cfg.burn_in = 1000;
  cfg.seed = 8;
  Hyperparams lin;
  lin.baseline = Baseline::HorseshoeLinear;
  Hyperparams dpm;
  dpm.alpha_scale = 1.0 / 2000.0;
  const Eigen::VectorXd a = predictive_expectations(test.data.X, run_chain(train.data, lin, cfg), lin);
  const Eigen::VectorXd b = predictive_expectations(test.data.X, run_chain(train.data, dpm, cfg), dpm);
  CHECK(prediction_errors(a, b).l2 < 0.05);
}

TEST_CASE("row permutation gives the same clustering up to relabeling") {
  const std::vector<ComponentSpec> comps{
      {-5.0, Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, -6.0), Eigen::VectorXd::Ones(1)},
      {5.0, Eigen::VectorXd::Constant(1, -1.0), Eigen::VectorXd::Constant(1, 6.0), Eigen::VectorXd::Ones(1)}};
  const SimulatedData sim = generate_generic_mixture(comps, 30, 0.1, 41);
  std::vector<int> perm(30);
  for (int i = 0; i < 30; ++i) perm[i] = (7 * i + 3) % 30;
  Dataset shuffled = sim.data;
  for (int i = 0; i < 30; ++i) {
    shuffled.X.row(i) = sim.data.X.row(perm[i]);
    shuffled.y[i] = sim.data.y[perm[i]];
  }
  ChainConfig cfg;
  cfg.iterations = 600;
  cfg.burn_in = 300;
  cfg.seed = 3;
  Hyperparams h;
  const auto estimate = [&](const Dataset& d) {
    RngStream rng(1);
    return greedy_vi_estimate(draw_partitions(run_chain(d, h, cfg)), GreedyViOptions{}, rng).partition;
  };
  const Partition a = estimate(sim.data);
  const Partition b = estimate(shuffled);
  std::vector<int> a_perm(30);
  for (int i = 0; i < 30; ++i) a_perm[i] = a.labels()[perm[i]];
  CHECK(Partition(a_perm) == b);
  CHECK(a.num_clusters() == 2);
}
