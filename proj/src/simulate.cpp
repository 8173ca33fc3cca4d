#include "dpmreg/simulate.hpp"

#include <cmath>
#include <string>

#include "dpmreg/errors.hpp"
#include "dpmreg/rng.hpp"

namespace dpmreg {

Eigen::MatrixXd SimTruth::true_betas() const {
  const Eigen::Index p = components.empty() ? 0 : components.front().beta.size();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(labels.size()), p);
  for (std::size_t i = 0; i < labels.size(); ++i) out.row(i) = components[labels[i]].beta.transpose();
  return out;
}

Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> SimTruth::true_nonzero() const {
  return true_betas().array() != 0.0;
}

std::vector<ComponentSpec> paper_components(int p, int J) {
  if (J < 1 || J > 10) throw InvalidParameter("J must lie in 1..10");
  if (p < 5) throw InvalidParameter("p must be at least 5 to hold the largest coefficient support");
  std::vector<ComponentSpec> out;
  for (int j = 1; j <= J; ++j) {
    ComponentSpec c;
    c.m = Eigen::VectorXd::Constant(p, 2.0 * j);
    c.tau = Eigen::VectorXd::Ones(p);
    c.beta = Eigen::VectorXd::Zero(p);
    if (j <= 5) {
      c.mu = 10.0 - 2.0 * (j - 1);
      c.beta.head(6 - j).setConstant(3.0);
    } else {
      c.mu = 10.0 - 2.0 * j;
      c.beta.head(j - 5).setConstant(-3.0);
    }
    out.push_back(std::move(c));
  }
  return out;
}

namespace {

SimulatedData sample_mixture(const std::vector<ComponentSpec>& components, int n, double sigma2,
                             RngStream& rng) {
  const int J = static_cast<int>(components.size());
  const Eigen::Index p = components.front().beta.size();
  SimulatedData out;
  out.truth.components = components;
  out.truth.sigma2 = sigma2;
  out.truth.labels.resize(n);
  out.data.X.resize(n, p);
  out.data.y.resize(n);
  const double sd = std::sqrt(sigma2);
  for (int i = 0; i < n; ++i) {
    const int j = static_cast<int>(rng.index(static_cast<std::size_t>(J)));
    const auto& c = components[j];
    out.truth.labels[i] = j;
    for (Eigen::Index l = 0; l < p; ++l)
      out.data.X(i, l) = c.m[l] + std::sqrt(c.tau[l]) * rng.standard_normal();
    out.data.y[i] = c.mu + out.data.X.row(i).dot(c.beta) + sd * rng.standard_normal();
  }
  out.data.column_names.resize(p);
  for (Eigen::Index l = 0; l < p; ++l) out.data.column_names[l] = "x" + std::to_string(l + 1);
  return out;
}

void check_components(const std::vector<ComponentSpec>& components) {
  if (components.empty()) throw InvalidParameter("at least one component is required");
  const Eigen::Index p = components.front().beta.size();
  if (p < 1) throw InvalidParameter("components need at least one covariate");
  for (const auto& c : components) {
    if (c.beta.size() != p || c.m.size() != p || c.tau.size() != p)
      throw InvalidParameter("components disagree on the number of covariates");
    if ((c.tau.array() <= 0.0).any()) throw InvalidParameter("component variances must be positive");
  }
}

}  // namespace

SimulatedData generate_paper_dataset(int n, int p, int J, std::uint64_t seed) {
  if (n < 1) throw InvalidParameter("n must be positive");
  RngStream rng(seed);
  return sample_mixture(paper_components(p, J), n, 1.0, rng);
}

TrainTest generate_paper_train_test(int n, int p, int J, std::uint64_t seed, int n_test) {
  if (n < 1 || n_test < 1) throw InvalidParameter("sample sizes must be positive");
  const auto components = paper_components(p, J);
  const RngStream root(seed);
  RngStream train_rng = root.substream(0);
  RngStream test_rng = root.substream(1);
  TrainTest out;
  out.train = sample_mixture(components, n, 1.0, train_rng);
  out.test = sample_mixture(components, n_test, 1.0, test_rng);
  return out;
}

SimulatedData generate_generic_mixture(const std::vector<ComponentSpec>& components, int n,
                                       double sigma2, std::uint64_t seed) {
  check_components(components);
  if (n < 1) throw InvalidParameter("n must be positive");
  if (!(sigma2 > 0.0)) throw InvalidParameter("sigma2 must be positive");
  RngStream rng(seed);
  return sample_mixture(components, n, sigma2, rng);
}

}  // namespace dpmreg
