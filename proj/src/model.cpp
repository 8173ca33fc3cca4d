#include "dpmreg/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "dpmreg/distributions.hpp"
#include "dpmreg/errors.hpp"

namespace dpmreg {

std::string to_string(Baseline baseline) {
  switch (baseline) {
    case Baseline::Horseshoe: return "hs";
    case Baseline::NormalGamma: return "ng";
    case Baseline::NormalFull: return "n";
    case Baseline::HorseshoeLinear: return "hs-linear";
  }
  return "unknown";
}

Baseline parse_baseline(const std::string& name) {
  if (name == "hs") return Baseline::Horseshoe;
  if (name == "ng") return Baseline::NormalGamma;
  if (name == "n") return Baseline::NormalFull;
  if (name == "hs-linear") return Baseline::HorseshoeLinear;
  throw InvalidParameter("unknown baseline '" + name + "' (expected hs, ng, n or hs-linear)");
}

void Dataset::validate() const {
  if (y.size() != X.rows()) throw DataError("response length does not match covariate rows");
  if (n() < 2) throw DataError("dataset needs at least two observations");
  if (p() < 1) throw DataError("dataset needs at least one covariate");
  if (!y.allFinite() || !X.allFinite()) throw DataError("dataset contains non-finite values");
  if (!column_names.empty() && static_cast<Eigen::Index>(column_names.size()) != p())
    throw DataError("column name count does not match covariate count");
  if (norm_state) {
    if (static_cast<Eigen::Index>(norm_state->covariates.size()) != p())
      throw DataError("normalization state does not match covariate count");
    if (!(norm_state->response.sd > 0.0)) throw DataError("response scaling has sd <= 0");
    for (const auto& s : norm_state->covariates)
      if (!(s.sd > 0.0)) throw DataError("covariate scaling has sd <= 0");
  }
}

double Hyperparams::wishart_df(Eigen::Index p) const {
  return normalfull_wishart_df.value_or(static_cast<double>(p + 1));
}

void Hyperparams::validate() const {
  const double positives[] = {n0, nu0, s0sq, alpha0, theta0, alpha_shape, alpha_scale, nu_mu,
                              normalfull_eta_var, normalfull_wishart_scale};
  for (double v : positives)
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidParameter("hyperparameters must be positive");
  if (!std::isfinite(m0)) throw InvalidParameter("m0 must be finite");
  if (normalfull_wishart_df && !(*normalfull_wishart_df > 0.0))
    throw InvalidParameter("wishart df must be positive");
}

int MixtureState::occupied_extent() const {
  int top = -1;
  for (int label : d) top = std::max(top, label);
  return top + 1;
}

int MixtureState::num_occupied() const {
  std::vector<char> seen(clusters.size(), 0);
  int count = 0;
  for (int label : d) {
    if (!seen[label]) {
      seen[label] = 1;
      ++count;
    }
  }
  return count;
}

Partition::Partition(std::span<const int> labels) : labels_(labels.size()) {
  std::unordered_map<int, int> remap;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = remap.try_emplace(labels[i], num_clusters_);
    if (inserted) ++num_clusters_;
    labels_[i] = it->second;
  }
}

std::vector<int> Partition::cluster_sizes() const {
  std::vector<int> sizes(num_clusters_, 0);
  for (int label : labels_) ++sizes[label];
  return sizes;
}

void PosteriorDraws::validate() const {
  if (draws.empty()) throw DataError("posterior archive holds no draws");
  for (const auto& draw : draws) {
    if (static_cast<int>(draw.labels.size()) != n)
      throw DataError("posterior draw has the wrong number of labels");
    for (int label : draw.labels)
      if (label < 0 || label >= static_cast<int>(draw.clusters.size()))
        throw DataError("posterior draw references a missing cluster");
    for (const auto& c : draw.clusters) {
      if (c.beta.size() != p) throw DataError("posterior draw has the wrong coefficient length");
      if (meta.has_covariate_params && (c.m.size() != p || c.tau.size() != p))
        throw DataError("posterior draw is missing covariate parameters");
    }
  }
}

ClusterParams draw_cluster_from_prior(const Hyperparams& hyper, Eigen::Index p, double sigma2,
                                      double ng_V, const NormalGlobals* normal, RngStream& rng) {
  ClusterParams c;
  c.beta.resize(p);
  switch (hyper.baseline) {
    case Baseline::Horseshoe:
    case Baseline::HorseshoeLinear: {
      HsLocals hs;
      hs.nu.resize(p);
      hs.gamma2.resize(p);
      for (Eigen::Index l = 0; l < p; ++l) {
        hs.nu[l] = sample_inverse_gamma(0.5, 1.0, rng);
        hs.gamma2[l] = sample_inverse_gamma(0.5, 1.0 / hs.nu[l], rng);
      }
      hs.xi = sample_inverse_gamma(0.5, 1.0, rng);
      hs.zeta2 = sample_inverse_gamma(0.5, 1.0 / hs.xi, rng);
      c.mu = sample_normal(0.0, hyper.nu_mu, rng);
      for (Eigen::Index l = 0; l < p; ++l)
        c.beta[l] = std::sqrt(hs.zeta2 * sigma2 * hs.gamma2[l]) * rng.standard_normal();
      c.locals = std::move(hs);
      break;
    }
    case Baseline::NormalGamma: {
      NgLocals ng;
      const double V = std::max(ng_V, 1e-12);
      ng.lambda = sample_exponential(1.0, rng);
      ng.gamma_inv2 = sample_gamma(2.0, 2.0 * ng.lambda / V, rng);
      ng.psi.resize(p);
      for (Eigen::Index l = 0; l < p; ++l)
        ng.psi[l] = std::max(sample_gamma(ng.lambda, 2.0 / ng.gamma_inv2, rng), kGigArgumentFloor);
      c.mu = sample_normal(0.0, hyper.nu_mu, rng);
      for (Eigen::Index l = 0; l < p; ++l) c.beta[l] = std::sqrt(ng.psi[l]) * rng.standard_normal();
      c.locals = std::move(ng);
      break;
    }
    case Baseline::NormalFull: {
      if (normal == nullptr) throw InvalidParameter("NormalFull prior draw needs (eta, Sigma)");
      const Eigen::VectorXd coef = sample_mvn_from_precision_system(
          normal->precision, normal->precision * normal->eta, 1.0, rng);
      c.mu = coef[0];
      c.beta = coef.tail(p);
      break;
    }
  }
  c.tau.resize(p);
  c.m.resize(p);
  for (Eigen::Index l = 0; l < p; ++l) {
    c.tau[l] = sample_inverse_gamma(0.5 * hyper.nu0, 0.5 * hyper.nu0 * hyper.s0sq, rng);
    c.m[l] = sample_normal(hyper.m0, c.tau[l] / hyper.n0, rng);
  }
  return c;
}

MixtureState init_state(const Dataset& data, const Hyperparams& hyper, RngStream& rng) {
  data.validate();
  hyper.validate();
  const Eigen::Index n = data.n();
  const Eigen::Index p = data.p();
  for (Eigen::Index l = 0; l < p; ++l) {
    const auto col = data.X.col(l);
    if ((col.array() == col[0]).all()) {
      std::ostringstream os;
      os << "covariate column " << l << " is constant";
      warn(os.str());
    }
  }

  MixtureState state;
  state.d.resize(n);
  if (hyper.baseline == Baseline::HorseshoeLinear) {
    std::fill(state.d.begin(), state.d.end(), 0);
  } else {
    for (auto& label : state.d) label = static_cast<int>(rng.index(static_cast<std::size_t>(n)));
  }
  state.sigma2 = sample_inverse_gamma(hyper.alpha0, hyper.theta0, rng);
  if (hyper.baseline == Baseline::NormalGamma) state.ng_V = compute_ng_V(data);
  if (hyper.baseline == Baseline::NormalFull) {
    NormalGlobals g;
    g.eta.resize(p + 1);
    for (Eigen::Index k = 0; k <= p; ++k) g.eta[k] = sample_normal(0.0, hyper.normalfull_eta_var, rng);
    const Eigen::MatrixXd scale =
        hyper.normalfull_wishart_scale * Eigen::MatrixXd::Identity(p + 1, p + 1);
    g.precision = sample_wishart(hyper.wishart_df(p), scale, rng);
    state.normal = std::move(g);
  }
  const int extent = state.occupied_extent();
  state.clusters.reserve(extent);
  for (int j = 0; j < extent; ++j) {
    state.clusters.push_back(draw_cluster_from_prior(
        hyper, p, state.sigma2, state.ng_V, state.normal ? &*state.normal : nullptr, rng));
  }
  state.alpha = sample_gamma(hyper.alpha_shape, hyper.alpha_scale, rng);
  return state;
}

double compute_ng_V(const Dataset& data) {
  const Eigen::Index n = data.n();
  const Eigen::Index p = data.p();
  Eigen::MatrixXd design(n, p + 1);
  design.col(0).setOnes();
  design.rightCols(p) = data.X;

  Eigen::VectorXd coef;
  double V = 0.0;
  if (n >= p + 1) {
    Eigen::MatrixXd gram = design.transpose() * design;
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) {
      warn("least-squares Gram matrix is singular; adding 1e-8 ridge");
      gram.diagonal().array() += 1e-8;
      llt.compute(gram);
    }
    coef = llt.solve(design.transpose() * data.y);
    V = coef.tail(p).squaredNorm() / static_cast<double>(p);
  } else {
    // Minimum-norm solution X~^T (X~ X~^T)^{-1} y.
    Eigen::MatrixXd gram = design * design.transpose();
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) {
      warn("minimum-norm Gram matrix is singular; adding 1e-8 ridge");
      gram.diagonal().array() += 1e-8;
      llt.compute(gram);
    }
    coef = design.transpose() * llt.solve(data.y);
    V = coef.tail(p).squaredNorm() / static_cast<double>(n);
  }
  if (!(V > 1e-12)) {
    warn("normal-gamma scale V is degenerate; flooring at 1e-12");
    V = 1e-12;
  }
  return V;
}

double expected_clusters_prior(double alpha, long n) {
  if (!(alpha > 0.0)) throw InvalidParameter("alpha must be positive");
  if (n < 1) throw InvalidParameter("n must be at least 1");
  double total = 0.0;
  for (long i = 1; i <= n; ++i) total += alpha / (alpha + static_cast<double>(i - 1));
  return total;
}

}  // namespace dpmreg
