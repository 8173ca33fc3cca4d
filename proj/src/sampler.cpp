#include "dpmreg/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "dpmreg/distributions.hpp"
#include "dpmreg/errors.hpp"

namespace dpmreg {

void ChainConfig::validate() const {
  if (iterations <= 0) throw InvalidParameter("iterations must be positive");
  if (burn_in < 0 || burn_in >= iterations)
    throw InvalidParameter("burn-in must satisfy 0 <= burn_in < iterations");
  if (thin < 1) throw InvalidParameter("thin must be at least 1");
  if (truncation_cap < 0) throw InvalidParameter("truncation cap must be non-negative");
}

std::vector<ClusterMembers> gather_members(const MixtureState& state, const Dataset& data,
                                           int num_labels) {
  const Eigen::Index p = data.p();
  std::vector<std::vector<Eigen::Index>> rows(num_labels);
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const int label = state.d[i];
    if (label < num_labels) rows[label].push_back(i);
  }
  std::vector<ClusterMembers> out(num_labels);
  for (int j = 0; j < num_labels; ++j) {
    const auto nj = static_cast<Eigen::Index>(rows[j].size());
    auto& m = out[j];
    m.design.resize(nj, p + 1);
    m.X.resize(nj, p);
    m.y.resize(nj);
    for (Eigen::Index r = 0; r < nj; ++r) {
      const Eigen::Index i = rows[j][r];
      m.X.row(r) = data.X.row(i);
      m.y[r] = data.y[i];
    }
    m.design.col(0).setOnes();
    m.design.rightCols(p) = m.X;
  }
  return out;
}

void update_weights_and_slices(MixtureState& state, RngStream& rng, int truncation_cap) {
  const int extent = state.occupied_extent();
  std::vector<int> counts(extent, 0);
  for (int label : state.d) ++counts[label];

  state.clusters.resize(extent);
  state.v.assign(extent, 0.0);
  state.w.assign(extent, 0.0);
  const int n = static_cast<int>(state.d.size());
  int above = n;  // #{i : d_i > j}, updated as j advances
  double remaining = 1.0;
  for (int j = 0; j < extent; ++j) {
    above -= counts[j];
    const double vj = sample_beta(1.0 + counts[j], state.alpha + above, rng);
    state.v[j] = vj;
    state.w[j] = vj * remaining;
    remaining *= (1.0 - vj);
  }

  state.u.resize(n);
  double min_u = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    state.u[i] = state.w[state.d[i]] * rng.uniform();
    min_u = std::min(min_u, state.u[i]);
  }

  // Extend until the leftover stick is below every slice: then every label
  // j > N has w_j < u_i for all i.
  while (remaining >= min_u) {
    if (static_cast<int>(state.v.size()) >= truncation_cap) {
      std::ostringstream os;
      os << "stick-breaking truncation reached the cap N = " << truncation_cap
         << " (alpha = " << state.alpha << ", min slice = " << min_u
         << ", leftover mass = " << remaining << ")";
      throw NumericalError(os.str());
    }
    const double vj = sample_beta(1.0, state.alpha, rng);
    state.v.push_back(vj);
    state.w.push_back(vj * remaining);
    remaining *= (1.0 - vj);
  }
  state.remaining_mass = remaining;
}

void update_covariate_params(ClusterParams& cluster, const Eigen::MatrixXd& member_X,
                             const Hyperparams& hyper, RngStream& rng) {
  const Eigen::Index p = member_X.cols();
  const double nj = static_cast<double>(member_X.rows());
  const double n_star = hyper.n0 + nj;
  const double nu_star = hyper.nu0 + nj;
  cluster.m.resize(p);
  cluster.tau.resize(p);
  for (Eigen::Index l = 0; l < p; ++l) {
    double mean = 0.0;
    double ss = 0.0;
    if (nj > 0) {
      const auto col = member_X.col(l);
      mean = col.mean();
      ss = (col.array() - mean).square().sum();
    }
    const double dev = mean - hyper.m0;
    const double nu_s2 = ss + hyper.s0sq * hyper.nu0 + hyper.n0 * nj / n_star * dev * dev;
    cluster.tau[l] = sample_inverse_gamma(0.5 * nu_star, 0.5 * nu_s2, rng);
    const double m_star = (nj * mean + hyper.n0 * hyper.m0) / n_star;
    cluster.m[l] = sample_normal(m_star, cluster.tau[l] / n_star, rng);
  }
}

namespace {

struct CovariateCache {
  Eigen::VectorXd inv_tau;
  double log_norm = 0.0;  // -0.5 * sum log(2 pi tau)
};

CovariateCache covariate_cache(const ClusterParams& c) {
  CovariateCache cache;
  cache.inv_tau = c.tau.cwiseInverse();
  cache.log_norm = -0.5 * (c.tau.array() * (2.0 * std::numbers::pi)).log().sum();
  return cache;
}

double joint_log_density(const ClusterParams& c, const CovariateCache& cache, double sigma2,
                         const Eigen::Ref<const Eigen::RowVectorXd>& x, double y) {
  const double fit = c.mu + x.dot(c.beta);
  const double lx =
      cache.log_norm - 0.5 * ((x.transpose() - c.m).array().square() * cache.inv_tau.array()).sum();
  return log_normal_pdf(y, fit, sigma2) + lx;
}

}  // namespace

std::vector<double> allocation_log_weights(const MixtureState& state, const Dataset& data,
                                           Eigen::Index i) {
  const int N = state.truncation();
  std::vector<double> out(N, -std::numeric_limits<double>::infinity());
  for (int j = 0; j < N; ++j) {
    if (!(state.w[j] > state.u[i])) continue;
    const auto& c = state.clusters[j];
    out[j] = joint_log_density(c, covariate_cache(c), state.sigma2, data.X.row(i), data.y[i]);
  }
  return out;
}

void update_allocations(MixtureState& state, const Dataset& data, RngStream& rng) {
  const int N = state.truncation();
  std::vector<CovariateCache> caches;
  caches.reserve(N);
  for (const auto& c : state.clusters) caches.push_back(covariate_cache(c));

  std::vector<double> logw(N);
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    bool any = false;
    for (int j = 0; j < N; ++j) {
      if (state.w[j] > state.u[i]) {
        logw[j] = joint_log_density(state.clusters[j], caches[j], state.sigma2, data.X.row(i),
                                    data.y[i]);
        any = true;
      } else {
        logw[j] = -std::numeric_limits<double>::infinity();
      }
    }
    if (!any) {
      std::ostringstream os;
      os << "observation " << i << " has no cluster with w_j > u_i (u_i = " << state.u[i] << ")";
      throw NumericalError(os.str());
    }
    state.d[i] = static_cast<int>(sample_log_categorical(logw, rng));
  }
}

namespace {

double sum_squared_residuals(const MixtureState& state, const Dataset& data) {
  double sse = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const auto& c = state.clusters[state.d[i]];
    const double r = data.y[i] - c.mu - data.X.row(i).dot(c.beta);
    sse += r * r;
  }
  return sse;
}

std::vector<char> occupancy(const MixtureState& state) {
  std::vector<char> occ(state.clusters.size(), 0);
  for (int label : state.d) occ[label] = 1;
  return occ;
}

bool is_horseshoe(Baseline b) {
  return b == Baseline::Horseshoe || b == Baseline::HorseshoeLinear;
}

}  // namespace

void update_sigma2(MixtureState& state, const Dataset& data, const Hyperparams& hyper,
                   RngStream& rng) {
  const double n = static_cast<double>(data.n());
  const double sse = sum_squared_residuals(state, data);
  double shape = 0.5 * n + hyper.alpha0;
  double igscale = 0.5 * sse + hyper.theta0;
  if (is_horseshoe(hyper.baseline)) {
    // The slope prior N(0, zeta^2 sigma^2 Gamma) of every occupied cluster
    // contributes p/2 to the shape and its quadratic form to the scale.
    const auto occ = occupancy(state);
    const double p = static_cast<double>(data.p());
    for (std::size_t j = 0; j < occ.size(); ++j) {
      if (!occ[j]) continue;
      const auto& c = state.clusters[j];
      const auto& loc = std::get<HsLocals>(c.locals);
      shape += 0.5 * p;
      igscale += 0.5 / loc.zeta2 * (c.beta.array().square() / loc.gamma2.array()).sum();
    }
  }
  state.sigma2 = sample_inverse_gamma(shape, igscale, rng);
}

void update_alpha(MixtureState& state, int num_clusters, Eigen::Index n, const Hyperparams& hyper,
                  RngStream& rng) {
  const double eta = sample_beta(state.alpha + 1.0, static_cast<double>(n), rng);
  const double rate = 1.0 / hyper.alpha_scale - std::log(eta);
  const double a = hyper.alpha_shape;
  const double k = static_cast<double>(num_clusters);
  const double odds = (a + k - 1.0) / (static_cast<double>(n) * rate);
  const double u = rng.uniform();
  const double shape = a + k - ((u > odds / (1.0 + odds)) ? 1.0 : 0.0);
  state.alpha = sample_gamma(shape, 1.0 / rate, rng);
}

double complete_log_likelihood(const MixtureState& state, const Dataset& data) {
  std::vector<CovariateCache> caches;
  caches.reserve(state.clusters.size());
  for (const auto& c : state.clusters) caches.push_back(covariate_cache(c));
  double total = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const int j = state.d[i];
    total += joint_log_density(state.clusters[j], caches[j], state.sigma2, data.X.row(i),
                               data.y[i]);
  }
  return total;
}

void sweep(MixtureState& state, const Dataset& data, const Hyperparams& hyper, RngStream& rng,
           int truncation_cap) {
  const Eigen::Index p = data.p();

  if (hyper.baseline == Baseline::HorseshoeLinear) {
    const auto members = gather_members(state, data, 1);
    auto& c = state.clusters[0];
    hs_update_locals(c, state.sigma2, rng);
    hs_update_coefficients(c, members[0], state.sigma2, hyper.nu_mu, rng);
    update_covariate_params(c, members[0].X, hyper, rng);
    update_sigma2(state, data, hyper, rng);
    return;
  }

  // Step 1
  update_weights_and_slices(state, rng, truncation_cap);
  const int extent = static_cast<int>(state.clusters.size());
  const int truncation = static_cast<int>(state.w.size());

  // Step 2
  const auto members = gather_members(state, data, extent);
  switch (hyper.baseline) {
    case Baseline::Horseshoe:
      for (int j = 0; j < extent; ++j) {
        auto& c = state.clusters[j];
        hs_update_locals(c, state.sigma2, rng);
        hs_update_coefficients(c, members[j], state.sigma2, hyper.nu_mu, rng);
        update_covariate_params(c, members[j].X, hyper, rng);
      }
      break;
    case Baseline::NormalGamma:
      for (int j = 0; j < extent; ++j) {
        auto& c = state.clusters[j];
        ng_update_locals(c, state.ng_V, rng);
        ng_update_coefficients(c, members[j], state.sigma2, hyper.nu_mu, rng);
        update_covariate_params(c, members[j].X, hyper, rng);
      }
      break;
    case Baseline::NormalFull: {
      const auto occ = occupancy(state);
      normalfull_update_coefficients_and_hyper(state, members, occ, hyper, rng);
      for (int j = 0; j < extent; ++j)
        update_covariate_params(state.clusters[j], members[j].X, hyper, rng);
      break;
    }
    case Baseline::HorseshoeLinear: break;
  }
  for (int j = extent; j < truncation; ++j) {
    state.clusters.push_back(draw_cluster_from_prior(
        hyper, p, state.sigma2, state.ng_V, state.normal ? &*state.normal : nullptr, rng));
  }

  // Steps 3 to 5
  update_allocations(state, data, rng);
  update_sigma2(state, data, hyper, rng);
  update_alpha(state, state.num_occupied(), data.n(), hyper, rng);
}

PosteriorDraw snapshot(const MixtureState& state, bool store_covariate_params, bool linear) {
  PosteriorDraw draw;
  draw.sigma2 = state.sigma2;
  draw.alpha = linear ? 0.0 : state.alpha;
  std::vector<int> remap(state.clusters.size(), -1);
  draw.labels.resize(state.d.size());
  for (std::size_t i = 0; i < state.d.size(); ++i) {
    int& slot = remap[state.d[i]];
    if (slot < 0) {
      slot = static_cast<int>(draw.clusters.size());
      const auto& c = state.clusters[state.d[i]];
      ClusterDraw cd;
      cd.mu = c.mu;
      cd.beta = c.beta;
      if (store_covariate_params) {
        cd.m = c.m;
        cd.tau = c.tau;
      }
      draw.clusters.push_back(std::move(cd));
    }
    draw.labels[i] = slot;
  }
  return draw;
}

PosteriorDraws run_chain(const Dataset& data, const Hyperparams& hyper, const ChainConfig& cfg,
                         const TraceSink& trace) {
  cfg.validate();
  RngStream rng(cfg.seed);
  MixtureState state = init_state(data, hyper, rng);
  const int cap = cfg.truncation_cap > 0 ? cfg.truncation_cap : default_truncation_cap(data.n());
  const bool linear = hyper.baseline == Baseline::HorseshoeLinear;

  PosteriorDraws out;
  out.n = static_cast<int>(data.n());
  out.p = static_cast<int>(data.p());
  out.meta.iterations = cfg.iterations;
  out.meta.burn_in = cfg.burn_in;
  out.meta.thin = cfg.thin;
  out.meta.seed = cfg.seed;
  out.meta.baseline = hyper.baseline;
  out.meta.ng_V = state.ng_V;
  out.meta.has_covariate_params = cfg.store_covariate_params;
  out.draws.reserve(static_cast<std::size_t>((cfg.iterations - cfg.burn_in) / cfg.thin));

  for (int it = 1; it <= cfg.iterations; ++it) {
    sweep(state, data, hyper, rng, cap);
    const double loglik = complete_log_likelihood(state, data);
    if (!std::isfinite(loglik)) {
      std::ostringstream os;
      os << "non-finite log-likelihood at iteration " << it << " (sigma2 = " << state.sigma2
         << ", alpha = " << state.alpha << ", K = " << state.num_occupied()
         << ", N = " << state.truncation() << ")";
      throw NumericalError(os.str());
    }
    if (trace) trace({it, state.sigma2, linear ? 0.0 : state.alpha, state.num_occupied(), loglik});
    if (it > cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0)
      out.draws.push_back(snapshot(state, cfg.store_covariate_params, linear));
  }
  return out;
}

}  // namespace dpmreg
