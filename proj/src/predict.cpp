#include "dpmreg/predict.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>

#include "dpmreg/distributions.hpp"
#include "dpmreg/errors.hpp"

namespace dpmreg {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require_draws(const PosteriorDraws& draws) {
  if (draws.draws.empty()) throw InvalidParameter("prediction needs at least one posterior draw");
  if (!draws.meta.has_covariate_params)
    throw InvalidParameter("prediction needs stored covariate parameters (m, tau)");
}

double log_cluster_x_density(const Eigen::VectorXd& x, const ClusterDraw& c) {
  double s = 0.0;
  for (Eigen::Index l = 0; l < x.size(); ++l) s += log_normal_pdf(x[l], c.m[l], c.tau[l]);
  return s;
}

std::vector<int> cluster_counts(const PosteriorDraw& draw) {
  std::vector<int> counts(draw.clusters.size(), 0);
  for (int label : draw.labels) ++counts[label];
  return counts;
}

double fit_value(const Eigen::VectorXd& x, const ClusterDraw& c) { return c.mu + x.dot(c.beta); }

}  // namespace

double marginal_x_prior_logpdf(const Eigen::VectorXd& x, const Hyperparams& hyper) {
  const double scale = std::sqrt(hyper.s0sq * (1.0 + hyper.n0) / hyper.n0);
  double s = 0.0;
  for (Eigen::Index l = 0; l < x.size(); ++l) s += log_student_t_pdf(x[l], hyper.nu0, hyper.m0, scale);
  return s;
}

double UrnWeights::new_cluster_prob() const { return std::exp(log_new_cluster - log_b); }

std::vector<double> UrnWeights::cluster_probs() const {
  std::vector<double> out(log_per_cluster.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = std::exp(log_per_cluster[j] - log_b);
  return out;
}

UrnWeights urn_allocation_logprobs(const Eigen::VectorXd& x, const PosteriorDraw& draw,
                                   const Hyperparams& hyper) {
  UrnWeights w;
  w.log_new_cluster =
      draw.alpha > 0.0 ? std::log(draw.alpha) + marginal_x_prior_logpdf(x, hyper) : kNegInf;
  const auto counts = cluster_counts(draw);
  w.log_per_cluster.resize(draw.clusters.size());
  for (std::size_t j = 0; j < draw.clusters.size(); ++j) {
    w.log_per_cluster[j] = counts[j] > 0
                               ? std::log(static_cast<double>(counts[j])) +
                                     log_cluster_x_density(x, draw.clusters[j])
                               : kNegInf;
  }
  std::vector<double> all(w.log_per_cluster);
  all.push_back(w.log_new_cluster);
  w.log_b = log_sum_exp(all);
  return w;
}

double predictive_expectation(const Eigen::VectorXd& x, const PosteriorDraws& draws,
                              const Hyperparams& hyper) {
  require_draws(draws);
  double total = 0.0;
  for (const auto& draw : draws.draws) {
    const UrnWeights w = urn_allocation_logprobs(x, draw, hyper);
    // The new-cluster term contributes to b only: mu + x'beta has mean zero
    // under every baseline.
    double e = 0.0;
    for (std::size_t j = 0; j < draw.clusters.size(); ++j) {
      if (w.log_per_cluster[j] == kNegInf) continue;
      e += std::exp(w.log_per_cluster[j] - w.log_b) * fit_value(x, draw.clusters[j]);
    }
    total += e;
  }
  return total / static_cast<double>(draws.size());
}

Eigen::VectorXd predictive_expectations(const Eigen::MatrixXd& X, const PosteriorDraws& draws,
                                        const Hyperparams& hyper, int threads) {
  require_draws(draws);
  const Eigen::Index rows = X.rows();
  Eigen::VectorXd out(rows);
  const auto work = [&](Eigen::Index begin, Eigen::Index end) {
    for (Eigen::Index i = begin; i < end; ++i)
      out[i] = predictive_expectation(X.row(i).transpose(), draws, hyper);
  };
  const int t = static_cast<int>(std::clamp<Eigen::Index>(threads, 1, std::max<Eigen::Index>(rows, 1)));
  if (t == 1) {
    work(0, rows);
    return out;
  }
  std::vector<std::thread> pool;
  const Eigen::Index chunk = (rows + t - 1) / t;
  for (int k = 0; k < t; ++k) {
    const Eigen::Index b = k * chunk;
    const Eigen::Index e = std::min(rows, b + chunk);
    if (b < e) pool.emplace_back(work, b, e);
  }
  for (auto& th : pool) th.join();
  return out;
}

double sample_g0_fit_variance(const Eigen::VectorXd& x, const Hyperparams& hyper, double sigma2,
                              double ng_V, RngStream& rng) {
  const Eigen::Index p = x.size();
  switch (hyper.baseline) {
    case Baseline::Horseshoe:
    case Baseline::HorseshoeLinear: {
      // Half-Cauchy scales as ratios of normals.
      const double zeta = rng.standard_normal() / rng.standard_normal();
      double s = 0.0;
      for (Eigen::Index l = 0; l < p; ++l) {
        const double g = rng.standard_normal() / rng.standard_normal();
        s += x[l] * x[l] * g * g;
      }
      return hyper.nu_mu + sigma2 * zeta * zeta * s;
    }
    case Baseline::NormalGamma: {
      const double V = std::max(ng_V, 1e-12);
      const double lambda = sample_exponential(1.0, rng);
      const double gamma_inv2 = sample_gamma(2.0, 2.0 * lambda / V, rng);
      double s = 0.0;
      for (Eigen::Index l = 0; l < p; ++l) s += x[l] * x[l] * sample_gamma(lambda, 2.0 / gamma_inv2, rng);
      return hyper.nu_mu + s;
    }
    case Baseline::NormalFull: {
      // x~'Sigma x~ with Sigma^{-1} ~ Wishart(df, scale I) equals
      // (|x~|^2 / scale) / chi2(df - p).
      const double norm2 = 1.0 + x.squaredNorm();
      const double chi_df = hyper.wishart_df(p) - static_cast<double>(p);
      const double chi2 = sample_gamma(0.5 * chi_df, 2.0, rng);
      return hyper.normalfull_eta_var * norm2 + norm2 / hyper.normalfull_wishart_scale / chi2;
    }
  }
  return 0.0;
}

std::vector<double> predictive_density_grid(const std::vector<double>& ys, const Eigen::VectorXd& x,
                                            const PosteriorDraws& draws, const Hyperparams& hyper,
                                            int mc_g0_draws, std::uint64_t seed) {
  require_draws(draws);
  if (mc_g0_draws < 1) throw InvalidParameter("mc_g0_draws must be positive");
  RngStream rng(seed);
  std::vector<double> out(ys.size(), 0.0);
  std::vector<double> g0_var(mc_g0_draws);
  for (const auto& draw : draws.draws) {
    const UrnWeights w = urn_allocation_logprobs(x, draw, hyper);
    const double p_new = w.new_cluster_prob();
    if (p_new > 0.0) {
      for (auto& v : g0_var)
        v = sample_g0_fit_variance(x, hyper, draw.sigma2, draws.meta.ng_V, rng) + draw.sigma2;
    }
    const auto probs = w.cluster_probs();
    for (std::size_t k = 0; k < ys.size(); ++k) {
      double f = 0.0;
      for (std::size_t j = 0; j < draw.clusters.size(); ++j) {
        if (probs[j] == 0.0) continue;
        f += probs[j] * std::exp(log_normal_pdf(ys[k], fit_value(x, draw.clusters[j]), draw.sigma2));
      }
      if (p_new > 0.0) {
        double f0 = 0.0;
        for (double v : g0_var) f0 += std::exp(log_normal_pdf(ys[k], 0.0, v));
        f += p_new * f0 / static_cast<double>(mc_g0_draws);
      }
      out[k] += f;
    }
  }
  for (auto& v : out) v /= static_cast<double>(draws.size());
  return out;
}

double predictive_density(double y, const Eigen::VectorXd& x, const PosteriorDraws& draws,
                          const Hyperparams& hyper, int mc_g0_draws, std::uint64_t seed) {
  return predictive_density_grid({y}, x, draws, hyper, mc_g0_draws, seed)[0];
}

}  // namespace dpmreg
