#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "dpmreg/model.hpp"

namespace dpmreg {

// log f0x(x): the covariate marginal under the Normal-inverse-gamma baseline,
// a product of Student-t densities.
double marginal_x_prior_logpdf(const Eigen::VectorXd& x, const Hyperparams& hyper);

// Pólya-urn allocation masses for a new covariate profile under one draw, in
// log space. log_b normalizes them.
struct UrnWeights {
  double log_new_cluster = 0.0;
  std::vector<double> log_per_cluster;
  double log_b = 0.0;

  double new_cluster_prob() const;
  std::vector<double> cluster_probs() const;
};

UrnWeights urn_allocation_logprobs(const Eigen::VectorXd& x, const PosteriorDraw& draw,
                                   const Hyperparams& hyper);

// E[Y | x] averaged over draws.
double predictive_expectation(const Eigen::VectorXd& x, const PosteriorDraws& draws,
                              const Hyperparams& hyper);

// Row-wise predictive_expectation; rows are split over `threads` workers.
Eigen::VectorXd predictive_expectations(const Eigen::MatrixXd& X, const PosteriorDraws& draws,
                                        const Hyperparams& hyper, int threads = 1);

inline constexpr int kDefaultMcG0Draws = 256;

// Predictive density at each y for a fixed x. The baseline draws behind the
// new-cluster term are shared across the grid and seeded by `seed`.
std::vector<double> predictive_density_grid(const std::vector<double>& ys, const Eigen::VectorXd& x,
                                            const PosteriorDraws& draws, const Hyperparams& hyper,
                                            int mc_g0_draws = kDefaultMcG0Draws,
                                            std::uint64_t seed = 0);

double predictive_density(double y, const Eigen::VectorXd& x, const PosteriorDraws& draws,
                          const Hyperparams& hyper, int mc_g0_draws = kDefaultMcG0Draws,
                          std::uint64_t seed = 0);

// Variance of mu + x'beta under the baseline for one set of locals drawn from
// their priors (mean is zero). NormalFull integrates eta and Sigma over their
// hyperpriors.
double sample_g0_fit_variance(const Eigen::VectorXd& x, const Hyperparams& hyper, double sigma2,
                              double ng_V, RngStream& rng);

}  // namespace dpmreg
