#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "dpmreg/model.hpp"
#include "dpmreg/rng.hpp"

namespace dpmreg {

struct ChainConfig {
  int iterations = 5000;
  int burn_in = 2000;
  int thin = 1;
  std::uint64_t seed = 1;
  bool store_covariate_params = true;
  // Largest allowed truncation N; 0 means default_truncation_cap(n).
  int truncation_cap = 0;

  void validate() const;
};

// 10 (n + 50). The uniform start puts most observations in their own
// cluster, which drives alpha and N well past n during the first sweeps.
inline int default_truncation_cap(Eigen::Index n) { return 10 * (static_cast<int>(n) + 50); }

struct TraceRow {
  int iteration = 0;
  double sigma2 = 0.0;
  double alpha = 0.0;
  int num_clusters = 0;
  double log_likelihood = 0.0;
};

using TraceSink = std::function<void(const TraceRow&)>;

// Rows of one cluster, with a leading column of ones already prepended.
struct ClusterMembers {
  Eigen::MatrixXd design;  // n_j x (p + 1)
  Eigen::VectorXd y;
  Eigen::MatrixXd X;       // n_j x p (covariates only)
};

std::vector<ClusterMembers> gather_members(const MixtureState& state, const Dataset& data,
                                           int num_labels);

// Step 1: sticks, slices and the truncation level. Clusters beyond the
// occupied extent are dropped; the caller extends state.clusters to the new
// truncation with prior draws.
void update_weights_and_slices(MixtureState& state, RngStream& rng, int truncation_cap);

// Horseshoe locals (augmented half-Cauchy hierarchy), one conditional each.
namespace hs {
double draw_nu(double gamma2, RngStream& rng);
double draw_xi(double zeta2, RngStream& rng);
double draw_gamma2(double nu, double beta, double zeta2, double sigma2, RngStream& rng);
double draw_zeta2(double xi, const Eigen::VectorXd& beta, const Eigen::VectorXd& gamma2,
                  double sigma2, RngStream& rng);
}  // namespace hs

void hs_update_locals(ClusterParams& cluster, double sigma2, RngStream& rng);
void hs_update_coefficients(ClusterParams& cluster, const ClusterMembers& members, double sigma2,
                            double nu_mu, RngStream& rng);

namespace ng {
double log_lambda_conditional(double lambda, double gamma_inv2, const Eigen::VectorXd& psi);
double draw_lambda(double lambda, double gamma_inv2, const Eigen::VectorXd& psi, RngStream& rng);
double draw_gamma_inv2(double lambda, const Eigen::VectorXd& psi, double V, RngStream& rng);
double draw_psi(double lambda, double gamma_inv2, double beta, RngStream& rng);

enum class Branch { Auto, Precision, Svd };

// Mean and covariance of the low-rank (SVD) representation of the (mu, beta)
// conditional; exposed for verification.
struct GaussianMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};
GaussianMoments svd_branch_moments(const Eigen::VectorXd& prior_var, const ClusterMembers& members,
                                   double sigma2);
}  // namespace ng

void ng_update_locals(ClusterParams& cluster, double V, RngStream& rng);
void ng_update_coefficients(ClusterParams& cluster, const ClusterMembers& members, double sigma2,
                            double nu_mu, RngStream& rng, ng::Branch branch = ng::Branch::Auto);

// Conjugate updates for the Normal baseline: each occupied cluster's
// (mu, beta) given (eta, Sigma), then eta and Sigma^{-1} given those
// coefficient vectors. occupied[j] marks clusters with members.
void normalfull_update_coefficients_and_hyper(MixtureState& state,
                                              const std::vector<ClusterMembers>& members,
                                              const std::vector<char>& occupied,
                                              const Hyperparams& hyper, RngStream& rng);
void normalfull_update_hyper(NormalGlobals& globals, const std::vector<Eigen::VectorXd>& coefs,
                             const Hyperparams& hyper, RngStream& rng);

void update_covariate_params(ClusterParams& cluster, const Eigen::MatrixXd& member_X,
                             const Hyperparams& hyper, RngStream& rng);

// Log allocation weights of observation i over labels 0..N-1; -inf where
// w_j <= u_i.
std::vector<double> allocation_log_weights(const MixtureState& state, const Dataset& data,
                                           Eigen::Index i);
void update_allocations(MixtureState& state, const Dataset& data, RngStream& rng);

void update_sigma2(MixtureState& state, const Dataset& data, const Hyperparams& hyper,
                   RngStream& rng);
void update_alpha(MixtureState& state, int num_clusters, Eigen::Index n, const Hyperparams& hyper,
                  RngStream& rng);

// Complete-data log likelihood of (y, X) under the current allocation.
double complete_log_likelihood(const MixtureState& state, const Dataset& data);

// One full sweep (Steps 1 to 5) in place.
void sweep(MixtureState& state, const Dataset& data, const Hyperparams& hyper, RngStream& rng,
           int truncation_cap);

PosteriorDraw snapshot(const MixtureState& state, bool store_covariate_params, bool linear);

PosteriorDraws run_chain(const Dataset& data, const Hyperparams& hyper, const ChainConfig& cfg,
                         const TraceSink& trace = {});

}  // namespace dpmreg
