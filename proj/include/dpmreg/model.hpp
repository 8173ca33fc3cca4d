#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dpmreg/rng.hpp"

namespace dpmreg {

enum class Baseline {
  Horseshoe,
  NormalGamma,
  NormalFull,
  // Single-cluster horseshoe regression (no mixture); linear benchmark.
  HorseshoeLinear,
};

std::string to_string(Baseline baseline);
// Accepts "hs", "ng", "n", "hs-linear".
Baseline parse_baseline(const std::string& name);

struct ColumnScaling {
  double mean = 0.0;
  double sd = 1.0;
};

struct NormState {
  ColumnScaling response;
  std::vector<ColumnScaling> covariates;
};

struct Dataset {
  Eigen::VectorXd y;
  Eigen::MatrixXd X;  // n x p, row i is observation i
  std::vector<std::string> column_names;
  std::string response_name = "y";
  std::optional<NormState> norm_state;

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }

  // Throws DataError on shape mismatch, n < 2, p < 1, non-finite entries or
  // a norm_state with non-positive sd.
  void validate() const;
};

struct Hyperparams {
  // Normal-inverse-gamma baseline for the covariate means and variances.
  double n0 = 0.1;
  double m0 = 0.0;
  double nu0 = 2.0;
  double s0sq = 2.0;
  // sigma^2 ~ InverseGamma(alpha0, theta0).
  double alpha0 = 2.0;
  double theta0 = 2.0;
  // DP mass alpha ~ Gamma(alpha_shape, alpha_scale).
  double alpha_shape = 2.0;
  double alpha_scale = 2.0;
  // Intercept prior variance.
  double nu_mu = 100.0;
  Baseline baseline = Baseline::Horseshoe;
  double normalfull_eta_var = 100.0;
  std::optional<double> normalfull_wishart_df;  // defaults to p + 1
  double normalfull_wishart_scale = 10.0;

  double wishart_df(Eigen::Index p) const;
  void validate() const;
};

struct HsLocals {
  Eigen::VectorXd gamma2;  // local scales, squared
  double zeta2 = 1.0;      // global scale, squared
  Eigen::VectorXd nu;      // auxiliaries of gamma2
  double xi = 1.0;         // auxiliary of zeta2
};

struct NgLocals {
  double lambda = 1.0;      // shape of the psi prior
  double gamma_inv2 = 1.0;  // gamma^{-2}
  Eigen::VectorXd psi;      // local variances of the slopes
};

struct ClusterParams {
  double mu = 0.0;
  Eigen::VectorXd beta;
  Eigen::VectorXd m;
  Eigen::VectorXd tau;
  std::variant<std::monostate, HsLocals, NgLocals> locals;
};

// Shared prior over all clusters' (mu, beta) under the NormalFull baseline.
struct NormalGlobals {
  Eigen::VectorXd eta;
  Eigen::MatrixXd precision;  // Sigma^{-1}
};

struct MixtureState {
  std::vector<ClusterParams> clusters;  // index j = label j (0-based), size N
  std::vector<double> v;                // stick fractions
  std::vector<double> w;                // stick weights
  double remaining_mass = 1.0;          // prod_j (1 - v_j)
  Eigen::VectorXd u;                    // slice variables
  std::vector<int> d;                   // allocations, 0-based labels
  double sigma2 = 1.0;
  double alpha = 1.0;
  double ng_V = 0.0;
  std::optional<NormalGlobals> normal;

  // Largest occupied label + 1 (the paper's M, as a count).
  int occupied_extent() const;
  int truncation() const { return static_cast<int>(clusters.size()); }
  int num_occupied() const;
};

// Canonical clustering: labels 0..K-1 in order of first appearance.
class Partition {
 public:
  Partition() = default;
  explicit Partition(std::span<const int> labels);

  const std::vector<int>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  int num_clusters() const { return num_clusters_; }
  std::vector<int> cluster_sizes() const;

  friend bool operator==(const Partition&, const Partition&) = default;

 private:
  std::vector<int> labels_;
  int num_clusters_ = 0;
};

struct ClusterDraw {
  double mu = 0.0;
  Eigen::VectorXd beta;
  Eigen::VectorXd m;    // empty when covariate params are not stored
  Eigen::VectorXd tau;  // empty when covariate params are not stored
};

// One retained iteration. labels are canonical and index into clusters.
struct PosteriorDraw {
  std::vector<int> labels;
  std::vector<ClusterDraw> clusters;
  double sigma2 = 1.0;
  double alpha = 1.0;  // 0 for the single-cluster linear benchmark

  Partition partition() const { return Partition(labels); }
};

struct DrawsMeta {
  int iterations = 0;
  int burn_in = 0;
  int thin = 1;
  std::uint64_t seed = 0;
  Baseline baseline = Baseline::Horseshoe;
  double ng_V = 0.0;
  bool has_covariate_params = true;
};

struct PosteriorDraws {
  std::vector<PosteriorDraw> draws;
  DrawsMeta meta;
  int n = 0;
  int p = 0;

  std::size_t size() const { return draws.size(); }
  // Throws on empty draws or label/cluster inconsistencies.
  void validate() const;
};

// Draws (mu, beta, m, tau) and the baseline locals from the prior.
ClusterParams draw_cluster_from_prior(const Hyperparams& hyper, Eigen::Index p, double sigma2,
                                      double ng_V, const NormalGlobals* normal, RngStream& rng);

MixtureState init_state(const Dataset& data, const Hyperparams& hyper, RngStream& rng);

double compute_ng_V(const Dataset& data);

// E[number of clusters | alpha, n] = sum_i alpha / (alpha + i - 1).
double expected_clusters_prior(double alpha, long n);

}  // namespace dpmreg
