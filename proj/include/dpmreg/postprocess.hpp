#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dpmreg/model.hpp"
#include "dpmreg/rng.hpp"

namespace dpmreg {

// Variation of information, natural log.
double vi_distance(const Partition& a, const Partition& b);
double adjusted_rand_index(const Partition& a, const Partition& b);

// (1/S) sum_s VI(candidate, samples[s]).
double mean_vi_loss(const Partition& candidate, const std::vector<Partition>& samples);

struct ClusterEstimate {
  Partition partition;
  int num_clusters = 0;
  double mean_vi_loss = 0.0;
};

struct GreedyViOptions {
  int max_K = 0;    // 0 means n
  int sweeps = 50;
  // Besides the last sample, also start from this many of the lowest-loss
  // distinct samples and from the one-cluster / all-singleton partitions.
  int extra_sample_starts = 10;
};

ClusterEstimate greedy_vi_estimate(const std::vector<Partition>& samples, const GreedyViOptions& opts,
                                   RngStream& rng);

std::vector<Partition> draw_partitions(const PosteriorDraws& draws);

// For each draw and each estimated cluster, the draw label holding the
// plurality of that cluster's members (ties go to the smaller label).
std::vector<std::vector<int>> match_clusters(const PosteriorDraws& draws, const Partition& estimate);

struct SelectionReport {
  Eigen::MatrixXd P;                                        // n x p
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> selected;  // P <= threshold
  double threshold = 0.5;
  std::vector<Eigen::VectorXd> beta_medians;                // per estimated cluster
  long skipped = 0;  // (draw, cluster) pairs without a match
};

SelectionReport sn_select(const PosteriorDraws& draws, const ClusterEstimate& estimate,
                          double p_star = 0.5);

// Per estimated cluster, the coordinate-wise posterior median of beta over
// the matched draws.
std::vector<Eigen::VectorXd> cluster_beta_medians(const PosteriorDraws& draws,
                                                  const Partition& estimate);

struct PredictionErrors {
  double l1 = 0.0;
  double l2 = 0.0;
};
PredictionErrors prediction_errors(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred);

// (1/n) sum_i (1/p) |median_{d_i} - beta_true_i|^2.
double ase(const std::vector<Eigen::VectorXd>& beta_medians, const Partition& estimate,
           const Eigen::MatrixXd& true_betas);
double ase(const PosteriorDraws& draws, const ClusterEstimate& estimate,
           const Eigen::MatrixXd& true_betas);

struct AucResult {
  double value = 0.0;
  int skipped_rows = 0;
};
// Row-wise AUC of scores 1 - P against the truth labels, averaged over rows
// that have both classes.
AucResult a_auc_detail(const Eigen::MatrixXd& P,
                       const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& truth_nonzero);
double a_auc(const Eigen::MatrixXd& P,
             const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& truth_nonzero);
// AUC of one score vector (higher = more relevant), ties count one half.
double auc(const Eigen::VectorXd& scores, const std::vector<bool>& labels);

}  // namespace dpmreg
