#include "dpmreg/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "dpmreg/errors.hpp"

namespace dpmreg {

namespace {

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

void require_same_length(const Partition& a, const Partition& b) {
  if (a.size() != b.size()) throw InvalidParameter("partitions have different lengths");
}

// Dense contingency table, row-major Ka x Kb.
std::vector<int> contingency(const Partition& a, const Partition& b) {
  const int kb = b.num_clusters();
  std::vector<int> table(static_cast<std::size_t>(a.num_clusters()) * kb, 0);
  for (std::size_t i = 0; i < a.size(); ++i) ++table[a.labels()[i] * kb + b.labels()[i]];
  return table;
}

double sum_xlogx(const std::vector<int>& counts) {
  double s = 0.0;
  for (int c : counts) s += xlogx(c);
  return s;
}

double choose2(double x) { return 0.5 * x * (x - 1.0); }

}  // namespace

double vi_distance(const Partition& a, const Partition& b) {
  require_same_length(a, b);
  if (a.size() == 0) return 0.0;
  const double n = static_cast<double>(a.size());
  const double v = sum_xlogx(a.cluster_sizes()) + sum_xlogx(b.cluster_sizes()) -
                   2.0 * sum_xlogx(contingency(a, b));
  return std::max(0.0, v / n);
}

double adjusted_rand_index(const Partition& a, const Partition& b) {
  require_same_length(a, b);
  double index = 0.0;
  for (int c : contingency(a, b)) index += choose2(c);
  double sa = 0.0, sb = 0.0;
  for (int c : a.cluster_sizes()) sa += choose2(c);
  for (int c : b.cluster_sizes()) sb += choose2(c);
  const double expected = sa * sb / choose2(static_cast<double>(a.size()));
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return a == b ? 1.0 : 0.0;
  return (index - expected) / (max_index - expected);
}

double mean_vi_loss(const Partition& candidate, const std::vector<Partition>& samples) {
  if (samples.empty()) throw InvalidParameter("mean VI loss needs at least one sample");
  double s = 0.0;
  for (const auto& p : samples) s += vi_distance(candidate, p);
  return s / static_cast<double>(samples.size());
}

// ---- greedy VI ----

namespace {

struct WeightedSample {
  Partition partition;
  double weight;  // multiplicity / S
  double sum_f_sizes;
};

// Local search state. Working labels are slots 0..max_K-1; per sample s the
// contingency counts n^s_{c,k} sit in tables[s][c * K_s + k].
class ViSearch {
 public:
  ViSearch(const std::vector<WeightedSample>& samples, int n, int max_K)
      : samples_(samples), n_(n), max_K_(max_K), f_(n + 2) {
    for (int m = 0; m <= n + 1; ++m) f_[m] = xlogx(m);
  }

  void reset(const std::vector<int>& labels) {
    labels_ = labels;
    sizes_.assign(max_K_, 0);
    for (int c : labels_) ++sizes_[c];
    tables_.assign(samples_.size(), {});
    for (std::size_t s = 0; s < samples_.size(); ++s) {
      const auto& sl = samples_[s].partition.labels();
      const int ks = samples_[s].partition.num_clusters();
      auto& t = tables_[s];
      t.assign(static_cast<std::size_t>(max_K_) * ks, 0);
      for (int i = 0; i < n_; ++i) ++t[labels_[i] * ks + sl[i]];
    }
  }

  // n * (mean loss) of the current labels.
  double scaled_loss() const {
    double v = 0.0;
    for (int a : sizes_) v += f_[a];
    for (std::size_t s = 0; s < samples_.size(); ++s) {
      double cross = 0.0;
      for (int c : tables_[s]) cross += f_[c];
      v += samples_[s].weight * (samples_[s].sum_f_sizes - 2.0 * cross);
    }
    return v;
  }

  double move_delta(int i, int to) const {
    const int from = labels_[i];
    double d = f_[sizes_[from] - 1] - f_[sizes_[from]] + f_[sizes_[to] + 1] - f_[sizes_[to]];
    double cross = 0.0;
    for (std::size_t s = 0; s < samples_.size(); ++s) {
      const int ks = samples_[s].partition.num_clusters();
      const int k = samples_[s].partition.labels()[i];
      const int a = tables_[s][from * ks + k];
      const int b = tables_[s][to * ks + k];
      cross += samples_[s].weight * (f_[a - 1] - f_[a] + f_[b + 1] - f_[b]);
    }
    return d - 2.0 * cross;
  }

  void move(int i, int to) {
    const int from = labels_[i];
    --sizes_[from];
    ++sizes_[to];
    for (std::size_t s = 0; s < samples_.size(); ++s) {
      const int ks = samples_[s].partition.num_clusters();
      const int k = samples_[s].partition.labels()[i];
      --tables_[s][from * ks + k];
      ++tables_[s][to * ks + k];
    }
    labels_[i] = to;
  }

  double merge_delta(int c1, int c2) const {
    double d = f_[sizes_[c1] + sizes_[c2]] - f_[sizes_[c1]] - f_[sizes_[c2]];
    double cross = 0.0;
    for (std::size_t s = 0; s < samples_.size(); ++s) {
      const int ks = samples_[s].partition.num_clusters();
      const auto& t = tables_[s];
      double acc = 0.0;
      for (int k = 0; k < ks; ++k) {
        const int a = t[c1 * ks + k];
        const int b = t[c2 * ks + k];
        acc += f_[a + b] - f_[a] - f_[b];
      }
      cross += samples_[s].weight * acc;
    }
    return d - 2.0 * cross;
  }

  void merge(int into, int from) {
    for (int i = 0; i < n_; ++i)
      if (labels_[i] == from) move(i, into);
  }

  // One pass of single-observation moves in the given order; returns the
  // number of moves made.
  int sweep(const std::vector<int>& order) {
    int moves = 0;
    for (int i : order) {
      const int from = labels_[i];
      int best = -1;
      double best_delta = -1e-12;
      bool tried_empty = false;
      for (int c = 0; c < max_K_; ++c) {
        if (c == from) continue;
        if (sizes_[c] == 0) {
          // All empty slots are equivalent; a singleton gains nothing from one.
          if (tried_empty || sizes_[from] == 1) continue;
          tried_empty = true;
        }
        const double d = move_delta(i, c);
        if (d < best_delta) {
          best_delta = d;
          best = c;
        }
      }
      if (best >= 0) {
        move(i, best);
        ++moves;
      }
    }
    return moves;
  }

  // Applies the best improving merge, if any.
  bool best_merge() {
    int b1 = -1, b2 = -1;
    double best_delta = -1e-12;
    for (int c1 = 0; c1 < max_K_; ++c1) {
      if (sizes_[c1] == 0) continue;
      for (int c2 = c1 + 1; c2 < max_K_; ++c2) {
        if (sizes_[c2] == 0) continue;
        const double d = merge_delta(c1, c2);
        if (d < best_delta) {
          best_delta = d;
          b1 = c1;
          b2 = c2;
        }
      }
    }
    if (b1 < 0) return false;
    merge(b1, b2);
    return true;
  }

  const std::vector<int>& labels() const { return labels_; }

 private:
  const std::vector<WeightedSample>& samples_;
  int n_;
  int max_K_;
  std::vector<double> f_;
  std::vector<int> labels_;
  std::vector<int> sizes_;
  std::vector<std::vector<int>> tables_;
};

// Relabels a partition into at most max_K slots by folding the overflow into
// the last slot.
std::vector<int> fit_labels(const Partition& p, int max_K) {
  std::vector<int> out(p.labels());
  for (int& c : out) c = std::min(c, max_K - 1);
  return out;
}

}  // namespace

ClusterEstimate greedy_vi_estimate(const std::vector<Partition>& samples, const GreedyViOptions& opts,
                                   RngStream& rng) {
  if (samples.empty()) throw InvalidParameter("greedy VI needs at least one sample");
  const int n = static_cast<int>(samples.front().size());
  for (const auto& s : samples)
    if (static_cast<int>(s.size()) != n) throw InvalidParameter("samples have different lengths");
  if (opts.sweeps < 1) throw InvalidParameter("sweeps must be positive");
  const int max_K = opts.max_K > 0 ? std::min(opts.max_K, n) : n;

  // Distinct partitions with their multiplicities.
  std::map<std::vector<int>, int> counts;
  for (const auto& s : samples) ++counts[s.labels()];
  std::vector<WeightedSample> unique;
  unique.reserve(counts.size());
  const double S = static_cast<double>(samples.size());
  for (const auto& [labels, c] : counts) {
    Partition p(labels);
    unique.push_back({p, c / S, sum_xlogx(p.cluster_sizes())});
  }

  ViSearch search(unique, n, max_K);
  const auto loss_of = [&](const std::vector<int>& labels) {
    search.reset(labels);
    return search.scaled_loss();
  };

  std::vector<std::vector<int>> starts;
  starts.push_back(fit_labels(samples.back(), max_K));
  {
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t u = 0; u < unique.size(); ++u)
      if (unique[u].partition.num_clusters() <= max_K)
        ranked.emplace_back(loss_of(unique[u].partition.labels()), u);
    std::sort(ranked.begin(), ranked.end());
    const std::size_t k = std::min<std::size_t>(ranked.size(), std::max(opts.extra_sample_starts, 1));
    for (std::size_t r = 0; r < k; ++r) starts.push_back(unique[ranked[r].second].partition.labels());
  }
  if (opts.extra_sample_starts > 0) {
    starts.emplace_back(n, 0);
    if (max_K >= n) {
      std::vector<int> singles(n);
      std::iota(singles.begin(), singles.end(), 0);
      starts.push_back(std::move(singles));
    }
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> best_labels;
  double best_loss = std::numeric_limits<double>::infinity();
  for (const auto& start : starts) {
    search.reset(start);
    for (int sweep = 0; sweep < opts.sweeps; ++sweep) {
      std::shuffle(order.begin(), order.end(), rng);
      const int moves = search.sweep(order);
      const bool merged = search.best_merge();
      if (moves == 0 && !merged) break;
    }
    const double loss = search.scaled_loss();
    if (loss < best_loss - 1e-12) {
      best_loss = loss;
      best_labels = search.labels();
    }
  }

  ClusterEstimate out;
  out.partition = Partition(best_labels);
  out.num_clusters = out.partition.num_clusters();
  out.mean_vi_loss = std::max(0.0, best_loss / static_cast<double>(n));
  return out;
}

std::vector<Partition> draw_partitions(const PosteriorDraws& draws) {
  std::vector<Partition> out;
  out.reserve(draws.size());
  for (const auto& d : draws.draws) out.push_back(d.partition());
  return out;
}

// ---- selection ----

std::vector<std::vector<int>> match_clusters(const PosteriorDraws& draws, const Partition& estimate) {
  const int K = estimate.num_clusters();
  std::vector<std::vector<int>> out(draws.size(), std::vector<int>(K, -1));
  for (std::size_t s = 0; s < draws.size(); ++s) {
    const auto& d = draws.draws[s];
    if (d.labels.size() != estimate.size())
      throw InvalidParameter("draw labels and estimate have different lengths");
    const int kd = static_cast<int>(d.clusters.size());
    std::vector<int> overlap(static_cast<std::size_t>(K) * kd, 0);
    for (std::size_t i = 0; i < estimate.size(); ++i) ++overlap[estimate.labels()[i] * kd + d.labels[i]];
    for (int c = 0; c < K; ++c) {
      int best = -1, best_count = 0;
      for (int k = 0; k < kd; ++k) {
        if (overlap[c * kd + k] > best_count) {
          best_count = overlap[c * kd + k];
          best = k;
        }
      }
      out[s][c] = best;
    }
  }
  return out;
}

namespace {

double median(std::vector<double> v) {
  const std::size_t m = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + m, v.end());
  const double hi = v[m];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + m);
  return 0.5 * (lo + hi);
}

// matched[c][l] = beta_l values of estimated cluster c over matched draws.
std::vector<std::vector<std::vector<double>>> matched_betas(const PosteriorDraws& draws,
                                                            const Partition& estimate, long* skipped) {
  const auto match = match_clusters(draws, estimate);
  const int K = estimate.num_clusters();
  const int p = draws.p;
  std::vector<std::vector<std::vector<double>>> out(K, std::vector<std::vector<double>>(p));
  for (std::size_t s = 0; s < draws.size(); ++s) {
    for (int c = 0; c < K; ++c) {
      const int k = match[s][c];
      if (k < 0) {
        if (skipped) ++*skipped;
        continue;
      }
      const auto& beta = draws.draws[s].clusters[k].beta;
      for (int l = 0; l < p; ++l) out[c][l].push_back(beta[l]);
    }
  }
  return out;
}

}  // namespace

std::vector<Eigen::VectorXd> cluster_beta_medians(const PosteriorDraws& draws,
                                                  const Partition& estimate) {
  const auto betas = matched_betas(draws, estimate, nullptr);
  std::vector<Eigen::VectorXd> out;
  for (const auto& cl : betas) {
    Eigen::VectorXd med = Eigen::VectorXd::Constant(draws.p, std::nan(""));
    for (int l = 0; l < draws.p; ++l)
      if (!cl[l].empty()) med[l] = median(cl[l]);
    out.push_back(std::move(med));
  }
  return out;
}

SelectionReport sn_select(const PosteriorDraws& draws, const ClusterEstimate& estimate,
                          double p_star) {
  if (draws.draws.empty()) throw InvalidParameter("selection needs at least one draw");
  if (!(p_star >= 0.0 && p_star <= 1.0)) throw InvalidParameter("p* must lie in [0, 1]");
  const Partition& part = estimate.partition;
  const int n = static_cast<int>(part.size());
  const int p = draws.p;
  SelectionReport rep;
  rep.threshold = p_star;
  const auto betas = matched_betas(draws, part, &rep.skipped);

  Eigen::MatrixXd Pc(part.num_clusters(), p);
  for (int c = 0; c < part.num_clusters(); ++c) {
    Eigen::VectorXd med(p);
    for (int l = 0; l < p; ++l) {
      const auto& v = betas[c][l];
      if (v.empty()) {
        Pc(c, l) = std::nan("");
        med[l] = std::nan("");
        continue;
      }
      const double m = static_cast<double>(v.size());
      const double mean = std::accumulate(v.begin(), v.end(), 0.0) / m;
      double ss = 0.0;
      for (double b : v) ss += (b - mean) * (b - mean);
      const double sd = v.size() > 1 ? std::sqrt(ss / (m - 1.0)) : 0.0;
      const auto inside = std::count_if(v.begin(), v.end(), [sd](double b) { return std::abs(b) <= sd; });
      Pc(c, l) = static_cast<double>(inside) / m;
      med[l] = median(v);
    }
    rep.beta_medians.push_back(std::move(med));
  }
  rep.P.resize(n, p);
  rep.selected.resize(n, p);
  for (int i = 0; i < n; ++i) {
    rep.P.row(i) = Pc.row(part.labels()[i]);
    for (int l = 0; l < p; ++l) rep.selected(i, l) = rep.P(i, l) <= p_star;
  }
  return rep;
}

// ---- metrics ----

PredictionErrors prediction_errors(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred) {
  if (y_true.size() != y_pred.size()) throw InvalidParameter("prediction vectors differ in length");
  if (y_true.size() == 0) throw InvalidParameter("prediction errors need at least one point");
  const Eigen::ArrayXd r = (y_true - y_pred).array();
  return {r.abs().mean(), r.square().mean()};
}

double ase(const std::vector<Eigen::VectorXd>& beta_medians, const Partition& estimate,
           const Eigen::MatrixXd& true_betas) {
  const auto n = static_cast<Eigen::Index>(estimate.size());
  if (true_betas.rows() != n) throw InvalidParameter("true coefficient rows do not match n");
  const double p = static_cast<double>(true_betas.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& med = beta_medians.at(estimate.labels()[i]);
    total += (med - true_betas.row(i).transpose()).squaredNorm() / p;
  }
  return total / static_cast<double>(n);
}

double ase(const PosteriorDraws& draws, const ClusterEstimate& estimate,
           const Eigen::MatrixXd& true_betas) {
  return ase(cluster_beta_medians(draws, estimate.partition), estimate.partition, true_betas);
}

double auc(const Eigen::VectorXd& scores, const std::vector<bool>& labels) {
  if (static_cast<std::size_t>(scores.size()) != labels.size())
    throw InvalidParameter("scores and labels differ in length");
  double credit = 0.0;
  double pairs = 0.0;
  for (Eigen::Index a = 0; a < scores.size(); ++a) {
    if (!labels[a]) continue;
    for (Eigen::Index b = 0; b < scores.size(); ++b) {
      if (labels[b]) continue;
      pairs += 1.0;
      if (scores[a] > scores[b]) credit += 1.0;
      else if (scores[a] == scores[b]) credit += 0.5;
    }
  }
  if (pairs == 0.0) throw InvalidParameter("AUC needs both positive and negative labels");
  return credit / pairs;
}

AucResult a_auc_detail(const Eigen::MatrixXd& P,
                       const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& truth_nonzero) {
  if (P.rows() != truth_nonzero.rows() || P.cols() != truth_nonzero.cols())
    throw InvalidParameter("P and truth matrices differ in shape");
  AucResult out;
  double total = 0.0;
  int used = 0;
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    std::vector<bool> labels(P.cols());
    int pos = 0;
    for (Eigen::Index l = 0; l < P.cols(); ++l) {
      labels[l] = truth_nonzero(i, l);
      pos += labels[l] ? 1 : 0;
    }
    if (pos == 0 || pos == P.cols()) {
      ++out.skipped_rows;
      continue;
    }
    const Eigen::VectorXd scores = (1.0 - P.row(i).array()).matrix().transpose();
    total += auc(scores, labels);
    ++used;
  }
  if (used == 0) throw InvalidParameter("every row lacks one of the two label classes");
  out.value = total / used;
  return out;
}

double a_auc(const Eigen::MatrixXd& P,
             const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& truth_nonzero) {
  return a_auc_detail(P, truth_nonzero).value;
}

}  // namespace dpmreg
