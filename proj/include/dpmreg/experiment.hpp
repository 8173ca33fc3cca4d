#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dpmreg/model.hpp"
#include "dpmreg/postprocess.hpp"
#include "dpmreg/sampler.hpp"

namespace dpmreg {

// Worker count from DPMREG_THREADS (default 1).
int threads_from_env();

// Runs body(k) for k in [0, count) on up to `threads` workers. The first
// exception thrown by any body is rethrown after all workers stop.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body);

struct ReplicateSpec {
  int n = 200;
  int p = 50;
  int J = 4;
  int n_test = 100;
  std::uint64_t data_seed = 1;
  ChainConfig chain;
  Hyperparams hyper;
  GreedyViOptions vi;
  double p_star = 0.5;
  int threads = 1;
};

struct ReplicateMetrics {
  double l1 = 0.0;
  double l2 = 0.0;
  double ari = 0.0;
  int j_hat = 0;
  double ase = 0.0;
  double a_auc = 0.0;
  double vi_loss = 0.0;
  double seconds = 0.0;
};

// simulate -> fit -> predict the test set -> cluster, select and score.
ReplicateMetrics run_simulation_replicate(const ReplicateSpec& spec);

// ---- cross-validation ----

// fold[i] in [0, k): a seeded shuffle dealt round-robin.
std::vector<int> fold_assignment(int n, int k, std::uint64_t seed);

struct FoldResult {
  int fold = 0;
  Baseline baseline = Baseline::Horseshoe;
  int n_train = 0;
  int n_test = 0;
  double l1 = 0.0;  // normalized response scale when normalizing
  double l2 = 0.0;
};

struct CvConfig {
  int folds = 5;
  std::uint64_t seed = 1;
  std::vector<Baseline> baselines{Baseline::Horseshoe};
  ChainConfig chain;
  Hyperparams hyper;
  bool normalize = true;
  int threads = 1;
};

std::vector<FoldResult> run_cv(const Dataset& data, const CvConfig& cfg);

// ---- Table-1 reproduction ----

struct Condition {
  int n = 0;
  int p = 0;
  int J = 0;
  std::string label() const;  // "200x50x4"
};
Condition parse_condition(const std::string& text);

struct Table1Config {
  std::vector<Condition> conditions;
  std::vector<Baseline> baselines{Baseline::Horseshoe};
  int reps = 3;
  std::uint64_t seed = 1;
  ChainConfig chain;
  Hyperparams hyper;
  double time_budget_seconds = 0.0;  // 0 means unlimited
  int threads = 1;
};

struct Table1Record {
  Condition condition;
  Baseline baseline = Baseline::Horseshoe;
  int rep = 0;
  ReplicateMetrics metrics;
};

struct Table1Summary {
  Condition condition;
  Baseline baseline = Baseline::Horseshoe;
  std::string metric;
  double mean = 0.0;
  double sd = 0.0;
  double se = 0.0;
  int reps_completed = 0;
  bool partial = false;
};

struct Table1Result {
  std::vector<Table1Record> records;
  std::vector<Table1Summary> summary;
  bool partial = false;
};

Table1Result run_table1(const Table1Config& cfg,
                        const std::function<void(const Table1Record&)>& progress = {});

// Seeds shared by every baseline of one (condition, rep).
std::uint64_t replicate_data_seed(std::uint64_t base, const Condition& c, int rep);
std::uint64_t replicate_chain_seed(std::uint64_t base, const Condition& c, int rep);

}  // namespace dpmreg
