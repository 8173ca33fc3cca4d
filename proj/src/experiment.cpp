#include "dpmreg/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <thread>

#include "dpmreg/errors.hpp"
#include "dpmreg/io.hpp"
#include "dpmreg/predict.hpp"
#include "dpmreg/simulate.hpp"

namespace dpmreg {

int threads_from_env() {
  const char* v = std::getenv("DPMREG_THREADS");
  if (v == nullptr || *v == '\0') return 1;
  char* end = nullptr;
  const long t = std::strtol(v, &end, 10);
  if (*end != '\0' || t < 1) throw InvalidParameter("DPMREG_THREADS must be a positive integer");
  return static_cast<int>(std::min<long>(t, 256));
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || count <= 1) {
    for (std::size_t k = 0; k < count; ++k) body(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  const auto run = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= count) return;
      {
        std::lock_guard lock(mu);
        if (error) return;
      }
      try {
        body(k);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(workers, count); ++t) pool.emplace_back(run);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

ReplicateMetrics run_simulation_replicate(const ReplicateSpec& spec) {
  const auto t0 = std::chrono::steady_clock::now();
  const TrainTest tt = generate_paper_train_test(spec.n, spec.p, spec.J, spec.data_seed, spec.n_test);
  const PosteriorDraws draws = run_chain(tt.train.data, spec.hyper, spec.chain);

  ReplicateMetrics out;
  const Eigen::VectorXd pred = predictive_expectations(tt.test.data.X, draws, spec.hyper, spec.threads);
  const auto err = prediction_errors(tt.test.data.y, pred);
  out.l1 = err.l1;
  out.l2 = err.l2;

  ClusterEstimate est;
  if (spec.hyper.baseline == Baseline::HorseshoeLinear) {
    est.partition = Partition(std::vector<int>(spec.n, 0));
    est.num_clusters = 1;
  } else {
    RngStream vi_rng(spec.chain.seed, 7);
    est = greedy_vi_estimate(draw_partitions(draws), spec.vi, vi_rng);
  }
  out.vi_loss = est.mean_vi_loss;
  out.j_hat = est.num_clusters;
  out.ari = adjusted_rand_index(est.partition, Partition(tt.train.truth.labels));

  const SelectionReport sel = sn_select(draws, est, spec.p_star);
  out.ase = ase(sel.beta_medians, est.partition, tt.train.truth.true_betas());
  out.a_auc = a_auc(sel.P, tt.train.truth.true_nonzero());
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// ---- cross-validation ----

std::vector<int> fold_assignment(int n, int k, std::uint64_t seed) {
  if (k < 2) throw InvalidParameter("cross-validation needs at least two folds");
  if (k > n) throw DataError("more folds than rows: some folds would be empty");
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  RngStream rng(seed, 11);
  // Fisher-Yates with the stream's own index draw, so the order does not
  // depend on the standard library's shuffle.
  for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(static_cast<std::size_t>(i) + 1)]);
  std::vector<int> fold(n);
  for (int i = 0; i < n; ++i) fold[perm[i]] = i % k;
  return fold;
}

namespace {

Dataset subset(const Dataset& data, const std::vector<int>& rows) {
  Dataset out;
  out.column_names = data.column_names;
  out.response_name = data.response_name;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), data.p());
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.X.row(r) = data.X.row(rows[r]);
    out.y[r] = data.y[rows[r]];
  }
  return out;
}

}  // namespace

std::vector<FoldResult> run_cv(const Dataset& data, const CvConfig& cfg) {
  data.validate();
  const int n = static_cast<int>(data.n());
  const auto fold = fold_assignment(n, cfg.folds, cfg.seed);
  const std::size_t B = cfg.baselines.size();
  std::vector<FoldResult> results(static_cast<std::size_t>(cfg.folds) * B);

  parallel_for(results.size(), cfg.threads, [&](std::size_t job) {
    const int f = static_cast<int>(job / B);
    const Baseline baseline = cfg.baselines[job % B];
    std::vector<int> train_rows, test_rows;
    for (int i = 0; i < n; ++i) (fold[i] == f ? test_rows : train_rows).push_back(i);
    Dataset train = subset(data, train_rows);
    Dataset test = subset(data, test_rows);
    if (cfg.normalize) {
      const NormState ns = fit_normalization(train);
      train = normalize(train, ns);
      test = normalize(test, ns);
    }
    Hyperparams hyper = cfg.hyper;
    hyper.baseline = baseline;
    ChainConfig chain = cfg.chain;
    chain.seed = splitmix64(cfg.seed ^ splitmix64(static_cast<std::uint64_t>(f) + 1));
    const PosteriorDraws draws = run_chain(train, hyper, chain);
    const Eigen::VectorXd pred = predictive_expectations(test.X, draws, hyper);
    const auto err = prediction_errors(test.y, pred);
    auto& r = results[job];
    r.fold = f;
    r.baseline = baseline;
    r.n_train = static_cast<int>(train_rows.size());
    r.n_test = static_cast<int>(test_rows.size());
    r.l1 = err.l1;
    r.l2 = err.l2;
  });
  return results;
}

// ---- Table 1 ----

std::string Condition::label() const {
  return std::to_string(n) + "x" + std::to_string(p) + "x" + std::to_string(J);
}

Condition parse_condition(const std::string& text) {
  Condition c;
  char x1 = 0, x2 = 0;
  std::istringstream is(text);
  if (!(is >> c.n >> x1 >> c.p >> x2 >> c.J) || x1 != 'x' || x2 != 'x' || !is.eof() || c.n < 2 ||
      c.p < 1 || c.J < 1) {
    throw InvalidParameter("condition must look like NxPxJ, e.g. 200x50x4 (got '" + text + "')");
  }
  return c;
}

std::uint64_t replicate_data_seed(std::uint64_t base, const Condition& c, int rep) {
  std::uint64_t h = splitmix64(base);
  for (std::uint64_t v : {std::uint64_t(c.n), std::uint64_t(c.p), std::uint64_t(c.J), std::uint64_t(rep)})
    h = splitmix64(h ^ v);
  return h;
}

std::uint64_t replicate_chain_seed(std::uint64_t base, const Condition& c, int rep) {
  return splitmix64(replicate_data_seed(base, c, rep) ^ 0x9e3779b97f4a7c15ULL);
}

namespace {

struct Stat {
  const char* name;
  double (*get)(const ReplicateMetrics&);
};

const Stat kStats[] = {
    {"L1", [](const ReplicateMetrics& m) { return m.l1; }},
    {"L2", [](const ReplicateMetrics& m) { return m.l2; }},
    {"ARI", [](const ReplicateMetrics& m) { return m.ari; }},
    {"J_hat", [](const ReplicateMetrics& m) { return static_cast<double>(m.j_hat); }},
    {"ASE", [](const ReplicateMetrics& m) { return m.ase; }},
    {"A-AUC", [](const ReplicateMetrics& m) { return m.a_auc; }},
};

}  // namespace

Table1Result run_table1(const Table1Config& cfg,
                        const std::function<void(const Table1Record&)>& progress) {
  if (cfg.reps < 1) throw InvalidParameter("reps must be positive");
  if (cfg.conditions.empty() || cfg.baselines.empty())
    throw InvalidParameter("at least one condition and one baseline are required");

  struct Job {
    std::size_t cond;
    std::size_t base;
    int rep;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < cfg.conditions.size(); ++c)
    for (int r = 0; r < cfg.reps; ++r)
      for (std::size_t b = 0; b < cfg.baselines.size(); ++b) jobs.push_back({c, b, r});

  std::vector<std::optional<Table1Record>> done(jobs.size());
  const auto start = std::chrono::steady_clock::now();
  std::mutex mu;
  parallel_for(jobs.size(), cfg.threads, [&](std::size_t k) {
    if (cfg.time_budget_seconds > 0.0) {
      const double elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (elapsed > cfg.time_budget_seconds) return;
    }
    const Job& job = jobs[k];
    const Condition& cond = cfg.conditions[job.cond];
    ReplicateSpec spec;
    spec.n = cond.n;
    spec.p = cond.p;
    spec.J = cond.J;
    spec.data_seed = replicate_data_seed(cfg.seed, cond, job.rep);
    spec.chain = cfg.chain;
    spec.chain.seed = replicate_chain_seed(cfg.seed, cond, job.rep);
    spec.hyper = cfg.hyper;
    spec.hyper.baseline = cfg.baselines[job.base];
    Table1Record rec{cond, spec.hyper.baseline, job.rep, run_simulation_replicate(spec)};
    std::lock_guard lock(mu);
    if (progress) progress(rec);
    done[k] = std::move(rec);
  });

  Table1Result out;
  for (auto& r : done)
    if (r) out.records.push_back(*r);
  out.partial = out.records.size() < jobs.size();

  for (std::size_t c = 0; c < cfg.conditions.size(); ++c) {
    for (std::size_t b = 0; b < cfg.baselines.size(); ++b) {
      std::vector<const ReplicateMetrics*> ms;
      for (std::size_t k = 0; k < jobs.size(); ++k)
        if (jobs[k].cond == c && jobs[k].base == b && done[k]) ms.push_back(&done[k]->metrics);
      for (const Stat& st : kStats) {
        Table1Summary s;
        s.condition = cfg.conditions[c];
        s.baseline = cfg.baselines[b];
        s.metric = st.name;
        s.reps_completed = static_cast<int>(ms.size());
        s.partial = s.reps_completed < cfg.reps;
        if (!ms.empty()) {
          const double m = static_cast<double>(ms.size());
          for (const auto* x : ms) s.mean += st.get(*x);
          s.mean /= m;
          double ss = 0.0;
          for (const auto* x : ms) ss += (st.get(*x) - s.mean) * (st.get(*x) - s.mean);
          s.sd = ms.size() > 1 ? std::sqrt(ss / (m - 1.0)) : 0.0;
          s.se = s.sd / std::sqrt(m);
        } else {
          s.mean = s.sd = s.se = std::nan("");
        }
        out.summary.push_back(std::move(s));
      }
    }
  }
  return out;
}

}  // namespace dpmreg
