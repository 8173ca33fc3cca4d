#include "dpmreg/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "dpmreg/errors.hpp"
#include "dpmreg/experiment.hpp"
#include "dpmreg/io.hpp"
#include "dpmreg/postprocess.hpp"
#include "dpmreg/predict.hpp"
#include "dpmreg/sampler.hpp"
#include "dpmreg/simulate.hpp"

namespace fs = std::filesystem;

namespace dpmreg {

namespace {

struct HyperFlags {
  Hyperparams hyper;
  std::string baseline = "hs";
  double alpha_rate = 0.0;  // overrides alpha_scale when set
};

void add_hyper_options(CLI::App* cmd, HyperFlags& h) {
  cmd->add_option("--n0", h.hyper.n0, "covariate mean prior sample size");
  cmd->add_option("--m0", h.hyper.m0, "covariate mean prior location");
  cmd->add_option("--nu0", h.hyper.nu0, "covariate variance prior df");
  cmd->add_option("--s0sq", h.hyper.s0sq, "covariate variance prior scale");
  cmd->add_option("--sigma-shape", h.hyper.alpha0, "inverse-gamma shape of sigma^2");
  cmd->add_option("--sigma-scale", h.hyper.theta0, "inverse-gamma scale of sigma^2");
  cmd->add_option("--alpha-shape", h.hyper.alpha_shape, "gamma shape of the DP mass");
  auto* scale = cmd->add_option("--alpha-scale", h.hyper.alpha_scale, "gamma scale of the DP mass");
  cmd->add_option("--alpha-rate", h.alpha_rate, "gamma rate of the DP mass (1 / scale)")
      ->excludes(scale)
      ->check(CLI::PositiveNumber);
  cmd->add_option("--nu-mu", h.hyper.nu_mu, "intercept prior variance");
}

Hyperparams finish_hyper(const HyperFlags& h, const std::string& baseline) {
  Hyperparams out = h.hyper;
  if (h.alpha_rate > 0.0) out.alpha_scale = 1.0 / h.alpha_rate;
  out.baseline = parse_baseline(baseline);
  out.validate();
  return out;
}

void add_chain_options(CLI::App* cmd, ChainConfig& c) {
  cmd->add_option("--iterations", c.iterations, "total MCMC sweeps")->check(CLI::PositiveNumber);
  cmd->add_option("--burn-in", c.burn_in, "discarded leading sweeps")->check(CLI::NonNegativeNumber);
  cmd->add_option("--thin", c.thin, "keep every k-th retained sweep")->check(CLI::PositiveNumber);
  cmd->add_option("--truncation-cap", c.truncation_cap, "largest stick truncation (0 = 10 (n + 50))");
}

std::vector<Baseline> parse_baselines(const std::string& list) {
  std::vector<Baseline> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(parse_baseline(item));
  if (out.empty()) throw InvalidParameter("no baselines given");
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) { write_file(path, text); }

Dataset load_dataset(const std::string& path, const std::string& response, bool log_response) {
  return dataset_from_table(read_csv(path), response, log_response);
}

// ---- commands ----

struct SimulateArgs {
  int n = 200, p = 50, J = 4, n_test = 100;
  std::uint64_t seed = 1;
  std::string out_dir;
};

void cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  const TrainTest tt = generate_paper_train_test(a.n, a.p, a.J, a.seed, a.n_test);
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  write_dataset_csv(dir / "train.csv", tt.train.data);
  write_dataset_csv(dir / "test.csv", tt.test.data);
  write_truth_json(dir / "truth.json", tt.train.truth);
  write_truth_json(dir / "test_truth.json", tt.test.truth);
  out << "wrote " << a.n << " training and " << a.n_test << " test rows to " << dir.string() << "\n";
}

struct FitArgs {
  std::string data, response = "y", out, trace;
  bool no_normalize = false, log_response = false;
  ChainConfig chain;
  HyperFlags hyper;
};

void cmd_fit(const FitArgs& a, std::ostream& out) {
  Dataset data = load_dataset(a.data, a.response, a.log_response);
  Archive ar;
  ar.hyper = finish_hyper(a.hyper, a.hyper.baseline);
  ar.chain = a.chain;
  ar.columns = data.column_names;
  ar.response = a.response;
  ar.log_response = a.log_response;
  if (!a.no_normalize) {
    ar.norm_state = fit_normalization(data);
    data = normalize(data, *ar.norm_state);
  }
  std::ofstream trace;
  TraceSink sink;
  if (!a.trace.empty()) {
    trace.open(a.trace);
    if (!trace) throw DataError("cannot write " + a.trace);
    trace << std::setprecision(17) << "iter,sigma2,alpha,K,loglik\n";
    sink = [&trace](const TraceRow& r) {
      trace << r.iteration << ',' << r.sigma2 << ',' << r.alpha << ',' << r.num_clusters << ','
            << r.log_likelihood << '\n';
    };
  }
  ar.draws = run_chain(data, ar.hyper, ar.chain, sink);
  write_archive(a.out, ar);
  out << "retained " << ar.draws.size() << " draws; archive written to " << a.out << "\n";
}

struct PredictArgs {
  std::string archive, data, out, density_out, density_grid;
  int mc_draws = kDefaultMcG0Draws;
  std::uint64_t seed = 0;
};

std::vector<double> parse_grid(const std::string& spec) {
  double lo = 0, hi = 0;
  int count = 0;
  char c1 = 0, c2 = 0;
  std::istringstream is(spec);
  if (!(is >> lo >> c1 >> hi >> c2 >> count) || c1 != ':' || c2 != ':' || count < 2 || !(hi > lo))
    throw InvalidParameter("density grid must look like LO:HI:COUNT with LO < HI and COUNT >= 2");
  std::vector<double> g(count);
  for (int k = 0; k < count; ++k) g[k] = lo + (hi - lo) * k / (count - 1);
  return g;
}

void cmd_predict(const PredictArgs& a, std::ostream& out) {
  const Archive ar = read_archive(a.archive);
  const CsvTable table = read_csv(a.data);
  Eigen::MatrixXd X = covariates_from_table(table, ar.columns);
  if (ar.norm_state) X = normalize_covariates(X, *ar.norm_state);
  const int threads = threads_from_env();
  Eigen::VectorXd pred = predictive_expectations(X, ar.draws, ar.hyper, threads);
  if (ar.norm_state) pred = denormalize_response(pred, *ar.norm_state);
  Eigen::MatrixXd values(X.rows(), 2);
  for (Eigen::Index i = 0; i < X.rows(); ++i) values(i, 0) = static_cast<double>(i);
  values.col(1) = pred;
  write_csv(a.out, {"row", "prediction"}, values);

  if (!a.density_out.empty()) {
    if (a.density_grid.empty()) throw InvalidParameter("--density-out needs --density-grid");
    // Grid is on the response scale; densities carry the Jacobian back.
    const std::vector<double> grid = parse_grid(a.density_grid);
    std::vector<double> model_grid = grid;
    double jac = 1.0;
    if (ar.norm_state) {
      for (auto& y : model_grid) y = (y - ar.norm_state->response.mean) / ar.norm_state->response.sd;
      jac = 1.0 / ar.norm_state->response.sd;
    }
    const auto G = static_cast<Eigen::Index>(grid.size());
    Eigen::MatrixXd dens(X.rows() * G, 3);
    parallel_for(static_cast<std::size_t>(X.rows()), threads, [&](std::size_t i) {
      const auto f = predictive_density_grid(model_grid, X.row(static_cast<Eigen::Index>(i)).transpose(),
                                             ar.draws, ar.hyper, a.mc_draws, a.seed + i);
      for (Eigen::Index k = 0; k < G; ++k) {
        const Eigen::Index r = static_cast<Eigen::Index>(i) * G + k;
        dens(r, 0) = static_cast<double>(i);
        dens(r, 1) = grid[k];
        dens(r, 2) = f[k] * jac;
      }
    });
    write_csv(a.density_out, {"row", "y", "density"}, dens);
  }
  out << "wrote " << X.rows() << " predictions to " << a.out << "\n";
}

struct CvArgs {
  std::string data, response = "y", out, baselines = "hs";
  int folds = 5;
  std::uint64_t seed = 1;
  bool no_normalize = false, log_response = false;
  ChainConfig chain;
  HyperFlags hyper;
};

void cmd_cv(const CvArgs& a, std::ostream& out) {
  const Dataset data = load_dataset(a.data, a.response, a.log_response);
  CvConfig cfg;
  cfg.folds = a.folds;
  cfg.seed = a.seed;
  cfg.baselines = parse_baselines(a.baselines);
  cfg.chain = a.chain;
  cfg.hyper = finish_hyper(a.hyper, "hs");
  cfg.normalize = !a.no_normalize;
  cfg.threads = threads_from_env();
  const auto results = run_cv(data, cfg);

  std::ostringstream os;
  os << "baseline,fold,n_train,n_test,L1,L2\n";
  for (Baseline b : cfg.baselines) {
    double l1 = 0.0, l2 = 0.0;
    int count = 0;
    for (const auto& r : results) {
      if (r.baseline != b) continue;
      os << to_string(b) << ',' << r.fold << ',' << r.n_train << ',' << r.n_test << ',' << fmt(r.l1)
         << ',' << fmt(r.l2) << '\n';
      l1 += r.l1;
      l2 += r.l2;
      ++count;
    }
    os << to_string(b) << ",mean,,," << fmt(l1 / count) << ',' << fmt(l2 / count) << '\n';
    out << to_string(b) << ": mean L1 " << fmt(l1 / count) << ", mean L2 " << fmt(l2 / count) << "\n";
  }
  write_text(a.out, os.str());
}

struct ReportArgs {
  std::string archive, out_dir, truth;
  double p_star = 0.5;
  int sweeps = 50, max_K = 0;
  std::uint64_t seed = 1;
};

void cmd_report(const ReportArgs& a, std::ostream& out) {
  const Archive ar = read_archive(a.archive);
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  RngStream rng(a.seed, 7);
  GreedyViOptions vi;
  vi.sweeps = a.sweeps;
  vi.max_K = a.max_K;
  const ClusterEstimate est = greedy_vi_estimate(draw_partitions(ar.draws), vi, rng);
  const SelectionReport sel = sn_select(ar.draws, est, a.p_star);

  const int n = ar.draws.n;
  const int p = ar.draws.p;
  const auto col_name = [&](int l) {
    return static_cast<std::size_t>(l) < ar.columns.size() ? ar.columns[l] : "x" + std::to_string(l + 1);
  };
  {
    std::ostringstream os;
    os << "row,cluster\n";
    for (int i = 0; i < n; ++i) os << i << ',' << est.partition.labels()[i] << '\n';
    write_text(dir / "clusters.csv", os.str());
  }
  {
    std::ostringstream os;
    os << "row,covariate,P,selected\n";
    for (int i = 0; i < n; ++i)
      for (int l = 0; l < p; ++l)
        os << i << ',' << col_name(l) << ',' << fmt(sel.P(i, l)) << ',' << (sel.selected(i, l) ? 1 : 0)
           << '\n';
    write_text(dir / "selection.csv", os.str());
  }
  {
    std::ostringstream os;
    os << "cluster,covariate,median\n";
    for (std::size_t c = 0; c < sel.beta_medians.size(); ++c)
      for (int l = 0; l < p; ++l) os << c << ',' << col_name(l) << ',' << fmt(sel.beta_medians[c][l]) << '\n';
    write_text(dir / "medians.csv", os.str());
  }
  std::ostringstream summary;
  summary << "K_hat," << est.num_clusters << "\nmean_vi_loss," << fmt(est.mean_vi_loss) << "\nskipped,"
          << sel.skipped << '\n';
  if (!a.truth.empty()) {
    const SimTruth truth = read_truth_json(a.truth);
    if (static_cast<int>(truth.labels.size()) != n) throw DataError("truth labels do not match the archive");
    const double ari = adjusted_rand_index(est.partition, Partition(truth.labels));
    const double auc_v = a_auc(sel.P, truth.true_nonzero());
    const double ase_v = ase(sel.beta_medians, est.partition, truth.true_betas());
    summary << "ARI," << fmt(ari) << "\nA-AUC," << fmt(auc_v) << "\nASE," << fmt(ase_v) << '\n';
  }
  write_text(dir / "summary.csv", "statistic,value\n" + summary.str());
  out << "K_hat = " << est.num_clusters << ", mean VI loss = " << fmt(est.mean_vi_loss) << "\n";
}

struct Table1Args {
  std::vector<std::string> conditions;
  std::string baselines = "hs", out, records;
  int reps = 3;
  std::uint64_t seed = 1;
  double time_budget = 0.0;
  ChainConfig chain;
  HyperFlags hyper;
};

void cmd_reproduce_table1(const Table1Args& a, std::ostream& out) {
  Table1Config cfg;
  for (const auto& c : a.conditions) cfg.conditions.push_back(parse_condition(c));
  cfg.baselines = parse_baselines(a.baselines);
  cfg.reps = a.reps;
  cfg.seed = a.seed;
  cfg.chain = a.chain;
  cfg.hyper = finish_hyper(a.hyper, "hs");
  cfg.time_budget_seconds = a.time_budget;
  cfg.threads = threads_from_env();
  const Table1Result res = run_table1(cfg, [&out](const Table1Record& r) {
    out << r.condition.label() << ' ' << to_string(r.baseline) << " rep " << r.rep << ": L1 "
        << fmt(r.metrics.l1) << ", L2 " << fmt(r.metrics.l2) << ", ARI " << fmt(r.metrics.ari)
        << ", J " << r.metrics.j_hat << "\n";
  });

  std::ostringstream os;
  os << "n,p,J,baseline,metric,mean,sd,se,reps,partial\n";
  for (const auto& s : res.summary) {
    os << s.condition.n << ',' << s.condition.p << ',' << s.condition.J << ',' << to_string(s.baseline)
       << ',' << s.metric << ',' << fmt(s.mean) << ',' << fmt(s.sd) << ',' << fmt(s.se) << ','
       << s.reps_completed << ',' << (s.partial ? "partial" : "") << '\n';
  }
  write_text(a.out, os.str());
  if (!a.records.empty()) {
    std::ostringstream rs;
    rs << "n,p,J,baseline,rep,L1,L2,ARI,J_hat,ASE,A-AUC,vi_loss\n";
    for (const auto& r : res.records) {
      const auto& m = r.metrics;
      rs << r.condition.n << ',' << r.condition.p << ',' << r.condition.J << ',' << to_string(r.baseline)
         << ',' << r.rep << ',' << fmt(m.l1) << ',' << fmt(m.l2) << ',' << fmt(m.ari) << ',' << m.j_hat
         << ',' << fmt(m.ase) << ',' << fmt(m.a_auc) << ',' << fmt(m.vi_loss) << '\n';
    }
    write_text(a.records, rs.str());
  }
  if (res.partial) out << "time budget exhausted: summary is partial\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dirichlet process mixture regression with shrinkage priors", "dpmreg"};
  app.set_config("--config", "", "read options from a TOML/INI file");
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "generate benchmark train/test data");
  c_sim->add_option("--n", sim.n, "training rows")->check(CLI::PositiveNumber);
  c_sim->add_option("--p", sim.p, "covariates");
  c_sim->add_option("--J", sim.J, "mixture components");
  c_sim->add_option("--n-test", sim.n_test, "test rows")->check(CLI::PositiveNumber);
  c_sim->add_option("--seed", sim.seed, "random seed");
  c_sim->add_option("--out-dir", sim.out_dir, "output directory")->required();

  FitArgs fit;
  auto* c_fit = app.add_subcommand("fit", "run the sampler and write a posterior archive");
  c_fit->add_option("--data", fit.data, "training CSV")->required();
  c_fit->add_option("--response", fit.response, "response column name");
  c_fit->add_option("--out", fit.out, "archive path")->required();
  c_fit->add_option("--trace", fit.trace, "per-sweep trace CSV");
  c_fit->add_option("--baseline", fit.hyper.baseline, "hs, ng, n or hs-linear");
  c_fit->add_option("--seed", fit.chain.seed, "random seed");
  c_fit->add_flag("--no-normalize", fit.no_normalize, "skip z-scoring");
  c_fit->add_flag("--log-response", fit.log_response, "model log(response)");
  add_chain_options(c_fit, fit.chain);
  add_hyper_options(c_fit, fit.hyper);

  PredictArgs pr;
  auto* c_pr = app.add_subcommand("predict", "posterior predictive expectations for new rows");
  c_pr->add_option("--archive", pr.archive, "posterior archive")->required();
  c_pr->add_option("--data", pr.data, "CSV holding the archive's covariate columns")->required();
  c_pr->add_option("--out", pr.out, "predictions CSV")->required();
  c_pr->add_option("--density-out", pr.density_out, "optional predictive density CSV");
  c_pr->add_option("--density-grid", pr.density_grid, "LO:HI:COUNT on the response scale");
  c_pr->add_option("--mc-draws", pr.mc_draws, "baseline draws per posterior draw")->check(CLI::PositiveNumber);
  c_pr->add_option("--seed", pr.seed, "seed for the baseline draws");

  CvArgs cv;
  auto* c_cv = app.add_subcommand("cv", "k-fold cross-validated prediction error");
  c_cv->add_option("--data", cv.data, "CSV")->required();
  c_cv->add_option("--response", cv.response, "response column name");
  c_cv->add_option("--out", cv.out, "metrics CSV")->required();
  c_cv->add_option("--folds", cv.folds, "number of folds")->check(CLI::Range(2, 1000000));
  c_cv->add_option("--baselines", cv.baselines, "comma list of hs, ng, n, hs-linear");
  c_cv->add_option("--seed", cv.seed, "random seed");
  c_cv->add_flag("--no-normalize", cv.no_normalize, "skip z-scoring");
  c_cv->add_flag("--log-response", cv.log_response, "model log(response)");
  add_chain_options(c_cv, cv.chain);
  add_hyper_options(c_cv, cv.hyper);

  ReportArgs rep;
  auto* c_rep = app.add_subcommand("report", "clustering estimate and covariate selection");
  c_rep->add_option("--archive", rep.archive, "posterior archive")->required();
  c_rep->add_option("--out-dir", rep.out_dir, "output directory")->required();
  c_rep->add_option("--truth", rep.truth, "truth JSON from simulate, for scoring");
  c_rep->add_option("--p-star", rep.p_star, "selection threshold")->check(CLI::Range(0.0, 1.0));
  c_rep->add_option("--vi-sweeps", rep.sweeps, "greedy VI sweeps")->check(CLI::PositiveNumber);
  c_rep->add_option("--max-K", rep.max_K, "largest cluster count (0 = n)");
  c_rep->add_option("--seed", rep.seed, "seed for the sweep order");

  Table1Args t1;
  auto* c_t1 = app.add_subcommand("reproduce-table1", "simulation study summary");
  c_t1->add_option("--conditions", t1.conditions, "NxPxJ entries, e.g. 200x50x4")->required()->delimiter(',');
  c_t1->add_option("--baselines", t1.baselines, "comma list of hs, ng, n, hs-linear");
  c_t1->add_option("--reps", t1.reps, "replications per condition")->check(CLI::PositiveNumber);
  c_t1->add_option("--seed", t1.seed, "base seed");
  c_t1->add_option("--time-budget", t1.time_budget, "seconds; 0 = unlimited");
  c_t1->add_option("--out", t1.out, "summary CSV")->required();
  c_t1->add_option("--records", t1.records, "per-replicate CSV");
  add_chain_options(c_t1, t1.chain);
  add_hyper_options(c_t1, t1.hyper);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (c_sim->parsed()) cmd_simulate(sim, out);
    else if (c_fit->parsed()) cmd_fit(fit, out);
    else if (c_pr->parsed()) cmd_predict(pr, out);
    else if (c_cv->parsed()) cmd_cv(cv, out);
    else if (c_rep->parsed()) cmd_report(rep, out);
    else if (c_t1->parsed()) cmd_reproduce_table1(t1, out);
  } catch (const InvalidParameter& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace dpmreg
