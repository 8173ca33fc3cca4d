#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "dpmreg/distributions.hpp"
#include "dpmreg/errors.hpp"
#include "dpmreg/sampler.hpp"

namespace dpmreg {

namespace {

// Scale parameters of the shrinkage hierarchies are kept inside this range so
// that reciprocals stay finite.
constexpr double kScaleFloor = 1e-300;
constexpr double kScaleCeil = 1e300;
constexpr double kPrecisionCeil = 1e280;

double clamp_scale(double x) { return std::clamp(x, kScaleFloor, kScaleCeil); }

// Draw from N(A^{-1} b, scale A^{-1}); retries once with a small diagonal
// jitter if the factorization fails.
Eigen::VectorXd draw_from_precision(Eigen::MatrixXd A, const Eigen::VectorXd& b, double scale,
                                    RngStream& rng) {
  try {
    return sample_mvn_from_precision_system(A, b, scale, rng);
  } catch (const NumericalError&) {
    const double jitter = 1e-10 * std::max(A.diagonal().mean(), 1.0);
    warn("precision matrix not positive definite; retrying with diagonal jitter");
    A.diagonal().array() += jitter;
    return sample_mvn_from_precision_system(A, b, scale, rng);
  }
}

}  // namespace

// ---- horseshoe ----

namespace hs {

double draw_nu(double gamma2, RngStream& rng) {
  return clamp_scale(sample_inverse_gamma(1.0, 1.0 + 1.0 / gamma2, rng));
}

double draw_xi(double zeta2, RngStream& rng) {
  return clamp_scale(sample_inverse_gamma(1.0, 1.0 + 1.0 / zeta2, rng));
}

double draw_gamma2(double nu, double beta, double zeta2, double sigma2, RngStream& rng) {
  const double b = 1.0 / nu + beta * beta / (2.0 * zeta2 * sigma2);
  return clamp_scale(sample_inverse_gamma(1.0, b, rng));
}

double draw_zeta2(double xi, const Eigen::VectorXd& beta, const Eigen::VectorXd& gamma2,
                  double sigma2, RngStream& rng) {
  const double p = static_cast<double>(beta.size());
  const double q = (beta.array().square() / gamma2.array()).sum();
  return clamp_scale(sample_inverse_gamma(0.5 * (p + 1.0), 1.0 / xi + q / (2.0 * sigma2), rng));
}

}  // namespace hs

void hs_update_locals(ClusterParams& cluster, double sigma2, RngStream& rng) {
  auto& loc = std::get<HsLocals>(cluster.locals);
  const Eigen::Index p = cluster.beta.size();
  for (Eigen::Index l = 0; l < p; ++l) loc.nu[l] = hs::draw_nu(loc.gamma2[l], rng);
  loc.xi = hs::draw_xi(loc.zeta2, rng);
  for (Eigen::Index l = 0; l < p; ++l)
    loc.gamma2[l] = hs::draw_gamma2(loc.nu[l], cluster.beta[l], loc.zeta2, sigma2, rng);
  loc.zeta2 = hs::draw_zeta2(loc.xi, cluster.beta, loc.gamma2, sigma2, rng);
}

void hs_update_coefficients(ClusterParams& cluster, const ClusterMembers& members, double sigma2,
                            double nu_mu, RngStream& rng) {
  const auto& loc = std::get<HsLocals>(cluster.locals);
  const Eigen::Index p = cluster.beta.size();
  if (members.y.size() == 0) {
    cluster.mu = sample_normal(0.0, nu_mu, rng);
    for (Eigen::Index l = 0; l < p; ++l)
      cluster.beta[l] = std::sqrt(loc.zeta2 * sigma2 * loc.gamma2[l]) * rng.standard_normal();
    return;
  }
  // (mu, beta) | rest ~ N(B^{-1} X~'y, sigma^2 B^{-1}),
  // B = X~'X~ + diag(sigma^2 / nu_mu, 1 / (zeta^2 gamma_l^2)).
  Eigen::MatrixXd B = members.design.transpose() * members.design;
  B(0, 0) += std::min(sigma2 / nu_mu, kPrecisionCeil);
  for (Eigen::Index l = 0; l < p; ++l)
    B(l + 1, l + 1) += std::min(1.0 / (loc.zeta2 * loc.gamma2[l]), kPrecisionCeil);
  const Eigen::VectorXd b = members.design.transpose() * members.y;
  const Eigen::VectorXd coef = draw_from_precision(std::move(B), b, sigma2, rng);
  cluster.mu = coef[0];
  cluster.beta = coef.tail(p);
}

// ---- normal-gamma ----

namespace ng {

double log_lambda_conditional(double lambda, double gamma_inv2, const Eigen::VectorXd& psi) {
  if (!(lambda > 0.0)) return -std::numeric_limits<double>::infinity();
  const double p = static_cast<double>(psi.size());
  return -lambda + p * lambda * std::log(0.5 * gamma_inv2) - p * std::lgamma(lambda) +
         lambda * psi.array().log().sum();
}

double draw_lambda(double lambda, double gamma_inv2, const Eigen::VectorXd& psi, RngStream& rng) {
  const auto logf = [&](double x) { return log_lambda_conditional(x, gamma_inv2, psi); };
  return slice_sample_step(logf, lambda, kSliceDefaultWidth, kSliceDefaultMaxSteps, rng);
}

double draw_gamma_inv2(double lambda, const Eigen::VectorXd& psi, double V, RngStream& rng) {
  const double p = static_cast<double>(psi.size());
  const double rate = 0.5 * psi.sum() + V / (2.0 * lambda);
  return clamp_scale(sample_gamma(p * lambda + 2.0, 1.0 / rate, rng));
}

double draw_psi(double lambda, double gamma_inv2, double beta, RngStream& rng) {
  const GigParams params{lambda - 0.5, gamma_inv2, std::max(beta * beta, kGigArgumentFloor)};
  return clamp_scale(sample_gig(params, rng));
}

namespace {

struct SvdPieces {
  Eigen::MatrixXd A;       // (p + 1) x r, right singular vectors
  Eigen::VectorXd D;       // r singular values
  Eigen::VectorXd theta_hat;  // D^{-1} F y
};

SvdPieces thin_svd(const ClusterMembers& members) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(members.design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double smax = s.size() > 0 ? s[0] : 0.0;
  Eigen::Index r = 0;
  while (r < s.size() && s[r] > 1e-10 * smax) ++r;
  if (r == 0) throw NumericalError("cluster design matrix has rank zero");
  SvdPieces out;
  out.A = svd.matrixV().leftCols(r);
  out.D = s.head(r);
  out.theta_hat = (svd.matrixU().leftCols(r).transpose() * members.y).cwiseQuotient(out.D);
  return out;
}

Eigen::MatrixXd svd_system(const SvdPieces& sv, const Eigen::VectorXd& prior_var, double sigma2) {
  Eigen::MatrixXd C = sv.A.transpose() * prior_var.asDiagonal() * sv.A;
  C.diagonal() += sigma2 * sv.D.array().square().inverse().matrix();
  return C;
}

}  // namespace

GaussianMoments svd_branch_moments(const Eigen::VectorXd& prior_var, const ClusterMembers& members,
                                   double sigma2) {
  const SvdPieces sv = thin_svd(members);
  const Eigen::LLT<Eigen::MatrixXd> llt(svd_system(sv, prior_var, sigma2));
  if (llt.info() != Eigen::Success) throw NumericalError("SVD-branch system is not positive definite");
  const Eigen::MatrixXd PsiA = prior_var.asDiagonal() * sv.A;
  GaussianMoments out;
  out.mean = PsiA * llt.solve(sv.theta_hat);
  out.cov = Eigen::MatrixXd(prior_var.asDiagonal()) - PsiA * llt.solve(PsiA.transpose());
  return out;
}

}  // namespace ng

void ng_update_locals(ClusterParams& cluster, double V, RngStream& rng) {
  auto& loc = std::get<NgLocals>(cluster.locals);
  loc.lambda = ng::draw_lambda(loc.lambda, loc.gamma_inv2, loc.psi, rng);
  loc.gamma_inv2 = ng::draw_gamma_inv2(loc.lambda, loc.psi, V, rng);
  for (Eigen::Index l = 0; l < loc.psi.size(); ++l)
    loc.psi[l] = ng::draw_psi(loc.lambda, loc.gamma_inv2, cluster.beta[l], rng);
}

void ng_update_coefficients(ClusterParams& cluster, const ClusterMembers& members, double sigma2,
                            double nu_mu, RngStream& rng, ng::Branch branch) {
  const auto& loc = std::get<NgLocals>(cluster.locals);
  const Eigen::Index p = cluster.beta.size();
  Eigen::VectorXd prior_var(p + 1);
  prior_var[0] = nu_mu;
  prior_var.tail(p) = loc.psi;

  const Eigen::Index nj = members.y.size();
  if (nj == 0) {
    cluster.mu = sample_normal(0.0, nu_mu, rng);
    for (Eigen::Index l = 0; l < p; ++l)
      cluster.beta[l] = std::sqrt(loc.psi[l]) * rng.standard_normal();
    return;
  }
  if (branch == ng::Branch::Auto)
    branch = nj > p + 1 ? ng::Branch::Precision : ng::Branch::Svd;

  Eigen::VectorXd coef;
  if (branch == ng::Branch::Precision) {
    Eigen::MatrixXd B = members.design.transpose() * members.design;
    for (Eigen::Index k = 0; k <= p; ++k)
      B(k, k) += std::min(sigma2 / prior_var[k], kPrecisionCeil);
    coef = draw_from_precision(std::move(B), members.design.transpose() * members.y, sigma2, rng);
  } else {
    // Perturbation draw: theta0 ~ N(0, Psi), delta ~ N(0, sigma^2 D^{-2}),
    // theta = theta0 + Psi A C^{-1} (theta_hat - A' theta0 - delta).
    const ng::SvdPieces sv = ng::thin_svd(members);
    const Eigen::LLT<Eigen::MatrixXd> llt(ng::svd_system(sv, prior_var, sigma2));
    if (llt.info() != Eigen::Success)
      throw NumericalError("SVD-branch system is not positive definite");
    Eigen::VectorXd theta0(p + 1);
    for (Eigen::Index k = 0; k <= p; ++k) theta0[k] = std::sqrt(prior_var[k]) * rng.standard_normal();
    Eigen::VectorXd delta(sv.D.size());
    for (Eigen::Index k = 0; k < delta.size(); ++k)
      delta[k] = std::sqrt(sigma2) / sv.D[k] * rng.standard_normal();
    const Eigen::VectorXd resid = sv.theta_hat - sv.A.transpose() * theta0 - delta;
    coef = theta0 + prior_var.asDiagonal() * (sv.A * llt.solve(resid));
  }
  cluster.mu = coef[0];
  cluster.beta = coef.tail(p);
}

// ---- normal (full covariance) ----

void normalfull_update_hyper(NormalGlobals& globals, const std::vector<Eigen::VectorXd>& coefs,
                             const Hyperparams& hyper, RngStream& rng) {
  const Eigen::Index dim = globals.eta.size();
  const Eigen::Index p = dim - 1;
  const double K = static_cast<double>(coefs.size());
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(dim, dim);

  Eigen::VectorXd total = Eigen::VectorXd::Zero(dim);
  for (const auto& c : coefs) total += c;
  Eigen::MatrixXd prec = I / hyper.normalfull_eta_var + K * globals.precision;
  globals.eta = draw_from_precision(std::move(prec), globals.precision * total, 1.0, rng);

  Eigen::MatrixXd inv_scale = I / hyper.normalfull_wishart_scale;
  for (const auto& c : coefs) {
    const Eigen::VectorXd r = c - globals.eta;
    inv_scale.noalias() += r * r.transpose();
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(inv_scale);
  if (llt.info() != Eigen::Success) throw NumericalError("Wishart scale update is not positive definite");
  const Eigen::MatrixXd scale = llt.solve(I);
  globals.precision = sample_wishart(hyper.wishart_df(p) + K, scale, rng);
}

void normalfull_update_coefficients_and_hyper(MixtureState& state,
                                              const std::vector<ClusterMembers>& members,
                                              const std::vector<char>& occupied,
                                              const Hyperparams& hyper, RngStream& rng) {
  auto& globals = *state.normal;
  const double sigma2 = state.sigma2;
  std::vector<Eigen::VectorXd> coefs;
  const int extent = static_cast<int>(members.size());
  for (int j = 0; j < extent; ++j) {
    if (!occupied[j]) continue;
    const auto& m = members[j];
    Eigen::MatrixXd B = m.design.transpose() * m.design / sigma2 + globals.precision;
    const Eigen::VectorXd b = m.design.transpose() * m.y / sigma2 + globals.precision * globals.eta;
    Eigen::VectorXd coef = draw_from_precision(std::move(B), b, 1.0, rng);
    auto& c = state.clusters[j];
    c.mu = coef[0];
    c.beta = coef.tail(coef.size() - 1);
    coefs.push_back(std::move(coef));
  }
  normalfull_update_hyper(globals, coefs, hyper, rng);
  for (int j = 0; j < extent; ++j) {
    if (occupied[j]) continue;
    const Eigen::VectorXd coef =
        draw_from_precision(globals.precision, globals.precision * globals.eta, 1.0, rng);
    auto& c = state.clusters[j];
    c.mu = coef[0];
    c.beta = coef.tail(coef.size() - 1);
  }
}

}  // namespace dpmreg
