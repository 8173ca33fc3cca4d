#include "dpmreg/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <vector>

#include "dpmreg/errors.hpp"

namespace dpmreg {

namespace {

void require_positive(double value, const char* what) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    std::ostringstream os;
    os << what << " must be positive and finite (got " << value << ")";
    throw InvalidParameter(os.str());
  }
}

}  // namespace

double sample_normal(double mean, double variance, RngStream& rng) {
  require_positive(variance, "normal variance");
  return mean + std::sqrt(variance) * rng.standard_normal();
}

Eigen::VectorXd sample_mvn_from_precision_system(const Eigen::MatrixXd& A,
                                                 const Eigen::VectorXd& b, double scale,
                                                 RngStream& rng) {
  require_positive(scale, "scale");
  if (A.rows() != A.cols() || A.rows() != b.size())
    throw InvalidParameter("precision system dimensions do not agree");
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success) {
    const Eigen::VectorXd diag = A.diagonal();
    std::ostringstream os;
    os << "Cholesky factorization failed for a " << A.rows() << "x" << A.cols()
       << " precision matrix (diagonal range [" << diag.minCoeff() << ", " << diag.maxCoeff()
       << "])";
    throw NumericalError(os.str());
  }
  Eigen::VectorXd mean = llt.solve(b);
  Eigen::VectorXd z(A.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.standard_normal();
  // A = L L^T, so L^{-T} z has covariance A^{-1}.
  llt.matrixU().solveInPlace(z);
  return mean + std::sqrt(scale) * z;
}

double sample_gamma(double shape, double scale, RngStream& rng) {
  require_positive(shape, "gamma shape");
  require_positive(scale, "gamma scale");
  return scale * rng.standard_gamma(shape);
}

double sample_inverse_gamma(double shape, double igscale, RngStream& rng) {
  require_positive(shape, "inverse-gamma shape");
  require_positive(igscale, "inverse-gamma scale");
  return igscale * std::exp(-rng.log_standard_gamma(shape));
}

double sample_beta(double a, double b, RngStream& rng) {
  require_positive(a, "beta a");
  require_positive(b, "beta b");
  const double log_x = rng.log_standard_gamma(a);
  const double log_y = rng.log_standard_gamma(b);
  // x / (x + y) computed without forming either gamma variate.
  const double v = 1.0 / (1.0 + std::exp(log_y - log_x));
  return std::clamp(v, std::numeric_limits<double>::min(), 1.0 - 0x1.0p-53);
}

double sample_exponential(double rate, RngStream& rng) {
  require_positive(rate, "exponential rate");
  return -std::log(rng.uniform()) / rate;
}

Eigen::MatrixXd sample_wishart(double df, const Eigen::MatrixXd& scale_matrix, RngStream& rng) {
  const Eigen::Index dim = scale_matrix.rows();
  if (scale_matrix.cols() != dim || dim == 0)
    throw InvalidParameter("wishart scale matrix must be square and non-empty");
  if (!(df >= static_cast<double>(dim)))
    throw InvalidParameter("wishart degrees of freedom must be at least the dimension");
  Eigen::LLT<Eigen::MatrixXd> llt(scale_matrix);
  if (llt.info() != Eigen::Success)
    throw InvalidParameter("wishart scale matrix must be positive definite");

  Eigen::MatrixXd bartlett = Eigen::MatrixXd::Zero(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    const double chi2_df = df - static_cast<double>(i);
    bartlett(i, i) = std::sqrt(2.0 * rng.standard_gamma(chi2_df / 2.0));
    for (Eigen::Index j = 0; j < i; ++j) bartlett(i, j) = rng.standard_normal();
  }
  const Eigen::MatrixXd la = llt.matrixL() * bartlett;
  Eigen::MatrixXd w = la * la.transpose();
  return 0.5 * (w + w.transpose());
}

double slice_sample_step(const std::function<double(double)>& log_density, double x0,
                         double width, int max_steps, RngStream& rng) {
  require_positive(width, "slice width");
  const double f0 = log_density(x0);
  if (!std::isfinite(f0)) {
    std::ostringstream os;
    os << "slice sampler started at x0 = " << x0 << " with log density " << f0;
    throw NumericalError(os.str());
  }
  const double level = f0 + std::log(rng.uniform());

  double left = x0 - width * rng.uniform();
  double right = left + width;
  if (max_steps > 0) {
    int steps_left = static_cast<int>(std::floor(max_steps * rng.uniform()));
    int steps_right = (max_steps - 1) - steps_left;
    while (steps_left > 0 && log_density(left) > level) {
      left -= width;
      --steps_left;
    }
    while (steps_right > 0 && log_density(right) > level) {
      right += width;
      --steps_right;
    }
  }

  constexpr int kMaxShrinks = 10000;
  for (int attempt = 0; attempt < kMaxShrinks; ++attempt) {
    const double x1 = left + rng.uniform() * (right - left);
    if (log_density(x1) > level) return x1;
    if (x1 < x0)
      left = x1;
    else
      right = x1;
  }
  std::ostringstream os;
  os << "slice sampler shrinkage did not terminate: x0 = " << x0 << ", log level = " << level
     << ", bracket = [" << left << ", " << right << "]";
  throw NumericalError(os.str());
}

double log_normal_pdf(double x, double mean, double variance) {
  const double r = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + r * r / variance);
}

double log_student_t_pdf(double x, double df, double loc, double scale) {
  const double z = (x - loc) / scale;
  return std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) -
         0.5 * std::log(df * std::numbers::pi) - std::log(scale) -
         0.5 * (df + 1.0) * std::log1p(z * z / df);
}

double log_gamma_pdf(double x, double shape, double scale) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return (shape - 1.0) * std::log(x) - x / scale - std::lgamma(shape) - shape * std::log(scale);
}

double log_inverse_gamma_pdf(double x, double shape, double igscale) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return shape * std::log(igscale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) -
         igscale / x;
}

double log_sum_exp(std::span<const double> values) {
  double top = -std::numeric_limits<double>::infinity();
  for (double v : values) top = std::max(top, v);
  if (!std::isfinite(top)) return top;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - top);
  return top + std::log(acc);
}

std::size_t sample_log_categorical(std::span<const double> log_weights, RngStream& rng) {
  if (log_weights.empty()) throw NumericalError("categorical draw over an empty support");
  const double norm = log_sum_exp(log_weights);
  if (!std::isfinite(norm)) throw NumericalError("categorical weights are all zero or non-finite");
  double target = rng.uniform();
  std::size_t last_positive = 0;
  for (std::size_t k = 0; k < log_weights.size(); ++k) {
    const double prob = std::exp(log_weights[k] - norm);
    if (prob > 0.0) last_positive = k;
    if (target < prob) return k;
    target -= prob;
  }
  return last_positive;
}

}  // namespace dpmreg
