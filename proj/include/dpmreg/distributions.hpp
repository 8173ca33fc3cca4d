#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>

#include "dpmreg/rng.hpp"

namespace dpmreg {

// Parameter conventions used throughout the library:
//   Gamma(shape, scale)          density ∝ x^(shape-1) exp(-x/scale)
//   InverseGamma(shape, igscale) density ∝ x^(-shape-1) exp(-igscale/x)
//   Wishart(df, V)               E[W] = df * V
//   GIG(h, c, d)                 density ∝ x^(h-1) exp(-(c x + d / x) / 2)

double sample_normal(double mean, double variance, RngStream& rng);

// One draw from N(A^{-1} b, scale * A^{-1}) for symmetric positive-definite A.
// Factors A once; never forms the inverse.
Eigen::VectorXd sample_mvn_from_precision_system(const Eigen::MatrixXd& A,
                                                 const Eigen::VectorXd& b, double scale,
                                                 RngStream& rng);

double sample_gamma(double shape, double scale, RngStream& rng);
double sample_inverse_gamma(double shape, double igscale, RngStream& rng);
double sample_beta(double a, double b, RngStream& rng);
double sample_exponential(double rate, RngStream& rng);

// Bartlett decomposition.
Eigen::MatrixXd sample_wishart(double df, const Eigen::MatrixXd& scale_matrix, RngStream& rng);

struct GigParams {
  double h;  // order
  double c;  // coefficient of x
  double d;  // coefficient of 1/x
};

// Arguments below this are floored before a GIG call.
inline constexpr double kGigArgumentFloor = 1e-300;

double sample_gig(const GigParams& params, RngStream& rng);

// One transition of the stepping-out / shrinkage slice sampler. log_density
// returns -inf outside the support. max_steps bounds the stepping-out
// expansion (split randomly between the two sides).
double slice_sample_step(const std::function<double(double)>& log_density, double x0,
                         double width, int max_steps, RngStream& rng);

inline constexpr double kSliceDefaultWidth = 1.0;
inline constexpr int kSliceDefaultMaxSteps = 50;

double log_normal_pdf(double x, double mean, double variance);
double log_student_t_pdf(double x, double df, double loc, double scale);
double log_gamma_pdf(double x, double shape, double scale);
double log_inverse_gamma_pdf(double x, double shape, double igscale);

double log_sum_exp(std::span<const double> values);

// Draws an index with probability ∝ exp(log_weights[k]).
std::size_t sample_log_categorical(std::span<const double> log_weights, RngStream& rng);

}  // namespace dpmreg
