// Generalized inverse Gaussian variates.
//
// The draw is reduced to the two-parameter form
//   Y ~ GIG(|h|, omega, omega),  omega = sqrt(c d),
// and scaled back by sqrt(d / c) (inverted when h < 0). Three generators cover
// the (|h|, omega) plane:
//   - ratio-of-uniforms shifted by the mode for |h| > 2 or omega > 3,
//   - ratio-of-uniforms without shift in the bulk of the remaining region,
//   - a three-piece dominating hat for |h| < 1 with small omega, where the
//     density is log-concave near the origin and has a heavy polynomial body.
// After Hormann & Leydold (2014), Statistics and Computing 24(4).

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "dpmreg/distributions.hpp"
#include "dpmreg/errors.hpp"

namespace dpmreg {

namespace {

double gig_mode(double lambda, double omega) {
  if (lambda >= 1.0)
    return (std::sqrt((lambda - 1.0) * (lambda - 1.0) + omega * omega) + (lambda - 1.0)) / omega;
  return omega / (std::sqrt((1.0 - lambda) * (1.0 - lambda) + omega * omega) + (1.0 - lambda));
}

double rou_noshift(double lambda, double omega, RngStream& rng) {
  const double t = 0.5 * (lambda - 1.0);
  const double s = 0.25 * omega;
  const double xm = gig_mode(lambda, omega);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);
  const double ym =
      ((lambda + 1.0) + std::sqrt((lambda + 1.0) * (lambda + 1.0) + omega * omega)) / omega;
  const double um = std::exp(0.5 * (lambda + 1.0) * std::log(ym) - s * (ym + 1.0 / ym) - nc);
  for (;;) {
    const double u = um * rng.uniform();
    const double v = rng.uniform();
    const double x = u / v;
    if (std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
  }
}

double rou_shift(double lambda, double omega, RngStream& rng) {
  const double t = 0.5 * (lambda - 1.0);
  const double s = 0.25 * omega;
  const double xm = gig_mode(lambda, omega);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);

  // Extremes of (x - xm) sqrt(f(x)) are roots of a cubic; Cardano's rule.
  const double a = -(2.0 * (lambda + 1.0) / omega + xm);
  const double b = (2.0 * (lambda - 1.0) * xm / omega - 1.0);
  const double c = xm;
  const double p = b - a * a / 3.0;
  const double q = (2.0 * a * a * a) / 27.0 - (a * b) / 3.0 + c;
  const double fi = std::acos(-q / (2.0 * std::sqrt(-(p * p * p) / 27.0)));
  const double fak = 2.0 * std::sqrt(-p / 3.0);
  const double y1 = fak * std::cos(fi / 3.0) - a / 3.0;
  const double y2 = fak * std::cos(fi / 3.0 + 4.0 / 3.0 * std::numbers::pi) - a / 3.0;
  const double uplus = (y1 - xm) * std::exp(t * std::log(y1) - s * (y1 + 1.0 / y1) - nc);
  const double uminus = (y2 - xm) * std::exp(t * std::log(y2) - s * (y2 + 1.0 / y2) - nc);

  for (;;) {
    const double u = uminus + rng.uniform() * (uplus - uminus);
    const double v = rng.uniform();
    const double x = u / v + xm;
    if (x > 0.0 && std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
  }
}

double three_piece_hat(double lambda, double omega, RngStream& rng) {
  const double xm = gig_mode(lambda, omega);
  const double x0 = omega / (1.0 - lambda);
  const double k0 = std::exp((lambda - 1.0) * std::log(xm) - 0.5 * omega * (xm + 1.0 / xm));
  double area[3];
  double k1 = 0.0;
  double k2 = 0.0;
  area[0] = k0 * x0;
  if (x0 >= 2.0 / omega) {
    area[1] = 0.0;
    k2 = std::pow(x0, lambda - 1.0);
    area[2] = k2 * 2.0 * std::exp(-omega * x0 / 2.0) / omega;
  } else {
    k1 = std::exp(-omega);
    area[1] = (lambda == 0.0)
                  ? k1 * std::log(2.0 / (omega * omega))
                  : k1 / lambda * (std::pow(2.0 / omega, lambda) - std::pow(x0, lambda));
    k2 = std::pow(2.0 / omega, lambda - 1.0);
    area[2] = k2 * 2.0 * std::exp(-1.0) / omega;
  }
  const double total = area[0] + area[1] + area[2];
  const double tail_start = std::max(x0, 2.0 / omega);

  for (;;) {
    double v = total * rng.uniform();
    double x;
    double hat;
    if (v <= area[0]) {
      x = x0 * v / area[0];
      hat = k0;
    } else if ((v -= area[0]) <= area[1]) {
      if (lambda == 0.0) {
        x = omega * std::exp(std::exp(omega) * v);
        hat = k1 / x;
      } else {
        x = std::pow(std::pow(x0, lambda) + (lambda / k1 * v), 1.0 / lambda);
        hat = k1 * std::pow(x, lambda - 1.0);
      }
    } else {
      v -= area[1];
      x = -2.0 / omega *
          std::log(std::exp(-omega / 2.0 * tail_start) - omega / (2.0 * k2) * v);
      hat = k2 * std::exp(-omega / 2.0 * x);
    }
    const double u = rng.uniform() * hat;
    if (std::log(u) <= (lambda - 1.0) * std::log(x) - omega / 2.0 * (x + 1.0 / x)) return x;
  }
}

}  // namespace

double sample_gig(const GigParams& params, RngStream& rng) {
  const double h = params.h;
  const double c = params.c;
  const double d = params.d;
  if (!(c > 0.0) || !(d > 0.0) || !std::isfinite(c) || !std::isfinite(d) || !std::isfinite(h)) {
    std::ostringstream os;
    os << "GIG requires c > 0 and d > 0 (got h = " << h << ", c = " << c << ", d = " << d << ")";
    throw InvalidParameter(os.str());
  }

  // Boundary limits where omega underflows the generators' arithmetic:
  // d -> 0 gives Gamma(h, scale 2/c), c -> 0 gives InverseGamma(-h, d/2).
  constexpr double kTiny = 10.0 * std::numeric_limits<double>::epsilon();
  if (d < kTiny && h > 0.0) return std::max(2.0 / c * rng.standard_gamma(h), kGigArgumentFloor);
  if (c < kTiny && h < 0.0)
    return std::max(0.5 * d * std::exp(-rng.log_standard_gamma(-h)), kGigArgumentFloor);

  const double lambda = std::abs(h);
  const double omega = std::sqrt(c * d);
  const double alpha = std::sqrt(d / c);

  double y;
  if (lambda > 2.0 || omega > 3.0) {
    y = rou_shift(lambda, omega, rng);
  } else if (lambda >= 1.0 - 2.25 * omega * omega || omega > 0.2) {
    y = rou_noshift(lambda, omega, rng);
  } else {
    y = three_piece_hat(lambda, omega, rng);
  }
  const double x = (h < 0.0) ? alpha / y : alpha * y;
  return std::max(x, kGigArgumentFloor);
}

}  // namespace dpmreg
