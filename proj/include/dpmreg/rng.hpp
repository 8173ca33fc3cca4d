#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace dpmreg {

// Seeded random stream. Equal (seed, stream id) pairs replay bit-identical
// sequences; substream(k) derives an independent stream for chain k, fold k,
// replicate k, and so on. Not thread-safe: one owner per stream.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  RngStream substream(std::uint64_t index) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  // Uniform on the open interval (0, 1).
  double uniform();
  double standard_normal();
  // Gamma(shape, 1).
  double standard_gamma(double shape);
  // log of a Gamma(shape, 1) variate; stays finite for tiny shapes.
  double log_standard_gamma(double shape);
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace dpmreg
