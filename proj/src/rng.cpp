#include "dpmreg/rng.hpp"

#include <cmath>
#include <iostream>

#include "dpmreg/errors.hpp"

namespace dpmreg {

namespace {

WarningHandler& warning_handler() {
  static WarningHandler handler = [](const std::string& msg) {
    std::cerr << "warning: " << msg << '\n';
  };
  return handler;
}

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream_id) {
  const std::uint64_t a = splitmix64(seed);
  const std::uint64_t b = splitmix64(a ^ splitmix64(stream_id + 0x632be59bd9b4e019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

WarningHandler set_warning_handler(WarningHandler handler) {
  WarningHandler previous = warning_handler();
  warning_handler() = std::move(handler);
  return previous;
}

void warn(const std::string& message) {
  if (warning_handler()) warning_handler()(message);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), engine_(make_engine(seed, stream_id)) {}

RngStream RngStream::substream(std::uint64_t index) const {
  return RngStream(seed_, splitmix64(stream_id_ * 0x100000001b3ULL + index + 1));
}

double RngStream::uniform() {
  // 53 random bits, shifted half a step so 0 and 1 are excluded.
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::standard_normal() { return normal_(engine_); }

double RngStream::standard_gamma(double shape) {
  if (shape < 1.0) return std::exp(log_standard_gamma(shape));
  std::gamma_distribution<double> dist(shape, 1.0);
  return dist(engine_);
}

double RngStream::log_standard_gamma(double shape) {
  if (shape >= 1.0) return std::log(standard_gamma(shape));
  // G(a) = G(a + 1) * U^(1/a)
  std::gamma_distribution<double> dist(shape + 1.0, 1.0);
  return std::log(dist(engine_)) + std::log(uniform()) / shape;
}

std::size_t RngStream::index(std::size_t n) {
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(engine_);
}

}  // namespace dpmreg
