#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace clab {

// Deterministic PRNG: xoshiro256** seeded through splitmix64, one
// independent stream per (seed, stream_id) pair. Normal draws use the
// Box-Muller transform so a given (seed, stream_id) reproduces the same
// sequence in any implementation that follows the same recipe.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  // Derives the stream id from a text label (FNV-1a hash), so named
  // sub-streams ("corpus", "train/3", ...) can be split off a master seed.
  static RngStream from_label(std::uint64_t seed, std::string_view label);
  static std::uint64_t label_id(std::string_view label);

  std::uint64_t next_u64();
  // Uniform on (0, 1]; never 0, so log(u) stays finite.
  double uniform01();
  // One standard-normal draw per call (fresh Box-Muller pair, sine half unused).
  double gaussian();

  std::uint64_t stream_id() const { return stream_id_; }

  static constexpr std::string_view kAlgorithm =
      "xoshiro256** (splitmix64 seeding), Box-Muller normals";

 private:
  std::array<std::uint64_t, 4> state_{};
  std::uint64_t stream_id_ = 0;
};

// Tail threshold in units of standard deviations; a >= 0.
class TailThreshold {
 public:
  explicit TailThreshold(double a);
  double value() const { return a_; }

 private:
  double a_;
};

// Per-generation shrink factor applied to the fitted scale; lambda in (0, 1].
class SamplingBias {
 public:
  explicit SamplingBias(double lambda);
  double value() const { return lambda_; }

 private:
  double lambda_;
};

double std_normal_pdf(double x);
// Absolute error below 1e-12 everywhere (erfc based).
double std_normal_cdf(double x);
// 1 - cdf(x) without cancellation in the upper tail.
double std_normal_upper(double x);

// Variance amplification of a centered normal conditioned on |X| >= a*sigma:
//   eta(a) = 1 + a*pdf(a)/(1 - cdf(a));  eta(0) = 1, strictly increasing.
double eta(TailThreshold a);

// Solves lambda * eta(a) = 1 for a by bisection; |lambda*eta(a) - 1| < 1e-9.
TailThreshold stabilizing_threshold(SamplingBias lambda);

// n iid draws from N(mu, sigma^2), sigma > 0. Consecutive Box-Muller pairs;
// the sine half of the final pair is dropped when n is odd.
std::vector<double> sample_normal(RngStream& rng, double mu, double sigma,
                                  std::size_t n);

// Nearest-rank percentile: the ceil(q/100 * n)-th smallest value, q in
// [0, 100]; q = 0 yields the minimum. Input order is irrelevant.
double percentile(const std::vector<double>& values, double q);

}  // namespace clab
