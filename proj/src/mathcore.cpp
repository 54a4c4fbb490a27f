#include "clab/mathcore.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace clab {
namespace {

std::uint64_t splitmix64(std::uint64_t& s) {
  std::uint64_t z = (s += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

// pdf(a) / (1 - cdf(a)). The direct quotient degrades once both terms go
// subnormal, so switch to the Mills-ratio continued fraction for large a.
double hazard(double a) {
  if (a < 10.0) return std_normal_pdf(a) / std_normal_upper(a);
  double cf = 0.0;
  for (int k = 60; k >= 1; --k) cf = static_cast<double>(k) / (a + cf);
  return a + cf;
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : stream_id_(stream_id) {
  std::uint64_t t = stream_id;
  std::uint64_t s = seed ^ splitmix64(t);
  for (auto& word : state_) word = splitmix64(s);
  if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0)
    state_[0] = 0x9e3779b97f4a7c15ull;  // xoshiro forbids the all-zero state
}

std::uint64_t RngStream::label_id(std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

RngStream RngStream::from_label(std::uint64_t seed, std::string_view label) {
  return RngStream(seed, label_id(label));
}

std::uint64_t RngStream::next_u64() {
  std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
  std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double RngStream::uniform01() {
  return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double RngStream::gaussian() {
  double u1 = uniform01();
  double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

TailThreshold::TailThreshold(double a) : a_(a) {
  if (!std::isfinite(a) || a < 0.0)
    throw std::invalid_argument("tail threshold must be finite and >= 0");
}

SamplingBias::SamplingBias(double lambda) : lambda_(lambda) {
  if (!(lambda > 0.0) || !(lambda <= 1.0))
    throw std::invalid_argument("sampling bias must lie in (0, 1]");
}

double std_normal_pdf(double x) {
  return std::exp(-0.5 * x * x) * std::numbers::inv_sqrtpi /
         std::numbers::sqrt2;
}

double std_normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double std_normal_upper(double x) {
  return 0.5 * std::erfc(x / std::numbers::sqrt2);
}

double eta(TailThreshold a) {
  double av = a.value();
  if (av == 0.0) return 1.0;
  return 1.0 + av * hazard(av);
}

TailThreshold stabilizing_threshold(SamplingBias lambda) {
  double lam = lambda.value();
  if (lam == 1.0) return TailThreshold(0.0);
  auto excess = [lam](double a) { return lam * eta(TailThreshold(a)) - 1.0; };
  double lo = 0.0;
  double hi = 1.0;
  while (excess(hi) < 0.0) hi *= 2.0;  // eta is unbounded, so this terminates
  double mid = hi;
  for (int iter = 0; iter < 200; ++iter) {
    mid = 0.5 * (lo + hi);
    double f = excess(mid);
    if (std::abs(f) < 1e-12) break;
    (f < 0.0 ? lo : hi) = mid;
  }
  return TailThreshold(mid);
}

std::vector<double> sample_normal(RngStream& rng, double mu, double sigma,
                                  std::size_t n) {
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be > 0");
  std::vector<double> out;
  out.reserve(n);
  while (out.size() < n) {
    double u1 = rng.uniform01();
    double u2 = rng.uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * std::numbers::pi * u2;
    out.push_back(mu + sigma * (r * std::cos(angle)));
    if (out.size() < n) out.push_back(mu + sigma * (r * std::sin(angle)));
  }
  return out;
}

double percentile(const std::vector<double>& values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of empty set");
  if (!(q >= 0.0) || !(q <= 100.0))
    throw std::invalid_argument("percentile rank must lie in [0, 100]");
  std::vector<double> sorted(values);
  std::sort(sorted.begin(), sorted.end());
  double exact = q * static_cast<double>(sorted.size()) / 100.0;
  auto rank = static_cast<std::size_t>(std::ceil(exact - 1e-9));
  if (rank < 1) rank = 1;
  if (rank > sorted.size()) rank = sorted.size();
  return sorted[rank - 1];
}

}  // namespace clab
