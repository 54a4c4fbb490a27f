#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "clab/mathcore.hpp"

namespace clab {

enum class GaussianFilter { kNone, kTail, kConfidence };
enum class EstimatorKind { kPerfect, kNoisy };

// One fit-sample-refit loop on a single Gaussian. Each generation draws
// n_samples from the current N(mu, sigma^2), filters them, refits, and
// shrinks the fitted scale by sqrt(lambda) so the variance contracts by
// lambda per generation before any filtering effect.
struct GaussianLoopConfig {
  double mu0 = 0.0;
  double sigma0 = 1.0;            // > 0
  std::size_t n_samples = 10000;  // >= 2
  std::size_t generations = 100;  // >= 1
  double lambda = 1.0;            // (0, 1]
  GaussianFilter filter = GaussianFilter::kNone;
  double tail_a = 0.0;            // filter == kTail, >= 0
  double confidence_gamma = 0.9;  // filter == kConfidence, (0, 1)
  EstimatorKind estimator = EstimatorKind::kPerfect;
  std::uint64_t seed = 0;

  void validate() const;  // throws std::invalid_argument
};

struct GenerationRecord {
  std::size_t generation;
  double mu_hat;
  double sigma_hat;
  std::size_t retained_count;
};

struct GaussianTrajectory {
  std::vector<GenerationRecord> records;  // generations + 1 unless truncated
  bool truncated = false;  // fewer than 2 survivors (or scale underflow)
};

// Maximum-likelihood fit: mean and 1/n variance. Throws on an empty set.
std::pair<double, double> mle_fit(std::span<const double> samples);

// mle_fit plus independent N(0,1) noise on each estimate; the variance is
// floored at 1e-12 so the result stays usable as a scale.
std::pair<double, double> noisy_fit(std::span<const double> samples,
                                    RngStream& rng);

// Keeps samples with |x - mu| >= a*sigma, preserving order.
std::vector<double> tail_filter(std::span<const double> samples, double mu,
                                double sigma, TailThreshold a);

// Keeps samples whose peak-relative likelihood exp(-(x-mu)^2 / (2 sigma^2))
// is at most gamma_c; identical to tail_filter with a = sqrt(-2 ln gamma_c).
std::vector<double> confidence_filter(std::span<const double> samples,
                                      double mu, double sigma,
                                      double gamma_c);
double confidence_to_tail(double gamma_c);

GaussianTrajectory run_gaussian_loop(const GaussianLoopConfig& config);

// Expected variance sequence var0 * (lambda * eta(a))^t for t = 0..T.
std::vector<double> analytic_variance_trajectory(double var0,
                                                 SamplingBias lambda,
                                                 TailThreshold a,
                                                 std::size_t generations);

// Columns: generation,mu_hat,sigma_hat,retained_count.
void write_trajectory_csv(std::ostream& out, const GaussianTrajectory& traj);

}  // namespace clab
