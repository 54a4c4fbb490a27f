#include "clab/gaussian_loop.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "clab/csvio.hpp"

namespace clab {

void GaussianLoopConfig::validate() const {
  if (!(sigma0 > 0.0) || !std::isfinite(sigma0))
    throw std::invalid_argument("sigma0 must be finite and > 0");
  if (!std::isfinite(mu0)) throw std::invalid_argument("mu0 must be finite");
  if (n_samples < 2) throw std::invalid_argument("n_samples must be >= 2");
  if (generations < 1) throw std::invalid_argument("generations must be >= 1");
  SamplingBias check_lambda(lambda);
  if (filter == GaussianFilter::kTail) TailThreshold check_a(tail_a);
  if (filter == GaussianFilter::kConfidence) confidence_to_tail(confidence_gamma);
}

std::pair<double, double> mle_fit(std::span<const double> samples) {
  if (samples.empty()) throw std::invalid_argument("fit of empty sample set");
  double mean = 0.0;
  for (double x : samples) mean += x;
  mean /= static_cast<double>(samples.size());
  double var = 0.0;
  for (double x : samples) var += (x - mean) * (x - mean);
  var /= static_cast<double>(samples.size());
  return {mean, var};
}

std::pair<double, double> noisy_fit(std::span<const double> samples,
                                    RngStream& rng) {
  auto [mean, var] = mle_fit(samples);
  mean += rng.gaussian();
  var += rng.gaussian();
  if (var < 1e-12) var = 1e-12;
  return {mean, var};
}

std::vector<double> tail_filter(std::span<const double> samples, double mu,
                                double sigma, TailThreshold a) {
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be > 0");
  double cut = a.value() * sigma;
  std::vector<double> kept;
  kept.reserve(samples.size());
  for (double x : samples)
    if (std::abs(x - mu) >= cut) kept.push_back(x);
  return kept;
}

double confidence_to_tail(double gamma_c) {
  if (!(gamma_c > 0.0) || !(gamma_c < 1.0))
    throw std::invalid_argument("confidence cutoff must lie in (0, 1)");
  return std::sqrt(-2.0 * std::log(gamma_c));
}

std::vector<double> confidence_filter(std::span<const double> samples,
                                      double mu, double sigma,
                                      double gamma_c) {
  return tail_filter(samples, mu, sigma,
                     TailThreshold(confidence_to_tail(gamma_c)));
}

GaussianTrajectory run_gaussian_loop(const GaussianLoopConfig& config) {
  config.validate();
  RngStream draw = RngStream::from_label(config.seed, "gaussian/draw");
  RngStream noise = RngStream::from_label(config.seed, "gaussian/noise");

  double mu = config.mu0;
  double sigma = config.sigma0;
  double shrink = std::sqrt(config.lambda);

  GaussianTrajectory traj;
  traj.records.push_back({0, mu, sigma, config.n_samples});

  for (std::size_t t = 1; t <= config.generations; ++t) {
    auto xs = sample_normal(draw, mu, sigma, config.n_samples);
    std::vector<double> kept;
    switch (config.filter) {
      case GaussianFilter::kNone:
        kept.assign(xs.begin(), xs.end());
        break;
      case GaussianFilter::kTail:
        kept = tail_filter(xs, mu, sigma, TailThreshold(config.tail_a));
        break;
      case GaussianFilter::kConfidence:
        kept = confidence_filter(xs, mu, sigma, config.confidence_gamma);
        break;
    }
    if (kept.size() < 2) {
      traj.truncated = true;
      break;
    }
    auto [m, v] = config.estimator == EstimatorKind::kPerfect
                      ? mle_fit(kept)
                      : noisy_fit(kept, noise);
    mu = m;
    sigma = shrink * std::sqrt(v);
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
      traj.truncated = true;  // scale underflowed to zero
      break;
    }
    traj.records.push_back({t, mu, sigma, kept.size()});
  }
  return traj;
}

std::vector<double> analytic_variance_trajectory(double var0,
                                                 SamplingBias lambda,
                                                 TailThreshold a,
                                                 std::size_t generations) {
  if (!(var0 > 0.0)) throw std::invalid_argument("var0 must be > 0");
  double factor = lambda.value() * eta(a);
  std::vector<double> out;
  out.reserve(generations + 1);
  double v = var0;
  for (std::size_t t = 0; t <= generations; ++t) {
    out.push_back(v);
    v *= factor;
  }
  return out;
}

void write_trajectory_csv(std::ostream& out, const GaussianTrajectory& traj) {
  out << "generation,mu_hat,sigma_hat,retained_count\n";
  for (const auto& r : traj.records)
    out << r.generation << ',' << fmt12(r.mu_hat) << ',' << fmt12(r.sigma_hat)
        << ',' << r.retained_count << '\n';
}

}  // namespace clab
