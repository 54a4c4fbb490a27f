#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "clab/linalg.hpp"
#include "clab/mathcore.hpp"

namespace clab {

// Flat row-major collection of d-dimensional points.
struct PointSet {
  std::size_t dim = 0;
  std::vector<double> values;

  PointSet() = default;
  explicit PointSet(std::size_t d) : dim(d) {}

  std::size_t size() const { return dim == 0 ? 0 : values.size() / dim; }
  std::span<const double> point(std::size_t i) const {
    return {values.data() + i * dim, dim};
  }
  void push(std::span<const double> p) {
    values.insert(values.end(), p.begin(), p.end());
  }
};

struct GmmModel {
  std::size_t components = 0;
  std::size_t dim = 0;
  std::vector<double> weights;             // simplex, sums to 1 +- 1e-9
  std::vector<std::vector<double>> means;  // components x dim
  std::vector<Matrix> covariances;         // SPD, eigenvalues >= 1e-9
  bool degenerate = false;                 // fit on all-identical data
  std::vector<double> log_likelihood_trace;  // per EM iteration

  void validate() const;  // throws std::invalid_argument
};

struct EmOptions {
  std::size_t max_iters = 200;
  double tol = 1e-6;            // absolute log-likelihood improvement
  double reg_epsilon = 1e-6;    // added to covariance diagonals each M step
  std::uint64_t init_seed = 0;  // k-means++ style seeding stream
};

// Fits a mixture by EM with k-means++ style seeding. Requires at least
// components * (dim + 1) points. All-identical data yields a flagged
// single-point model with regularized covariance.
GmmModel em_fit(const PointSet& data, std::size_t components,
                const EmOptions& opts);

// Per-point mixture log density (log-sum-exp over components).
std::vector<double> gmm_log_likelihood(const GmmModel& model,
                                       const PointSet& points);

PointSet gmm_sample(const GmmModel& model, std::size_t n, RngStream& rng);

// Keeps points whose score is at most the nearest-rank q-percentile of
// scores; ties at the cut are kept. q = 100 keeps everything.
PointSet clip_by_likelihood(const PointSet& points,
                            std::span<const double> scores, double q);

// Total covariance trace of the mixture components (weight-averaged sum of
// component covariance traces). Between-component spread is tracked
// separately by mean_displacement.
double within_covariance_trace(const GmmModel& model);

// Mean distance between current and reference component means under the
// best component matching (exhaustive for small mixtures).
double mean_displacement(const GmmModel& current, const GmmModel& reference);

// Jeffreys divergence KL(p||q) + KL(q||p), Monte-Carlo with n samples per
// direction drawn from the given stream.
double symmetric_kl(const GmmModel& p, const GmmModel& q, std::size_t n,
                    RngStream& rng);

struct GmmLoopConfig {
  std::size_t components = 2;
  std::size_t n_samples = 50;     // fresh draws per generation, >= 2
  std::size_t generations = 50;   // >= 1
  double clip_percentile = 80.0;  // [0, 100]; 100 = keep all (baseline)
  EmOptions em;
  std::uint64_t seed = 0;
  std::size_t sym_kl_samples = 10000;

  void validate() const;
};

struct GmmGenerationRecord {
  std::size_t generation;
  double trace;
  double mean_displacement;
  double sym_kl;
  std::size_t points_kept;
};

struct GmmLoopResult {
  std::vector<GmmGenerationRecord> records;  // generations + 1
  std::vector<GmmModel> models;              // model per generation
  std::vector<PointSet> kept_points;         // training set per generation
};

// Generation 0 fits the seed dataset; each later generation samples from the
// previous fit, clips by likelihood, and refits. EM failures surface as
// std::runtime_error tagged with the generation index.
GmmLoopResult run_gmm_loop(const PointSet& initial,
                           const GmmLoopConfig& config);

// Columns: generation,trace,mean_displacement,sym_kl,points_kept.
void write_gmm_csv(std::ostream& out, const GmmLoopResult& result);

// Equal-count spherical clusters around the given centers; the standard
// seed dataset for the loop.
PointSet make_cluster_dataset(const std::vector<std::vector<double>>& centers,
                              double cluster_std, std::size_t total_points,
                              RngStream& rng);

}  // namespace clab
