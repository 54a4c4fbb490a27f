#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "clab/gmm.hpp"
#include "clab/linalg.hpp"
#include "clab/mathcore.hpp"

using namespace clab;

namespace {

PointSet two_clusters(std::uint64_t seed, std::size_t total,
                      double spread = 0.5, double offset = 5.0) {
  RngStream rng(seed, 0);
  return make_cluster_dataset({{-offset, 0.0}, {offset, 0.0}}, spread, total,
                              rng);
}

}  // namespace

TEST_CASE("cholesky factor and solve") {
  Matrix m(2, 2);
  m(0, 0) = 4.0;
  m(0, 1) = 2.0;
  m(1, 0) = 2.0;
  m(1, 1) = 3.0;
  Matrix lower = cholesky(m);
  CHECK(lower(0, 0) == doctest::Approx(2.0));
  CHECK(lower(1, 0) == doctest::Approx(1.0));
  CHECK(lower(1, 1) == doctest::Approx(std::sqrt(2.0)));
  CHECK(lower(0, 1) == 0.0);

  std::vector<double> b = {2.0, 5.0};
  auto x = cholesky_solve(lower, b);
  CHECK(4.0 * x[0] + 2.0 * x[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(2.0 * x[0] + 3.0 * x[1] == doctest::Approx(5.0).epsilon(1e-12));

  Matrix bad(2, 2);
  bad(0, 0) = 1.0;
  bad(0, 1) = 2.0;
  bad(1, 0) = 2.0;
  bad(1, 1) = 1.0;  // indefinite
  CHECK_THROWS_AS(cholesky(bad), std::runtime_error);
  CHECK(trace(m) == 7.0);
}

TEST_CASE("em recovers two well-separated clusters") {
  PointSet data = two_clusters(42, 1000);
  EmOptions opts;
  opts.init_seed = 7;
  GmmModel model = em_fit(data, 2, opts);
  model.validate();
  REQUIRE(model.components == 2);
  std::size_t left = model.means[0][0] < model.means[1][0] ? 0 : 1;
  CHECK(std::abs(model.means[left][0] + 5.0) < 0.1);
  CHECK(std::abs(model.means[left][1]) < 0.1);
  CHECK(std::abs(model.means[1 - left][0] - 5.0) < 0.1);
  CHECK(std::abs(model.means[1 - left][1]) < 0.1);
  CHECK(std::abs(model.weights[0] - 0.5) < 0.05);
  CHECK(std::abs(model.weights[1] - 0.5) < 0.05);
  for (const auto& cov : model.covariances) {
    CHECK(std::abs(cov(0, 0) - 0.25) < 0.05);
    CHECK(std::abs(cov(1, 1) - 0.25) < 0.05);
  }
}

TEST_CASE("em log-likelihood is nondecreasing on random datasets") {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    RngStream rng(seed, 100);
    std::size_t blobs = 1 + seed % 3;
    std::vector<std::vector<double>> centers;
    for (std::size_t b = 0; b < blobs; ++b)
      centers.push_back({4.0 * rng.gaussian(), 4.0 * rng.gaussian()});
    double spread = 0.3 + 1.5 * rng.uniform01();
    std::size_t n = 30 + rng.next_u64() % 90;
    PointSet data = make_cluster_dataset(centers, spread, n, rng);
    EmOptions opts;
    opts.init_seed = seed;
    GmmModel model = em_fit(data, 2, opts);
    const auto& ll = model.log_likelihood_trace;
    REQUIRE(!ll.empty());
    for (std::size_t i = 1; i < ll.size(); ++i)
      CHECK(ll[i] >= ll[i - 1] - 1e-9);
  }
}

TEST_CASE("single-component fit is the closed-form Gaussian") {
  RngStream rng(5, 0);
  PointSet data(2);
  for (int i = 0; i < 30; ++i) {
    std::vector<double> p = {1.0 + rng.gaussian(), -2.0 + 0.5 * rng.gaussian()};
    data.push(p);
  }
  EmOptions opts;
  GmmModel model = em_fit(data, 1, opts);
  REQUIRE(model.components == 1);
  CHECK(model.weights[0] == doctest::Approx(1.0).epsilon(1e-12));

  // Independent closed form: sample mean and 1/n covariance + reg.
  std::vector<double> mean(2, 0.0);
  for (std::size_t i = 0; i < data.size(); ++i)
    for (int j = 0; j < 2; ++j) mean[j] += data.point(i)[j];
  for (auto& m : mean) m /= static_cast<double>(data.size());
  Matrix cov(2, 2, 0.0);
  for (std::size_t i = 0; i < data.size(); ++i)
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        cov(a, b) +=
            (data.point(i)[a] - mean[a]) * (data.point(i)[b] - mean[b]);
  for (auto& v : cov.a) v /= static_cast<double>(data.size());
  cov(0, 0) += opts.reg_epsilon;
  cov(1, 1) += opts.reg_epsilon;

  for (int j = 0; j < 2; ++j)
    CHECK(model.means[0][j] == doctest::Approx(mean[j]).epsilon(1e-12));
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      CHECK(model.covariances[0](a, b) ==
            doctest::Approx(cov(a, b)).epsilon(1e-10));
}

TEST_CASE("all-identical data yields a flagged regularized point model") {
  PointSet data(2);
  std::vector<double> p = {3.0, -1.0};
  for (int i = 0; i < 20; ++i) data.push(p);
  EmOptions opts;
  GmmModel model = em_fit(data, 2, opts);
  CHECK(model.degenerate);
  for (const auto& m : model.means) {
    CHECK(m[0] == 3.0);
    CHECK(m[1] == -1.0);
  }
  for (const auto& cov : model.covariances)
    CHECK(trace(cov) == doctest::Approx(2.0 * opts.reg_epsilon));
}

TEST_CASE("em rejects undersized datasets") {
  PointSet data(2);
  for (int i = 0; i < 5; ++i) {
    std::vector<double> p = {double(i), double(-i)};
    data.push(p);
  }
  EmOptions opts;
  CHECK_THROWS_AS(em_fit(data, 2, opts), std::invalid_argument);  // needs 6
}

TEST_CASE("log likelihood of a standard normal at the origin") {
  GmmModel model;
  model.components = 1;
  model.dim = 1;
  model.weights = {1.0};
  model.means = {{0.0}};
  model.covariances = {Matrix::identity(1)};
  PointSet at_zero(1);
  std::vector<double> origin = {0.0};
  at_zero.push(origin);
  auto ll = gmm_log_likelihood(model, at_zero);
  REQUIRE(ll.size() == 1);
  // ln(1/sqrt(2*pi)) (mpmath, 30 digits)
  CHECK(ll[0] == doctest::Approx(-0.918938533204672742).epsilon(1e-12));
}

TEST_CASE("sampling follows weights and component shapes") {
  GmmModel model;
  model.components = 2;
  model.dim = 2;
  model.weights = {0.3, 0.7};
  model.means = {{-6.0, 0.0}, {6.0, 1.0}};
  Matrix c0 = Matrix::identity(2);
  c0(0, 0) = 0.5;
  c0(1, 1) = 0.25;
  model.covariances = {c0, Matrix::identity(2)};
  model.validate();

  RngStream rng(123, 0);
  PointSet xs = gmm_sample(model, 20000, rng);
  REQUIRE(xs.size() == 20000);
  std::size_t left = 0;
  double left_mean_x = 0.0, right_mean_x = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs.point(i)[0] < 0.0) {
      ++left;
      left_mean_x += xs.point(i)[0];
    } else {
      right_mean_x += xs.point(i)[0];
    }
  }
  double left_frac = double(left) / double(xs.size());
  CHECK(std::abs(left_frac - 0.3) < 0.02);
  CHECK(std::abs(left_mean_x / double(left) + 6.0) < 0.05);
  CHECK(std::abs(right_mean_x / double(xs.size() - left) - 6.0) < 0.05);

  RngStream r1(9, 9), r2(9, 9);
  CHECK(gmm_sample(model, 64, r1).values == gmm_sample(model, 64, r2).values);
}

TEST_CASE("likelihood clipping keeps scores at or below the cut") {
  PointSet pts(1);
  for (int i = 1; i <= 5; ++i) {
    std::vector<double> p = {double(i)};
    pts.push(p);
  }
  std::vector<double> scores = {1, 2, 3, 4, 5};
  PointSet kept = clip_by_likelihood(pts, scores, 80.0);
  REQUIRE(kept.size() == 4);
  for (std::size_t i = 0; i < kept.size(); ++i)
    CHECK(kept.point(i)[0] == double(i + 1));

  // Ties at the cut are all kept.
  std::vector<double> tied = {1, 2, 2, 2, 5};
  PointSet kept_ties = clip_by_likelihood(pts, tied, 60.0);
  CHECK(kept_ties.size() == 4);

  PointSet all = clip_by_likelihood(pts, scores, 100.0);
  CHECK(all.size() == pts.size());
}

TEST_CASE("mixture density integrates to one over a bounding box") {
  GmmModel model;
  model.components = 2;
  model.dim = 2;
  model.weights = {0.4, 0.6};
  model.means = {{-2.0, 1.0}, {2.0, -1.0}};
  Matrix c0 = Matrix::identity(2);
  c0(0, 1) = 0.3;
  c0(1, 0) = 0.3;
  model.covariances = {c0, Matrix::identity(2)};
  model.validate();

  RngStream rng(2718, 0);
  const double lo = -10.0, hi = 10.0;
  const std::size_t n = 200000;
  PointSet probes(2);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> p = {lo + (hi - lo) * rng.uniform01(),
                             lo + (hi - lo) * rng.uniform01()};
    probes.push(p);
  }
  auto ll = gmm_log_likelihood(model, probes);
  double mean_density = 0.0;
  for (double v : ll) mean_density += std::exp(v);
  mean_density /= static_cast<double>(n);
  double integral = mean_density * (hi - lo) * (hi - lo);
  CHECK(std::abs(integral - 1.0) < 0.02);
}

TEST_CASE("mean displacement uses the best component matching") {
  GmmModel ref;
  ref.components = 2;
  ref.dim = 2;
  ref.weights = {0.5, 0.5};
  ref.means = {{0.0, 0.0}, {4.0, 4.0}};
  ref.covariances = {Matrix::identity(2), Matrix::identity(2)};
  GmmModel cur = ref;
  cur.means = {{4.0, 5.0}, {0.0, 1.0}};  // swapped order, unit offsets
  CHECK(mean_displacement(cur, ref) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mean_displacement(ref, ref) == 0.0);
}

TEST_CASE("symmetric kl is zero against itself and positive across models") {
  GmmModel a;
  a.components = 1;
  a.dim = 2;
  a.weights = {1.0};
  a.means = {{0.0, 0.0}};
  a.covariances = {Matrix::identity(2)};
  GmmModel b = a;
  b.means = {{3.0, 0.0}};

  RngStream r1(7, 0);
  CHECK(symmetric_kl(a, a, 5000, r1) == doctest::Approx(0.0));
  RngStream r2(7, 0);
  // Two unit Gaussians 3 apart: Jeffreys divergence is exactly 9.
  CHECK(symmetric_kl(a, b, 20000, r2) == doctest::Approx(9.0).epsilon(0.05));
}

TEST_CASE("gmm loop records, determinism, and csv layout") {
  PointSet data = two_clusters(31, 50, 1.0, 4.0);
  GmmLoopConfig cfg;
  cfg.components = 2;
  cfg.n_samples = 50;
  cfg.generations = 4;
  cfg.clip_percentile = 80.0;
  cfg.seed = 11;
  cfg.sym_kl_samples = 2000;

  auto run = run_gmm_loop(data, cfg);
  REQUIRE(run.records.size() == 5);
  CHECK(run.records[0].generation == 0);
  CHECK(run.records[0].points_kept == data.size());
  CHECK(run.records[0].mean_displacement == 0.0);
  CHECK(run.records[0].sym_kl == 0.0);
  for (const auto& rec : run.records) CHECK(rec.trace > 0.0);
  // Clipping keeps the nearest-rank 80% of 50 samples.
  for (std::size_t g = 1; g < run.records.size(); ++g) {
    CHECK(run.records[g].points_kept >= 40);
    CHECK(run.records[g].points_kept < 50);
  }

  auto again = run_gmm_loop(data, cfg);
  for (std::size_t g = 0; g < run.records.size(); ++g) {
    CHECK(run.records[g].trace == again.records[g].trace);
    CHECK(run.records[g].sym_kl == again.records[g].sym_kl);
    CHECK(run.records[g].points_kept == again.records[g].points_kept);
  }

  GmmLoopConfig baseline = cfg;
  baseline.clip_percentile = 100.0;
  auto base_run = run_gmm_loop(data, baseline);
  for (std::size_t g = 1; g < base_run.records.size(); ++g)
    CHECK(base_run.records[g].points_kept == cfg.n_samples);

  std::ostringstream a, b;
  write_gmm_csv(a, run);
  write_gmm_csv(b, run);
  CHECK(a.str() == b.str());
  std::istringstream lines(a.str());
  std::string header;
  std::getline(lines, header);
  CHECK(header == "generation,trace,mean_displacement,sym_kl,points_kept");
}

TEST_CASE("gmm loop config validation and failure tagging") {
  PointSet data = two_clusters(1, 40, 1.0, 4.0);
  GmmLoopConfig cfg;
  cfg.n_samples = 1;
  CHECK_THROWS_AS(run_gmm_loop(data, cfg), std::invalid_argument);
  cfg = GmmLoopConfig{};
  cfg.clip_percentile = 120.0;
  CHECK_THROWS_AS(run_gmm_loop(data, cfg), std::invalid_argument);

  // Too few survivors for the next fit surfaces as a runtime error naming
  // the generation.
  GmmLoopConfig tiny;
  tiny.components = 2;
  tiny.n_samples = 6;
  tiny.clip_percentile = 50.0;  // keeps 3 of 6 < 2*(2+1)
  tiny.generations = 3;
  tiny.sym_kl_samples = 100;
  try {
    run_gmm_loop(data, tiny);
    FAIL("expected a runtime error");
  } catch (const std::runtime_error& err) {
    CHECK(std::string(err.what()).find("generation 1") != std::string::npos);
  }
}
