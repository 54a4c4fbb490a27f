#include "clab/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

#include "clab/csvio.hpp"

namespace clab {
namespace {

double dist2(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

// Log density of N(mean, L L^T) at x, given the Cholesky factor L.
double log_gauss(std::span<const double> x, const std::vector<double>& mean,
                 const Matrix& lower) {
  const std::size_t d = mean.size();
  std::vector<double> y(d);
  for (std::size_t i = 0; i < d; ++i) {
    double sum = x[i] - mean[i];
    for (std::size_t k = 0; k < i; ++k) sum -= lower(i, k) * y[k];
    y[i] = sum / lower(i, i);
  }
  double quad = 0.0;
  double half_logdet = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    quad += y[i] * y[i];
    half_logdet += std::log(lower(i, i));
  }
  return -0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi) -
         half_logdet - 0.5 * quad;
}

std::vector<Matrix> component_factors(const GmmModel& model) {
  std::vector<Matrix> factors;
  factors.reserve(model.components);
  for (const auto& cov : model.covariances) factors.push_back(cholesky(cov));
  return factors;
}

Matrix sample_covariance(const PointSet& data, double reg_epsilon) {
  const std::size_t n = data.size(), d = data.dim;
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto p = data.point(i);
    for (std::size_t j = 0; j < d; ++j) mean[j] += p[j];
  }
  for (auto& m : mean) m /= static_cast<double>(n);
  Matrix cov(d, d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto p = data.point(i);
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t c = 0; c < d; ++c)
        cov(r, c) += (p[r] - mean[r]) * (p[c] - mean[c]);
  }
  for (auto& v : cov.a) v /= static_cast<double>(n);
  for (std::size_t j = 0; j < d; ++j) cov(j, j) += reg_epsilon;
  return cov;
}

}  // namespace

void GmmModel::validate() const {
  if (components == 0 || dim == 0)
    throw std::invalid_argument("mixture must have components and dimension");
  if (weights.size() != components || means.size() != components ||
      covariances.size() != components)
    throw std::invalid_argument("mixture field sizes disagree");
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("negative mixture weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("mixture weights must sum to 1");
  for (std::size_t k = 0; k < components; ++k) {
    if (means[k].size() != dim ||
        covariances[k].rows != dim || covariances[k].cols != dim)
      throw std::invalid_argument("mixture component shape mismatch");
    Matrix floored = covariances[k];
    for (std::size_t j = 0; j < dim; ++j) floored(j, j) -= 0.999e-9;
    try {
      cholesky(floored);  // eigenvalue floor check
    } catch (const std::runtime_error&) {
      throw std::invalid_argument("component covariance below the 1e-9 floor");
    }
  }
}

GmmModel em_fit(const PointSet& data, std::size_t components,
                const EmOptions& opts) {
  const std::size_t n = data.size();
  const std::size_t d = data.dim;
  if (components < 1) throw std::invalid_argument("components must be >= 1");
  if (d < 1) throw std::invalid_argument("points must be at least 1-D");
  if (!(opts.reg_epsilon >= 0.0))
    throw std::invalid_argument("reg_epsilon must be >= 0");
  if (n < components * (d + 1))
    throw std::invalid_argument(
        "too few points: EM needs at least components*(dim+1)");

  GmmModel model;
  model.components = components;
  model.dim = d;

  bool identical = true;
  for (std::size_t i = 1; i < n && identical; ++i)
    if (!std::equal(data.point(i).begin(), data.point(i).end(),
                    data.point(0).begin()))
      identical = false;
  if (identical) {
    auto p0 = data.point(0);
    model.degenerate = true;
    model.weights.assign(components, 1.0 / static_cast<double>(components));
    Matrix reg = Matrix::identity(d);
    for (auto& v : reg.a) v *= std::max(opts.reg_epsilon, 1e-9);
    for (std::size_t k = 0; k < components; ++k) {
      model.means.emplace_back(p0.begin(), p0.end());
      model.covariances.push_back(reg);
    }
    model.validate();
    return model;
  }

  // k-means++ style seeding.
  RngStream rng = RngStream::from_label(opts.init_seed, "em/init");
  std::vector<std::size_t> chosen;
  chosen.push_back(rng.next_u64() % n);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i)
    d2[i] = dist2(data.point(i), data.point(chosen[0]));
  while (chosen.size() < components) {
    double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = 0;
    if (total > 0.0) {
      double u = rng.uniform01() * total;
      double cum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        cum += d2[i];
        if (cum >= u) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.next_u64() % n;
    }
    chosen.push_back(pick);
    for (std::size_t i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], dist2(data.point(i), data.point(pick)));
  }

  model.weights.assign(components, 1.0 / static_cast<double>(components));
  Matrix shared = sample_covariance(data, opts.reg_epsilon);
  for (std::size_t k = 0; k < components; ++k) {
    auto p = data.point(chosen[k]);
    model.means.emplace_back(p.begin(), p.end());
    model.covariances.push_back(shared);
  }

  std::vector<double> resp(n * components);
  std::vector<double> logp(components);
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (std::size_t iter = 0; iter < opts.max_iters; ++iter) {
    auto factors = component_factors(model);
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      auto x = data.point(i);
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < components; ++k) {
        logp[k] = std::log(std::max(model.weights[k], 1e-300)) +
                  log_gauss(x, model.means[k], factors[k]);
        top = std::max(top, logp[k]);
      }
      double denom = 0.0;
      for (std::size_t k = 0; k < components; ++k)
        denom += std::exp(logp[k] - top);
      double log_mix = top + std::log(denom);
      ll += log_mix;
      for (std::size_t k = 0; k < components; ++k)
        resp[i * components + k] = std::exp(logp[k] - log_mix);
    }
    model.log_likelihood_trace.push_back(ll);
    if (iter > 0 && ll - prev_ll < opts.tol) break;
    prev_ll = ll;

    for (std::size_t k = 0; k < components; ++k) {
      double nk = 0.0;
      for (std::size_t i = 0; i < n; ++i) nk += resp[i * components + k];
      model.weights[k] = nk / static_cast<double>(n);
      if (nk < 1e-12) continue;  // freeze a dead component
      std::vector<double> mean(d, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        auto x = data.point(i);
        double r = resp[i * components + k];
        for (std::size_t j = 0; j < d; ++j) mean[j] += r * x[j];
      }
      for (auto& m : mean) m /= nk;
      Matrix cov(d, d, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        auto x = data.point(i);
        double r = resp[i * components + k];
        for (std::size_t a = 0; a < d; ++a)
          for (std::size_t b = 0; b < d; ++b)
            cov(a, b) += r * (x[a] - mean[a]) * (x[b] - mean[b]);
      }
      for (auto& v : cov.a) v /= nk;
      for (std::size_t j = 0; j < d; ++j) cov(j, j) += opts.reg_epsilon;
      model.means[k] = std::move(mean);
      model.covariances[k] = std::move(cov);
    }
  }
  model.validate();
  return model;
}

std::vector<double> gmm_log_likelihood(const GmmModel& model,
                                       const PointSet& points) {
  if (points.dim != model.dim)
    throw std::invalid_argument("point dimension does not match model");
  auto factors = component_factors(model);
  std::vector<double> out;
  out.reserve(points.size());
  std::vector<double> logp(model.components);
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto x = points.point(i);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < model.components; ++k) {
      logp[k] = std::log(std::max(model.weights[k], 1e-300)) +
                log_gauss(x, model.means[k], factors[k]);
      top = std::max(top, logp[k]);
    }
    double denom = 0.0;
    for (std::size_t k = 0; k < model.components; ++k)
      denom += std::exp(logp[k] - top);
    out.push_back(top + std::log(denom));
  }
  return out;
}

PointSet gmm_sample(const GmmModel& model, std::size_t n, RngStream& rng) {
  auto factors = component_factors(model);
  PointSet out(model.dim);
  out.values.reserve(n * model.dim);
  std::vector<double> z(model.dim), x(model.dim);
  for (std::size_t i = 0; i < n; ++i) {
    double u = rng.uniform01();
    std::size_t comp = model.components - 1;
    double cum = 0.0;
    for (std::size_t k = 0; k < model.components; ++k) {
      cum += model.weights[k];
      if (u <= cum) {
        comp = k;
        break;
      }
    }
    for (auto& v : z) v = rng.gaussian();
    const Matrix& lower = factors[comp];
    for (std::size_t r = 0; r < model.dim; ++r) {
      double s = model.means[comp][r];
      for (std::size_t c = 0; c <= r; ++c) s += lower(r, c) * z[c];
      x[r] = s;
    }
    out.push(x);
  }
  return out;
}

PointSet clip_by_likelihood(const PointSet& points,
                            std::span<const double> scores, double q) {
  if (scores.size() != points.size())
    throw std::invalid_argument("scores and points disagree in length");
  std::vector<double> copy(scores.begin(), scores.end());
  double cut = percentile(copy, q);
  PointSet kept(points.dim);
  for (std::size_t i = 0; i < points.size(); ++i)
    if (scores[i] <= cut) kept.push(points.point(i));
  return kept;
}

double within_covariance_trace(const GmmModel& model) {
  double t = 0.0;
  for (std::size_t k = 0; k < model.components; ++k)
    t += model.weights[k] * trace(model.covariances[k]);
  return t;
}

double mean_displacement(const GmmModel& current, const GmmModel& reference) {
  if (current.components != reference.components ||
      current.dim != reference.dim)
    throw std::invalid_argument("mixtures are not comparable");
  const std::size_t k = current.components;
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  if (k <= 8) {
    do {
      double total = 0.0;
      for (std::size_t i = 0; i < k; ++i)
        total += std::sqrt(dist2(current.means[i], reference.means[perm[i]]));
      best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    // Greedy nearest matching for large mixtures.
    std::vector<bool> used(k, false);
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      double nearest = std::numeric_limits<double>::infinity();
      std::size_t pick = 0;
      for (std::size_t j = 0; j < k; ++j) {
        if (used[j]) continue;
        double dd = dist2(current.means[i], reference.means[j]);
        if (dd < nearest) {
          nearest = dd;
          pick = j;
        }
      }
      used[pick] = true;
      total += std::sqrt(nearest);
    }
    best = total;
  }
  return best / static_cast<double>(k);
}

double symmetric_kl(const GmmModel& p, const GmmModel& q, std::size_t n,
                    RngStream& rng) {
  if (n == 0) throw std::invalid_argument("symmetric_kl needs samples");
  PointSet from_p = gmm_sample(p, n, rng);
  PointSet from_q = gmm_sample(q, n, rng);
  auto pp = gmm_log_likelihood(p, from_p);
  auto qp = gmm_log_likelihood(q, from_p);
  auto qq = gmm_log_likelihood(q, from_q);
  auto pq = gmm_log_likelihood(p, from_q);
  double kl_pq = 0.0, kl_qp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    kl_pq += pp[i] - qp[i];
    kl_qp += qq[i] - pq[i];
  }
  return (kl_pq + kl_qp) / static_cast<double>(n);
}

void GmmLoopConfig::validate() const {
  if (components < 1) throw std::invalid_argument("components must be >= 1");
  if (n_samples < 2) throw std::invalid_argument("n_samples must be >= 2");
  if (generations < 1) throw std::invalid_argument("generations must be >= 1");
  if (!(clip_percentile >= 0.0) || !(clip_percentile <= 100.0))
    throw std::invalid_argument("clip_percentile must lie in [0, 100]");
  if (sym_kl_samples < 1)
    throw std::invalid_argument("sym_kl_samples must be >= 1");
}

GmmLoopResult run_gmm_loop(const PointSet& initial,
                           const GmmLoopConfig& config) {
  config.validate();
  GmmLoopResult result;
  auto fit_generation = [&](const PointSet& pts, std::size_t gen) {
    EmOptions opts = config.em;
    opts.init_seed = config.seed ^ RngStream::label_id("gmm/em/" + std::to_string(gen));
    try {
      return em_fit(pts, config.components, opts);
    } catch (const std::exception& err) {
      throw std::runtime_error("gmm loop failed at generation " +
                               std::to_string(gen) + ": " + err.what());
    }
  };

  GmmModel base = fit_generation(initial, 0);
  result.records.push_back({0, within_covariance_trace(base), 0.0, 0.0,
                            initial.size()});
  result.models.push_back(base);
  result.kept_points.push_back(initial);

  GmmModel prev = base;
  for (std::size_t gen = 1; gen <= config.generations; ++gen) {
    RngStream sample_rng = RngStream::from_label(
        config.seed, "gmm/sample/" + std::to_string(gen));
    PointSet sampled = gmm_sample(prev, config.n_samples, sample_rng);
    auto scores = gmm_log_likelihood(prev, sampled);
    PointSet kept = clip_by_likelihood(sampled, scores, config.clip_percentile);

    GmmModel model = fit_generation(kept, gen);
    RngStream kl_rng =
        RngStream::from_label(config.seed, "gmm/kl/" + std::to_string(gen));
    result.records.push_back({gen, within_covariance_trace(model),
                              mean_displacement(model, base),
                              symmetric_kl(model, base, config.sym_kl_samples,
                                           kl_rng),
                              kept.size()});
    result.models.push_back(model);
    result.kept_points.push_back(std::move(kept));
    prev = result.models.back();
  }
  return result;
}

void write_gmm_csv(std::ostream& out, const GmmLoopResult& result) {
  out << "generation,trace,mean_displacement,sym_kl,points_kept\n";
  for (const auto& r : result.records)
    out << r.generation << ',' << fmt12(r.trace) << ','
        << fmt12(r.mean_displacement) << ',' << fmt12(r.sym_kl) << ','
        << r.points_kept << '\n';
}

PointSet make_cluster_dataset(const std::vector<std::vector<double>>& centers,
                              double cluster_std, std::size_t total_points,
                              RngStream& rng) {
  if (centers.empty()) throw std::invalid_argument("need at least one center");
  if (!(cluster_std > 0.0))
    throw std::invalid_argument("cluster_std must be > 0");
  const std::size_t d = centers[0].size();
  for (const auto& c : centers)
    if (c.size() != d)
      throw std::invalid_argument("cluster centers disagree in dimension");
  PointSet out(d);
  std::vector<double> x(d);
  for (std::size_t i = 0; i < total_points; ++i) {
    const auto& c = centers[i % centers.size()];
    for (std::size_t j = 0; j < d; ++j) x[j] = c[j] + cluster_std * rng.gaussian();
    out.push(x);
  }
  return out;
}

}  // namespace clab
