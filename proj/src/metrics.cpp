#include "clab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace clab {
namespace {

std::map<std::uint64_t, std::size_t> count_events(
    const std::vector<TokenSeq>& docs, int n) {
  std::map<std::uint64_t, std::size_t> counts;
  for (const TokenSeq& doc : docs) {
    if (n == 1) {
      for (TokenId t : doc) ++counts[t];
    } else {
      for (std::size_t i = 0; i + 1 < doc.size(); ++i) {
        ++counts[bigram_key(doc[i], doc[i + 1])];
      }
    }
  }
  return counts;
}

}  // namespace

void SmoothedDistribution::validate() const {
  if (support.size() != probs.size()) {
    throw std::invalid_argument("distribution support/probability mismatch");
  }
  if (support.empty()) {
    throw std::invalid_argument("distribution support is empty");
  }
  if (!std::is_sorted(support.begin(), support.end()) ||
      std::adjacent_find(support.begin(), support.end()) != support.end()) {
    throw std::invalid_argument("distribution support must be sorted and unique");
  }
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw std::invalid_argument("distribution probabilities must be nonnegative");
    }
    sum += p;
  }
  if (std::fabs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("distribution probabilities must sum to 1");
  }
}

std::uint64_t bigram_key(TokenId first, TokenId second) {
  return (static_cast<std::uint64_t>(first) << 32) |
         static_cast<std::uint64_t>(second);
}

std::vector<std::uint64_t> unigram_support(std::size_t vocab) {
  if (vocab == 0) throw std::invalid_argument("empty vocabulary");
  std::vector<std::uint64_t> support(vocab);
  for (std::size_t i = 0; i < vocab; ++i) support[i] = i;
  return support;
}

std::vector<std::uint64_t> bigram_support(const std::vector<TokenSeq>& a,
                                          const std::vector<TokenSeq>& b) {
  std::vector<std::uint64_t> support;
  for (const auto& counts : {count_events(a, 2), count_events(b, 2)}) {
    for (const auto& [key, count] : counts) support.push_back(key);
  }
  std::sort(support.begin(), support.end());
  support.erase(std::unique(support.begin(), support.end()), support.end());
  return support;
}

SmoothedDistribution ngram_distribution(const std::vector<TokenSeq>& docs,
                                        int n,
                                        std::span<const std::uint64_t> support,
                                        double epsilon) {
  if (n != 1 && n != 2) {
    throw std::invalid_argument("only unigram and bigram statistics are supported");
  }
  if (docs.empty()) throw std::invalid_argument("empty corpus");
  if (support.empty()) throw std::invalid_argument("empty support");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw std::invalid_argument("smoothing epsilon must be nonnegative");
  }

  const std::map<std::uint64_t, std::size_t> counts = count_events(docs, n);
  std::size_t total = 0;
  for (const auto& [key, count] : counts) {
    if (!std::binary_search(support.begin(), support.end(), key)) {
      throw std::invalid_argument("observed event outside the declared support");
    }
    total += count;
  }
  if (total == 0) throw std::invalid_argument("corpus has no events of this order");

  SmoothedDistribution dist;
  dist.support.assign(support.begin(), support.end());
  dist.probs.resize(support.size());
  dist.epsilon = epsilon;
  const double denom =
      static_cast<double>(total) + epsilon * static_cast<double>(support.size());
  for (std::size_t i = 0; i < dist.support.size(); ++i) {
    const auto it = counts.find(dist.support[i]);
    const double c = it == counts.end() ? 0.0 : static_cast<double>(it->second);
    dist.probs[i] = (c + epsilon) / denom;
  }
  dist.validate();
  return dist;
}

double kl_divergence(const SmoothedDistribution& p,
                     const SmoothedDistribution& q) {
  p.validate();
  q.validate();
  if (p.support != q.support) {
    throw std::invalid_argument("KL divergence requires identical supports");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < p.probs.size(); ++i) {
    const double pi = p.probs[i];
    if (pi == 0.0) continue;
    if (q.probs[i] == 0.0) return std::numeric_limits<double>::infinity();
    sum += pi * std::log(pi / q.probs[i]);
  }
  return sum;
}

double kr_score(const TinyLmParams& params,
                std::span<const KrQuestion> questions) {
  if (questions.empty()) {
    throw std::invalid_argument("retention scoring needs at least one question");
  }
  std::size_t correct = 0;
  TokenSeq seq;
  for (const KrQuestion& q : questions) {
    seq.assign(q.context.begin(), q.context.end());
    seq.insert(seq.end(), q.true_continuation.begin(), q.true_continuation.end());
    const double lp_true = sequence_log_prob(params, seq);

    seq.assign(q.context.begin(), q.context.end());
    seq.insert(seq.end(), q.false_continuation.begin(),
               q.false_continuation.end());
    const double lp_false = sequence_log_prob(params, seq);
    if (lp_true > lp_false) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(questions.size());
}

std::optional<std::size_t> time_to_failure(std::span<const double> scores,
                                           double tau) {
  if (scores.empty()) {
    throw std::invalid_argument("time to failure needs at least one score");
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] < tau) return i;
  }
  return std::nullopt;
}

}  // namespace clab
