#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "clab/corpus.hpp"
#include "clab/tinylm.hpp"

namespace clab {

// Discrete distribution over a fixed, sorted event support. Unigram events
// are token ids; bigram events pack two ids as (first << 32) | second.
struct SmoothedDistribution {
  std::vector<std::uint64_t> support;
  std::vector<double> probs;
  double epsilon = 0.0;

  void validate() const;  // positive mass summing to 1 within 1e-9
};

std::uint64_t bigram_key(TokenId first, TokenId second);

// All token ids below vocab, in order.
std::vector<std::uint64_t> unigram_support(std::size_t vocab);

// Sorted union of the within-document bigrams observed in either corpus.
std::vector<std::uint64_t> bigram_support(const std::vector<TokenSeq>& a,
                                          const std::vector<TokenSeq>& b);

// Additive-epsilon smoothed n-gram frequencies over the given support:
// p(e) = (count(e) + eps) / (total + eps * |support|). Bigrams never cross
// document boundaries. Events outside the support are an error.
SmoothedDistribution ngram_distribution(const std::vector<TokenSeq>& docs,
                                        int n,
                                        std::span<const std::uint64_t> support,
                                        double epsilon = 1e-6);

// Sum of p * ln(p/q) in nats over the (identical) supports.
double kl_divergence(const SmoothedDistribution& p,
                     const SmoothedDistribution& q);

// Fraction of questions whose true continuation has strictly higher
// sequence log probability than the foil; ties score as incorrect.
double kr_score(const TinyLmParams& params, std::span<const KrQuestion> questions);

// Index of the first stage whose score drops below tau, if any.
std::optional<std::size_t> time_to_failure(std::span<const double> scores,
                                           double tau = 0.75);

}  // namespace clab
