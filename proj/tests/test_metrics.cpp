#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "clab/corpus.hpp"
#include "clab/losses.hpp"
#include "clab/metrics.hpp"
#include "clab/tinylm.hpp"

using namespace clab;

namespace {

constexpr double kLn2 = 0.693147180559945309;  // mpmath, 30 digits

TinyLmParams train_on(const std::vector<TokenSeq>& docs, std::size_t vocab,
                      std::uint64_t seed, std::size_t epochs) {
  RngStream init = RngStream::from_label(seed, "init");
  TinyLmParams params = lm_init(vocab, 4, 12, 24, init);
  TrainHyper hyper;
  hyper.learning_rate = 0.5;
  RngStream train = RngStream::from_label(seed, "train");
  for (std::size_t e = 0; e < epochs; ++e) {
    lm_train_epoch(params, docs, LossSpec::cross_entropy(), hyper, train);
  }
  return params;
}

std::vector<KrQuestion> symmetrized(std::span<const KrQuestion> questions) {
  std::vector<KrQuestion> out(questions.begin(), questions.end());
  for (const KrQuestion& q : questions) {
    KrQuestion swapped = q;
    std::swap(swapped.true_continuation, swapped.false_continuation);
    out.push_back(std::move(swapped));
  }
  return out;
}

}  // namespace

TEST_CASE("smoothing gives unseen events a positive floor") {
  const std::vector<TokenSeq> docs = {{1, 1, 1}};
  const std::vector<std::uint64_t> support = {1, 2};
  const SmoothedDistribution d = ngram_distribution(docs, 1, support, 1e-6);
  CHECK(d.probs[1] > 0.0);
  CHECK(d.probs[1] == doctest::Approx(1e-6 / (3.0 + 2e-6)).epsilon(1e-12));
  CHECK(d.probs[0] + d.probs[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("distributions are normalized over the declared support") {
  RngStream rng(500, 1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<TokenSeq> docs;
    const std::size_t n_docs = 1 + rng.next_u64() % 5;
    for (std::size_t i = 0; i < n_docs; ++i) {
      TokenSeq doc(2 + rng.next_u64() % 6);
      for (TokenId& t : doc) t = static_cast<TokenId>(rng.next_u64() % 9);
      docs.push_back(std::move(doc));
    }
    const SmoothedDistribution uni =
        ngram_distribution(docs, 1, unigram_support(9), 1e-6);
    double sum = 0.0;
    for (double p : uni.probs) sum += p;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    uni.validate();

    const std::vector<std::uint64_t> bsup = bigram_support(docs, docs);
    const SmoothedDistribution bi = ngram_distribution(docs, 2, bsup, 1e-6);
    sum = 0.0;
    for (double p : bi.probs) sum += p;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("equal counts give equal mass at zero smoothing") {
  const std::vector<TokenSeq> docs = {{1, 2}, {2, 1}};
  const std::vector<std::uint64_t> support = {1, 2};
  const SmoothedDistribution d = ngram_distribution(docs, 1, support, 0.0);
  CHECK(d.probs[0] == 0.5);
  CHECK(d.probs[1] == 0.5);
}

TEST_CASE("bigrams never cross document boundaries") {
  const std::vector<TokenSeq> docs = {{1, 2}, {3, 4}};
  const std::vector<std::uint64_t> support = bigram_support(docs, docs);
  CHECK(support == std::vector<std::uint64_t>{bigram_key(1, 2), bigram_key(3, 4)});
  const SmoothedDistribution d = ngram_distribution(docs, 2, support, 0.0);
  CHECK(d.probs[0] == 0.5);
  CHECK(d.probs[1] == 0.5);

  const std::vector<TokenSeq> singleton = {{7}};
  CHECK_THROWS_AS((void)ngram_distribution(singleton, 2, support, 1e-6),
                  std::invalid_argument);
}

TEST_CASE("events outside the support are rejected") {
  const std::vector<TokenSeq> docs = {{1, 5}};
  const std::vector<std::uint64_t> support = {1, 2};
  CHECK_THROWS_AS((void)ngram_distribution(docs, 1, support, 1e-6),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      (void)ngram_distribution(std::vector<TokenSeq>{}, 1, support, 1e-6),
      std::invalid_argument);
}

TEST_CASE("KL divergence of a distribution with itself is zero") {
  const std::vector<TokenSeq> docs = {{1, 2, 2, 3}};
  const SmoothedDistribution d =
      ngram_distribution(docs, 1, unigram_support(4), 1e-6);
  CHECK(kl_divergence(d, d) == 0.0);
}

TEST_CASE("KL against uniform approaches ln 2 as the mass concentrates") {
  SmoothedDistribution p, q;
  p.support = {0, 1};
  const double e = 1e-9;
  p.probs = {1.0 - e, e};
  q.support = {0, 1};
  q.probs = {0.5, 0.5};
  CHECK(kl_divergence(p, q) == doctest::Approx(kLn2).epsilon(1e-6));

  // with zero smoothing a vanished event makes the reverse direction diverge
  SmoothedDistribution point = p;
  point.probs = {1.0, 0.0};
  CHECK(std::isinf(kl_divergence(q, point)));
  CHECK(kl_divergence(point, q) == doctest::Approx(kLn2).epsilon(1e-12));
}

TEST_CASE("KL divergence is nonnegative for random smoothed pairs") {
  RngStream rng(2024, 77);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t k = 2 + rng.next_u64() % 19;
    SmoothedDistribution p, q;
    for (std::size_t i = 0; i < k; ++i) {
      p.support.push_back(i);
      q.support.push_back(i);
      p.probs.push_back(rng.uniform01());
      q.probs.push_back(rng.uniform01());
    }
    double ps = 0.0, qs = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      ps += p.probs[i];
      qs += q.probs[i];
    }
    for (std::size_t i = 0; i < k; ++i) {
      p.probs[i] /= ps;
      q.probs[i] /= qs;
    }
    CHECK(kl_divergence(p, q) > -1e-12);
  }
}

TEST_CASE("KL divergence requires identical supports") {
  SmoothedDistribution p, q;
  p.support = {0, 1};
  p.probs = {0.5, 0.5};
  q.support = {0, 2};
  q.probs = {0.5, 0.5};
  CHECK_THROWS_AS((void)kl_divergence(p, q), std::invalid_argument);
}

TEST_CASE("distribution and score are order invariant") {
  RngStream rng(42, 1);
  const FactCorpusBundle bundle = make_fact_corpus(10, 12, 4, rng);
  std::vector<TokenSeq> shuffled = bundle.corpus.documents;
  std::reverse(shuffled.begin(), shuffled.end());
  const auto support = unigram_support(bundle.corpus.symbols.size());
  const SmoothedDistribution a =
      ngram_distribution(bundle.corpus.documents, 1, support, 1e-6);
  const SmoothedDistribution b = ngram_distribution(shuffled, 1, support, 1e-6);
  CHECK(a.probs == b.probs);

  RngStream init(42, 2);
  const TinyLmParams params =
      lm_init(bundle.corpus.symbols.size(), 4, 8, 16, init);
  std::vector<KrQuestion> reversed = bundle.questions;
  std::reverse(reversed.begin(), reversed.end());
  CHECK(kr_score(params, bundle.questions) == kr_score(params, reversed));
}

TEST_CASE("a model that always continues with the true object scores 1") {
  // hand-built: context-independent bias on the single fact's object
  RngStream rng(7, 3);
  const FactCorpusBundle one = make_fact_corpus(1, 1, 2, rng);
  TinyLmParams biased;
  biased.vocab = one.corpus.symbols.size();
  biased.context = 4;
  biased.embed_dim = 2;
  biased.hidden_dim = 2;
  biased.embedding.assign(biased.vocab * 2, 0.0);
  biased.w1.assign(4 * 2 * 2, 0.0);
  biased.b1.assign(2, 0.0);
  biased.w2.assign(2 * biased.vocab, 0.0);
  biased.b2.assign(biased.vocab, 0.0);
  biased.b2[one.corpus.facts[0].object] = 8.0;
  CHECK(kr_score(biased, one.questions) == 1.0);

  // trained: memorizing the corpus recovers every fact
  RngStream rng2(7, 4);
  const FactCorpusBundle five = make_fact_corpus(5, 6, 4, rng2);
  const TinyLmParams trained =
      train_on(five.corpus.documents, five.corpus.symbols.size(), 70, 400);
  CHECK(kr_score(trained, five.questions) == 1.0);
}

TEST_CASE("knowledge-free models sit at the coin-flip baseline") {
  RngStream rng(8, 1);
  const FactCorpusBundle bundle = make_fact_corpus(20, 30, 6, rng);
  const std::size_t vocab = bundle.corpus.symbols.size();

  // near-uniform random initialization, symmetrized question set
  RngStream init(8, 2);
  const TinyLmParams fresh = lm_init(vocab, 4, 8, 16, init);
  const std::vector<KrQuestion> sym = symmetrized(bundle.questions);
  CHECK(kr_score(fresh, sym) == doctest::Approx(0.5).epsilon(1e-12));

  // an exactly uniform model ties every comparison, and ties score zero
  TinyLmParams uniform;
  uniform.vocab = vocab;
  uniform.context = 4;
  uniform.embed_dim = 2;
  uniform.hidden_dim = 2;
  uniform.embedding.assign(vocab * 2, 0.0);
  uniform.w1.assign(4 * 2 * 2, 0.0);
  uniform.b1.assign(2, 0.0);
  uniform.w2.assign(2 * vocab, 0.0);
  uniform.b2.assign(vocab, 0.0);
  CHECK(kr_score(uniform, bundle.questions) == 0.0);
}

TEST_CASE("training on swapped facts scores below the baseline") {
  RngStream rng(9, 1);
  const FactCorpusBundle bundle = make_fact_corpus(8, 10, 5, rng);
  std::vector<TokenSeq> swapped = bundle.corpus.documents;
  for (std::size_t i = 0; i < swapped.size(); ++i) {
    swapped[i][2] = bundle.questions[i].false_continuation[0];
  }
  const TinyLmParams anti =
      train_on(swapped, bundle.corpus.symbols.size(), 90, 400);
  CHECK(kr_score(anti, bundle.questions) < 0.5);
}

TEST_CASE("time to failure finds the first sub-threshold stage") {
  const std::vector<double> drop = {0.9, 0.8, 0.74, 0.7};
  CHECK(time_to_failure(drop, 0.75) == std::size_t{2});

  const std::vector<double> healthy = {0.9, 0.85, 0.8};
  CHECK(time_to_failure(healthy, 0.75) == std::nullopt);

  const std::vector<double> immediate = {0.5};
  CHECK(time_to_failure(immediate, 0.75) == std::size_t{0});

  CHECK_THROWS_AS((void)time_to_failure(std::vector<double>{}, 0.75),
                  std::invalid_argument);
}

TEST_CASE("empty question lists are rejected") {
  TinyLmParams p;
  p.vocab = 4;
  p.context = 2;
  p.embed_dim = 2;
  p.hidden_dim = 2;
  p.embedding.assign(8, 0.0);
  p.w1.assign(8, 0.0);
  p.b1.assign(2, 0.0);
  p.w2.assign(8, 0.0);
  p.b2.assign(4, 0.0);
  CHECK_THROWS_AS((void)kr_score(p, std::vector<KrQuestion>{}),
                  std::invalid_argument);
}
