#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "clab/losses.hpp"
#include "clab/mathcore.hpp"

namespace clab {

using TokenId = std::uint32_t;
using TokenSeq = std::vector<TokenId>;

// Reserved padding id; it fills short context windows and is never a loss
// target.
inline constexpr TokenId kPadToken = 0;

// Fixed-window next-token model:
//   concat(embedding[window]) -> tanh(W1 x + b1) -> softmax(W2 h + b2).
struct TinyLmParams {
  std::size_t vocab = 0;
  std::size_t context = 4;
  std::size_t embed_dim = 16;
  std::size_t hidden_dim = 32;
  std::vector<double> embedding;  // vocab x embed_dim
  std::vector<double> w1;         // (context*embed_dim) x hidden_dim
  std::vector<double> b1;         // hidden_dim
  std::vector<double> w2;         // hidden_dim x vocab
  std::vector<double> b2;         // vocab

  void validate() const;  // throws std::invalid_argument
  bool operator==(const TinyLmParams&) const = default;
};

struct TrainHyper {
  double learning_rate = 0.05;
  std::size_t batch_size = 64;
  std::size_t epochs = 10;
  std::uint64_t shuffle_seed = 0;

  void validate() const;
};

enum class SamplingMode { kGreedy, kTemperature };

struct SamplingPolicy {
  SamplingMode mode = SamplingMode::kTemperature;
  double temperature = 1.0;  // > 0

  static SamplingPolicy greedy();
  static SamplingPolicy temperature_of(double t);
  // Accepts "greedy" or "temperature:<t>".
  static SamplingPolicy parse(std::string_view text);
  std::string name() const;
  void validate() const;
};

struct EpochStats {
  double mean_loss = 0.0;        // mean over batches of the batch loss
  double masked_fraction = 0.0;  // confidence-masked targets / targets
};

// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per block (fan-in
// embed_dim for the embedding), biases zero. Output starts near uniform.
TinyLmParams lm_init(std::size_t vocab, std::size_t context,
                     std::size_t embed_dim, std::size_t hidden_dim,
                     RngStream& rng);

// Next-token distribution after a window of exactly `context` tokens.
std::vector<double> lm_forward(const TinyLmParams& params,
                               std::span<const TokenId> window);

// The `context` tokens preceding position pos, left-padded with kPadToken.
TokenSeq context_window(std::span<const TokenId> doc, std::size_t pos,
                        std::size_t context);

// One pass of minibatch SGD over every (window, next-token) pair of the
// corpus, in an order shuffled by `rng`. Pairs whose target is the padding
// token are excluded. Masked tokens contribute exactly zero gradient.
EpochStats lm_train_epoch(TinyLmParams& params,
                          const std::vector<TokenSeq>& docs,
                          const LossSpec& loss, const TrainHyper& hyper,
                          RngStream& rng);

// prefix ++ `length` sampled tokens. Greedy breaks ties toward the lowest
// token id; temperature sampling rescales logits by 1/t before the softmax.
TokenSeq lm_generate(const TinyLmParams& params,
                     std::span<const TokenId> prefix, std::size_t length,
                     const SamplingPolicy& policy, RngStream& rng);

// Chain-rule log probability of the whole sequence, each position
// conditioned on its left-padded window.
double sequence_log_prob(const TinyLmParams& params,
                         std::span<const TokenId> tokens);

struct ConfidenceProfile {
  double mean = 0.0;
  std::array<std::size_t, 20> histogram{};  // equal bins over [0, 1]
  std::size_t count = 0;
};

// Realized next-token probabilities over a corpus (padding targets skipped).
ConfidenceProfile confidence_profile(const TinyLmParams& params,
                                     const std::vector<TokenSeq>& docs);

// Flat little-endian binary: magic, version, dims, then the five blocks as
// row-major float64.
void save_checkpoint(const TinyLmParams& params,
                     const std::filesystem::path& file);
TinyLmParams load_checkpoint(const std::filesystem::path& file);

}  // namespace clab
