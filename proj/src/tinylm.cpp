#include "clab/tinylm.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>

namespace clab {
namespace {

constexpr std::uint32_t kCheckpointMagic = 0x314d4c54;  // "TLM1"
constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

void check_window(const TinyLmParams& params, std::span<const TokenId> window) {
  if (window.size() != params.context) {
    throw std::invalid_argument("lm window length must equal the context size");
  }
  for (TokenId t : window) {
    if (t >= params.vocab) {
      throw std::invalid_argument("lm window token out of vocabulary");
    }
  }
}

struct ForwardScratch {
  std::vector<double> x;       // context*embed_dim
  std::vector<double> hidden;  // hidden_dim, post-tanh
  std::vector<double> logits;  // vocab
};

void forward_logits(const TinyLmParams& p, std::span<const TokenId> window,
                    ForwardScratch& s) {
  const std::size_t cd = p.context * p.embed_dim;
  s.x.resize(cd);
  s.hidden.resize(p.hidden_dim);
  s.logits.resize(p.vocab);

  for (std::size_t pos = 0; pos < p.context; ++pos) {
    const double* row = &p.embedding[window[pos] * p.embed_dim];
    std::copy(row, row + p.embed_dim, s.x.begin() + pos * p.embed_dim);
  }
  for (std::size_t j = 0; j < p.hidden_dim; ++j) s.hidden[j] = p.b1[j];
  for (std::size_t i = 0; i < cd; ++i) {
    const double xi = s.x[i];
    if (xi == 0.0) continue;
    const double* w = &p.w1[i * p.hidden_dim];
    for (std::size_t j = 0; j < p.hidden_dim; ++j) s.hidden[j] += xi * w[j];
  }
  for (std::size_t j = 0; j < p.hidden_dim; ++j) {
    s.hidden[j] = std::tanh(s.hidden[j]);
  }
  for (std::size_t v = 0; v < p.vocab; ++v) s.logits[v] = p.b2[v];
  for (std::size_t j = 0; j < p.hidden_dim; ++j) {
    const double hj = s.hidden[j];
    const double* w = &p.w2[j * p.vocab];
    for (std::size_t v = 0; v < p.vocab; ++v) s.logits[v] += hj * w[v];
  }
}

struct TrainPair {
  TokenSeq window;
  TokenId target;
};

std::vector<TrainPair> collect_pairs(const TinyLmParams& params,
                                     const std::vector<TokenSeq>& docs) {
  std::vector<TrainPair> pairs;
  for (const TokenSeq& doc : docs) {
    for (std::size_t pos = 0; pos < doc.size(); ++pos) {
      if (doc[pos] == kPadToken) continue;
      if (doc[pos] >= params.vocab) {
        throw std::invalid_argument("corpus token out of vocabulary");
      }
      pairs.push_back({context_window(doc, pos, params.context), doc[pos]});
    }
  }
  return pairs;
}

void write_block(std::ofstream& out, const std::vector<double>& block) {
  out.write(reinterpret_cast<const char*>(block.data()),
            static_cast<std::streamsize>(block.size() * sizeof(double)));
}

void read_block(std::ifstream& in, std::vector<double>& block,
                std::size_t count) {
  block.resize(count);
  in.read(reinterpret_cast<char*>(block.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw std::runtime_error("checkpoint file truncated");
}

}  // namespace

void TinyLmParams::validate() const {
  if (vocab < 2) throw std::invalid_argument("lm vocab must be at least 2");
  if (context == 0 || embed_dim == 0 || hidden_dim == 0) {
    throw std::invalid_argument("lm dimensions must be positive");
  }
  if (embedding.size() != vocab * embed_dim ||
      w1.size() != context * embed_dim * hidden_dim ||
      b1.size() != hidden_dim || w2.size() != hidden_dim * vocab ||
      b2.size() != vocab) {
    throw std::invalid_argument("lm parameter block has the wrong size");
  }
}

void TrainHyper::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("learning rate must be finite and positive");
  }
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
}

SamplingPolicy SamplingPolicy::greedy() {
  return {SamplingMode::kGreedy, 1.0};
}

SamplingPolicy SamplingPolicy::temperature_of(double t) {
  SamplingPolicy p{SamplingMode::kTemperature, t};
  p.validate();
  return p;
}

SamplingPolicy SamplingPolicy::parse(std::string_view text) {
  if (text == "greedy") return greedy();
  constexpr std::string_view prefix = "temperature:";
  if (text.substr(0, prefix.size()) == prefix) {
    const std::string_view num = text.substr(prefix.size());
    double t = 0.0;
    auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), t);
    if (ec == std::errc{} && ptr == num.data() + num.size()) {
      return temperature_of(t);
    }
  }
  throw std::invalid_argument("unknown sampling policy: " + std::string(text));
}

std::string SamplingPolicy::name() const {
  if (mode == SamplingMode::kGreedy) return "greedy";
  char buf[40];
  std::snprintf(buf, sizeof buf, "temperature:%.12g", temperature);
  return buf;
}

void SamplingPolicy::validate() const {
  if (mode == SamplingMode::kTemperature &&
      (!(temperature > 0.0) || !std::isfinite(temperature))) {
    throw std::invalid_argument("sampling temperature must be finite and positive");
  }
}

TinyLmParams lm_init(std::size_t vocab, std::size_t context,
                     std::size_t embed_dim, std::size_t hidden_dim,
                     RngStream& rng) {
  TinyLmParams p;
  p.vocab = vocab;
  p.context = context;
  p.embed_dim = embed_dim;
  p.hidden_dim = hidden_dim;
  p.embedding.resize(vocab * embed_dim);
  p.w1.resize(context * embed_dim * hidden_dim);
  p.b1.assign(hidden_dim, 0.0);
  p.w2.resize(hidden_dim * vocab);
  p.b2.assign(vocab, 0.0);
  p.validate();

  auto fill_uniform = [&rng](std::vector<double>& block, std::size_t fan_in) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& w : block) w = (2.0 * rng.uniform01() - 1.0) * scale;
  };
  fill_uniform(p.embedding, embed_dim);
  fill_uniform(p.w1, context * embed_dim);
  fill_uniform(p.w2, hidden_dim);
  return p;
}

std::vector<double> lm_forward(const TinyLmParams& params,
                               std::span<const TokenId> window) {
  check_window(params, window);
  ForwardScratch s;
  forward_logits(params, window, s);
  return softmax(s.logits);
}

TokenSeq context_window(std::span<const TokenId> doc, std::size_t pos,
                        std::size_t context) {
  TokenSeq window(context, kPadToken);
  for (std::size_t k = 0; k < context; ++k) {
    // window slot k holds the token at pos - context + k, if it exists
    const std::size_t offset = context - k;
    if (pos >= offset) window[k] = doc[pos - offset];
  }
  return window;
}

EpochStats lm_train_epoch(TinyLmParams& params,
                          const std::vector<TokenSeq>& docs,
                          const LossSpec& loss, const TrainHyper& hyper,
                          RngStream& rng) {
  params.validate();
  loss.validate();
  hyper.validate();

  std::vector<TrainPair> pairs = collect_pairs(params, docs);
  EpochStats stats;
  if (pairs.empty()) return stats;

  // Fisher-Yates with the caller's stream so epochs are reproducible.
  for (std::size_t i = pairs.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
    std::swap(pairs[i - 1], pairs[j]);
  }

  const std::size_t cd = params.context * params.embed_dim;
  std::vector<double> g_emb(params.embedding.size());
  std::vector<double> g_w1(params.w1.size());
  std::vector<double> g_b1(params.b1.size());
  std::vector<double> g_w2(params.w2.size());
  std::vector<double> g_b2(params.b2.size());
  std::vector<double> dhidden(params.hidden_dim);
  std::vector<double> dx(cd);
  ForwardScratch s;

  std::size_t masked_total = 0;
  double loss_mean_sum = 0.0;
  std::size_t batches = 0;

  for (std::size_t start = 0; start < pairs.size(); start += hyper.batch_size) {
    const std::size_t stop = std::min(start + hyper.batch_size, pairs.size());
    std::fill(g_emb.begin(), g_emb.end(), 0.0);
    std::fill(g_w1.begin(), g_w1.end(), 0.0);
    std::fill(g_b1.begin(), g_b1.end(), 0.0);
    std::fill(g_w2.begin(), g_w2.end(), 0.0);
    std::fill(g_b2.begin(), g_b2.end(), 0.0);

    double loss_sum = 0.0;
    std::size_t unmasked = 0;

    for (std::size_t n = start; n < stop; ++n) {
      const TrainPair& pair = pairs[n];
      forward_logits(params, pair.window, s);
      const std::vector<double> probs = softmax(s.logits);
      const double pt =
          std::max(probs[pair.target], kMinProbability);
      const bool masked = masked_out(pt, loss);
      if (masked) {
        ++masked_total;
        continue;
      }
      ++unmasked;
      loss_sum += point_loss(pt, loss);

      const std::vector<double> dlogits =
          loss_grad_wrt_logits(s.logits, pair.target, loss);

      // dlogits -> w2, b2, hidden
      std::fill(dhidden.begin(), dhidden.end(), 0.0);
      for (std::size_t j = 0; j < params.hidden_dim; ++j) {
        const double hj = s.hidden[j];
        const double* w = &params.w2[j * params.vocab];
        double* gw = &g_w2[j * params.vocab];
        double acc = 0.0;
        for (std::size_t v = 0; v < params.vocab; ++v) {
          gw[v] += hj * dlogits[v];
          acc += w[v] * dlogits[v];
        }
        dhidden[j] = acc * (1.0 - hj * hj);  // through tanh
      }
      for (std::size_t v = 0; v < params.vocab; ++v) g_b2[v] += dlogits[v];

      // dhidden -> w1, b1, x
      std::fill(dx.begin(), dx.end(), 0.0);
      for (std::size_t i = 0; i < cd; ++i) {
        const double xi = s.x[i];
        const double* w = &params.w1[i * params.hidden_dim];
        double* gw = &g_w1[i * params.hidden_dim];
        double acc = 0.0;
        for (std::size_t j = 0; j < params.hidden_dim; ++j) {
          gw[j] += xi * dhidden[j];
          acc += w[j] * dhidden[j];
        }
        dx[i] = acc;
      }
      for (std::size_t j = 0; j < params.hidden_dim; ++j) {
        g_b1[j] += dhidden[j];
      }

      // dx -> embedding rows of the window
      for (std::size_t pos = 0; pos < params.context; ++pos) {
        double* ge = &g_emb[pair.window[pos] * params.embed_dim];
        const double* d = &dx[pos * params.embed_dim];
        for (std::size_t k = 0; k < params.embed_dim; ++k) ge[k] += d[k];
      }
    }

    const std::size_t batch_count = stop - start;
    double denom = 0.0;
    switch (loss.reduction) {
      case Reduction::kMeanUnmasked:
        denom = static_cast<double>(unmasked);
        break;
      case Reduction::kMeanAll:
        denom = static_cast<double>(batch_count);
        break;
      case Reduction::kSum:
        denom = 1.0;
        break;
    }
    ++batches;
    if (denom > 0.0) {
      loss_mean_sum += loss_sum / denom;
      if (unmasked > 0) {
        const double step = hyper.learning_rate / denom;
        auto apply = [step](std::vector<double>& w, const std::vector<double>& g) {
          for (std::size_t i = 0; i < w.size(); ++i) w[i] -= step * g[i];
        };
        apply(params.embedding, g_emb);
        apply(params.w1, g_w1);
        apply(params.b1, g_b1);
        apply(params.w2, g_w2);
        apply(params.b2, g_b2);
      }
    }
  }

  stats.mean_loss = batches > 0 ? loss_mean_sum / static_cast<double>(batches) : 0.0;
  stats.masked_fraction =
      static_cast<double>(masked_total) / static_cast<double>(pairs.size());
  return stats;
}

TokenSeq lm_generate(const TinyLmParams& params,
                     std::span<const TokenId> prefix, std::size_t length,
                     const SamplingPolicy& policy, RngStream& rng) {
  params.validate();
  policy.validate();
  TokenSeq out(prefix.begin(), prefix.end());
  out.reserve(out.size() + length);
  ForwardScratch s;
  for (std::size_t step = 0; step < length; ++step) {
    const TokenSeq window = context_window(out, out.size(), params.context);
    check_window(params, window);
    forward_logits(params, window, s);

    TokenId next = 0;
    if (policy.mode == SamplingMode::kGreedy) {
      std::size_t best = 0;
      for (std::size_t v = 1; v < params.vocab; ++v) {
        if (s.logits[v] > s.logits[best]) best = v;
      }
      next = static_cast<TokenId>(best);
    } else {
      for (double& l : s.logits) l /= policy.temperature;
      const std::vector<double> probs = softmax(s.logits);
      const double u = rng.uniform01();
      double cum = 0.0;
      std::size_t pick = params.vocab - 1;
      for (std::size_t v = 0; v < params.vocab; ++v) {
        cum += probs[v];
        if (u <= cum) {
          pick = v;
          break;
        }
      }
      next = static_cast<TokenId>(pick);
    }
    out.push_back(next);
  }
  return out;
}

double sequence_log_prob(const TinyLmParams& params,
                         std::span<const TokenId> tokens) {
  params.validate();
  ForwardScratch s;
  double total = 0.0;
  for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
    const TokenSeq window = context_window(tokens, pos, params.context);
    check_window(params, window);
    if (tokens[pos] >= params.vocab) {
      throw std::invalid_argument("sequence token out of vocabulary");
    }
    forward_logits(params, window, s);
    const std::vector<double> probs = softmax(s.logits);
    total += std::log(probs[tokens[pos]]);
  }
  return total;
}

ConfidenceProfile confidence_profile(const TinyLmParams& params,
                                     const std::vector<TokenSeq>& docs) {
  params.validate();
  ConfidenceProfile profile;
  ForwardScratch s;
  double sum = 0.0;
  for (const TokenSeq& doc : docs) {
    for (std::size_t pos = 0; pos < doc.size(); ++pos) {
      if (doc[pos] == kPadToken) continue;
      const TokenSeq window = context_window(doc, pos, params.context);
      check_window(params, window);
      forward_logits(params, window, s);
      const std::vector<double> probs = softmax(s.logits);
      const double p = probs[doc[pos]];
      sum += p;
      const auto bin = std::min<std::size_t>(
          19, static_cast<std::size_t>(p * 20.0));
      ++profile.histogram[bin];
      ++profile.count;
    }
  }
  profile.mean = profile.count > 0 ? sum / static_cast<double>(profile.count) : 0.0;
  return profile;
}

void save_checkpoint(const TinyLmParams& params,
                     const std::filesystem::path& file) {
  params.validate();
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot open checkpoint for writing: " +
                             file.string());
  }
  const std::uint32_t header[6] = {
      kCheckpointMagic,
      kCheckpointVersion,
      static_cast<std::uint32_t>(params.vocab),
      static_cast<std::uint32_t>(params.context),
      static_cast<std::uint32_t>(params.embed_dim),
      static_cast<std::uint32_t>(params.hidden_dim)};
  out.write(reinterpret_cast<const char*>(header), sizeof header);
  write_block(out, params.embedding);
  write_block(out, params.w1);
  write_block(out, params.b1);
  write_block(out, params.w2);
  write_block(out, params.b2);
  if (!out) {
    throw std::runtime_error("failed writing checkpoint: " + file.string());
  }
}

TinyLmParams load_checkpoint(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open checkpoint: " + file.string());
  }
  std::uint32_t header[6] = {};
  in.read(reinterpret_cast<char*>(header), sizeof header);
  if (!in) throw std::runtime_error("checkpoint file truncated");
  if (header[0] != kCheckpointMagic) {
    throw std::runtime_error("not a model checkpoint: " + file.string());
  }
  if (header[1] != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version");
  }
  TinyLmParams p;
  p.vocab = header[2];
  p.context = header[3];
  p.embed_dim = header[4];
  p.hidden_dim = header[5];
  read_block(in, p.embedding, p.vocab * p.embed_dim);
  read_block(in, p.w1, p.context * p.embed_dim * p.hidden_dim);
  read_block(in, p.b1, p.hidden_dim);
  read_block(in, p.w2, p.hidden_dim * p.vocab);
  read_block(in, p.b2, p.vocab);
  p.validate();
  return p;
}

}  // namespace clab
