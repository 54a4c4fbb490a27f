#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace clab {

// Probabilities below this are clamped before taking the log, so a loss is
// always finite. The clamp applies to the log only; mask comparisons see the
// raw probability.
inline constexpr double kMinProbability = 1e-12;

enum class LossKind { kCrossEntropy, kTruncatedCrossEntropy, kFocal };

// How per-token losses aggregate into a batch loss.
//   kMeanUnmasked: mean over tokens that survive the confidence mask (default)
//   kMeanAll:      mean over every token, masked ones contributing zero
//   kSum:          plain sum
enum class Reduction { kMeanUnmasked, kMeanAll, kSum };

struct LossSpec {
  LossKind kind = LossKind::kCrossEntropy;
  double tce_threshold = 0.9;   // confidence mask bound, (0, 1]
  double focal_exponent = 2.0;  // down-weighting exponent, >= 0
  Reduction reduction = Reduction::kMeanUnmasked;

  static LossSpec cross_entropy();
  static LossSpec truncated(double threshold);
  static LossSpec focal(double exponent);
  // Accepts "ce", "tce:<threshold>", "focal:<exponent>".
  static LossSpec parse(std::string_view text);

  std::string name() const;
  void validate() const;  // throws std::invalid_argument
};

// -ln p for p in (0, 1]; throws std::domain_error outside.
double ce(double p);

// Confidence mask: true (keep) iff p <= gamma; the boundary stays unmasked.
bool chi(double p, double gamma);

// chi(p, gamma) * ce(p).
double tce(double p, double gamma);

// (1 - p)^exponent * ce(p); exponent 0 gives plain ce.
double focal(double p, double exponent);

// Loss of a single token probability under the given spec.
double point_loss(double p, const LossSpec& spec);

// True iff the loss masks this token out entirely (TCE with p > threshold).
bool masked_out(double p, const LossSpec& spec);

// Aggregates target-token probabilities per spec.reduction. A fully masked
// batch yields exactly 0.
double batch_loss(std::span<const double> probs, const LossSpec& spec);

// Numerically stable softmax (max-subtracted).
std::vector<double> softmax(std::span<const double> logits);

// d loss / d logits for one token with the given target index. For TCE with
// p_target above the threshold this is exactly the zero vector.
std::vector<double> loss_grad_wrt_logits(std::span<const double> logits,
                                         std::size_t target,
                                         const LossSpec& spec);

// Confidence-clipped reconstruction sum: adds terms whose likelihood
// exp(term) is at most gamma; terms above the bound contribute zero.
double clipped_elbo_recon(std::span<const double> log_terms, double gamma);

}  // namespace clab
