#include "clab/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace clab {
namespace {

void check_probability(double p) {
  if (!(p > 0.0) || !(p <= 1.0))
    throw std::domain_error("probability must lie in (0, 1]");
}

void check_threshold(double gamma) {
  if (!(gamma > 0.0) || !(gamma <= 1.0))
    throw std::invalid_argument("confidence threshold must lie in (0, 1]");
}

}  // namespace

LossSpec LossSpec::cross_entropy() { return LossSpec{}; }

LossSpec LossSpec::truncated(double threshold) {
  LossSpec spec;
  spec.kind = LossKind::kTruncatedCrossEntropy;
  spec.tce_threshold = threshold;
  spec.validate();
  return spec;
}

LossSpec LossSpec::focal(double exponent) {
  LossSpec spec;
  spec.kind = LossKind::kFocal;
  spec.focal_exponent = exponent;
  spec.validate();
  return spec;
}

LossSpec LossSpec::parse(std::string_view text) {
  auto colon = text.find(':');
  std::string head(text.substr(0, colon));
  std::string arg(colon == std::string_view::npos ? "" : text.substr(colon + 1));
  auto number = [&](const char* what) {
    try {
      std::size_t used = 0;
      double v = std::stod(arg, &used);
      if (used != arg.size()) throw std::invalid_argument(what);
      return v;
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string("bad loss parameter for ") + what);
    }
  };
  if (head == "ce") {
    if (!arg.empty()) throw std::invalid_argument("ce takes no parameter");
    return cross_entropy();
  }
  if (head == "tce") return truncated(number("tce"));
  if (head == "focal") return focal(number("focal"));
  throw std::invalid_argument("unknown loss '" + std::string(text) +
                              "' (expected ce, tce:<t>, focal:<e>)");
}

std::string LossSpec::name() const {
  auto trim = [](double v) {
    std::string s = std::to_string(v);
    s.erase(s.find_last_not_of('0') + 1);
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
  };
  switch (kind) {
    case LossKind::kCrossEntropy:
      return "ce";
    case LossKind::kTruncatedCrossEntropy:
      return "tce" + trim(tce_threshold);
    case LossKind::kFocal:
      return "focal" + trim(focal_exponent);
  }
  return "ce";
}

void LossSpec::validate() const {
  if (kind == LossKind::kTruncatedCrossEntropy) check_threshold(tce_threshold);
  if (kind == LossKind::kFocal &&
      (!(focal_exponent >= 0.0) || !std::isfinite(focal_exponent)))
    throw std::invalid_argument("focal exponent must be finite and >= 0");
}

double ce(double p) {
  check_probability(p);
  return -std::log(std::max(p, kMinProbability));
}

bool chi(double p, double gamma) {
  check_probability(p);
  check_threshold(gamma);
  return p <= gamma;
}

double tce(double p, double gamma) {
  return chi(p, gamma) ? ce(p) : 0.0;
}

double focal(double p, double exponent) {
  if (!(exponent >= 0.0) || !std::isfinite(exponent))
    throw std::invalid_argument("focal exponent must be finite and >= 0");
  check_probability(p);
  return std::pow(1.0 - p, exponent) * ce(p);
}

double point_loss(double p, const LossSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case LossKind::kCrossEntropy:
      return ce(p);
    case LossKind::kTruncatedCrossEntropy:
      return tce(p, spec.tce_threshold);
    case LossKind::kFocal:
      return focal(p, spec.focal_exponent);
  }
  return ce(p);
}

bool masked_out(double p, const LossSpec& spec) {
  return spec.kind == LossKind::kTruncatedCrossEntropy &&
         !chi(p, spec.tce_threshold);
}

double batch_loss(std::span<const double> probs, const LossSpec& spec) {
  spec.validate();
  double sum = 0.0;
  std::size_t unmasked = 0;
  for (double p : probs) {
    if (masked_out(p, spec)) continue;
    sum += point_loss(p, spec);
    ++unmasked;
  }
  switch (spec.reduction) {
    case Reduction::kSum:
      return sum;
    case Reduction::kMeanAll:
      return probs.empty() ? 0.0 : sum / static_cast<double>(probs.size());
    case Reduction::kMeanUnmasked:
      return unmasked == 0 ? 0.0 : sum / static_cast<double>(unmasked);
  }
  return sum;
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("softmax of empty vector");
  double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

std::vector<double> loss_grad_wrt_logits(std::span<const double> logits,
                                         std::size_t target,
                                         const LossSpec& spec) {
  spec.validate();
  if (target >= logits.size())
    throw std::invalid_argument("target index out of range");
  std::vector<double> p = softmax(logits);
  double pt = p[target];

  if (spec.kind == LossKind::kTruncatedCrossEntropy &&
      pt > spec.tce_threshold)
    return std::vector<double>(logits.size(), 0.0);

  if (spec.kind == LossKind::kFocal && spec.focal_exponent != 0.0) {
    double e = spec.focal_exponent;
    double q = 1.0 - pt;
    std::vector<double> grad(logits.size(), 0.0);
    if (q <= 0.0) return grad;  // loss and its slope vanish at pt = 1
    double logp = std::log(std::max(pt, kMinProbability));
    double dldp = e * std::pow(q, e - 1.0) * logp - std::pow(q, e) / pt;
    for (std::size_t j = 0; j < p.size(); ++j) {
      double dp = (j == target) ? pt * (1.0 - p[j]) : -pt * p[j];
      grad[j] = dldp * dp;
    }
    return grad;
  }

  // Cross entropy (and TCE below threshold, focal exponent 0): softmax - onehot.
  std::vector<double> grad(p.begin(), p.end());
  grad[target] -= 1.0;
  return grad;
}

double clipped_elbo_recon(std::span<const double> log_terms, double gamma) {
  check_threshold(gamma);
  double bound = std::log(gamma);
  double sum = 0.0;
  for (double term : log_terms)
    if (term <= bound) sum += term;
  return sum;
}

}  // namespace clab
