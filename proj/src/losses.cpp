// Copyright 2026 The TST Authors
// SPDX-License-Identifier: Apache-2.0

#include "tst/losses.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "tst/errors.hpp"
#include "tst/relaxed_sampling.hpp"

namespace tst {
namespace F = torch::nn::functional;
namespace {

void check_logits(const torch::Tensor& a, const torch::Tensor& b, const torch::Tensor& labels) {
  if (a.dim() != 2 || b.dim() != 2 || a.sizes() != b.sizes()) {
    throw ShapeError("logits must both be (batch, classes) with equal shapes");
  }
  if (labels.dim() != 1 || labels.size(0) != a.size(0)) {
    throw ContractError("labels must be (batch,) matching the logits");
  }
  if (a.size(1) < 2) throw ShapeError("need at least two classes");
  if (labels.numel() > 0) {
    const auto lo = labels.min().item<std::int64_t>();
    const auto hi = labels.max().item<std::int64_t>();
    if (lo < 0 || hi >= a.size(1)) {
      throw ContractError("label out of range [0, " + std::to_string(a.size(1)) + ")");
    }
  }
}

// log p(y) and log(1 - p(y)) from logits, both in log space.
torch::Tensor log_target(const torch::Tensor& logits, const torch::Tensor& labels) {
  return torch::log_softmax(logits, 1).gather(1, labels.unsqueeze(1)).squeeze(1);
}

torch::Tensor log_complement(const torch::Tensor& logits, const torch::Tensor& labels) {
  auto mask = F::one_hot(labels, logits.size(1)).to(torch::kBool);
  auto others = logits.masked_fill(mask, -std::numeric_limits<double>::infinity());
  return torch::logsumexp(others, 1) - torch::logsumexp(logits, 1);
}

}  // namespace

void LossWeights::validate() const {
  auto check = [](double v, const char* key) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ConfigError(std::string(key) + " must be a finite non-negative number");
    }
  };
  check(w_ce, "w_ce");
  check(w_kl, "w_kl");
  check(alpha, "alpha");
  check(beta, "beta");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("tau must be positive");
}

KdLoss kd_loss(const torch::Tensor& student_logits, const torch::Tensor& teacher_logits,
               const torch::Tensor& labels, const LossWeights& weights) {
  check_logits(student_logits, teacher_logits, labels);
  weights.validate();
  auto teacher = teacher_logits.detach().to(student_logits.scalar_type());
  KdLoss out;
  out.ce = F::cross_entropy(student_logits, labels);
  auto log_pt = torch::log_softmax(teacher / weights.tau, 1);
  auto log_ps = torch::log_softmax(student_logits / weights.tau, 1);
  out.kl = (log_pt.exp() * (log_pt - log_ps)).sum(1).mean();
  out.total = weights.w_ce * out.ce + weights.w_kl * weights.tau * weights.tau * out.kl;
  return out;
}

torch::Tensor kd_total_loss(const torch::Tensor& student_logits,
                            const torch::Tensor& teacher_logits, const torch::Tensor& labels,
                            const LossWeights& weights) {
  return kd_loss(student_logits, teacher_logits, labels, weights).total;
}

SearchLoss search_loss(const torch::Tensor& teacher_logits, const torch::Tensor& student_logits,
                       const torch::Tensor& labels, const LossWeights& weights) {
  check_logits(teacher_logits, student_logits, labels);
  weights.validate();
  const double log_eps = std::log(kProbabilityEpsilon);
  SearchLoss out;
  out.teacher_term = -log_target(teacher_logits, labels).clamp_min(log_eps).mean();
  out.student_term = -log_complement(student_logits, labels).clamp_min(log_eps).mean();
  out.total = weights.alpha * out.teacher_term + weights.beta * out.student_term;
  return out;
}

torch::Tensor tst_search_loss(const torch::Tensor& teacher_logits,
                              const torch::Tensor& student_logits, const torch::Tensor& labels,
                              const LossWeights& weights) {
  return search_loss(teacher_logits, student_logits, labels, weights).total;
}

torch::Tensor encoder_fit_loss(const torch::Tensor& manual_out, const torch::Tensor& encoder_out) {
  if (manual_out.sizes() != encoder_out.sizes() || manual_out.dim() < 2) {
    throw ShapeError("encoder fit loss needs two batches of identical shape");
  }
  auto diff = (encoder_out - manual_out.to(encoder_out.scalar_type())).flatten(1);
  return diff.pow(2).sum(1).mean();
}

ConvexityReport convexity_report(std::span<const double> samples) {
  ConvexityReport report;
  constexpr double kSlack = 1e-12;
  for (std::size_t i = 0; i + 1 < samples.size(); i += 2) {
    const double a = samples[i], b = samples[i + 1];
    if (!(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0)) {
      throw DomainError("convexity samples must lie strictly inside (0, 1)");
    }
    const double mid = 0.5 * (a + b);
    const auto surrogate = [](double t) { return -std::log1p(-t); };
    if (surrogate(mid) > 0.5 * (surrogate(a) + surrogate(b)) + kSlack) {
      report.surrogate_convex = false;
    }
    if (std::log(mid) > 0.5 * (std::log(a) + std::log(b)) + kSlack) {
      report.negated_ce_nonconvex = true;
    }
    ++report.pairs;
  }
  return report;
}

bool convexity_check(std::span<const double> samples) {
  return convexity_report(samples).passed();
}

}  // namespace tst
