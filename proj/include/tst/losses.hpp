// Copyright 2026 The TST Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>

#include <torch/torch.h>

namespace tst {

struct LossWeights {
  double w_ce = 1.0;
  double w_kl = 1.0;
  double alpha = 1.0;
  double beta = 1.0;
  double tau = 4.0;

  /// Throws ConfigError on negative weights or a non-positive temperature.
  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

struct KdLoss {
  torch::Tensor total;
  torch::Tensor ce;  // mean cross-entropy, unweighted
  torch::Tensor kl;  // mean KL(teacher || student) at temperature tau, unweighted
};

/// Distillation objective:
///   mean_k [ w_ce * CE(softmax(s_k), y_k)
///          + w_kl * tau^2 * KL(softmax(t_k / tau) || softmax(s_k / tau)) ]
/// Teacher logits are detached.
KdLoss kd_loss(const torch::Tensor& student_logits, const torch::Tensor& teacher_logits,
               const torch::Tensor& labels, const LossWeights& weights);
torch::Tensor kd_total_loss(const torch::Tensor& student_logits,
                            const torch::Tensor& teacher_logits, const torch::Tensor& labels,
                            const LossWeights& weights);

struct SearchLoss {
  torch::Tensor total;
  torch::Tensor teacher_term;  // mean -log p_T(y)
  torch::Tensor student_term;  // mean -log(1 - p_S(y))
};

/// Augmentation-search objective:
///   mean_k [ alpha * -log p_T(y_k | x_k) + beta * -log(1 - p_S(y_k | x_k)) ]
/// with every probability floored at 1e-7 before the log. Gradients flow
/// through both logit arguments.
SearchLoss search_loss(const torch::Tensor& teacher_logits, const torch::Tensor& student_logits,
                       const torch::Tensor& labels, const LossWeights& weights);
torch::Tensor tst_search_loss(const torch::Tensor& teacher_logits,
                              const torch::Tensor& student_logits, const torch::Tensor& labels,
                              const LossWeights& weights);

/// Encoder fitting loss: batch mean of the per-image squared L2 distance.
torch::Tensor encoder_fit_loss(const torch::Tensor& manual_out, const torch::Tensor& encoder_out);

struct ConvexityReport {
  std::size_t pairs = 0;
  /// -log(1 - t) satisfied the midpoint inequality on every pair.
  bool surrogate_convex = true;
  /// log(t) (the negated cross-entropy) broke it on at least one pair.
  bool negated_ce_nonconvex = false;
  bool passed() const { return surrogate_convex && negated_ce_nonconvex; }
};

/// Consecutive samples form pairs (a, b). Samples must lie strictly inside (0,1).
ConvexityReport convexity_report(std::span<const double> samples);
bool convexity_check(std::span<const double> samples);

}  // namespace tst
