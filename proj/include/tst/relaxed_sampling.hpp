// Copyright 2026 The TST Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>

#include <torch/torch.h>

#include "tst/policy.hpp"
#include "tst/rng.hpp"

namespace tst {

/// Floor applied to probabilities before every logarithm.
inline constexpr double kProbabilityEpsilon = 1e-7;
inline constexpr double kDefaultRelaxTemperature = 0.05;

/// Relaxed Bernoulli draw: sigmoid((log p + noise) / temperature), with p
/// clamped to [eps, 1 - eps]. `noise` is a Logistic(0,1) sample.
/// Note this uses log(p), not logit(p): for noise ~ Logistic(0,1),
/// P(rbd(p) > 0.5) = p / (1 + p).
double rbd(double p, double noise, double temperature);

/// Element-wise, differentiable in `p`.
torch::Tensor rbd(const torch::Tensor& p, const torch::Tensor& noise, double temperature);

/// rbd(sigmoid(logit), noise, temperature), evaluated in log space so gradients stay
/// accurate when sigmoid(logit) or the output is close to 0 or 1.
torch::Tensor rbd_logit(const torch::Tensor& logit, const torch::Tensor& noise,
                        double temperature);

/// Learnable augmentation parameters in pre-sigmoid space.
struct AugmentParams {
  torch::Tensor raw_m;  // (11,)
  torch::Tensor raw_p;  // (14,)

  static AugmentParams zeros();
  /// Entries drawn from N(0, std^2); std = 0 gives zeros.
  static AugmentParams normal(double std, Rng& rng);

  AugmentParams clone() const;
  /// sigmoid(raw_m), detached.
  torch::Tensor magnitudes() const;
  torch::Tensor probabilities() const;
  void validate() const;
};

/// Diversity noise for one meta-encoder forward pass. `affine` entries are
/// Logistic(0,1) draws added to the STN matrix after scaling by
/// `temperature`; `scale` and `shift` drive a relaxed Bernoulli draw on the
/// Color Network's sigmoid(theta_scale) and sigmoid(theta_shift).
struct EncoderNoise {
  std::array<double, 6> affine{};
  double scale = 0.0;
  double shift = 0.0;
  double temperature = kDefaultRelaxTemperature;
};

/// Every random draw behind one SampledParams, kept so a forward pass can be
/// replayed with the noise frozen.
struct NoiseRecord {
  std::array<double, kNumLearnable> magnitude{};
  std::array<double, kNumPolicies> probability{};
  std::array<std::array<double, 8>, kNumPolicies> diversity{};
  std::uint64_t cutout_seed = 0;

  static NoiseRecord draw(Rng& rng);
  static NoiseRecord zero();
  EncoderNoise encoder_noise(SubPolicy policy, double temperature) const;
};

struct SampledParams {
  torch::Tensor m;  // (11,) in (0,1)
  torch::Tensor p;  // (14,) in (0,1)
  NoiseRecord noise;
  double temperature = kDefaultRelaxTemperature;

  torch::Tensor magnitude(SubPolicy policy) const;
  torch::Tensor probability(SubPolicy policy) const;
};

/// Fresh logistic draws for every entry, then the relaxed Bernoulli map.
SampledParams sample_params(const AugmentParams& params, double temperature, Rng& rng);
/// Same map with previously recorded noise.
SampledParams sample_params(const AugmentParams& params, double temperature,
                            const NoiseRecord& noise);

}  // namespace tst
