// Copyright 2026 The TST Authors
// SPDX-License-Identifier: Apache-2.0

#include "tst/relaxed_sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <string>

#include "tst/errors.hpp"

namespace tst {
namespace {

void check_temperature(double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw DomainError("relaxation temperature must be positive, got " +
                      std::to_string(temperature));
  }
}

// Keeps saturated outputs strictly inside (0, 1) for the given precision.
template <typename T>
std::pair<double, double> open_unit_bounds() {
  return {std::numeric_limits<T>::min(), 1.0 - std::numeric_limits<T>::epsilon() / 2};
}

// sigmoid((log_p + noise) / t) as exp(log_sigmoid(.)): the backward pass then uses
// sigmoid(-z) from the input instead of 1 - output, which rounds to zero in float32
// once the output saturates. The range clamp is applied to the value only.
torch::Tensor relax_log(const torch::Tensor& log_p, const torch::Tensor& noise,
                        double temperature) {
  const auto [lo, hi] = log_p.scalar_type() == torch::kFloat64 ? open_unit_bounds<double>()
                                                               : open_unit_bounds<float>();
  auto out = torch::exp(torch::log_sigmoid((log_p + noise) / temperature));
  return out + (out.clamp(lo, hi) - out).detach();
}

template <std::size_t N>
torch::Tensor to_tensor(const std::array<double, N>& values, const torch::Tensor& like) {
  return torch::tensor(std::vector<double>(values.begin(), values.end()), torch::kFloat64)
      .to(like.scalar_type());
}

}  // namespace

double rbd(double p, double noise, double temperature) {
  check_temperature(temperature);
  if (std::isnan(p) || p < 0.0 || p > 1.0) {
    throw DomainError("rbd probability outside [0, 1]: " + std::to_string(p));
  }
  const double clamped = std::clamp(p, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
  const double z = (std::log(clamped) + noise) / temperature;
  const auto [lo, hi] = open_unit_bounds<double>();
  return std::clamp(1.0 / (1.0 + std::exp(-z)), lo, hi);
}

torch::Tensor rbd(const torch::Tensor& p, const torch::Tensor& noise, double temperature) {
  check_temperature(temperature);
  {
    torch::NoGradGuard guard;
    if ((p.isnan() | (p < 0.0) | (p > 1.0)).any().item<bool>()) {
      throw DomainError("rbd probability outside [0, 1]");
    }
  }
  return relax_log(torch::log(p.clamp(kProbabilityEpsilon, 1.0 - kProbabilityEpsilon)), noise,
                   temperature);
}

torch::Tensor rbd_logit(const torch::Tensor& logit, const torch::Tensor& noise,
                        double temperature) {
  check_temperature(temperature);
  const double log_lo = std::log(kProbabilityEpsilon);
  const double log_hi = std::log1p(-kProbabilityEpsilon);
  return relax_log(torch::log_sigmoid(logit).clamp(log_lo, log_hi), noise, temperature);
}

AugmentParams AugmentParams::zeros() {
  return {torch::zeros({kNumLearnable}, torch::kFloat32).requires_grad_(true),
          torch::zeros({kNumPolicies}, torch::kFloat32).requires_grad_(true)};
}

AugmentParams AugmentParams::normal(double std, Rng& rng) {
  if (std == 0.0) return zeros();
  std::vector<float> m(kNumLearnable), p(kNumPolicies);
  for (auto& v : m) v = static_cast<float>(std * rng.normal());
  for (auto& v : p) v = static_cast<float>(std * rng.normal());
  return {torch::tensor(m).requires_grad_(true), torch::tensor(p).requires_grad_(true)};
}

AugmentParams AugmentParams::clone() const {
  return {raw_m.detach().clone().requires_grad_(raw_m.requires_grad()),
          raw_p.detach().clone().requires_grad_(raw_p.requires_grad())};
}

torch::Tensor AugmentParams::magnitudes() const { return torch::sigmoid(raw_m.detach()); }
torch::Tensor AugmentParams::probabilities() const { return torch::sigmoid(raw_p.detach()); }

void AugmentParams::validate() const {
  if (!raw_m.defined() || raw_m.dim() != 1 || raw_m.size(0) != kNumLearnable) {
    throw ShapeError("raw magnitude vector must have length 11");
  }
  if (!raw_p.defined() || raw_p.dim() != 1 || raw_p.size(0) != kNumPolicies) {
    throw ShapeError("raw probability vector must have length 14");
  }
  torch::NoGradGuard guard;
  if (!torch::isfinite(raw_m).all().item<bool>() || !torch::isfinite(raw_p).all().item<bool>()) {
    throw DomainError("augmentation parameters must be finite");
  }
}

NoiseRecord NoiseRecord::draw(Rng& rng) {
  NoiseRecord out;
  for (auto& v : out.magnitude) v = rng.logistic();
  for (auto& v : out.probability) v = rng.logistic();
  for (auto& row : out.diversity) {
    for (auto& v : row) v = rng.logistic();
  }
  out.cutout_seed = rng.next_u64();
  return out;
}

NoiseRecord NoiseRecord::zero() { return NoiseRecord{}; }

EncoderNoise NoiseRecord::encoder_noise(SubPolicy policy, double temperature) const {
  const auto& row = diversity[static_cast<std::size_t>(index_of(policy))];
  EncoderNoise out;
  std::copy(row.begin(), row.begin() + 6, out.affine.begin());
  out.scale = row[6];
  out.shift = row[7];
  out.temperature = temperature;
  return out;
}

torch::Tensor SampledParams::magnitude(SubPolicy policy) const {
  if (!has_magnitude(policy)) {
    throw ContractError(std::string(name(policy)) + " has no magnitude");
  }
  return m.select(0, index_of(policy));
}

torch::Tensor SampledParams::probability(SubPolicy policy) const {
  return p.select(0, index_of(policy));
}

SampledParams sample_params(const AugmentParams& params, double temperature, Rng& rng) {
  return sample_params(params, temperature, NoiseRecord::draw(rng));
}

SampledParams sample_params(const AugmentParams& params, double temperature,
                            const NoiseRecord& noise) {
  params.validate();
  SampledParams out;
  out.noise = noise;
  out.temperature = temperature;
  out.m = rbd_logit(params.raw_m, to_tensor(noise.magnitude, params.raw_m), temperature);
  out.p = rbd_logit(params.raw_p, to_tensor(noise.probability, params.raw_p), temperature);
  return out;
}

}  // namespace tst
