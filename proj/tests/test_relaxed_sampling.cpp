// Copyright 2026 The TST Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "tst/errors.hpp"
#include "tst/relaxed_sampling.hpp"

namespace tst {
namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

TEST(Rbd, ClosedFormValues) {
  EXPECT_NEAR(rbd(1.0 - 1e-7, 0.0, 0.05), 0.5, 1e-6);
  const double expected = sigmoid(std::log(0.5) / 0.05);
  EXPECT_NEAR(rbd(0.5, 0.0, 0.05), expected, 1e-12);
  EXPECT_NEAR(rbd(0.5, 0.0, 0.05), 9.54e-7, 1e-8);
  EXPECT_NEAR(rbd(0.3, 1.2, 0.5), sigmoid((std::log(0.3) + 1.2) / 0.5), 1e-12);
}

TEST(Rbd, ClampsEndpointsBeforeTheLog) {
  const double at_zero = rbd(0.0, 0.0, 1.0);
  EXPECT_NEAR(at_zero, sigmoid(std::log(1e-7)), 1e-15);
  EXPECT_GT(at_zero, 0.0);
  EXPECT_LT(rbd(1.0, 50.0, 0.05), 1.0);
  EXPECT_GT(rbd(1e-12, -50.0, 0.05), 0.0);
}

TEST(Rbd, DomainErrors) {
  EXPECT_THROW(rbd(-0.1, 0.0, 0.05), DomainError);
  EXPECT_THROW(rbd(1.1, 0.0, 0.05), DomainError);
  EXPECT_THROW(rbd(std::nan(""), 0.0, 0.05), DomainError);
  EXPECT_THROW(rbd(0.5, 0.0, 0.0), DomainError);
  EXPECT_THROW(rbd(0.5, 0.0, -1.0), DomainError);
  EXPECT_THROW(rbd(torch::tensor({0.5, 1.5}), torch::zeros({2}), 0.05), DomainError);
}

TEST(Rbd, TensorMatchesScalar) {
  auto p = torch::tensor({0.01, 0.2, 0.5, 0.77, 0.99}, torch::kFloat64);
  auto l = torch::tensor({-1.0, 0.3, 2.0, -0.4, 0.0}, torch::kFloat64);
  auto out = rbd(p, l, 0.3);
  for (int i = 0; i < 5; ++i) {
    EXPECT_NEAR(out[i].item<double>(),
                rbd(p[i].item<double>(), l[i].item<double>(), 0.3), 1e-14);
  }
}

// Exceedance probability P(log p + L > 0) = p / (1 + p) under Logistic(0, 1).
TEST(Rbd, ExceedanceFrequencyMatchesLogisticCdf) {
  Rng rng(2024);
  for (double p : {0.1, 0.5, 0.9}) {
    int above = 0;
    constexpr int kDraws = 100000;
    for (int i = 0; i < kDraws; ++i) above += rbd(p, rng.logistic(), 0.05) > 0.5 ? 1 : 0;
    EXPECT_NEAR(static_cast<double>(above) / kDraws, p / (1.0 + p), 0.01) << p;
  }
}

TEST(Rbd, SharpensAsTemperatureFalls) {
  Rng rng(3);
  auto share_extreme = [&](double t) {
    int extreme = 0;
    for (int i = 0; i < 20000; ++i) {
      const double v = rbd(0.6, rng.logistic(), t);
      extreme += (v < 0.01 || v > 0.99) ? 1 : 0;
    }
    return extreme / 20000.0;
  };
  const double warm = share_extreme(1.0);
  const double cold = share_extreme(0.01);
  EXPECT_LT(warm, 0.2);
  EXPECT_GT(cold, 0.95);
}

TEST(Rbd, MonotoneInProbabilityAndNoise) {
  double prev = 0.0;
  for (int i = 1; i < 100; ++i) {
    const double v = rbd(i / 100.0, 0.5, 0.5);
    EXPECT_GT(v, prev);
    prev = v;
  }
  EXPECT_LT(rbd(0.4, -1.0, 0.2), rbd(0.4, 1.0, 0.2));
}

TEST(Rbd, LogitFormMatchesProbabilityForm) {
  auto logit = torch::linspace(-12.0, 12.0, 97, torch::kFloat64);
  auto noise = torch::linspace(-4.0, 4.0, 97, torch::kFloat64);
  auto a = rbd_logit(logit, noise, 0.3);
  auto b = rbd(torch::sigmoid(logit), noise, 0.3);
  EXPECT_LT((a - b).abs().max().item<double>(), 1e-12);
}

// In the saturated tail the float32 gradient must agree with the exact derivative
// s * sigmoid(-z) * sigmoid(-logit) / t rather than collapse to zero.
TEST(Rbd, SinglePrecisionGradientSurvivesSaturation) {
  const double t = 0.05;
  for (double noise : {1.0, 2.0, -0.5}) {
    for (double raw : {-3.0, 0.0, 2.0}) {
      auto x = torch::tensor({raw}, torch::kFloat32).requires_grad_();
      rbd_logit(x, torch::tensor({noise}, torch::kFloat32), t).sum().backward();
      const double z = (-std::log1p(std::exp(-raw)) + noise) / t;
      const double s = 1.0 / (1.0 + std::exp(-z));
      const double exact = s * (1.0 / (1.0 + std::exp(z))) * (1.0 / (1.0 + std::exp(raw))) / t;
      ASSERT_GT(exact, 0.0);
      EXPECT_NEAR(x.grad().item<double>() / exact, 1.0, 1e-4) << raw << " " << noise;
    }
  }
}

TEST(SampleParams, ZeroParametersAndZeroNoise) {
  auto params = AugmentParams::zeros();
  auto s = sample_params(params, 0.05, NoiseRecord::zero());
  const double expected = sigmoid(std::log(0.5) / 0.05);
  ASSERT_EQ(s.m.size(0), kNumLearnable);
  ASSERT_EQ(s.p.size(0), kNumPolicies);
  EXPECT_NEAR(s.m.max().item<double>(), expected, 1e-9);
  EXPECT_NEAR(s.p.min().item<double>(), expected, 1e-9);
  EXPECT_NEAR(s.magnitude(SubPolicy::kRotate).item<double>(), expected, 1e-9);
  EXPECT_THROW(s.magnitude(SubPolicy::kCutout), ContractError);
}

TEST(SampleParams, StrictlyInsideUnitIntervalForExtremes) {
  Rng rng(9);
  for (auto dtype : {torch::kFloat32, torch::kFloat64}) {
    for (double raw : {-40.0, -6.0, 0.0, 6.0, 40.0}) {
      AugmentParams params{torch::full({kNumLearnable}, raw, dtype),
                           torch::full({kNumPolicies}, raw, dtype)};
      for (int k = 0; k < 10; ++k) {
        auto noise = NoiseRecord::draw(rng);
        for (auto& v : noise.probability) v *= 10.0;
        auto s = sample_params(params, 0.05, noise);
        EXPECT_GT(s.m.min().item<double>(), 0.0);
        EXPECT_LT(s.m.max().item<double>(), 1.0);
        EXPECT_GT(s.p.min().item<double>(), 0.0);
        EXPECT_LT(s.p.max().item<double>(), 1.0);
      }
    }
  }
}

TEST(SampleParams, GradientNeverVanishesInDoublePrecision) {
  for (double noise : {-3.0, -1.0, 0.0}) {
    NoiseRecord rec;
    rec.magnitude.fill(noise);
    rec.probability.fill(noise);
    for (double raw = -6.0; raw <= 6.0; raw += 0.25) {
      AugmentParams params{torch::full({kNumLearnable}, raw, torch::kFloat64).requires_grad_(),
                           torch::full({kNumPolicies}, raw, torch::kFloat64).requires_grad_()};
      auto s = sample_params(params, 0.05, rec);
      (s.m.sum() + s.p.sum()).backward();
      EXPECT_GT(params.raw_m.grad().abs().min().item<double>(), 0.0) << raw << " " << noise;
      EXPECT_GT(params.raw_p.grad().abs().min().item<double>(), 0.0) << raw << " " << noise;
    }
  }
}

TEST(SampleParams, GradientMatchesFiniteDifference) {
  Rng rng(4);
  auto rec = NoiseRecord::draw(rng);
  auto raw_m = torch::randn({kNumLearnable}, torch::kFloat64) * 0.5;
  auto raw_p = torch::randn({kNumPolicies}, torch::kFloat64) * 0.5;
  const double t = 0.7;
  AugmentParams params{raw_m.clone().requires_grad_(), raw_p.clone().requires_grad_()};
  auto weights = torch::linspace(0.5, 1.5, kNumPolicies, torch::kFloat64);
  auto s = sample_params(params, t, rec);
  (s.p * weights).sum().backward();
  const double h = 1e-6;
  for (int j = 0; j < kNumPolicies; ++j) {
    auto up = raw_p.clone();
    auto down = raw_p.clone();
    up[j] += h;
    down[j] -= h;
    const double fu = (sample_params({raw_m, up}, t, rec).p * weights).sum().item<double>();
    const double fd = (sample_params({raw_m, down}, t, rec).p * weights).sum().item<double>();
    const double numeric = (fu - fd) / (2 * h);
    EXPECT_NEAR(params.raw_p.grad()[j].item<double>(), numeric,
                1e-6 + 1e-5 * std::abs(numeric));
  }
}

TEST(SampleParams, ReproducibleFromSeed) {
  auto params = AugmentParams::zeros();
  Rng a(77), b(77);
  auto s1 = sample_params(params, 0.05, a);
  auto s2 = sample_params(params, 0.05, b);
  EXPECT_TRUE(torch::equal(s1.m, s2.m));
  EXPECT_TRUE(torch::equal(s1.p, s2.p));
  EXPECT_EQ(s1.noise.cutout_seed, s2.noise.cutout_seed);
  auto s3 = sample_params(params, 0.05, s1.noise);
  EXPECT_TRUE(torch::equal(s1.p, s3.p));
}

TEST(AugmentParams, ValidationAndInit) {
  Rng rng(1);
  auto n = AugmentParams::normal(0.5, rng);
  EXPECT_TRUE(n.raw_m.requires_grad());
  EXPECT_GT(n.raw_p.abs().sum().item<double>(), 0.0);
  EXPECT_TRUE(torch::equal(AugmentParams::normal(0.0, rng).raw_m,
                           torch::zeros({kNumLearnable})));
  auto c = n.clone();
  EXPECT_TRUE(torch::equal(c.raw_p, n.raw_p));
  EXPECT_NE(c.raw_p.data_ptr(), n.raw_p.data_ptr());
  EXPECT_TRUE(torch::allclose(n.probabilities(), torch::sigmoid(n.raw_p.detach())));
  AugmentParams bad{torch::zeros({3}), torch::zeros({kNumPolicies})};
  EXPECT_THROW(bad.validate(), ShapeError);
  AugmentParams nonfinite{torch::full({kNumLearnable}, INFINITY), torch::zeros({kNumPolicies})};
  EXPECT_THROW(nonfinite.validate(), DomainError);
}

TEST(NoiseRecord, EncoderNoiseSlicesDiversityRow) {
  Rng rng(5);
  auto rec = NoiseRecord::draw(rng);
  auto e = rec.encoder_noise(SubPolicy::kColor, 0.2);
  const auto& row = rec.diversity[index_of(SubPolicy::kColor)];
  EXPECT_DOUBLE_EQ(e.affine[0], row[0]);
  EXPECT_DOUBLE_EQ(e.affine[5], row[5]);
  EXPECT_DOUBLE_EQ(e.scale, row[6]);
  EXPECT_DOUBLE_EQ(e.shift, row[7]);
  EXPECT_DOUBLE_EQ(e.temperature, 0.2);
  auto z = NoiseRecord::zero();
  EXPECT_DOUBLE_EQ(z.magnitude[3], 0.0);
}

}  // namespace
}  // namespace tst
