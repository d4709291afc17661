// Copyright 2026 The TST Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "support.hpp"
#include "tst/errors.hpp"
#include "tst/manual_augment.hpp"
#include "tst/meta_encoder.hpp"

namespace tst {
namespace {

using testing::smooth_images;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void zero_head(StnEncoder& enc, bool identity_bias) {
  torch::NoGradGuard guard;
  enc->fc->weight.zero_();
  enc->fc->bias.zero_();
  if (identity_bias) enc->fc->bias.copy_(torch::tensor({1.0F, 0.0F, 0.0F, 0.0F, 1.0F, 0.0F}));
}

TEST(StnEncoder, ZeroWeightsGiveZeroMatrix) {
  torch::manual_seed(0);
  StnEncoder enc;
  zero_head(enc, false);
  auto a = enc->matrix(torch::tensor(0.3F));
  EXPECT_EQ(a.sizes(), (std::vector<std::int64_t>{2, 3}));
  EXPECT_EQ(a.abs().max().item<double>(), 0.0);
}

TEST(StnEncoder, IdentityMatrixReproducesInput) {
  torch::manual_seed(1);
  StnEncoder enc;
  zero_head(enc, true);
  auto x = smooth_images(2, 3, 16, 16, 1);
  auto y = enc->forward(x, torch::tensor(0.8F));
  EXPECT_LT((y - x).abs().max().item<double>(), 1e-6);
}

TEST(StnEncoder, FreshEncoderStartsNearIdentity) {
  torch::manual_seed(2);
  StnEncoder enc;
  auto a = enc->matrix(torch::tensor(0.5F));
  auto eye = torch::tensor({1.0F, 0.0F, 0.0F, 0.0F, 1.0F, 0.0F}).view({2, 3});
  EXPECT_LT((a - eye).norm().item<double>(), 0.1);
}

TEST(StnEncoder, BatchedMagnitudesMatchScalarCalls) {
  torch::manual_seed(3);
  StnEncoder enc;
  {
    torch::NoGradGuard guard;
    enc->hidden_out->weight.normal_(0, 0.3);
  }
  auto m = torch::tensor({0.1F, 0.6F, 0.9F});
  auto batched = enc->matrix(m);
  ASSERT_EQ(batched.sizes(), (std::vector<std::int64_t>{3, 2, 3}));
  for (int i = 0; i < 3; ++i) {
    EXPECT_TRUE(torch::allclose(batched[i], enc->matrix(m[i]), 1e-6, 1e-6));
  }
}

TEST(StnEncoder, DiversityNoiseIsAdditiveOnMatrix) {
  torch::manual_seed(4);
  StnEncoder enc;
  EncoderNoise noise;
  noise.affine = {0.5, -1.0, 2.0, 0.0, 1.5, -0.25};
  noise.temperature = 0.05;
  auto m = torch::tensor(0.4F);
  auto diff = enc->matrix(m, &noise) - enc->matrix(m);
  auto expected = torch::tensor({0.5F, -1.0F, 2.0F, 0.0F, 1.5F, -0.25F}).view({2, 3}) * 0.05F;
  EXPECT_TRUE(torch::allclose(diff, expected, 1e-6, 1e-6));
}

// Analytic single-precision gradient against a float64 central difference.
template <typename Encoder>
void check_magnitude_gradient(Encoder enc, int channels) {
  auto x = smooth_images(2, channels, 12, 12, 5);
  for (float m0 : {0.15F, 0.5F, 0.85F}) {
    auto m = torch::tensor(m0).requires_grad_();
    enc->forward(x, m).mean().backward();
    const double analytic = m.grad().item<double>();

    auto twin = std::dynamic_pointer_cast<typename Encoder::ContainedType>(enc->clone());
    twin->to(torch::kFloat64);
    auto x64 = x.to(torch::kFloat64);
    const double h = 1e-5;
    torch::NoGradGuard guard;
    const double up = twin->forward(x64, torch::tensor(m0 + h, torch::kFloat64)).mean().template item<double>();
    const double down =
        twin->forward(x64, torch::tensor(m0 - h, torch::kFloat64)).mean().template item<double>();
    const double numeric = (up - down) / (2 * h);
    ASSERT_GT(std::abs(numeric), 1e-4);
    EXPECT_LT(std::abs(analytic - numeric) / std::abs(numeric), 1e-3) << m0;
  }
}

TEST(StnEncoder, MagnitudeGradientMatchesFiniteDifference) {
  torch::manual_seed(6);
  StnEncoder enc;
  {
    torch::NoGradGuard guard;
    enc->fc->weight.select(1, 16).copy_(torch::tensor({0.2F, -0.3F, 0.4F, 0.1F, 0.25F, -0.2F}));
  }
  check_magnitude_gradient(enc, 3);
}

TEST(ColorEncoder, NeutralBiasIsExactIdentity) {
  torch::manual_seed(7);
  ColorEncoder enc;
  {
    torch::NoGradGuard guard;
    enc->fc->weight.zero_();
  }
  auto [scale, shift] = enc->scale_shift(torch::tensor(0.3F));
  EXPECT_FLOAT_EQ(scale.item<float>(), 1.0F);
  EXPECT_FLOAT_EQ(shift.item<float>(), 0.0F);
  auto x = smooth_images(2, 3, 8, 8, 8);
  EXPECT_LT((enc->forward(x, torch::tensor(0.3F)) - x).abs().max().item<double>(), 1e-6);
}

TEST(ColorEncoder, FreshEncoderStaysCloseToInput) {
  for (int seed = 0; seed < 5; ++seed) {
    torch::manual_seed(seed);
    ColorEncoder enc;
    auto x = smooth_images(4, 3, 16, 16, seed);
    for (float m : {0.0F, 0.5F, 1.0F}) {
      EXPECT_LT((enc->forward(x, torch::tensor(m)) - x).pow(2).mean().item<double>(), 0.05);
    }
  }
}

TEST(ColorEncoder, SaturatedShiftAddsHalf) {
  torch::manual_seed(9);
  ColorEncoder enc;
  {
    torch::NoGradGuard guard;
    enc->fc->weight.zero_();
    enc->fc->bias.copy_(torch::tensor({0.0F, 60.0F}));
  }
  auto x = smooth_images(1, 3, 6, 6, 9);
  auto y = enc->forward(x, torch::tensor(0.5F));
  EXPECT_LT((y - (x + 0.5)).abs().max().item<double>(), 1e-6);
}

TEST(ColorEncoder, ScaleAndShiftStayInOpenRanges) {
  torch::manual_seed(10);
  ColorEncoder enc;
  {
    torch::NoGradGuard guard;
    enc->fc->weight.normal_(0, 3.0);
    enc->fc->bias.normal_(0, 3.0);
  }
  auto [scale, shift] = enc->scale_shift(torch::linspace(0, 1, 50));
  EXPECT_GT(scale.min().item<double>(), 0.5);
  EXPECT_LT(scale.max().item<double>(), 1.5);
  EXPECT_GT(shift.min().item<double>(), -0.5);
  EXPECT_LT(shift.max().item<double>(), 0.5);
}

TEST(ColorEncoder, DiversityNoiseGoesThroughRbd) {
  torch::manual_seed(11);
  ColorEncoder enc;
  auto m = torch::tensor(0.7F);
  auto [s0, t0] = enc->scale_shift(m);
  EncoderNoise noise;
  noise.scale = 0.8;
  noise.shift = -0.6;
  noise.temperature = 0.5;
  auto [s1, t1] = enc->scale_shift(m, &noise);
  const double ps = s0.item<double>() - 0.5;
  const double pt = t0.item<double>() + 0.5;
  EXPECT_NEAR(s1.item<double>(), 0.5 + sigmoid((std::log(ps) + 0.8) / 0.5), 1e-5);
  EXPECT_NEAR(t1.item<double>(), sigmoid((std::log(pt) - 0.6) / 0.5) - 0.5, 1e-5);
}

TEST(ColorEncoder, MagnitudeGradientMatchesFiniteDifference) {
  torch::manual_seed(12);
  ColorEncoder enc;
  {
    torch::NoGradGuard guard;
    enc->fc->weight.select(1, 16).copy_(torch::tensor({1.5F, -1.0F}));
    enc->branch_out->weight.normal_(0, 0.3);
  }
  check_magnitude_gradient(enc, 3);
}

TEST(ColorEncoder, ShapeErrors) {
  ColorEncoder enc;
  EXPECT_THROW(enc->forward(torch::rand({1, 1, 4, 4}), torch::tensor(0.5F)), ShapeError);
  EXPECT_THROW(enc->forward(torch::rand({1, 3, 4, 4}), torch::rand({1, 1})), ShapeError);
}

TEST(MetaEncoderSet, LayoutAndDispatch) {
  torch::manual_seed(13);
  MetaEncoderSet set;
  EXPECT_EQ(set->children().size(), static_cast<std::size_t>(kNumLearnable));
  EXPECT_TRUE(set->parameters_of(SubPolicy::kEqualize).empty());
  EXPECT_FALSE(set->parameters_of(SubPolicy::kShearY).empty());
  EXPECT_THROW(set->stn(SubPolicy::kColor), ContractError);
  EXPECT_THROW(set->color(SubPolicy::kRotate), ContractError);

  Rng rng(0);
  auto x = smooth_images(2, 3, 8, 8, 13);
  EXPECT_THROW(set->apply(SubPolicy::kInvert, x, torch::tensor(0.5F), nullptr, rng),
               ContractError);
  EXPECT_THROW(set->apply(SubPolicy::kRotate, x, torch::Tensor(), nullptr, rng), ContractError);
  EXPECT_TRUE(torch::equal(set->apply(SubPolicy::kInvert, x, torch::Tensor(), nullptr, rng),
                           1.0 - x));
  auto via_set = set->apply(SubPolicy::kContrast, x, torch::tensor(0.2F), nullptr, rng);
  auto direct = set->color(SubPolicy::kContrast)->forward(x, torch::tensor(0.2F));
  EXPECT_TRUE(torch::equal(via_set, direct));
}

TEST(MetaEncoderSet, EncodersAreIndependentPerPolicy) {
  torch::manual_seed(14);
  MetaEncoderSet set;
  auto a = set->color(SubPolicy::kBrightness)->theta_ev;
  auto b = set->color(SubPolicy::kSharpness)->theta_ev;
  EXPECT_NE(a.data_ptr(), b.data_ptr());
  EXPECT_FALSE(torch::equal(a, b));
}

TEST(MetaEncoderSet, FreezeStopsGradientsButKeepsMagnitudePath) {
  torch::manual_seed(15);
  MetaEncoderSet set;
  set->freeze();
  EXPECT_TRUE(set->frozen());
  for (const auto& p : set->parameters()) EXPECT_FALSE(p.requires_grad());
  Rng rng(0);
  auto x = smooth_images(2, 3, 8, 8, 15);
  auto m = torch::tensor(0.6F).requires_grad_();
  set->apply(SubPolicy::kTranslateY, x, m, nullptr, rng).sum().backward();
  ASSERT_TRUE(m.grad().defined());
  EXPECT_TRUE(std::isfinite(m.grad().item<double>()));
  for (const auto& p : set->parameters()) EXPECT_FALSE(p.grad().defined());
}

}  // namespace
}  // namespace tst
