// Copyright 2026 The TST Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <set>

#include "support.hpp"
#include "tst/data_encoder.hpp"
#include "tst/errors.hpp"
#include "tst/manual_augment.hpp"

namespace tst {
namespace {

using testing::smooth_images;

SampledParams fixed_params(double m, double p) {
  SampledParams s;
  s.m = torch::full({kNumLearnable}, m);
  s.p = torch::full({kNumPolicies}, p);
  s.noise = NoiseRecord::zero();
  s.noise.cutout_seed = 42;
  return s;
}

MetaEncoderSet perturbed_encoders(std::uint64_t seed) {
  torch::manual_seed(seed);
  MetaEncoderSet set;
  torch::NoGradGuard guard;
  for (int i = 0; i < kNumAffine; ++i) {
    set->stn(policy_at(i))->hidden_out->weight.normal_(0, 0.05);
  }
  for (int i = kNumAffine; i < kNumLearnable; ++i) {
    set->color(policy_at(i))->fc->weight.normal_(0, 0.5);
  }
  return set;
}

TEST(Selection, ExhaustiveDrawCoversEveryPolicyOnce) {
  Rng rng(1);
  auto s = select_subpolicies(14, rng);
  std::set<SubPolicy> unique(s.policies.begin(), s.policies.end());
  EXPECT_EQ(unique.size(), 14U);
  EXPECT_EQ(s.policies.size(), 14U);
}

TEST(Selection, InclusionFrequencyIsUniform) {
  Rng rng(2);
  std::array<int, kNumPolicies> hits{};
  constexpr int kDraws = 50000;
  for (int d = 0; d < kDraws; ++d) {
    for (auto p : select_subpolicies(4, rng).policies) ++hits[index_of(p)];
  }
  for (int i = 0; i < kNumPolicies; ++i) {
    EXPECT_NEAR(static_cast<double>(hits[i]) / kDraws, 4.0 / 14.0, 0.01) << i;
  }
}

TEST(Selection, DetectionModePutsAffineFirst) {
  auto s = make_selection({SubPolicy::kRotate, SubPolicy::kInvert, SubPolicy::kShearX,
                           SubPolicy::kBrightness},
                          EncodeMode::kDetection);
  EXPECT_EQ(s.policies, (std::vector<SubPolicy>{SubPolicy::kRotate, SubPolicy::kShearX,
                                                SubPolicy::kInvert, SubPolicy::kBrightness}));
  EXPECT_EQ(s.n_affine, 2);
  EXPECT_EQ(s.n_other, 2);
  Rng rng(3);
  for (int d = 0; d < 200; ++d) {
    auto r = select_subpolicies(6, rng, EncodeMode::kDetection);
    EXPECT_EQ(r.n_affine + r.n_other, 6);
    for (int i = 0; i < 6; ++i) EXPECT_EQ(is_affine(r.policies[i]), i < r.n_affine);
  }
}

TEST(Selection, Errors) {
  Rng rng(4);
  EXPECT_THROW(select_subpolicies(0, rng), ConfigError);
  EXPECT_THROW(select_subpolicies(15, rng), ConfigError);
  EXPECT_THROW(make_selection({SubPolicy::kColor, SubPolicy::kColor}, EncodeMode::kClassification),
               ContractError);
  EXPECT_EQ(encode_mode_from_name("detection"), EncodeMode::kDetection);
  EXPECT_THROW(encode_mode_from_name("segmentation"), ConfigError);
}

TEST(EncodeClassification, ZeroWeightsReturnInputExactly) {
  auto enc = perturbed_encoders(5);
  auto x = smooth_images(3, 3, 16, 16, 5);
  auto sel = make_selection({SubPolicy::kRotate, SubPolicy::kColor, SubPolicy::kInvert,
                             SubPolicy::kCutout},
                            EncodeMode::kClassification);
  EXPECT_TRUE(torch::equal(encode(x, fixed_params(0.7, 0.0), sel, enc), x));
}

TEST(EncodeClassification, SingleFullWeightPolicyIsTheEncoder) {
  auto enc = perturbed_encoders(6);
  auto x = smooth_images(2, 3, 16, 16, 6);
  auto s = fixed_params(0.3, 1.0);
  auto sel = make_selection({SubPolicy::kSharpness}, EncodeMode::kClassification);
  auto expected = enc->color(SubPolicy::kSharpness)->forward(x, s.m[index_of(SubPolicy::kSharpness)]);
  EXPECT_LT((encode(x, s, sel, enc) - expected).abs().max().item<double>(), 1e-6);
}

TEST(EncodeClassification, MatchesResidualLoop) {
  auto enc = perturbed_encoders(7);
  auto x = smooth_images(2, 3, 16, 16, 7);
  Rng rng(7);
  auto raw = AugmentParams::normal(1.0, rng);
  auto s = sample_params(raw, 0.5, rng);
  const std::vector<SubPolicy> chosen{SubPolicy::kTranslateX, SubPolicy::kEqualize,
                                      SubPolicy::kContrast};
  auto sel = make_selection(chosen, EncodeMode::kClassification);
  torch::Tensor oracle = x.clone();
  {
    torch::NoGradGuard guard;
    auto a = enc->stn(SubPolicy::kTranslateX)->forward(x, s.m[index_of(SubPolicy::kTranslateX)]);
    Rng unused(0);
    auto b = apply_manual(SubPolicy::kEqualize, x, std::nullopt, unused);
    auto c = enc->color(SubPolicy::kContrast)->forward(x, s.m[index_of(SubPolicy::kContrast)]);
    oracle = oracle + s.p[index_of(SubPolicy::kTranslateX)] * (a - x);
    oracle = oracle + s.p[index_of(SubPolicy::kEqualize)] * (b - x);
    oracle = oracle + s.p[index_of(SubPolicy::kContrast)] * (c - x);
  }
  auto got = encode(x, s, sel, enc);
  EXPECT_LT((got - oracle).abs().max().item<double>(), 1e-6);
}

TEST(EncodeClassification, NoClampingOfOutput) {
  auto enc = perturbed_encoders(8);
  {
    torch::NoGradGuard guard;
    enc->color(SubPolicy::kBrightness)->fc->bias.copy_(torch::tensor({50.0F, 50.0F}));
  }
  auto x = torch::full({1, 3, 4, 4}, 0.9F);
  auto sel = make_selection({SubPolicy::kBrightness}, EncodeMode::kClassification);
  EXPECT_GT(encode(x, fixed_params(0.5, 1.0), sel, enc).max().item<double>(), 1.0);
}

TEST(CombineAffine, AlgebraicCases) {
  auto eye = torch::eye(2, 3);
  EXPECT_TRUE(torch::equal(combine_affine({}, {}), eye));
  auto a = torch::tensor({0.9F, 0.2F, -0.1F, 0.05F, 1.1F, 0.3F}).view({2, 3});
  EXPECT_TRUE(torch::allclose(combine_affine({a}, {torch::tensor(1.0F)}), a));
  auto b = torch::tensor({1.2F, -0.4F, 0.2F, 0.1F, 0.8F, -0.6F}).view({2, 3});
  auto got = combine_affine({a, b}, {torch::tensor(0.3F), torch::tensor(0.7F)});
  const float ident[2][3] = {{1, 0, 0}, {0, 1, 0}};
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 3; ++c) {
      const float expected = ident[r][c] + 0.3F * (a[r][c].item<float>() - ident[r][c]) +
                             0.7F * (b[r][c].item<float>() - ident[r][c]);
      EXPECT_NEAR(got[r][c].item<float>(), expected, 1e-6);
    }
  }
  EXPECT_THROW(combine_affine({a}, {}), ContractError);
  EXPECT_THROW(combine_affine({torch::eye(3)}, {torch::tensor(0.5F)}), ShapeError);
}

TEST(EncodeDetection, SingleAffineFullWeightIsOneWarp) {
  auto enc = perturbed_encoders(9);
  auto x = smooth_images(2, 3, 16, 16, 9);
  auto s = fixed_params(0.8, 1.0);
  auto sel = make_selection({SubPolicy::kShearY}, EncodeMode::kDetection);
  auto a = enc->stn(SubPolicy::kShearY)->matrix(s.m[index_of(SubPolicy::kShearY)]);
  EXPECT_LT((encode(x, s, sel, enc) - affine_warp(x, a)).abs().max().item<double>(), 1e-6);
}

TEST(EncodeDetection, ZeroWeightsAreIdentityWarp) {
  auto enc = perturbed_encoders(10);
  auto x = smooth_images(2, 3, 16, 16, 10);
  auto sel = make_selection({SubPolicy::kRotate, SubPolicy::kTranslateY, SubPolicy::kSolarize},
                            EncodeMode::kDetection);
  EXPECT_LT((encode(x, fixed_params(0.6, 0.0), sel, enc) - x).abs().max().item<double>(), 1e-6);
}

TEST(EncodeDetection, MatchesStagedOracleWithSingleWarp) {
  auto enc = perturbed_encoders(11);
  auto x = smooth_images(2, 3, 16, 16, 11);
  Rng rng(11);
  auto s = sample_params(AugmentParams::normal(1.0, rng), 0.5, rng);
  auto sel = make_selection({SubPolicy::kColor, SubPolicy::kRotate, SubPolicy::kPosterize,
                             SubPolicy::kShearX},
                            EncodeMode::kDetection);
  ASSERT_EQ(sel.n_affine, 2);

  const auto before = affine_warp_calls();
  auto got = encode(x, s, sel, enc);
  EXPECT_EQ(affine_warp_calls() - before, 1U);

  torch::NoGradGuard guard;
  const auto ir = index_of(SubPolicy::kRotate), is = index_of(SubPolicy::kShearX);
  auto eye = torch::eye(2, 3);
  auto ar = enc->stn(SubPolicy::kRotate)->matrix(s.m[ir]);
  auto as = enc->stn(SubPolicy::kShearX)->matrix(s.m[is]);
  auto combined = eye + s.p[ir] * (ar - eye) + s.p[is] * (as - eye);
  auto warped = affine_warp(x, combined);
  const auto ic = index_of(SubPolicy::kColor), ip = index_of(SubPolicy::kPosterize);
  auto oracle = warped +
                s.p[ic] * (enc->color(SubPolicy::kColor)->forward(warped, s.m[ic]) - warped) +
                s.p[ip] * (enc->color(SubPolicy::kPosterize)->forward(warped, s.m[ip]) - warped);
  EXPECT_LT((got - oracle).abs().max().item<double>(), 1e-6);
}

TEST(Encode, GradientsReachRawParametersInBothModes) {
  auto enc = perturbed_encoders(12);
  enc->freeze();
  auto x = smooth_images(2, 3, 16, 16, 12);
  for (auto mode : {EncodeMode::kClassification, EncodeMode::kDetection}) {
    Rng rng(12);
    auto raw = AugmentParams::normal(0.5, rng);
    auto s = sample_params(raw, 0.5, rng);
    auto sel = make_selection({SubPolicy::kTranslateX, SubPolicy::kRotate, SubPolicy::kContrast,
                               SubPolicy::kInvert},
                              mode);
    auto y = encode(x, s, sel, enc, {.diversity = true});
    EXPECT_EQ(y.sizes(), x.sizes());
    (y * smooth_images(2, 3, 16, 16, 99)).sum().backward();
    auto gm = raw.raw_m.grad();
    auto gp = raw.raw_p.grad();
    ASSERT_TRUE(gm.defined() && gp.defined());
    EXPECT_TRUE(torch::isfinite(gm).all().item<bool>());
    EXPECT_TRUE(torch::isfinite(gp).all().item<bool>());
    for (auto p : sel.policies) EXPECT_NE(gp[index_of(p)].item<double>(), 0.0) << name(p);
    EXPECT_NE(gm[index_of(SubPolicy::kContrast)].item<double>(), 0.0);
    EXPECT_EQ(gp[index_of(SubPolicy::kCutout)].item<double>(), 0.0);
  }
}

TEST(Encode, BatchOrderIsPreserved) {
  auto enc = perturbed_encoders(13);
  auto x = smooth_images(4, 3, 8, 8, 13);
  auto s = fixed_params(0.4, 0.6);
  auto sel = make_selection({SubPolicy::kShearX, SubPolicy::kBrightness},
                            EncodeMode::kClassification);
  auto full = encode(x, s, sel, enc);
  for (int b = 0; b < 4; ++b) {
    auto one = encode(x.slice(0, b, b + 1), s, sel, enc);
    EXPECT_LT((one[0] - full[b]).abs().max().item<double>(), 1e-6);
  }
}

TEST(Encode, ContractErrors) {
  auto enc = perturbed_encoders(14);
  auto x = smooth_images(1, 3, 8, 8, 14);
  auto cls = make_selection({SubPolicy::kColor}, EncodeMode::kClassification);
  EXPECT_THROW(encode_detection(x, fixed_params(0.5, 0.5), cls, enc), ContractError);
  SampledParams empty;
  EXPECT_THROW(encode(x, empty, cls, enc), ContractError);
}

}  // namespace
}  // namespace tst
