// Copyright 2026 The TST Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace tst {

/// The fourteen augmentation sub-policies. Declaration order is the canonical
/// index order: the first eleven carry a learnable magnitude, the last three
/// do not.
enum class SubPolicy : int {
  kShearX = 0,
  kShearY,
  kTranslateX,
  kTranslateY,
  kRotate,
  kPosterize,
  kSolarize,
  kBrightness,
  kColor,
  kContrast,
  kSharpness,
  kEqualize,
  kInvert,
  kCutout,
};

enum class PolicyCategory {
  kAffineLearnable,
  kColorLearnable,
  kMagnitudeUnlearnable,
};

inline constexpr int kNumPolicies = 14;
inline constexpr int kNumLearnable = 11;
inline constexpr int kNumUnlearnable = kNumPolicies - kNumLearnable;
inline constexpr int kNumAffine = 5;
inline constexpr int kNumColor = 6;

inline constexpr std::array<SubPolicy, kNumPolicies> kAllPolicies = {
    SubPolicy::kShearX,     SubPolicy::kShearY,    SubPolicy::kTranslateX,
    SubPolicy::kTranslateY, SubPolicy::kRotate,    SubPolicy::kPosterize,
    SubPolicy::kSolarize,   SubPolicy::kBrightness, SubPolicy::kColor,
    SubPolicy::kContrast,   SubPolicy::kSharpness, SubPolicy::kEqualize,
    SubPolicy::kInvert,     SubPolicy::kCutout,
};

constexpr int index_of(SubPolicy p) { return static_cast<int>(p); }

constexpr PolicyCategory category(SubPolicy p) {
  const int i = index_of(p);
  if (i < kNumAffine) return PolicyCategory::kAffineLearnable;
  if (i < kNumLearnable) return PolicyCategory::kColorLearnable;
  return PolicyCategory::kMagnitudeUnlearnable;
}

constexpr bool has_magnitude(SubPolicy p) { return index_of(p) < kNumLearnable; }
constexpr bool is_affine(SubPolicy p) {
  return category(p) == PolicyCategory::kAffineLearnable;
}

std::string_view name(SubPolicy p);
std::string_view name(PolicyCategory c);
std::optional<SubPolicy> policy_from_name(std::string_view name);
/// Throws ContractError outside [0, 14).
SubPolicy policy_at(int index);

}  // namespace tst
