// Copyright 2026 The TST Authors
// SPDX-License-Identifier: Apache-2.0

#include "tst/policy.hpp"

#include <string>

#include "tst/errors.hpp"

namespace tst {
namespace {

constexpr std::array<std::string_view, kNumPolicies> kNames = {
    "ShearX",    "ShearY",     "TranslateX", "TranslateY", "Rotate",
    "Posterize", "Solarize",   "Brightness", "Color",      "Contrast",
    "Sharpness", "Equalize",   "Invert",     "Cutout",
};

}  // namespace

std::string_view name(SubPolicy p) { return kNames[static_cast<std::size_t>(index_of(p))]; }

std::string_view name(PolicyCategory c) {
  switch (c) {
    case PolicyCategory::kAffineLearnable:
      return "affine-learnable";
    case PolicyCategory::kColorLearnable:
      return "color-learnable";
    case PolicyCategory::kMagnitudeUnlearnable:
      return "magnitude-unlearnable";
  }
  return "unknown";
}

std::optional<SubPolicy> policy_from_name(std::string_view n) {
  for (SubPolicy p : kAllPolicies) {
    if (name(p) == n) return p;
  }
  return std::nullopt;
}

SubPolicy policy_at(int index) {
  if (index < 0 || index >= kNumPolicies) {
    throw ContractError("sub-policy index out of range: " + std::to_string(index));
  }
  return static_cast<SubPolicy>(index);
}

}  // namespace tst
