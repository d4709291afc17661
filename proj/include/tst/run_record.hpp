// Copyright 2026 The TST Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "tst/policy.hpp"

namespace tst {

/// Values are single precision so nine significant digits reproduce them.
struct EpochRecord {
  std::int64_t epoch = 0;  // 1-based
  float train_accuracy = 0;
  float test_accuracy = 0;
  float loss_total = 0;
  float loss_ce = 0;
  float loss_kl = 0;
  /// Mean teacher probability at the true class over the epoch's Stage III
  /// inputs: all of them, the originals, and the augmented half (equal to
  /// the originals when augmentation is off).
  float confidence = 0;
  float confidence_original = 0;
  float confidence_augmented = 0;
  float lr = 0;
  std::int64_t stage2_steps = 0;
  std::array<float, kNumLearnable> magnitudes{};
  std::array<float, kNumPolicies> probabilities{};

  bool operator==(const EpochRecord&) const = default;
};

struct SearchStep {
  std::int64_t epoch = 0;
  std::int64_t step = 0;
  float loss = 0;

  bool operator==(const SearchStep&) const = default;
};

struct RunRecord {
  std::vector<EpochRecord> epochs;
  std::vector<SearchStep> search;

  bool operator==(const RunRecord&) const = default;
};

nlohmann::json record_to_json(const RunRecord& record);
RunRecord record_from_json(const nlohmann::json& doc);
RunRecord load_record(const std::string& path);
void save_record(const RunRecord& record, const std::string& path);

}  // namespace tst
