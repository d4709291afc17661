// Copyright 2026 The TST Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

namespace tst {

/// Labelled images: `images` is (N,C,H,W) float32 in [0,1], `labels` (N,) int64.
struct Dataset {
  torch::Tensor images;
  torch::Tensor labels;
  std::int64_t classes = 0;

  std::int64_t size() const { return images.defined() ? images.size(0) : 0; }
  Dataset subset(std::span<const std::int64_t> indices) const;
  std::pair<torch::Tensor, torch::Tensor> batch(std::span<const std::int64_t> indices) const;
};

struct DataSplits {
  Dataset train;
  Dataset test;
};

struct DatasetSpec {
  /// "toy-synthetic" (generated) or "small-natural" (CIFAR-10 binary batches
  /// read from `data_dir`).
  std::string name = "toy-synthetic";
  /// Fraction of the training split kept, in (0, 1]. The test split is never
  /// subsampled.
  double fraction = 1.0;
  std::int64_t train_size = 4000;
  std::int64_t test_size = 1000;
  std::int64_t image_size = 32;
  std::uint64_t seed = 0;
  std::string data_dir;

  bool operator==(const DatasetSpec&) const = default;
};

inline constexpr std::int64_t kToyClasses = 10;

/// Ten shape/texture classes (disc, square, triangle, cross, horizontal
/// stripes, vertical stripes, ring, diagonal stripes, checker, diamond) drawn
/// with random colours, position and size over a noisy background.
Dataset generate_toy(std::int64_t count, std::int64_t image_size, std::uint64_t seed);

/// Stratified subsample of floor(fraction * N) items: each class keeps
/// floor(fraction * n_c), leftovers go to the largest remainders.
Dataset stratified_subset(const Dataset& data, double fraction, std::uint64_t seed);

/// Reads CIFAR-10 binary files (data_batch_*.bin, test_batch.bin).
DataSplits load_cifar10_binary(const std::string& dir);

/// Throws ConfigError for unknown names or fractions outside (0, 1].
DataSplits provide_dataset(const DatasetSpec& spec);

}  // namespace tst
