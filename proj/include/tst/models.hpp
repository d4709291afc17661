// Copyright 2026 The TST Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <torch/torch.h>

#include "tst/dataset.hpp"

namespace tst {

enum class ModelFamily { kTinyCnn, kMidCnn, kMlp };

std::string_view name(ModelFamily family);
ModelFamily model_family_from_name(std::string_view name);

struct ModelSpec {
  ModelFamily family = ModelFamily::kTinyCnn;
  double width = 1.0;
  /// Convolution stages for the CNNs, hidden layers for the MLP. 0 picks the
  /// family default (tiny-cnn 2, mid-cnn 3, mlp 2).
  std::int64_t depth = 0;
  std::int64_t classes = 10;
  std::int64_t channels = 3;
  std::int64_t height = 32;
  std::int64_t width_px = 32;

  std::int64_t resolved_depth() const;
  void validate() const;
  bool operator==(const ModelSpec&) const = default;
};

/// Image classifier. Inputs are images in [0,1]; mean/std normalization
/// happens inside forward().
class ClassifierImpl : public torch::nn::Cloneable<ClassifierImpl> {
 public:
  explicit ClassifierImpl(ModelSpec spec = {});
  void reset() override;
  torch::Tensor forward(const torch::Tensor& x);

  ModelSpec spec;
  torch::nn::Sequential features{nullptr};
  torch::nn::Sequential head{nullptr};
};
TORCH_MODULE(Classifier);

/// Builds a classifier whose initial weights depend only on `seed`.
Classifier build_model(const ModelSpec& spec, std::uint64_t seed);

std::int64_t parameter_count(torch::nn::Module& module);

/// Disables gradients on every parameter.
void freeze_module(torch::nn::Module& module);

/// Logits in eval mode without autograd, computed in chunks.
torch::Tensor predict_logits(Classifier& model, const torch::Tensor& images,
                             std::int64_t chunk = 256);
double accuracy(Classifier& model, const Dataset& data);

/// Mean teacher softmax probability at the true class. Throws ContractError
/// on an empty dataset.
double teacher_confidence(Classifier& teacher, const Dataset& data);
double teacher_confidence_from_logits(const torch::Tensor& logits, const torch::Tensor& labels);

struct PretrainOptions {
  std::int64_t epochs = 30;
  std::int64_t batch_size = 64;
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  /// Keeps teacher logits at a moderate scale so tau-softened targets stay
  /// informative.
  double label_smoothing = 0.1;
  /// Minimum test accuracy; nullopt disables the check.
  std::optional<double> min_accuracy = 0.85;
  std::uint64_t seed = 0;
};

struct PretrainResult {
  Classifier model{nullptr};
  double test_accuracy = 0.0;
};

/// Cross-entropy training with momentum SGD and cosine decay. The returned
/// model is frozen. Throws PretrainFailure when the floor is missed.
PretrainResult pretrain_teacher(const ModelSpec& spec, const DataSplits& data,
                                const PretrainOptions& options);

/// Throws ConfigError unless teacher has at least as many parameters.
void check_capacity(const ModelSpec& teacher, const ModelSpec& student);

}  // namespace tst
