// Copyright 2026 The TST Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

#include "tst/checkpoint.hpp"
#include "tst/config.hpp"
#include "tst/data_encoder.hpp"
#include "tst/dataset.hpp"
#include "tst/losses.hpp"
#include "tst/meta_encoder.hpp"
#include "tst/models.hpp"
#include "tst/relaxed_sampling.hpp"
#include "tst/rng.hpp"
#include "tst/run_record.hpp"

namespace tst {

// ---- Stage I -------------------------------------------------------------

enum class FitStatus { kFitted, kFailed, kSkipped };

struct FitEntry {
  SubPolicy policy = SubPolicy::kShearX;
  FitStatus status = FitStatus::kSkipped;
  double initial_mse = 0.0;
  double final_mse = 0.0;
};

struct FitReport {
  std::vector<FitEntry> entries;  // one per sub-policy, in policy order
  double threshold = 0.0;

  bool all_fitted() const;
  const FitEntry& entry(SubPolicy policy) const;
  nlohmann::json to_json() const;
  static FitReport from_json(const nlohmann::json& doc);
  /// Human-readable table, one line per sub-policy.
  std::string summary() const;
};

/// Per-pixel MSE between encoder and manual transform on `images`, which are
/// split into 16 chunks evaluated at magnitudes (k + 0.5) / 16.
double heldout_mse(SubPolicy policy, MetaEncoderSet& encoders, const torch::Tensor& images);

/// Fits every learnable encoder (or only those in `policies` when non-empty)
/// against its manual transform, then freezes the whole set. Unlearnable
/// sub-policies are reported as skipped.
FitReport stage1_fit_encoders(const Dataset& train, const torch::Tensor& heldout,
                              MetaEncoderSet& encoders, const EncoderConfig& config, Rng& rng,
                              const std::vector<SubPolicy>& policies = {});

// ---- Stage II / III building blocks ------------------------------------------

struct SearchInputs {
  torch::Tensor images;
  torch::Tensor labels;
  PolicySelection selection;
  NoiseRecord noise;
};

/// Augments `inputs.images` with the sampled parameters and evaluates the
/// search loss. Gradients reach raw_m / raw_p through the encoders.
SearchLoss search_objective(const SearchInputs& inputs, const AugmentParams& params,
                            MetaEncoderSet& encoders, Classifier& teacher, Classifier& student,
                            const TrainConfig& config);

/// Gradient of the search loss with respect to (raw_m, raw_p); unused
/// entries get zeros.
std::pair<torch::Tensor, torch::Tensor> search_gradients(const SearchLoss& loss,
                                                         const AugmentParams& params);

/// Student learning rate for a 1-based epoch under the step schedule.
double student_lr(const TrainConfig& config, std::int64_t epoch);

struct StepStats {
  double total = 0, ce = 0, kl = 0;
  double confidence_original = 0, confidence_augmented = 0;
  std::int64_t samples = 0;
};

// ---- Orchestration ----------------------------------------------------------

/// Owns all mutable training state. One instance per run; not thread-safe.
class Trainer {
 public:
  /// Builds the student from the config seed and freezes teacher and encoders.
  Trainer(ExperimentConfig config, DataSplits data, Classifier teacher, MetaEncoderSet encoders);

  /// Runs `steps` Stage II iterations on fresh batches; returns the loss trace.
  std::vector<double> stage2_search(std::int64_t steps);
  /// One Stage III update on a batch of originals.
  double stage3_step(const torch::Tensor& images, const torch::Tensor& labels,
                     const torch::Tensor& teacher_logits, StepStats* stats = nullptr);

  /// Trains from the current epoch to the configured end, or until
  /// `stop_after_epoch`. With `checkpoint_path` set, a checkpoint is written
  /// after every epoch.
  const RunRecord& run(const std::optional<std::string>& checkpoint_path = std::nullopt,
                       std::optional<std::int64_t> stop_after_epoch = std::nullopt);

  Checkpoint checkpoint() const;
  /// Restores a checkpoint written by checkpoint(); a config hash mismatch
  /// throws ConfigError.
  void restore(const Checkpoint& ckpt);

  const ExperimentConfig& config() const { return config_; }
  const DataSplits& data() const { return data_; }
  Classifier& teacher() { return teacher_; }
  Classifier& student() { return student_; }
  MetaEncoderSet& encoders() { return encoders_; }
  AugmentParams& params() { return params_; }
  Rng& rng() { return rng_; }
  const RunRecord& record() const { return record_; }
  std::int64_t epoch() const { return epoch_; }

 private:
  void run_epoch(std::int64_t epoch);
  std::vector<std::int64_t> next_batch_indices();

  ExperimentConfig config_;
  DataSplits data_;
  Classifier teacher_;
  MetaEncoderSet encoders_;
  Classifier student_{nullptr};
  AugmentParams params_;
  std::unique_ptr<torch::optim::SGD> student_opt_;
  std::unique_ptr<torch::optim::Adam> search_opt_;
  torch::Tensor teacher_train_logits_;
  Rng rng_;
  std::int64_t epoch_ = 0;
  RunRecord record_;
};

/// Writes `teacher` into a checkpoint tagged with its spec and accuracy.
Checkpoint teacher_checkpoint(Classifier& teacher, double accuracy);
Classifier load_teacher(const Checkpoint& ckpt, const ModelSpec& expected);
Checkpoint encoder_checkpoint(MetaEncoderSet& encoders, const FitReport& report);
MetaEncoderSet load_encoders(const Checkpoint& ckpt, const EncoderShape& shape);

}  // namespace tst
