// Copyright 2026 The TST Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tst/data_encoder.hpp"
#include "tst/dataset.hpp"
#include "tst/losses.hpp"
#include "tst/meta_encoder.hpp"
#include "tst/models.hpp"

namespace tst {

inline constexpr int kSchemaVersion = 1;

struct TeacherConfig {
  ModelFamily family = ModelFamily::kMidCnn;
  double width = 1.0;
  std::int64_t depth = 0;
  std::int64_t epochs = 30;
  std::int64_t batch_size = 64;
  double lr = 0.05;
  double min_accuracy = 0.85;
  double label_smoothing = 0.1;

  bool operator==(const TeacherConfig&) const = default;
};

struct StudentConfig {
  ModelFamily family = ModelFamily::kTinyCnn;
  double width = 1.0;
  std::int64_t depth = 0;

  bool operator==(const StudentConfig&) const = default;
};

struct EncoderConfig {
  std::int64_t bias_dim = 16;
  std::int64_t hidden = 32;
  std::int64_t n_fitting = 2000;
  std::int64_t batch_size = 64;
  /// Independent magnitude draws per fitting batch (1 = one per step).
  std::int64_t magnitude_groups = 8;
  double lr = 3e-2;
  double fit_threshold = 5e-3;
  std::int64_t heldout_samples = 256;

  bool operator==(const EncoderConfig&) const = default;
};

struct TrainConfig {
  std::int64_t epochs = 24;
  std::int64_t batch_size = 64;
  /// Stage III steps per epoch; 0 means one pass over the training split.
  std::int64_t n_student = 0;
  /// Stage II steps per scheduled epoch.
  std::int64_t n_encoder = 6;
  /// When set, Stage II runs for one pass over the training split instead.
  bool stage2_full_epoch = false;
  /// 1-based epochs that run Stage II; nullopt selects {ceil(E/8), ceil(3E/8)}.
  std::optional<std::vector<std::int64_t>> schedule;
  double lr_student = 0.02;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  /// Global gradient-norm clip for Stage III; 0 disables.
  double grad_clip = 5.0;
  /// Fractions of the run after which the student rate drops by 10x.
  std::vector<double> lr_milestones = {0.625, 0.75, 0.875};
  double lr_encoder = 1e-2;
  LossWeights weights;
  double tau_l = kDefaultRelaxTemperature;
  int n_augment = kDefaultNumAugment;
  /// Off: the augmented half is dropped (plain KD on originals).
  bool augment = true;
  bool diversity = true;
  double param_init_std = 0.0;

  std::vector<std::int64_t> resolved_schedule() const;
  bool operator==(const TrainConfig&) const = default;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  EncodeMode mode = EncodeMode::kClassification;
  std::uint64_t seed = 0;
  DatasetSpec dataset;
  TeacherConfig teacher;
  StudentConfig student;
  EncoderConfig encoder;
  TrainConfig train;

  ModelSpec teacher_spec() const;
  ModelSpec student_spec() const;
  EncoderShape encoder_shape() const;
  /// Warnings for legal but suspicious settings (n_encoder too large).
  std::vector<std::string> warnings() const;
  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

/// Parses and validates; missing keys take defaults, unknown keys and
/// out-of-range values throw ConfigError naming the key path.
ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& text);

/// FNV-1a over the canonical JSON serialization.
std::uint64_t config_hash(const ExperimentConfig& config);
std::string hex64(std::uint64_t value);

}  // namespace tst
