// Copyright 2026 The TST Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tst/config.hpp"
#include "tst/dataset.hpp"
#include "tst/meta_encoder.hpp"
#include "tst/models.hpp"

namespace tst {

std::string version_string();

/// Parses argv and dispatches to a subcommand. Returns the process exit code
/// (0 ok, 1 other failure, 2 config or missing input, 3 encoder fit
/// failure, 4 divergence). Diagnostics go to stderr.
int run_command(const std::vector<std::string>& args);

/// Plain KD counterpart of a config: no search epochs, no augmented half.
ExperimentConfig vanilla_variant(ExperimentConfig config);

struct AblationRow {
  std::string label;
  std::vector<double> accuracies;  // final test accuracy per seed

  double mean() const;
  /// Sample standard deviation (n - 1); 0 for a single seed.
  double stddev() const;
};

struct AblationTable {
  std::vector<std::uint64_t> seeds;
  AblationRow vanilla{"vanilla-KD", {}};
  AblationRow tst{"TST", {}};

  std::string csv() const;
  std::string markdown() const;
};

/// Trains the vanilla-KD and TST variants of `base` once per seed. Run
/// artifacts go to `<out_dir>/<variant>-seed<k>/` when `out_dir` is set.
AblationTable run_ablation(const ExperimentConfig& base, const DataSplits& data,
                           Classifier& teacher, MetaEncoderSet& encoders,
                           const std::vector<std::uint64_t>& seeds,
                           const std::string& out_dir = "");

}  // namespace tst
