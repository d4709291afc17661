// Copyright 2026 The TST Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace tst {

/// Explicit random stream. Every stochastic choice in the pipeline draws from
/// one of these so a run is reproducible from its seed. Distributions are
/// computed from raw engine bits rather than <random> distribution objects,
/// whose output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64();
  /// Uniform on [0, 1).
  double uniform();
  /// Uniform on the open interval (0, 1).
  double uniform_open();
  /// Logistic(0, 1) via inverse CDF.
  double logistic();
  double normal();
  /// Uniform integer on [0, n). n must be positive.
  std::int64_t below(std::int64_t n);
  std::vector<std::int64_t> permutation(std::int64_t n);

  /// Independent child stream seeded from this one.
  Rng fork();

  std::string state() const;
  void set_state(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

}  // namespace tst
