// Copyright 2026 The TST Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>

#include <json.hpp>
#include <torch/torch.h>

namespace tst {

inline constexpr int kCheckpointVersion = 1;

/// Single-file container: magic, version, a JSON header (metadata plus a
/// tensor index sorted by name) and raw little-endian tensor payloads.
/// Saving the same contents always yields the same bytes.
struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, torch::Tensor> tensors;

  void put(const std::string& name, const torch::Tensor& tensor);
  /// Throws ConfigError when missing.
  const torch::Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return tensors.contains(name); }

  void put_module(const std::string& prefix, const torch::nn::Module& module);
  /// Copies stored values into the module's parameters and buffers; shapes
  /// must match exactly.
  void load_module(const std::string& prefix, torch::nn::Module& module) const;

  std::string serialize() const;
  static Checkpoint deserialize(const std::string& bytes);
  /// Writes through a temporary file and renames.
  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

/// SGD momentum buffers and Adam moments, keyed by parameter position.
void put_optimizer(Checkpoint& ckpt, const std::string& prefix, torch::optim::SGD& opt);
void load_optimizer(const Checkpoint& ckpt, const std::string& prefix, torch::optim::SGD& opt);
void put_optimizer(Checkpoint& ckpt, const std::string& prefix, torch::optim::Adam& opt);
void load_optimizer(const Checkpoint& ckpt, const std::string& prefix, torch::optim::Adam& opt);

}  // namespace tst
