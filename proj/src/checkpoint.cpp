// Copyright 2026 The TST Authors
// SPDX-License-Identifier: Apache-2.0

#include "tst/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tst/errors.hpp"

namespace tst {
namespace {

constexpr char kMagic[8] = {'T', 'S', 'T', 'C', 'K', 'P', 'T', '\0'};

std::string dtype_name(torch::Dtype dtype) {
  switch (dtype) {
    case torch::kFloat32:
      return "f32";
    case torch::kFloat64:
      return "f64";
    case torch::kInt64:
      return "i64";
    default:
      throw ContractError("checkpoint: unsupported tensor dtype");
  }
}

torch::Dtype dtype_from(const std::string& s) {
  if (s == "f32") return torch::kFloat32;
  if (s == "f64") return torch::kFloat64;
  if (s == "i64") return torch::kInt64;
  throw ConfigError("checkpoint: unknown dtype '" + s + "'");
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(const std::string& in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + static_cast<std::size_t>(i)]))
         << (8 * i);
  }
  return v;
}

std::string key(const std::string& prefix, const std::string& name) {
  return prefix.empty() ? name : prefix + "." + name;
}

}  // namespace

void Checkpoint::put(const std::string& name, const torch::Tensor& tensor) {
  tensors[name] = tensor.detach().cpu().contiguous().clone();
}

const torch::Tensor& Checkpoint::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw ConfigError("checkpoint is missing tensor '" + name + "'");
  return it->second;
}

void Checkpoint::put_module(const std::string& prefix, const torch::nn::Module& module) {
  for (const auto& item : module.named_parameters()) put(key(prefix, item.key()), item.value());
  for (const auto& item : module.named_buffers()) put(key(prefix, item.key()), item.value());
}

void Checkpoint::load_module(const std::string& prefix, torch::nn::Module& module) const {
  torch::NoGradGuard guard;
  auto copy = [&](const std::string& name, torch::Tensor& dst) {
    const auto& src = at(key(prefix, name));
    if (src.sizes() != dst.sizes()) {
      std::ostringstream msg;
      msg << "checkpoint tensor '" << key(prefix, name) << "' has shape " << src.sizes()
          << ", expected " << dst.sizes();
      throw ConfigError(msg.str());
    }
    dst.copy_(src);
  };
  for (auto& item : module.named_parameters()) copy(item.key(), item.value());
  for (auto& item : module.named_buffers()) copy(item.key(), item.value());
}

std::string Checkpoint::serialize() const {
  nlohmann::json index = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : tensors) {
    const auto bytes = static_cast<std::uint64_t>(t.numel() * t.element_size());
    index.push_back({{"name", name},
                     {"dtype", dtype_name(t.scalar_type())},
                     {"shape", t.sizes().vec()},
                     {"offset", offset},
                     {"bytes", bytes}});
    offset += bytes;
  }
  const std::string header = nlohmann::json{{"meta", meta}, {"tensors", index}}.dump();
  std::string out(kMagic, sizeof kMagic);
  put_u64(out, kCheckpointVersion);
  put_u64(out, header.size());
  out += header;
  for (const auto& [name, t] : tensors) {
    out.append(static_cast<const char*>(t.data_ptr()),
               static_cast<std::size_t>(t.numel() * t.element_size()));
  }
  return out;
}

Checkpoint Checkpoint::deserialize(const std::string& bytes) {
  if (bytes.size() < 24 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw ConfigError("not a checkpoint file");
  }
  if (get_u64(bytes, 8) != kCheckpointVersion) {
    throw ConfigError("unsupported checkpoint version " + std::to_string(get_u64(bytes, 8)));
  }
  const auto header_size = get_u64(bytes, 16);
  if (24 + header_size > bytes.size()) throw ConfigError("truncated checkpoint header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(24, header_size));
  } catch (const nlohmann::json::parse_error&) {
    throw ConfigError("corrupt checkpoint header");
  }
  Checkpoint out;
  out.meta = header.at("meta");
  const std::size_t base = 24 + header_size;
  for (const auto& entry : header.at("tensors")) {
    const auto offset = entry.at("offset").get<std::uint64_t>();
    const auto size = entry.at("bytes").get<std::uint64_t>();
    if (base + offset + size > bytes.size()) throw ConfigError("truncated checkpoint payload");
    auto t = torch::empty(entry.at("shape").get<std::vector<std::int64_t>>(),
                          torch::TensorOptions().dtype(dtype_from(entry.at("dtype"))));
    if (static_cast<std::uint64_t>(t.numel() * t.element_size()) != size) {
      throw ConfigError("checkpoint tensor size mismatch");
    }
    std::memcpy(t.data_ptr(), bytes.data() + base + offset, size);
    out.tensors[entry.at("name").get<std::string>()] = t;
  }
  return out;
}

void Checkpoint::save(const std::string& path) const {
  const auto tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write checkpoint '" + path + "'");
    const auto bytes = serialize();
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing checkpoint '" + path + "'");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("missing checkpoint '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

void put_optimizer(Checkpoint& ckpt, const std::string& prefix, torch::optim::SGD& opt) {
  std::size_t i = 0;
  for (auto& group : opt.param_groups()) {
    for (auto& p : group.params()) {
      auto it = opt.state().find(p.unsafeGetTensorImpl());
      if (it != opt.state().end()) {
        auto& s = static_cast<torch::optim::SGDParamState&>(*it->second);
        ckpt.put(prefix + "." + std::to_string(i) + ".momentum", s.momentum_buffer());
      }
      ++i;
    }
  }
}

void load_optimizer(const Checkpoint& ckpt, const std::string& prefix, torch::optim::SGD& opt) {
  opt.state().clear();
  std::size_t i = 0;
  for (auto& group : opt.param_groups()) {
    for (auto& p : group.params()) {
      const auto name = prefix + "." + std::to_string(i) + ".momentum";
      if (ckpt.contains(name)) {
        auto s = std::make_unique<torch::optim::SGDParamState>();
        s->momentum_buffer(ckpt.at(name).clone());
        opt.state()[p.unsafeGetTensorImpl()] = std::move(s);
      }
      ++i;
    }
  }
}

void put_optimizer(Checkpoint& ckpt, const std::string& prefix, torch::optim::Adam& opt) {
  std::size_t i = 0;
  for (auto& group : opt.param_groups()) {
    for (auto& p : group.params()) {
      auto it = opt.state().find(p.unsafeGetTensorImpl());
      if (it != opt.state().end()) {
        auto& s = static_cast<torch::optim::AdamParamState&>(*it->second);
        const auto base = prefix + "." + std::to_string(i);
        ckpt.put(base + ".step", torch::tensor({s.step()}, torch::kInt64));
        ckpt.put(base + ".exp_avg", s.exp_avg());
        ckpt.put(base + ".exp_avg_sq", s.exp_avg_sq());
      }
      ++i;
    }
  }
}

void load_optimizer(const Checkpoint& ckpt, const std::string& prefix, torch::optim::Adam& opt) {
  opt.state().clear();
  std::size_t i = 0;
  for (auto& group : opt.param_groups()) {
    for (auto& p : group.params()) {
      const auto base = prefix + "." + std::to_string(i);
      if (ckpt.contains(base + ".step")) {
        auto s = std::make_unique<torch::optim::AdamParamState>();
        s->step(ckpt.at(base + ".step").item<std::int64_t>());
        s->exp_avg(ckpt.at(base + ".exp_avg").clone());
        s->exp_avg_sq(ckpt.at(base + ".exp_avg_sq").clone());
        opt.state()[p.unsafeGetTensorImpl()] = std::move(s);
      }
      ++i;
    }
  }
}

}  // namespace tst
