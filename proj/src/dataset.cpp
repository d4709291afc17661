// Copyright 2026 The TST Authors
// SPDX-License-Identifier: Apache-2.0

#include "tst/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "tst/errors.hpp"
#include "tst/rng.hpp"

namespace tst {
namespace {

bool inside(int cls, double x, double y, double r) {
  const double ax = std::abs(x), ay = std::abs(y);
  switch (cls) {
    case 0:
      return x * x + y * y < r * r;
    case 1:
      return ax < r && ay < r;
    case 2:
      return y > -r && y < r && ax < (r - y) / 2.0;
    case 3:
      return (ax < r / 3.0 && ay < r) || (ay < r / 3.0 && ax < r);
    case 4:
      return std::sin(y * 8.0 / r) > 0.0;
    case 5:
      return std::sin(x * 8.0 / r) > 0.0;
    case 6: {
      const double d = x * x + y * y;
      return d < r * r && d > 0.36 * r * r;
    }
    case 7:
      return std::sin((x + y) * 6.0 / r) > 0.0;
    case 8:
      return std::sin(x * 6.0 / r) * std::sin(y * 6.0 / r) > 0.0;
    default:
      return ax + ay < r;
  }
}

std::vector<std::vector<std::int64_t>> by_class(const Dataset& data) {
  std::vector<std::vector<std::int64_t>> out(static_cast<std::size_t>(data.classes));
  auto labels = data.labels.contiguous();
  const auto* ptr = labels.data_ptr<std::int64_t>();
  for (std::int64_t i = 0; i < data.size(); ++i) {
    out[static_cast<std::size_t>(ptr[i])].push_back(i);
  }
  return out;
}

Dataset read_cifar_files(const std::vector<std::filesystem::path>& files) {
  constexpr std::int64_t kRecord = 1 + 3 * 32 * 32;
  std::vector<std::uint8_t> bytes;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    if (!in) throw ConfigError("dataset file not readable: " + f.string());
    std::vector<std::uint8_t> chunk((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (chunk.size() % kRecord != 0) {
      throw ConfigError("dataset file has a partial record: " + f.string());
    }
    bytes.insert(bytes.end(), chunk.begin(), chunk.end());
  }
  const auto n = static_cast<std::int64_t>(bytes.size()) / kRecord;
  auto images = torch::empty({n, 3, 32, 32}, torch::kFloat32);
  auto labels = torch::empty({n}, torch::kInt64);
  auto* img = images.data_ptr<float>();
  auto* lab = labels.data_ptr<std::int64_t>();
  for (std::int64_t i = 0; i < n; ++i) {
    const auto* rec = bytes.data() + i * kRecord;
    lab[i] = rec[0];
    for (std::int64_t j = 0; j < kRecord - 1; ++j) {
      img[i * (kRecord - 1) + j] = static_cast<float>(rec[1 + j]) / 255.0F;
    }
  }
  return {images, labels, 10};
}

}  // namespace

Dataset Dataset::subset(std::span<const std::int64_t> indices) const {
  auto idx = torch::tensor(std::vector<std::int64_t>(indices.begin(), indices.end()),
                           torch::kInt64);
  return {images.index_select(0, idx), labels.index_select(0, idx), classes};
}

std::pair<torch::Tensor, torch::Tensor> Dataset::batch(
    std::span<const std::int64_t> indices) const {
  auto d = subset(indices);
  return {d.images, d.labels};
}

Dataset generate_toy(std::int64_t count, std::int64_t image_size, std::uint64_t seed) {
  Rng rng(seed);
  const auto s = image_size;
  auto images = torch::empty({count, 3, s, s}, torch::kFloat32);
  auto labels = torch::empty({count}, torch::kInt64);
  auto* img = images.data_ptr<float>();
  auto* lab = labels.data_ptr<std::int64_t>();
  // Balanced classes in shuffled order.
  const auto order = rng.permutation(count);
  for (std::int64_t n = 0; n < count; ++n) {
    const int cls = static_cast<int>(order[static_cast<std::size_t>(n)] % kToyClasses);
    lab[n] = cls;
    std::array<double, 3> bg{}, fg{};
    for (auto& v : bg) v = 0.6 * rng.uniform();
    for (auto& v : fg) v = 0.4 + 0.6 * rng.uniform();
    const double cx = (rng.uniform() - 0.5) * 0.6;
    const double cy = (rng.uniform() - 0.5) * 0.6;
    const double r = 0.35 + 0.3 * rng.uniform();
    const double angle = (rng.uniform() - 0.5) * 0.7;
    const double ca = std::cos(angle), sa = std::sin(angle);
    for (std::int64_t y = 0; y < s; ++y) {
      for (std::int64_t x = 0; x < s; ++x) {
        const double u = -1.0 + 2.0 * static_cast<double>(x) / static_cast<double>(s - 1);
        const double v = -1.0 + 2.0 * static_cast<double>(y) / static_cast<double>(s - 1);
        const double du = u - cx, dv = v - cy;
        const bool on = inside(cls, ca * du + sa * dv, -sa * du + ca * dv, r);
        for (std::int64_t c = 0; c < 3; ++c) {
          const double base = on ? fg[static_cast<std::size_t>(c)] : bg[static_cast<std::size_t>(c)];
          const double value = std::clamp(base + 0.1 * rng.normal(), 0.0, 1.0);
          img[((n * 3 + c) * s + y) * s + x] = static_cast<float>(value);
        }
      }
    }
  }
  return {images, labels, kToyClasses};
}

Dataset stratified_subset(const Dataset& data, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("dataset.fraction must lie in (0, 1]");
  }
  if (fraction == 1.0) return data;
  Rng rng(seed);
  auto groups = by_class(data);
  const auto target = static_cast<std::int64_t>(std::floor(fraction * static_cast<double>(data.size())));
  std::vector<std::int64_t> take(groups.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::int64_t assigned = 0;
  for (std::size_t c = 0; c < groups.size(); ++c) {
    const double exact = fraction * static_cast<double>(groups[c].size());
    take[c] = static_cast<std::int64_t>(std::floor(exact));
    assigned += take[c];
    remainders.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < target && i < remainders.size(); ++i, ++assigned) {
    ++take[remainders[i].second];
  }
  std::vector<std::int64_t> kept;
  for (std::size_t c = 0; c < groups.size(); ++c) {
    auto order = rng.permutation(static_cast<std::int64_t>(groups[c].size()));
    for (std::int64_t i = 0; i < take[c]; ++i) {
      kept.push_back(groups[c][static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
    }
  }
  std::sort(kept.begin(), kept.end());
  return data.subset(kept);
}

DataSplits load_cifar10_binary(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<fs::path> train;
  for (int i = 1; i <= 5; ++i) {
    fs::path p = fs::path(dir) / ("data_batch_" + std::to_string(i) + ".bin");
    if (fs::exists(p)) train.push_back(p);
  }
  const fs::path test = fs::path(dir) / "test_batch.bin";
  if (train.empty() || !fs::exists(test)) {
    throw ConfigError("small-natural dataset needs data_batch_*.bin and test_batch.bin in '" +
                      dir + "'");
  }
  return {read_cifar_files(train), read_cifar_files({test})};
}

DataSplits provide_dataset(const DatasetSpec& spec) {
  if (!(spec.fraction > 0.0 && spec.fraction <= 1.0)) {
    throw ConfigError("dataset.fraction must lie in (0, 1]");
  }
  DataSplits out;
  if (spec.name == "toy-synthetic") {
    out.train = generate_toy(spec.train_size, spec.image_size, spec.seed);
    out.test = generate_toy(spec.test_size, spec.image_size, spec.seed ^ 0x9E3779B97F4A7C15ULL);
  } else if (spec.name == "small-natural") {
    out = load_cifar10_binary(spec.data_dir);
  } else {
    throw ConfigError("unknown dataset '" + spec.name + "' (expected toy-synthetic|small-natural)");
  }
  out.train = stratified_subset(out.train, spec.fraction, spec.seed + 1);
  return out;
}

}  // namespace tst
