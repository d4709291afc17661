// Copyright 2026 The TST Authors
// SPDX-License-Identifier: Apache-2.0

#include "tst/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "tst/errors.hpp"

namespace tst {
namespace {

using nlohmann::json;

// Reads typed members of one JSON object and rejects leftovers.
class Section {
 public:
  Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw ConfigError(where("") + " must be an object");
  }

  std::string where(const std::string& key) const {
    if (path_.empty()) return key.empty() ? "<root>" : key;
    return key.empty() ? path_ : path_ + "." + key;
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = doc_.find(key);
    return it == doc_.end() ? nullptr : &*it;
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    const json* v = find(key);
    if (v == nullptr) return;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v->is_boolean()) throw ConfigError(where(key) + " must be a boolean");
      out = v->get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v->is_number_integer()) throw ConfigError(where(key) + " must be an integer");
      if (std::is_unsigned_v<T> && v->is_number_integer() && !v->is_number_unsigned() &&
          v->get<std::int64_t>() < 0) {
        throw ConfigError(where(key) + " must be non-negative");
      }
      out = v->get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v->is_number()) throw ConfigError(where(key) + " must be a number");
      out = v->get<T>();
    } else {
      if (!v->is_string()) throw ConfigError(where(key) + " must be a string");
      out = v->get<std::string>();
    }
  }

  Section sub(const std::string& key) {
    static const json kEmpty = json::object();
    const json* v = find(key);
    return Section(v == nullptr ? kEmpty : *v, where(key));
  }

  void finish() const {
    for (const auto& item : doc_.items()) {
      if (!seen_.contains(item.key())) throw ConfigError("unknown key '" + where(item.key()) + "'");
    }
  }

 private:
  const json& doc_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& key, const std::string& rule) {
  if (!ok) throw ConfigError(key + " " + rule);
}

template <typename T>
json optional_to_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

std::vector<std::int64_t> TrainConfig::resolved_schedule() const {
  if (schedule) return *schedule;
  const auto a = (epochs + 7) / 8;
  const auto b = (3 * epochs + 7) / 8;
  std::vector<std::int64_t> out;
  if (epochs >= 1) out.push_back(a);
  if (b != a && b >= 1) out.push_back(b);
  return out;
}

ModelSpec ExperimentConfig::teacher_spec() const {
  ModelSpec s;
  s.family = teacher.family;
  s.width = teacher.width;
  s.depth = teacher.depth;
  s.classes = dataset.name == "toy-synthetic" ? kToyClasses : 10;
  s.height = s.width_px = dataset.name == "toy-synthetic" ? dataset.image_size : 32;
  return s;
}

ModelSpec ExperimentConfig::student_spec() const {
  ModelSpec s = teacher_spec();
  s.family = student.family;
  s.width = student.width;
  s.depth = student.depth;
  return s;
}

EncoderShape ExperimentConfig::encoder_shape() const {
  EncoderShape s;
  s.bias_dim = encoder.bias_dim;
  s.hidden = encoder.hidden;
  return s;
}

std::vector<std::string> ExperimentConfig::warnings() const {
  std::vector<std::string> out;
  const auto steps = train.n_student > 0
                         ? train.n_student
                         : (static_cast<std::int64_t>(std::floor(
                                dataset.fraction * static_cast<double>(dataset.train_size))) +
                            train.batch_size - 1) /
                               train.batch_size;
  if (!train.stage2_full_epoch && train.n_encoder * 10 > steps) {
    out.push_back("train.n_encoder (" + std::to_string(train.n_encoder) +
                  ") exceeds a tenth of the Stage III steps per epoch (" + std::to_string(steps) +
                  ")");
  }
  return out;
}

void ExperimentConfig::validate() const {
  require(schema_version == kSchemaVersion, "schema_version",
          "must be " + std::to_string(kSchemaVersion));
  require(dataset.name == "toy-synthetic" || dataset.name == "small-natural", "dataset.name",
          "must be toy-synthetic or small-natural");
  require(dataset.fraction > 0.0 && dataset.fraction <= 1.0, "dataset.fraction",
          "must lie in (0, 1]");
  require(dataset.train_size >= 1, "dataset.train_size", "must be >= 1");
  require(dataset.test_size >= 1, "dataset.test_size", "must be >= 1");
  require(dataset.image_size >= 8, "dataset.image_size", "must be >= 8");
  require(teacher.width > 0.0, "teacher.width", "must be positive");
  require(teacher.depth >= 0, "teacher.depth", "must be >= 0");
  require(teacher.epochs >= 0, "teacher.epochs", "must be >= 0");
  require(teacher.batch_size >= 1, "teacher.batch_size", "must be >= 1");
  require(teacher.lr > 0.0, "teacher.lr", "must be positive");
  require(teacher.min_accuracy >= 0.0 && teacher.min_accuracy <= 1.0, "teacher.min_accuracy",
          "must lie in [0, 1]");
  require(teacher.label_smoothing >= 0.0 && teacher.label_smoothing < 1.0,
          "teacher.label_smoothing", "must lie in [0, 1)");
  require(student.width > 0.0, "student.width", "must be positive");
  require(student.depth >= 0, "student.depth", "must be >= 0");
  require(encoder.bias_dim >= 1, "encoder.bias_dim", "must be >= 1");
  require(encoder.hidden >= 0, "encoder.hidden", "must be >= 0");
  require(encoder.n_fitting >= 0, "encoder.n_fitting", "must be >= 0");
  require(encoder.batch_size >= 1, "encoder.batch_size", "must be >= 1");
  require(encoder.magnitude_groups >= 1 && encoder.magnitude_groups <= encoder.batch_size,
          "encoder.magnitude_groups", "must lie in [1, encoder.batch_size]");
  require(encoder.lr > 0.0, "encoder.lr", "must be positive");
  require(encoder.fit_threshold > 0.0, "encoder.fit_threshold", "must be positive");
  require(encoder.heldout_samples >= 1, "encoder.heldout_samples", "must be >= 1");
  require(train.epochs >= 1, "train.epochs", "must be >= 1");
  require(train.batch_size >= 1, "train.batch_size", "must be >= 1");
  require(train.n_student >= 0, "train.n_student", "must be >= 0");
  require(train.n_encoder >= 0, "train.n_encoder", "must be >= 0");
  if (train.schedule) {
    for (auto e : *train.schedule) {
      require(e >= 1 && e <= train.epochs, "train.schedule",
              "entries must lie in [1, train.epochs]");
    }
  }
  require(train.lr_student > 0.0, "train.lr_student", "must be positive");
  require(train.momentum >= 0.0 && train.momentum < 1.0, "train.momentum", "must lie in [0, 1)");
  require(train.weight_decay >= 0.0, "train.weight_decay", "must be >= 0");
  require(train.grad_clip >= 0.0, "train.grad_clip", "must be >= 0");
  for (auto m : train.lr_milestones) {
    require(m > 0.0 && m < 1.0, "train.lr_milestones", "entries must lie in (0, 1)");
  }
  require(train.lr_encoder > 0.0, "train.lr_encoder", "must be positive");
  require(train.tau_l > 0.0, "train.tau_l", "must be positive");
  require(train.n_augment >= 1 && train.n_augment <= kNumPolicies, "train.N_A",
          "must lie in [1, " + std::to_string(kNumPolicies) + "], got " +
              std::to_string(train.n_augment));
  require(train.param_init_std >= 0.0, "train.param_init_std", "must be >= 0");
  try {
    train.weights.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
  check_capacity(teacher_spec(), student_spec());
}

ExperimentConfig config_from_json(const json& doc) {
  ExperimentConfig c;
  Section root(doc, "");
  root.get("schema_version", c.schema_version);
  std::string mode(name(c.mode));
  root.get("mode", mode);
  c.mode = encode_mode_from_name(mode);
  root.get("seed", c.seed);
  {
    auto s = root.sub("dataset");
    s.get("name", c.dataset.name);
    s.get("fraction", c.dataset.fraction);
    s.get("train_size", c.dataset.train_size);
    s.get("test_size", c.dataset.test_size);
    s.get("image_size", c.dataset.image_size);
    s.get("seed", c.dataset.seed);
    s.get("data_dir", c.dataset.data_dir);
    s.finish();
  }
  {
    auto s = root.sub("teacher");
    std::string family(name(c.teacher.family));
    s.get("family", family);
    c.teacher.family = model_family_from_name(family);
    s.get("width", c.teacher.width);
    s.get("depth", c.teacher.depth);
    s.get("epochs", c.teacher.epochs);
    s.get("batch_size", c.teacher.batch_size);
    s.get("lr", c.teacher.lr);
    s.get("min_accuracy", c.teacher.min_accuracy);
    s.get("label_smoothing", c.teacher.label_smoothing);
    s.finish();
  }
  {
    auto s = root.sub("student");
    std::string family(name(c.student.family));
    s.get("family", family);
    c.student.family = model_family_from_name(family);
    s.get("width", c.student.width);
    s.get("depth", c.student.depth);
    s.finish();
  }
  {
    auto s = root.sub("encoder");
    s.get("bias_dim", c.encoder.bias_dim);
    s.get("hidden", c.encoder.hidden);
    s.get("n_fitting", c.encoder.n_fitting);
    s.get("batch_size", c.encoder.batch_size);
    s.get("magnitude_groups", c.encoder.magnitude_groups);
    s.get("lr", c.encoder.lr);
    s.get("fit_threshold", c.encoder.fit_threshold);
    s.get("heldout_samples", c.encoder.heldout_samples);
    s.finish();
  }
  {
    auto s = root.sub("train");
    auto& t = c.train;
    s.get("epochs", t.epochs);
    s.get("batch_size", t.batch_size);
    s.get("n_student", t.n_student);
    s.get("n_encoder", t.n_encoder);
    s.get("stage2_full_epoch", t.stage2_full_epoch);
    if (const json* v = s.find("schedule"); v != nullptr && !v->is_null()) {
      if (!v->is_array()) throw ConfigError("train.schedule must be an array or null");
      std::vector<std::int64_t> epochs;
      for (const auto& e : *v) {
        if (!e.is_number_integer()) throw ConfigError("train.schedule entries must be integers");
        epochs.push_back(e.get<std::int64_t>());
      }
      t.schedule = epochs;
    }
    s.get("lr_student", t.lr_student);
    s.get("momentum", t.momentum);
    s.get("weight_decay", t.weight_decay);
    s.get("grad_clip", t.grad_clip);
    if (const json* v = s.find("lr_milestones"); v != nullptr) {
      if (!v->is_array()) throw ConfigError("train.lr_milestones must be an array");
      t.lr_milestones.clear();
      for (const auto& e : *v) {
        if (!e.is_number()) throw ConfigError("train.lr_milestones entries must be numbers");
        t.lr_milestones.push_back(e.get<double>());
      }
    }
    s.get("lr_encoder", t.lr_encoder);
    s.get("w_ce", t.weights.w_ce);
    s.get("w_kl", t.weights.w_kl);
    s.get("alpha", t.weights.alpha);
    s.get("beta", t.weights.beta);
    s.get("tau", t.weights.tau);
    s.get("tau_l", t.tau_l);
    s.get("N_A", t.n_augment);
    s.get("augment", t.augment);
    s.get("diversity", t.diversity);
    s.get("param_init_std", t.param_init_std);
    s.finish();
  }
  root.finish();
  c.validate();
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  const auto& t = c.train;
  return json{
      {"schema_version", c.schema_version},
      {"mode", std::string(name(c.mode))},
      {"seed", c.seed},
      {"dataset",
       {{"name", c.dataset.name},
        {"fraction", c.dataset.fraction},
        {"train_size", c.dataset.train_size},
        {"test_size", c.dataset.test_size},
        {"image_size", c.dataset.image_size},
        {"seed", c.dataset.seed},
        {"data_dir", c.dataset.data_dir}}},
      {"teacher",
       {{"family", std::string(name(c.teacher.family))},
        {"width", c.teacher.width},
        {"depth", c.teacher.depth},
        {"epochs", c.teacher.epochs},
        {"batch_size", c.teacher.batch_size},
        {"lr", c.teacher.lr},
        {"min_accuracy", c.teacher.min_accuracy},
        {"label_smoothing", c.teacher.label_smoothing}}},
      {"student",
       {{"family", std::string(name(c.student.family))},
        {"width", c.student.width},
        {"depth", c.student.depth}}},
      {"encoder",
       {{"bias_dim", c.encoder.bias_dim},
        {"hidden", c.encoder.hidden},
        {"n_fitting", c.encoder.n_fitting},
        {"batch_size", c.encoder.batch_size},
        {"magnitude_groups", c.encoder.magnitude_groups},
        {"lr", c.encoder.lr},
        {"fit_threshold", c.encoder.fit_threshold},
        {"heldout_samples", c.encoder.heldout_samples}}},
      {"train",
       {{"epochs", t.epochs},
        {"batch_size", t.batch_size},
        {"n_student", t.n_student},
        {"n_encoder", t.n_encoder},
        {"stage2_full_epoch", t.stage2_full_epoch},
        {"schedule", optional_to_json(t.schedule)},
        {"lr_student", t.lr_student},
        {"momentum", t.momentum},
        {"weight_decay", t.weight_decay},
        {"grad_clip", t.grad_clip},
        {"lr_milestones", t.lr_milestones},
        {"lr_encoder", t.lr_encoder},
        {"w_ce", t.weights.w_ce},
        {"w_kl", t.weights.w_kl},
        {"alpha", t.weights.alpha},
        {"beta", t.weights.beta},
        {"tau", t.weights.tau},
        {"tau_l", t.tau_l},
        {"N_A", t.n_augment},
        {"augment", t.augment},
        {"diversity", t.diversity},
        {"param_init_std", t.param_init_std}}}};
}

ExperimentConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = text.find_first_not_of(" \t\r\n") == std::string::npos ? json::object()
                                                                  : json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(doc);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::uint64_t config_hash(const ExperimentConfig& config) {
  const auto text = config_to_json(config).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace tst
