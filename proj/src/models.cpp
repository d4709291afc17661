// Copyright 2026 The TST Authors
// SPDX-License-Identifier: Apache-2.0

#include "tst/models.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "tst/errors.hpp"
#include "tst/rng.hpp"

namespace tst {
namespace {

constexpr double kInputMean = 0.5;
constexpr double kInputStd = 0.25;

std::int64_t scaled(double width, std::int64_t base) {
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::lround(width * static_cast<double>(base))));
}

}  // namespace

std::string_view name(ModelFamily family) {
  switch (family) {
    case ModelFamily::kTinyCnn:
      return "tiny-cnn";
    case ModelFamily::kMidCnn:
      return "mid-cnn";
    case ModelFamily::kMlp:
      return "mlp";
  }
  return "?";
}

ModelFamily model_family_from_name(std::string_view text) {
  for (auto f : {ModelFamily::kTinyCnn, ModelFamily::kMidCnn, ModelFamily::kMlp}) {
    if (name(f) == text) return f;
  }
  throw ConfigError("unknown model family '" + std::string(text) +
                    "' (expected tiny-cnn|mid-cnn|mlp)");
}

std::int64_t ModelSpec::resolved_depth() const {
  if (depth > 0) return depth;
  return family == ModelFamily::kMidCnn ? 3 : 2;
}

void ModelSpec::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("model spec: " + msg); };
  if (!(width > 0.0) || !std::isfinite(width)) fail("width must be positive");
  if (depth < 0) fail("depth must be >= 0");
  if (classes < 2) fail("classes must be >= 2");
  if (channels < 1 || height < 1 || width_px < 1) fail("input shape must be positive");
  if (family != ModelFamily::kMlp) {
    const auto shrink = std::int64_t{1} << resolved_depth();
    if (height < shrink || width_px < shrink) {
      fail("input too small for " + std::to_string(resolved_depth()) + " pooling stages");
    }
  }
}

ClassifierImpl::ClassifierImpl(ModelSpec s) : spec(s) {
  spec.validate();
  reset();
}

void ClassifierImpl::reset() {
  namespace nn = torch::nn;
  features = nn::Sequential();
  head = nn::Sequential();
  const auto depth = spec.resolved_depth();
  if (spec.family == ModelFamily::kMlp) {
    std::int64_t in = spec.channels * spec.height * spec.width_px;
    features->push_back(nn::Flatten());
    const auto hidden = scaled(spec.width, 128);
    for (std::int64_t i = 0; i < depth; ++i) {
      features->push_back(nn::Linear(in, hidden));
      features->push_back(nn::ReLU());
      in = hidden;
    }
    head->push_back(nn::Linear(in, spec.classes));
  } else {
    const bool mid = spec.family == ModelFamily::kMidCnn;
    std::int64_t in = spec.channels;
    std::int64_t h = spec.height, w = spec.width_px;
    for (std::int64_t i = 0; i < depth; ++i) {
      const auto out = scaled(spec.width, (mid ? 16 : 8) << i);
      features->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, 3).padding(1)));
      features->push_back(nn::ReLU());
      features->push_back(nn::MaxPool2d(2));
      in = out;
      h /= 2;
      w /= 2;
    }
    features->push_back(nn::Flatten());
    const auto flat = in * h * w;
    if (mid) {
      const auto hidden = scaled(spec.width, 128);
      head->push_back(nn::Linear(flat, hidden));
      head->push_back(nn::ReLU());
      head->push_back(nn::Linear(hidden, spec.classes));
    } else {
      head->push_back(nn::Linear(flat, spec.classes));
    }
  }
  register_module("features", features);
  register_module("head", head);
}

torch::Tensor ClassifierImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != spec.channels || x.size(2) != spec.height ||
      x.size(3) != spec.width_px) {
    std::ostringstream msg;
    msg << "classifier expects (B," << spec.channels << "," << spec.height << ","
        << spec.width_px << "), got " << x.sizes();
    throw ShapeError(msg.str());
  }
  return head->forward(features->forward((x - kInputMean) / kInputStd));
}

Classifier build_model(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  torch::manual_seed(seed);
  return Classifier(spec);
}

std::int64_t parameter_count(torch::nn::Module& module) {
  std::int64_t n = 0;
  for (const auto& p : module.parameters()) n += p.numel();
  return n;
}

void freeze_module(torch::nn::Module& module) {
  for (auto& p : module.parameters()) p.set_requires_grad(false);
}

torch::Tensor predict_logits(Classifier& model, const torch::Tensor& images, std::int64_t chunk) {
  torch::NoGradGuard guard;
  const bool was_training = model->is_training();
  model->eval();
  std::vector<torch::Tensor> parts;
  for (std::int64_t i = 0; i < images.size(0); i += chunk) {
    parts.push_back(model->forward(images.slice(0, i, std::min(i + chunk, images.size(0)))));
  }
  model->train(was_training);
  if (parts.empty()) return torch::empty({0, model->spec.classes});
  return torch::cat(parts);
}

double accuracy(Classifier& model, const Dataset& data) {
  if (data.size() == 0) throw ContractError("accuracy of an empty dataset");
  auto logits = predict_logits(model, data.images);
  return logits.argmax(1).eq(data.labels).to(torch::kFloat64).mean().item<double>();
}

double teacher_confidence_from_logits(const torch::Tensor& logits, const torch::Tensor& labels) {
  if (logits.size(0) == 0) throw ContractError("teacher confidence of an empty dataset");
  auto probs = torch::softmax(logits.detach().to(torch::kFloat64), 1);
  return probs.gather(1, labels.view({-1, 1})).mean().item<double>();
}

double teacher_confidence(Classifier& teacher, const Dataset& data) {
  if (data.size() == 0) throw ContractError("teacher confidence of an empty dataset");
  return teacher_confidence_from_logits(predict_logits(teacher, data.images), data.labels);
}

PretrainResult pretrain_teacher(const ModelSpec& spec, const DataSplits& data,
                                const PretrainOptions& options) {
  if (options.epochs < 0 || options.batch_size < 1) {
    throw ConfigError("teacher: epochs must be >= 0 and batch_size >= 1");
  }
  auto model = build_model(spec, options.seed);
  Rng rng(options.seed ^ 0xA5A5A5A5ULL);
  torch::optim::SGD opt(model->parameters(), torch::optim::SGDOptions(options.lr)
                                                 .momentum(options.momentum)
                                                 .weight_decay(options.weight_decay));
  const auto n = data.train.size();
  const auto steps_per_epoch = (n + options.batch_size - 1) / options.batch_size;
  const auto total = std::max<std::int64_t>(1, steps_per_epoch * options.epochs);
  std::int64_t step = 0;
  model->train();
  for (std::int64_t e = 0; e < options.epochs; ++e) {
    auto order = rng.permutation(n);
    for (std::int64_t b = 0; b < n; b += options.batch_size) {
      const double lr = 0.5 * options.lr *
                        (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) /
                                        static_cast<double>(total)));
      for (auto& group : opt.param_groups()) {
        static_cast<torch::optim::SGDOptions&>(group.options()).lr(lr);
      }
      std::span<const std::int64_t> idx(order.data() + b,
                                         static_cast<std::size_t>(std::min(options.batch_size, n - b)));
      auto [x, y] = data.train.batch(idx);
      opt.zero_grad();
      auto loss = torch::nn::functional::cross_entropy(
          model->forward(x), y,
          torch::nn::functional::CrossEntropyFuncOptions().label_smoothing(options.label_smoothing));
      loss.backward();
      opt.step();
      ++step;
    }
  }
  model->eval();
  freeze_module(*model);
  PretrainResult result{model, accuracy(model, data.test)};
  if (options.min_accuracy && result.test_accuracy < *options.min_accuracy) {
    throw PretrainFailure("teacher reached test accuracy " + std::to_string(result.test_accuracy) +
                              " below the floor " + std::to_string(*options.min_accuracy),
                          result.test_accuracy);
  }
  return result;
}

void check_capacity(const ModelSpec& teacher, const ModelSpec& student) {
  // Building the models reseeds the global generator; put it back afterwards.
  auto gen = at::detail::getDefaultCPUGenerator();
  const auto saved = gen.get_state();
  auto t = build_model(teacher, 0);
  auto s = build_model(student, 0);
  gen.set_state(saved);
  if (parameter_count(*t) < parameter_count(*s)) {
    throw ConfigError("teacher must have at least as many parameters as the student (" +
                      std::to_string(parameter_count(*t)) + " < " +
                      std::to_string(parameter_count(*s)) + ")");
  }
}

}  // namespace tst
