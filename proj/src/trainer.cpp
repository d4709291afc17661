// Copyright 2026 The TST Authors
// SPDX-License-Identifier: Apache-2.0

#include "tst/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "tst/errors.hpp"
#include "tst/manual_augment.hpp"

namespace tst {
namespace {

constexpr int kHeldoutChunks = 16;

std::string_view status_name(FitStatus s) {
  switch (s) {
    case FitStatus::kFitted:
      return "fitted";
    case FitStatus::kFailed:
      return "failed";
    case FitStatus::kSkipped:
      return "skipped (unlearnable)";
  }
  return "?";
}

FitStatus status_from(const std::string& s) {
  for (auto v : {FitStatus::kFitted, FitStatus::kFailed, FitStatus::kSkipped}) {
    if (status_name(v) == s) return v;
  }
  throw ConfigError("unknown fit status '" + s + "'");
}

void set_lr(torch::optim::Optimizer& opt, double lr) {
  for (auto& group : opt.param_groups()) group.options().set_lr(lr);
}

nlohmann::json spec_to_json(const ModelSpec& s) {
  return {{"family", std::string(name(s.family))},
          {"width", s.width},
          {"depth", s.depth},
          {"classes", s.classes},
          {"channels", s.channels},
          {"height", s.height},
          {"width_px", s.width_px}};
}

ModelSpec spec_from_json(const nlohmann::json& j) {
  ModelSpec s;
  s.family = model_family_from_name(j.at("family").get<std::string>());
  s.width = j.at("width");
  s.depth = j.at("depth");
  s.classes = j.at("classes");
  s.channels = j.at("channels");
  s.height = j.at("height");
  s.width_px = j.at("width_px");
  return s;
}

void require_kind(const Checkpoint& ckpt, const std::string& kind) {
  if (!ckpt.meta.contains("kind") || ckpt.meta.at("kind") != kind) {
    throw ConfigError("checkpoint is not a " + kind + " checkpoint");
  }
}

std::string describe(const SearchInputs& inputs, const SampledParams& sampled) {
  std::ostringstream out;
  out << "selection:";
  for (auto p : inputs.selection.policies) out << " " << name(p);
  out << "\nsampled m:";
  auto m = sampled.m.detach().to(torch::kFloat64).contiguous();
  for (std::int64_t i = 0; i < m.numel(); ++i) out << " " << m[i].item<double>();
  out << "\nsampled p:";
  auto p = sampled.p.detach().to(torch::kFloat64).contiguous();
  for (std::int64_t i = 0; i < p.numel(); ++i) out << " " << p[i].item<double>();
  return out.str();
}

}  // namespace

// ---- Stage I -------------------------------------------------------------

bool FitReport::all_fitted() const {
  return std::none_of(entries.begin(), entries.end(),
                      [](const FitEntry& e) { return e.status == FitStatus::kFailed; });
}

const FitEntry& FitReport::entry(SubPolicy policy) const {
  for (const auto& e : entries) {
    if (e.policy == policy) return e;
  }
  throw ContractError("fit report has no entry for " + std::string(name(policy)));
}

nlohmann::json FitReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : entries) {
    rows.push_back({{"policy", std::string(name(e.policy))},
                    {"status", std::string(status_name(e.status))},
                    {"initial_mse", e.initial_mse},
                    {"final_mse", e.final_mse}});
  }
  return {{"threshold", threshold}, {"entries", rows}};
}

FitReport FitReport::from_json(const nlohmann::json& doc) {
  FitReport r;
  r.threshold = doc.at("threshold");
  for (const auto& row : doc.at("entries")) {
    FitEntry e;
    const auto policy = policy_from_name(row.at("policy").get<std::string>());
    if (!policy) throw ConfigError("unknown sub-policy in fit report");
    e.policy = *policy;
    e.status = status_from(row.at("status").get<std::string>());
    e.initial_mse = row.at("initial_mse").get<double>();
    e.final_mse = row.at("final_mse").get<double>();
    r.entries.push_back(e);
  }
  return r;
}

std::string FitReport::summary() const {
  std::ostringstream out;
  for (const auto& e : entries) {
    out << name(e.policy) << ": " << status_name(e.status);
    if (e.status != FitStatus::kSkipped) {
      out << " (mse " << e.initial_mse << " -> " << e.final_mse << ", bound " << threshold
          << ")";
    }
    out << "\n";
  }
  return out.str();
}

double heldout_mse(SubPolicy policy, MetaEncoderSet& encoders, const torch::Tensor& images) {
  if (!has_magnitude(policy)) throw ContractError("held-out MSE needs a learnable policy");
  torch::NoGradGuard guard;
  Rng unused(0);
  const auto n = images.size(0);
  double sum = 0.0;
  std::int64_t count = 0;
  for (int k = 0; k < kHeldoutChunks; ++k) {
    const auto lo = k * n / kHeldoutChunks;
    const auto hi = (k + 1) * n / kHeldoutChunks;
    if (hi <= lo) continue;
    const double m = (k + 0.5) / kHeldoutChunks;
    auto x = images.slice(0, lo, hi);
    auto target = apply_manual(policy, x, m, unused);
    auto out = encoders->apply(policy, x, torch::tensor(static_cast<float>(m)), nullptr, unused);
    sum += (out - target).pow(2).sum().item<double>();
    count += target.numel();
  }
  return sum / static_cast<double>(count);
}

FitReport stage1_fit_encoders(const Dataset& train, const torch::Tensor& heldout,
                              MetaEncoderSet& encoders, const EncoderConfig& config, Rng& rng,
                              const std::vector<SubPolicy>& policies) {
  if (encoders->frozen()) throw ContractError("Stage I needs unfrozen encoders");
  if (train.size() == 0 || heldout.size(0) == 0) {
    throw ContractError("Stage I needs non-empty training and held-out images");
  }
  FitReport report;
  report.threshold = config.fit_threshold;
  const auto batch = config.batch_size;
  const auto groups = std::max<std::int64_t>(1, std::min(config.magnitude_groups, batch));
  for (SubPolicy policy : kAllPolicies) {
    FitEntry entry{policy, FitStatus::kSkipped, 0.0, 0.0};
    const bool wanted =
        policies.empty() || std::find(policies.begin(), policies.end(), policy) != policies.end();
    if (!has_magnitude(policy) || !wanted) {
      if (has_magnitude(policy)) {
        entry.initial_mse = entry.final_mse = heldout_mse(policy, encoders, heldout);
        entry.status = entry.final_mse <= config.fit_threshold ? FitStatus::kFitted
                                                                : FitStatus::kFailed;
      }
      report.entries.push_back(entry);
      continue;
    }
    entry.initial_mse = heldout_mse(policy, encoders, heldout);
    torch::optim::Adam opt(encoders->parameters_of(policy), torch::optim::AdamOptions(config.lr));
    for (std::int64_t step = 0; step < config.n_fitting; ++step) {
      set_lr(opt, 0.5 * config.lr *
                      (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) /
                                      static_cast<double>(config.n_fitting))));
      std::vector<std::int64_t> idx(static_cast<std::size_t>(batch));
      for (auto& i : idx) i = rng.below(train.size());
      auto x = train.batch(idx).first;
      std::vector<torch::Tensor> targets;
      std::vector<float> magnitudes;
      for (std::int64_t g = 0; g < groups; ++g) {
        const auto lo = g * batch / groups, hi = (g + 1) * batch / groups;
        const double m = rng.uniform();
        targets.push_back(apply_manual(policy, x.slice(0, lo, hi), m, rng));
        magnitudes.insert(magnitudes.end(), static_cast<std::size_t>(hi - lo),
                          static_cast<float>(m));
      }
      auto out = encoders->apply(policy, x, torch::tensor(magnitudes), nullptr, rng);
      auto loss = encoder_fit_loss(torch::cat(targets), out);
      opt.zero_grad();
      loss.backward();
      opt.step();
    }
    entry.final_mse = heldout_mse(policy, encoders, heldout);
    entry.status =
        entry.final_mse <= config.fit_threshold ? FitStatus::kFitted : FitStatus::kFailed;
    report.entries.push_back(entry);
  }
  encoders->freeze();
  return report;
}

// ---- Stage II / III building blocks ------------------------------------------

SearchLoss search_objective(const SearchInputs& inputs, const AugmentParams& params,
                            MetaEncoderSet& encoders, Classifier& teacher, Classifier& student,
                            const TrainConfig& config) {
  auto sampled = sample_params(params, config.tau_l, inputs.noise);
  auto augmented = encode(inputs.images, sampled, inputs.selection, encoders,
                          EncodeOptions{config.diversity});
  auto loss = search_loss(teacher->forward(augmented), student->forward(augmented),
                          inputs.labels, config.weights);
  if (!std::isfinite(loss.total.item<double>())) {
    throw DivergenceError("non-finite search loss\n" + describe(inputs, sampled));
  }
  return loss;
}

std::pair<torch::Tensor, torch::Tensor> search_gradients(const SearchLoss& loss,
                                                         const AugmentParams& params) {
  auto grads = torch::autograd::grad({loss.total}, {params.raw_m, params.raw_p}, {},
                                     /*retain_graph=*/false, /*create_graph=*/false,
                                     /*allow_unused=*/true);
  auto fill = [](const torch::Tensor& g, const torch::Tensor& like) {
    return g.defined() ? g : torch::zeros_like(like);
  };
  return {fill(grads[0], params.raw_m), fill(grads[1], params.raw_p)};
}

double student_lr(const TrainConfig& config, std::int64_t epoch) {
  double lr = config.lr_student;
  for (double m : config.lr_milestones) {
    if (static_cast<double>(epoch) > m * static_cast<double>(config.epochs)) lr *= 0.1;
  }
  return lr;
}

// ---- Trainer -------------------------------------------------------------------

Trainer::Trainer(ExperimentConfig config, DataSplits data, Classifier teacher,
                 MetaEncoderSet encoders)
    : config_(std::move(config)),
      data_(std::move(data)),
      teacher_(std::move(teacher)),
      encoders_(std::move(encoders)),
      rng_(config_.seed) {
  config_.validate();
  if (data_.train.size() == 0) throw ContractError("training split is empty");
  torch::set_num_threads(1);
  freeze_module(*teacher_);
  teacher_->eval();
  encoders_->freeze();
  student_ = build_model(config_.student_spec(), config_.seed);
  params_ = config_.train.param_init_std > 0.0
                ? AugmentParams::normal(config_.train.param_init_std, rng_)
                : AugmentParams::zeros();
  student_opt_ = std::make_unique<torch::optim::SGD>(
      student_->parameters(), torch::optim::SGDOptions(config_.train.lr_student)
                                  .momentum(config_.train.momentum)
                                  .weight_decay(config_.train.weight_decay));
  search_opt_ = std::make_unique<torch::optim::Adam>(
      std::vector<torch::Tensor>{params_.raw_m, params_.raw_p},
      torch::optim::AdamOptions(config_.train.lr_encoder));
  teacher_train_logits_ = predict_logits(teacher_, data_.train.images);
}

std::vector<std::int64_t> Trainer::next_batch_indices() {
  std::vector<std::int64_t> idx(static_cast<std::size_t>(config_.train.batch_size));
  for (auto& i : idx) i = rng_.below(data_.train.size());
  return idx;
}

std::vector<double> Trainer::stage2_search(std::int64_t steps) {
  std::vector<double> trace;
  for (std::int64_t s = 0; s < steps; ++s) {
    SearchInputs inputs;
    std::tie(inputs.images, inputs.labels) = data_.train.batch(next_batch_indices());
    inputs.selection = select_subpolicies(config_.train.n_augment, rng_, config_.mode);
    inputs.noise = NoiseRecord::draw(rng_);
    auto loss = search_objective(inputs, params_, encoders_, teacher_, student_, config_.train);
    auto [gm, gp] = search_gradients(loss, params_);
    params_.raw_m.mutable_grad() = gm;
    params_.raw_p.mutable_grad() = gp;
    search_opt_->step();
    trace.push_back(loss.total.item<double>());
  }
  return trace;
}

double Trainer::stage3_step(const torch::Tensor& images, const torch::Tensor& labels,
                            const torch::Tensor& teacher_logits, StepStats* stats) {
  torch::Tensor inputs = images, targets = labels, tlogits = teacher_logits;
  torch::Tensor augmented_logits;
  if (config_.train.augment) {
    torch::NoGradGuard guard;
    auto selection = select_subpolicies(config_.train.n_augment, rng_, config_.mode);
    auto sampled = sample_params(params_, config_.train.tau_l, rng_);
    auto augmented =
        encode(images, sampled, selection, encoders_, EncodeOptions{config_.train.diversity});
    augmented_logits = teacher_->forward(augmented);
    inputs = torch::cat({images, augmented});
    targets = torch::cat({labels, labels});
    tlogits = torch::cat({teacher_logits, augmented_logits});
  }
  student_->train();
  auto loss = kd_loss(student_->forward(inputs), tlogits, targets, config_.train.weights);
  if (!std::isfinite(loss.total.item<double>())) {
    throw DivergenceError("non-finite distillation loss");
  }
  student_opt_->zero_grad();
  loss.total.backward();
  if (config_.train.grad_clip > 0.0) {
    torch::nn::utils::clip_grad_norm_(student_->parameters(), config_.train.grad_clip);
  }
  student_opt_->step();
  if (stats != nullptr) {
    const auto n = inputs.size(0);
    stats->total += loss.total.item<double>() * static_cast<double>(n);
    stats->ce += loss.ce.item<double>() * static_cast<double>(n);
    stats->kl += loss.kl.item<double>() * static_cast<double>(n);
    const auto b = static_cast<double>(images.size(0));
    const double orig = teacher_confidence_from_logits(teacher_logits, labels);
    stats->confidence_original += orig * b;
    stats->confidence_augmented +=
        (augmented_logits.defined() ? teacher_confidence_from_logits(augmented_logits, labels)
                                    : orig) *
        b;
    stats->samples += n;
  }
  return loss.total.item<double>();
}

void Trainer::run_epoch(std::int64_t epoch) {
  const auto& t = config_.train;
  const double lr = student_lr(t, epoch);
  set_lr(*student_opt_, lr);
  const auto n = data_.train.size();
  const auto pass = (n + t.batch_size - 1) / t.batch_size;

  EpochRecord rec;
  rec.epoch = epoch;
  rec.lr = static_cast<float>(lr);
  const auto schedule = t.resolved_schedule();
  if (std::find(schedule.begin(), schedule.end(), epoch) != schedule.end()) {
    const auto steps = t.stage2_full_epoch ? pass : t.n_encoder;
    const auto trace = stage2_search(steps);
    for (std::size_t i = 0; i < trace.size(); ++i) {
      record_.search.push_back(
          {epoch, static_cast<std::int64_t>(i) + 1, static_cast<float>(trace[i])});
    }
    rec.stage2_steps = steps;
  }

  StepStats stats;
  const auto steps = t.n_student > 0 ? t.n_student : pass;
  auto order = rng_.permutation(n);
  std::int64_t pos = 0;
  std::int64_t originals = 0;
  for (std::int64_t s = 0; s < steps; ++s) {
    if (pos >= n) {
      order = rng_.permutation(n);
      pos = 0;
    }
    const auto count = std::min(t.batch_size, n - pos);
    std::span<const std::int64_t> idx(order.data() + pos, static_cast<std::size_t>(count));
    auto [x, y] = data_.train.batch(idx);
    auto index = torch::tensor(std::vector<std::int64_t>(idx.begin(), idx.end()), torch::kInt64);
    stage3_step(x, y, teacher_train_logits_.index_select(0, index), &stats);
    originals += count;
    pos += count;
  }
  const auto denom = static_cast<double>(std::max<std::int64_t>(1, stats.samples));
  const auto odenom = static_cast<double>(std::max<std::int64_t>(1, originals));
  rec.loss_total = static_cast<float>(stats.total / denom);
  rec.loss_ce = static_cast<float>(stats.ce / denom);
  rec.loss_kl = static_cast<float>(stats.kl / denom);
  rec.confidence_original = static_cast<float>(stats.confidence_original / odenom);
  rec.confidence_augmented = static_cast<float>(stats.confidence_augmented / odenom);
  rec.confidence = t.augment
                       ? static_cast<float>(0.5 * (stats.confidence_original +
                                                   stats.confidence_augmented) /
                                            odenom)
                       : rec.confidence_original;
  rec.train_accuracy = static_cast<float>(accuracy(student_, data_.train));
  rec.test_accuracy = static_cast<float>(accuracy(student_, data_.test));
  auto m = params_.magnitudes().contiguous();
  auto p = params_.probabilities().contiguous();
  for (int i = 0; i < kNumLearnable; ++i) {
    rec.magnitudes[static_cast<std::size_t>(i)] = m[i].item<float>();
  }
  for (int i = 0; i < kNumPolicies; ++i) {
    rec.probabilities[static_cast<std::size_t>(i)] = p[i].item<float>();
  }
  record_.epochs.push_back(rec);
}

const RunRecord& Trainer::run(const std::optional<std::string>& checkpoint_path,
                              std::optional<std::int64_t> stop_after_epoch) {
  while (epoch_ < config_.train.epochs) {
    if (stop_after_epoch && epoch_ >= *stop_after_epoch) break;
    run_epoch(epoch_ + 1);
    ++epoch_;
    if (checkpoint_path) checkpoint().save(*checkpoint_path);
  }
  return record_;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ckpt;
  ckpt.meta = {{"kind", "run"},
               {"epoch", epoch_},
               {"rng", rng_.state()},
               {"config_hash", hex64(config_hash(config_))},
               {"config", config_to_json(config_)},
               {"record", record_to_json(record_)}};
  ckpt.put_module("student", *student_);
  ckpt.put_module("teacher", *teacher_);
  ckpt.put_module("encoders", *encoders_);
  ckpt.put("params.raw_m", params_.raw_m);
  ckpt.put("params.raw_p", params_.raw_p);
  put_optimizer(ckpt, "optim.student", *student_opt_);
  put_optimizer(ckpt, "optim.search", *search_opt_);
  return ckpt;
}

void Trainer::restore(const Checkpoint& ckpt) {
  require_kind(ckpt, "run");
  const auto expected = hex64(config_hash(config_));
  if (ckpt.meta.at("config_hash") != expected) {
    throw ConfigError("checkpoint config hash " + ckpt.meta.at("config_hash").get<std::string>() +
                      " does not match the current config (" + expected + ")");
  }
  ckpt.load_module("student", *student_);
  ckpt.load_module("teacher", *teacher_);
  ckpt.load_module("encoders", *encoders_);
  {
    torch::NoGradGuard guard;
    params_.raw_m.copy_(ckpt.at("params.raw_m"));
    params_.raw_p.copy_(ckpt.at("params.raw_p"));
  }
  load_optimizer(ckpt, "optim.student", *student_opt_);
  load_optimizer(ckpt, "optim.search", *search_opt_);
  rng_.set_state(ckpt.meta.at("rng").get<std::string>());
  epoch_ = ckpt.meta.at("epoch");
  record_ = record_from_json(ckpt.meta.at("record"));
  teacher_train_logits_ = predict_logits(teacher_, data_.train.images);
}

Checkpoint teacher_checkpoint(Classifier& teacher, double accuracy) {
  Checkpoint ckpt;
  ckpt.meta = {{"kind", "teacher"}, {"spec", spec_to_json(teacher->spec)}, {"accuracy", accuracy}};
  ckpt.put_module("teacher", *teacher);
  return ckpt;
}

Classifier load_teacher(const Checkpoint& ckpt, const ModelSpec& expected) {
  require_kind(ckpt, "teacher");
  if (!(spec_from_json(ckpt.meta.at("spec")) == expected)) {
    throw ConfigError("teacher checkpoint was built for a different teacher spec");
  }
  auto gen = at::detail::getDefaultCPUGenerator();
  const auto saved = gen.get_state();
  auto model = Classifier(expected);
  gen.set_state(saved);
  ckpt.load_module("teacher", *model);
  freeze_module(*model);
  model->eval();
  return model;
}

Checkpoint encoder_checkpoint(MetaEncoderSet& encoders, const FitReport& report) {
  Checkpoint ckpt;
  ckpt.meta = {{"kind", "encoders"},
               {"shape",
                {{"bias_dim", encoders->shape.bias_dim},
                 {"hidden", encoders->shape.hidden},
                 {"channels", encoders->shape.channels}}},
               {"report", report.to_json()}};
  ckpt.put_module("encoders", *encoders);
  return ckpt;
}

MetaEncoderSet load_encoders(const Checkpoint& ckpt, const EncoderShape& shape) {
  require_kind(ckpt, "encoders");
  const auto& s = ckpt.meta.at("shape");
  if (s.at("bias_dim") != shape.bias_dim || s.at("hidden") != shape.hidden ||
      s.at("channels") != shape.channels) {
    throw ConfigError("encoder checkpoint was built for a different encoder shape");
  }
  auto gen = at::detail::getDefaultCPUGenerator();
  const auto saved = gen.get_state();
  MetaEncoderSet encoders(shape);
  gen.set_state(saved);
  ckpt.load_module("encoders", *encoders);
  encoders->freeze();
  return encoders;
}

}  // namespace tst
