// Copyright 2026 The TST Authors
// SPDX-License-Identifier: Apache-2.0

#include "tst/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>

#include "tst/checkpoint.hpp"
#include "tst/errors.hpp"
#include "tst/export.hpp"
#include "tst/trainer.hpp"

#ifndef TST_VERSION_STRING
#define TST_VERSION_STRING "unknown"
#endif

namespace tst {
namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string resume;
  std::optional<std::string> mode;
  std::string encoders;
  std::string teacher;
  std::string checkpoint;
  std::string record;
  std::uint64_t seeds = 5;
  std::optional<std::int64_t> stop_after;
  bool plots = false;
};

ExperimentConfig resolve(const Options& o) {
  auto config = o.config.empty() ? parse_config("{}") : load_config(o.config);
  if (o.seed) config.seed = *o.seed;
  if (o.mode) config.mode = encode_mode_from_name(*o.mode);
  config.validate();
  for (const auto& w : config.warnings()) std::cerr << "warning: " << w << "\n";
  return config;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

void prepare_out(const Options& o, const std::string& command, const ExperimentConfig& config,
                 const std::vector<std::string>& args) {
  if (o.out.empty()) throw ConfigError("--out is required");
  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec) throw Error("cannot create '" + o.out + "': " + ec.message());
  nlohmann::json manifest = {{"command", command},
                             {"version", version_string()},
                             {"seed", config.seed},
                             {"argv", args},
                             {"config", config_to_json(config)}};
  write_text(fs::path(o.out) / "manifest.json", manifest.dump(2) + "\n");
}

Checkpoint require_checkpoint(const std::string& path, const std::string& what,
                              const std::string& flag) {
  if (path.empty() || !fs::exists(path)) {
    throw ConfigError("missing " + what + " checkpoint" +
                      (path.empty() ? " (pass " + flag + ")" : " '" + path + "'"));
  }
  return Checkpoint::load(path);
}

std::string default_path(const std::string& given, const Options& o, const std::string& file) {
  if (!given.empty()) return given;
  auto candidate = fs::path(o.out) / file;
  return fs::exists(candidate) ? candidate.string() : std::string();
}

int cmd_fit_encoders(const Options& o, const std::vector<std::string>& args) {
  auto config = resolve(o);
  prepare_out(o, "fit-encoders", config, args);
  auto data = provide_dataset(config.dataset);
  torch::set_num_threads(1);
  torch::manual_seed(config.seed);
  MetaEncoderSet encoders(config.encoder_shape());
  Rng rng(config.seed);
  const auto held = std::min(config.encoder.heldout_samples, data.test.size());
  auto report = stage1_fit_encoders(data.train, data.test.images.slice(0, 0, held), encoders,
                                    config.encoder, rng);
  encoder_checkpoint(encoders, report).save((fs::path(o.out) / "encoders.ckpt").string());
  write_text(fs::path(o.out) / "fit_report.json", report.to_json().dump(2) + "\n");
  std::cout << report.summary();
  if (!report.all_fitted()) {
    std::cerr << "error: some encoders missed the MSE bound " << report.threshold << "\n";
    return static_cast<int>(ExitCode::kFitFailure);
  }
  return 0;
}

int cmd_pretrain(const Options& o, const std::vector<std::string>& args) {
  auto config = resolve(o);
  prepare_out(o, "pretrain-teacher", config, args);
  auto data = provide_dataset(config.dataset);
  torch::set_num_threads(1);
  PretrainOptions opts;
  opts.epochs = config.teacher.epochs;
  opts.batch_size = config.teacher.batch_size;
  opts.lr = config.teacher.lr;
  opts.min_accuracy = config.teacher.min_accuracy;
  opts.label_smoothing = config.teacher.label_smoothing;
  opts.seed = config.seed;
  try {
    auto result = pretrain_teacher(config.teacher_spec(), data, opts);
    teacher_checkpoint(result.model, result.test_accuracy)
        .save((fs::path(o.out) / "teacher.ckpt").string());
    const double conf = teacher_confidence(result.model, data.test);
    write_text(fs::path(o.out) / "teacher_report.json",
               nlohmann::json{{"test_accuracy", result.test_accuracy},
                              {"test_confidence", conf},
                              {"parameters", parameter_count(*result.model)}}
                       .dump(2) +
                   "\n");
    std::cout << "teacher test accuracy " << result.test_accuracy << ", confidence " << conf
              << "\n";
  } catch (const PretrainFailure& e) {
    write_text(fs::path(o.out) / "teacher_report.json",
               nlohmann::json{{"test_accuracy", e.achieved()}, {"failed", true}}.dump(2) + "\n");
    throw;
  }
  return 0;
}

void write_run_outputs(const Trainer& trainer, const std::string& dir, bool plots) {
  save_record(trainer.record(), (fs::path(dir) / "record.json").string());
  export_curves(trainer.record(), dir, plots);
}

int cmd_train(const Options& o, const std::vector<std::string>& args) {
  auto config = resolve(o);
  prepare_out(o, "train", config, args);
  const auto enc_path = default_path(o.encoders, o, "encoders.ckpt");
  const auto teacher_path = default_path(o.teacher, o, "teacher.ckpt");
  auto enc_ckpt = require_checkpoint(enc_path, "encoder", "--encoders");
  auto teacher_ckpt = require_checkpoint(teacher_path, "teacher", "--teacher");
  std::optional<Checkpoint> resume;
  if (!o.resume.empty()) resume = require_checkpoint(o.resume, "resume", "--resume");
  auto data = provide_dataset(config.dataset);
  auto teacher = load_teacher(teacher_ckpt, config.teacher_spec());
  auto encoders = load_encoders(enc_ckpt, config.encoder_shape());
  Trainer trainer(config, std::move(data), teacher, encoders);
  if (resume) trainer.restore(*resume);
  const auto ckpt_path = (fs::path(o.out) / "checkpoint.ckpt").string();
  trainer.run(ckpt_path, o.stop_after);
  for (const auto& e : trainer.record().epochs) {
    std::cout << "epoch " << e.epoch << " test_acc " << format_value(e.test_accuracy)
              << " loss " << format_value(e.loss_total) << "\n";
  }
  write_run_outputs(trainer, o.out, o.plots);
  return 0;
}

int cmd_eval(const Options& o, const std::vector<std::string>& args) {
  auto config = resolve(o);
  prepare_out(o, "eval", config, args);
  auto data = provide_dataset(config.dataset);
  nlohmann::json report;
  if (!o.teacher.empty()) {
    auto teacher = load_teacher(require_checkpoint(o.teacher, "teacher", "--teacher"),
                                config.teacher_spec());
    report["teacher_accuracy"] = accuracy(teacher, data.test);
    report["teacher_confidence"] = teacher_confidence(teacher, data.test);
  }
  if (!o.checkpoint.empty()) {
    auto ckpt = require_checkpoint(o.checkpoint, "run", "--checkpoint");
    auto student = build_model(config.student_spec(), config.seed);
    ckpt.load_module("student", *student);
    report["student_accuracy"] = accuracy(student, data.test);
    report["epoch"] = ckpt.meta.at("epoch");
  }
  if (report.is_null()) throw ConfigError("eval needs --teacher and/or --checkpoint");
  write_text(fs::path(o.out) / "eval.json", report.dump(2) + "\n");
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_export(const Options& o, const std::vector<std::string>& args) {
  if (o.record.empty()) throw ConfigError("export-curves needs --record");
  auto record = load_record(o.record);
  auto config = resolve(o);
  prepare_out(o, "export-curves", config, args);
  for (const auto& path : export_curves(record, o.out, o.plots)) std::cout << path << "\n";
  return 0;
}

int cmd_ablate(const Options& o, const std::vector<std::string>& args) {
  auto config = resolve(o);
  prepare_out(o, "ablate", config, args);
  if (o.seeds < 1) throw ConfigError("--seeds must be >= 1");
  auto enc_ckpt = require_checkpoint(default_path(o.encoders, o, "encoders.ckpt"), "encoder",
                                     "--encoders");
  auto teacher_ckpt = require_checkpoint(default_path(o.teacher, o, "teacher.ckpt"), "teacher",
                                         "--teacher");
  auto data = provide_dataset(config.dataset);
  auto teacher = load_teacher(teacher_ckpt, config.teacher_spec());
  auto encoders = load_encoders(enc_ckpt, config.encoder_shape());
  std::vector<std::uint64_t> seeds(o.seeds);
  std::iota(seeds.begin(), seeds.end(), config.seed);
  auto table = run_ablation(config, data, teacher, encoders, seeds, o.out);
  write_text(fs::path(o.out) / "ablation.csv", table.csv());
  write_text(fs::path(o.out) / "ablation.md", table.markdown());
  std::cout << table.markdown();
  return 0;
}

}  // namespace

std::string version_string() { return TST_VERSION_STRING; }

ExperimentConfig vanilla_variant(ExperimentConfig config) {
  config.train.augment = false;
  config.train.schedule = std::vector<std::int64_t>{};
  return config;
}

double AblationRow::mean() const {
  if (accuracies.empty()) return 0.0;
  return std::accumulate(accuracies.begin(), accuracies.end(), 0.0) /
         static_cast<double>(accuracies.size());
}

double AblationRow::stddev() const {
  if (accuracies.size() < 2) return 0.0;
  const double mu = mean();
  double ss = 0.0;
  for (double a : accuracies) ss += (a - mu) * (a - mu);
  return std::sqrt(ss / static_cast<double>(accuracies.size() - 1));
}

std::string AblationTable::csv() const {
  std::string out = "method,mean,std";
  for (auto s : seeds) out += ",seed" + std::to_string(s);
  out += "\n";
  for (const auto* row : {&vanilla, &tst}) {
    out += row->label + "," + format_value(row->mean()) + "," + format_value(row->stddev());
    for (double a : row->accuracies) out += "," + format_value(a);
    out += "\n";
  }
  return out;
}

std::string AblationTable::markdown() const {
  std::string out = "| method | mean acc | std | per-seed accs |\n|---|---|---|---|\n";
  for (const auto* row : {&vanilla, &tst}) {
    std::string per;
    for (std::size_t i = 0; i < row->accuracies.size(); ++i) {
      per += (i ? ", " : "") + format_value(row->accuracies[i]);
    }
    out += "| " + row->label + " | " + format_value(row->mean()) + " | " +
           format_value(row->stddev()) + " | " + per + " |\n";
  }
  return out;
}

AblationTable run_ablation(const ExperimentConfig& base, const DataSplits& data,
                           Classifier& teacher, MetaEncoderSet& encoders,
                           const std::vector<std::uint64_t>& seeds, const std::string& out_dir) {
  AblationTable table;
  table.seeds = seeds;
  for (auto seed : seeds) {
    for (bool use_tst : {false, true}) {
      auto config = use_tst ? base : vanilla_variant(base);
      config.seed = seed;
      Trainer trainer(config, data, teacher, encoders);
      trainer.run();
      const double acc = trainer.record().epochs.back().test_accuracy;
      (use_tst ? table.tst : table.vanilla).accuracies.push_back(acc);
      if (!out_dir.empty()) {
        const auto dir =
            fs::path(out_dir) / ((use_tst ? "tst-seed" : "vanilla-seed") + std::to_string(seed));
        fs::create_directories(dir);
        write_run_outputs(trainer, dir.string(), false);
      }
    }
  }
  return table;
}

int run_command(const std::vector<std::string>& args) {
  CLI::App app{"Augmentation-search knowledge distillation toolkit", "tst"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "experiment config (JSON)");
    sub->add_option("--seed", o.seed, "overrides the config seed");
    sub->add_option("--out", o.out, "output directory")->required();
    sub->add_option("--mode", o.mode, "classification|detection")
        ->check(CLI::IsMember({"classification", "detection"}));
  };
  auto* fit = app.add_subcommand("fit-encoders", "Stage I: fit the meta-encoders");
  common(fit);
  auto* pre = app.add_subcommand("pretrain-teacher", "train and save the teacher");
  common(pre);
  auto* train = app.add_subcommand("train", "run the full alternating schedule");
  common(train);
  train->add_option("--encoders", o.encoders, "encoder checkpoint (default <out>/encoders.ckpt)");
  train->add_option("--teacher", o.teacher, "teacher checkpoint (default <out>/teacher.ckpt)");
  train->add_option("--resume", o.resume, "run checkpoint to continue from");
  train->add_option("--stop-after-epoch", o.stop_after, "stop once this epoch is done");
  train->add_flag("--plots", o.plots, "also write SVG charts");
  auto* eval = app.add_subcommand("eval", "evaluate a teacher and/or run checkpoint");
  common(eval);
  eval->add_option("--teacher", o.teacher, "teacher checkpoint");
  eval->add_option("--checkpoint", o.checkpoint, "run checkpoint");
  auto* exp = app.add_subcommand("export-curves", "write CSV (and SVG) curves of a run record");
  common(exp);
  exp->add_option("--record", o.record, "record.json of a run")->required();
  exp->add_flag("--plots", o.plots, "also write SVG charts");
  auto* abl = app.add_subcommand("ablate", "vanilla KD vs TST over several seeds");
  common(abl);
  abl->add_option("--seeds", o.seeds, "number of seeds (from --seed upwards)");
  abl->add_option("--encoders", o.encoders, "encoder checkpoint (default <out>/encoders.ckpt)");
  abl->add_option("--teacher", o.teacher, "teacher checkpoint (default <out>/teacher.ckpt)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kConfig);
  }
  try {
    if (fit->parsed()) return cmd_fit_encoders(o, args);
    if (pre->parsed()) return cmd_pretrain(o, args);
    if (train->parsed()) return cmd_train(o, args);
    if (eval->parsed()) return cmd_eval(o, args);
    if (exp->parsed()) return cmd_export(o, args);
    return cmd_ablate(o, args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const c10::Error& e) {
    std::cerr << "error: " << e.what_without_backtrace() << "\n";
    return static_cast<int>(ExitCode::kFailure);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kFailure);
  }
}

}  // namespace tst
