// Copyright 2026 The TST Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "tst/config.hpp"
#include "tst/errors.hpp"

namespace tst {
namespace {

std::string config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(Config, EmptyDocumentYieldsDefaults) {
  for (const char* text : {"", "  \n", "{}"}) {
    auto c = parse_config(text);
    EXPECT_EQ(c.train.n_augment, 4);
    EXPECT_DOUBLE_EQ(c.train.tau_l, 0.05);
    EXPECT_DOUBLE_EQ(c.train.weights.tau, 4.0);
    EXPECT_DOUBLE_EQ(c.train.weights.w_ce, 1.0);
    EXPECT_DOUBLE_EQ(c.train.weights.w_kl, 1.0);
    EXPECT_DOUBLE_EQ(c.train.weights.alpha, 1.0);
    EXPECT_DOUBLE_EQ(c.train.weights.beta, 1.0);
    EXPECT_EQ(c.mode, EncodeMode::kClassification);
    EXPECT_EQ(c.schema_version, kSchemaVersion);
    EXPECT_EQ(c, ExperimentConfig{});
  }
}

TEST(Config, OverridesAreApplied) {
  auto c = parse_config(R"({"mode": "detection", "seed": 9,
      "train": {"N_A": 6, "tau": 2.5, "schedule": [1, 3], "lr_milestones": [0.5]},
      "student": {"family": "mlp", "width": 0.25}})");
  EXPECT_EQ(c.mode, EncodeMode::kDetection);
  EXPECT_EQ(c.seed, 9U);
  EXPECT_EQ(c.train.n_augment, 6);
  EXPECT_DOUBLE_EQ(c.train.weights.tau, 2.5);
  EXPECT_EQ(c.train.resolved_schedule(), (std::vector<std::int64_t>{1, 3}));
  EXPECT_EQ(c.train.lr_milestones, (std::vector<double>{0.5}));
  EXPECT_EQ(c.student.family, ModelFamily::kMlp);
  EXPECT_EQ(c.student_spec().width, 0.25);
}

TEST(Config, DefaultScheduleUsesEighthsOfTheRun) {
  TrainConfig t;
  t.epochs = 8;
  EXPECT_EQ(t.resolved_schedule(), (std::vector<std::int64_t>{1, 3}));
  t.epochs = 24;
  EXPECT_EQ(t.resolved_schedule(), (std::vector<std::int64_t>{3, 9}));
  t.epochs = 12;
  EXPECT_EQ(t.resolved_schedule(), (std::vector<std::int64_t>{2, 5}));
  t.schedule = std::vector<std::int64_t>{};
  EXPECT_TRUE(t.resolved_schedule().empty());
}

TEST(Config, RangeErrorsNameTheKey) {
  EXPECT_NE(config_error(R"({"train": {"N_A": 0}})").find("N_A"), std::string::npos);
  EXPECT_NE(config_error(R"({"train": {"N_A": 15}})").find("N_A"), std::string::npos);
  EXPECT_NE(config_error(R"({"train": {"tau_l": 0}})").find("train.tau_l"), std::string::npos);
  EXPECT_NE(config_error(R"({"dataset": {"fraction": 1.5}})").find("dataset.fraction"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"train": {"schedule": [0]}})").find("train.schedule"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"train": {"tau": -1}})").find("tau"), std::string::npos);
  EXPECT_NE(config_error(R"({"schema_version": 2})").find("schema_version"), std::string::npos);
}

TEST(Config, UnknownKeysAndBadValuesAreRejected) {
  EXPECT_NE(config_error(R"({"train": {"n_agment": 3}})").find("train.n_agment"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"extra": 1})").find("extra"), std::string::npos);
  EXPECT_FALSE(config_error(R"({"mode": "segmentation"})").empty());
  EXPECT_FALSE(config_error(R"({"teacher": {"family": "vit"}})").empty());
  EXPECT_FALSE(config_error(R"({"train": {"epochs": "ten"}})").empty());
  EXPECT_FALSE(config_error("{not json").empty());
  EXPECT_FALSE(config_error("[1, 2]").empty());
}

TEST(Config, TeacherMustNotBeSmallerThanStudent) {
  EXPECT_FALSE(
      config_error(R"({"teacher": {"family": "tiny-cnn"}, "student": {"family": "mid-cnn"}})")
          .empty());
}

TEST(Config, JsonRoundTripIsStable) {
  auto c = parse_config(R"({"seed": 3, "train": {"schedule": [2], "diversity": false}})");
  auto text = config_to_json(c).dump(2);
  auto again = parse_config(text);
  EXPECT_EQ(again, c);
  EXPECT_EQ(config_to_json(again).dump(2), text);
  EXPECT_EQ(config_hash(again), config_hash(c));
  c.train.n_augment = 5;
  EXPECT_NE(config_hash(again), config_hash(c));
}

TEST(Config, UnsetScheduleSerializesAsNull) {
  auto j = config_to_json(ExperimentConfig{});
  EXPECT_TRUE(j["train"]["schedule"].is_null());
  EXPECT_EQ(j["train"]["N_A"], 4);
  EXPECT_FALSE(parse_config(j.dump()).train.schedule.has_value());
}

TEST(Config, LoadFromFile) {
  const auto path = std::filesystem::temp_directory_path() / "tst_config_test.json";
  std::ofstream(path) << R"({"train": {"epochs": 3}})";
  EXPECT_EQ(load_config(path.string()).train.epochs, 3);
  std::filesystem::remove(path);
  EXPECT_THROW(load_config(path.string()), ConfigError);
}

TEST(Config, WarnsWhenSearchDominatesTraining) {
  ExperimentConfig c;
  EXPECT_TRUE(c.warnings().empty());
  c.train.n_encoder = 100;
  ASSERT_EQ(c.warnings().size(), 1U);
  EXPECT_NE(c.warnings()[0].find("n_encoder"), std::string::npos);
  c.train.stage2_full_epoch = true;
  EXPECT_TRUE(c.warnings().empty());
}

TEST(Config, Hex64Formatting) {
  EXPECT_EQ(hex64(0), "0000000000000000");
  EXPECT_EQ(hex64(0xDEADBEEFULL), "00000000deadbeef");
}

}  // namespace
}  // namespace tst
