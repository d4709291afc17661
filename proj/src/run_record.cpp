// Copyright 2026 The TST Authors
// SPDX-License-Identifier: Apache-2.0

#include "tst/run_record.hpp"

#include <fstream>
#include <sstream>

#include "tst/errors.hpp"

namespace tst {

using nlohmann::json;

json record_to_json(const RunRecord& record) {
  json epochs = json::array();
  for (const auto& e : record.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_accuracy", e.train_accuracy},
                      {"test_accuracy", e.test_accuracy},
                      {"loss_total", e.loss_total},
                      {"loss_ce", e.loss_ce},
                      {"loss_kl", e.loss_kl},
                      {"confidence", e.confidence},
                      {"confidence_original", e.confidence_original},
                      {"confidence_augmented", e.confidence_augmented},
                      {"lr", e.lr},
                      {"stage2_steps", e.stage2_steps},
                      {"magnitudes", e.magnitudes},
                      {"probabilities", e.probabilities}});
  }
  json search = json::array();
  for (const auto& s : record.search) search.push_back({s.epoch, s.step, s.loss});
  return {{"epochs", epochs}, {"search", search}};
}

RunRecord record_from_json(const json& doc) {
  RunRecord r;
  try {
    for (const auto& j : doc.at("epochs")) {
      EpochRecord e;
      e.epoch = j.at("epoch");
      e.train_accuracy = j.at("train_accuracy");
      e.test_accuracy = j.at("test_accuracy");
      e.loss_total = j.at("loss_total");
      e.loss_ce = j.at("loss_ce");
      e.loss_kl = j.at("loss_kl");
      e.confidence = j.at("confidence");
      e.confidence_original = j.at("confidence_original");
      e.confidence_augmented = j.at("confidence_augmented");
      e.lr = j.at("lr");
      e.stage2_steps = j.at("stage2_steps");
      e.magnitudes = j.at("magnitudes");
      e.probabilities = j.at("probabilities");
      r.epochs.push_back(e);
    }
    for (const auto& j : doc.at("search")) {
      r.search.push_back({j.at(0).get<std::int64_t>(), j.at(1).get<std::int64_t>(),
                          j.at(2).get<float>()});
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed run record: ") + e.what());
  }
  return r;
}

RunRecord load_record(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("missing run record '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return record_from_json(json::parse(buf.str()));
  } catch (const json::parse_error& e) {
    throw ConfigError("run record '" + path + "' is not valid JSON");
  }
}

void save_record(const RunRecord& record, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  out << record_to_json(record).dump(1) << "\n";
}

}  // namespace tst
