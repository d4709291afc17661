// Copyright 2026 The TST Authors
// SPDX-License-Identifier: Apache-2.0

#include "tst/export.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "tst/errors.hpp"

namespace tst {
namespace {

template <typename Row>
std::string table(const std::vector<std::string>& header, const RunRecord& record, Row row) {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
  out += "\n";
  for (const auto& e : record.epochs) {
    out += std::to_string(e.epoch);
    for (double v : row(e)) out += "," + format_value(v);
    out += "\n";
  }
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

}  // namespace

std::string format_value(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

std::string magnitudes_csv(const RunRecord& record) {
  std::vector<std::string> header{"epoch"};
  for (int i = 0; i < kNumLearnable; ++i) header.emplace_back(name(policy_at(i)));
  return table(header, record, [](const EpochRecord& e) {
    return std::vector<double>(e.magnitudes.begin(), e.magnitudes.end());
  });
}

std::string probabilities_csv(const RunRecord& record) {
  std::vector<std::string> header{"epoch"};
  for (auto p : kAllPolicies) header.emplace_back(name(p));
  return table(header, record, [](const EpochRecord& e) {
    return std::vector<double>(e.probabilities.begin(), e.probabilities.end());
  });
}

std::string confidence_csv(const RunRecord& record) {
  return table({"epoch", "all", "original", "augmented"}, record, [](const EpochRecord& e) {
    return std::vector<double>{e.confidence, e.confidence_original, e.confidence_augmented};
  });
}

std::string losses_csv(const RunRecord& record) {
  return table({"epoch", "total", "ce", "kl"}, record, [](const EpochRecord& e) {
    return std::vector<double>{e.loss_total, e.loss_ce, e.loss_kl};
  });
}

std::string accuracy_csv(const RunRecord& record) {
  return table({"epoch", "train", "test", "lr", "search_steps"}, record,
               [](const EpochRecord& e) {
                 return std::vector<double>{e.train_accuracy, e.test_accuracy, e.lr,
                                            static_cast<double>(e.stage2_steps)};
               });
}

std::string search_trace_csv(const RunRecord& record) {
  std::string out = "epoch,step,loss\n";
  for (const auto& s : record.search) {
    out += std::to_string(s.epoch) + "," + std::to_string(s.step) + "," + format_value(s.loss) +
           "\n";
  }
  return out;
}

std::vector<std::string> export_curves(const RunRecord& record, const std::string& out_dir,
                                       bool plots) {
  if (record.epochs.empty()) throw ContractError("cannot export an empty run record");
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create '" + out_dir + "': " + ec.message());
  const std::vector<std::pair<std::string, std::string>> files = {
      {"magnitudes", magnitudes_csv(record)},   {"probabilities", probabilities_csv(record)},
      {"confidence", confidence_csv(record)},   {"losses", losses_csv(record)},
      {"accuracy", accuracy_csv(record)},       {"search_trace", search_trace_csv(record)}};
  std::vector<std::string> written;
  for (const auto& [stem, text] : files) {
    const auto path = fs::path(out_dir) / (stem + ".csv");
    write_file(path, text);
    written.push_back(path.string());
    if (plots && stem != "search_trace") {
      const auto svg = fs::path(out_dir) / (stem + ".svg");
      write_file(svg, svg_chart(text, stem));
      written.push_back(svg.string());
    }
  }
  return written;
}

std::string svg_chart(const std::string& csv, const std::string& title) {
  std::stringstream in(csv);
  std::string line;
  std::getline(in, line);
  const auto header = split(line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    for (const auto& cell : split(line)) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  constexpr double kW = 640, kH = 360, kPad = 40;
  double x0 = std::numeric_limits<double>::max(), x1 = std::numeric_limits<double>::lowest();
  double y0 = x0, y1 = x1;
  for (const auto& r : rows) {
    x0 = std::min(x0, r[0]);
    x1 = std::max(x1, r[0]);
    for (std::size_t c = 1; c < r.size(); ++c) {
      y0 = std::min(y0, r[c]);
      y1 = std::max(y1, r[c]);
    }
  }
  if (!(x1 > x0)) x1 = x0 + 1;
  if (!(y1 > y0)) y1 = y0 + 1;
  auto px = [&](double x) { return kPad + (x - x0) / (x1 - x0) * (kW - 2 * kPad); };
  auto py = [&](double y) { return kH - kPad - (y - y0) / (y1 - y0) * (kH - 2 * kPad); };
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\">\n<text x=\"" << kPad << "\" y=\"20\" font-size=\"14\">" << title << " ["
      << format_value(y0) << ", " << format_value(y1) << "]</text>\n";
  for (std::size_t c = 1; c < header.size(); ++c) {
    const int hue = static_cast<int>(360 * (c - 1) / std::max<std::size_t>(1, header.size() - 1));
    out << "<polyline fill=\"none\" stroke=\"hsl(" << hue << ",70%,45%)\" points=\"";
    for (const auto& r : rows) out << px(r[0]) << "," << py(r[c]) << " ";
    out << "\"><title>" << header[c] << "</title></polyline>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace tst
