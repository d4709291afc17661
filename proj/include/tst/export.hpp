// Copyright 2026 The TST Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "tst/run_record.hpp"

namespace tst {

/// Formats with nine significant digits (enough to round-trip a float).
std::string format_value(double value);

std::string magnitudes_csv(const RunRecord& record);
std::string probabilities_csv(const RunRecord& record);
std::string confidence_csv(const RunRecord& record);
std::string losses_csv(const RunRecord& record);
std::string accuracy_csv(const RunRecord& record);
std::string search_trace_csv(const RunRecord& record);

/// Writes magnitudes.csv, probabilities.csv, confidence.csv, losses.csv,
/// accuracy.csv and search_trace.csv, plus SVG line charts when `plots` is
/// set. Returns the written paths. Throws ContractError on an empty record
/// and Error when the directory is not writable.
std::vector<std::string> export_curves(const RunRecord& record, const std::string& out_dir,
                                       bool plots = false);

/// Minimal SVG line chart: one polyline per column after the first.
std::string svg_chart(const std::string& csv, const std::string& title);

}  // namespace tst
