// Copyright 2026 The TST Authors
// SPDX-License-Identifier: Apache-2.0

#include <string>
#include <vector>

#include "tst/cli.hpp"

int main(int argc, char** argv) {
  return tst::run_command(std::vector<std::string>(argv, argv + argc));
}
