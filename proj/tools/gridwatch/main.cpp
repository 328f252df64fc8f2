// SPDX-License-Identifier: Apache-2.0
#include "gridwatch/cli/app.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return gridwatch::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
