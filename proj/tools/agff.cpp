// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "agff/cli.hpp"

int main(int argc, char** argv) {
  return agff::cli_dispatch({argv + 1, argv + argc}, std::cout, std::cerr);
}
