#include <iostream>

#include "radsprl/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return radsprl::run_cli(args, std::cout, std::cerr);
}
