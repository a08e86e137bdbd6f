#include <iostream>
#include <string>
#include <vector>

#include "llmlint/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return llmlint::run_cli(args, std::cout, std::cerr);
}
