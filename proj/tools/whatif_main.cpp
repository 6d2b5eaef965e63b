#include <iostream>

#include "whatif/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return whatif::cli::run(args, std::cin, std::cout, std::cerr);
}
