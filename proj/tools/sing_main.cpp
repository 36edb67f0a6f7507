#include <iostream>
#include <string>
#include <vector>

#include "sing/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return sing::cli::run(args, std::cout, std::cerr);
}
