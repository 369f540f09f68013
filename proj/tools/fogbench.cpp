#include <iostream>

#include "fogbench/cli.hpp"

int main(int argc, char** argv) {
  return fogbench::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
