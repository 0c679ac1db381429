#include "optrot/cli/commands.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return optrot::cli::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
