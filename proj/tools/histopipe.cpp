#include <iostream>

#include "histo/cli/cli.hpp"

int main(int argc, char** argv) {
  return histo::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
