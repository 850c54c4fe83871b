#include <iostream>

#include "oprm/io/commands.hpp"

int main(int argc, char** argv) {
  return oprm::io::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
