#include <iostream>

#include "polyenergy/cli.hpp"

int main(int argc, char** argv) {
  return polyenergy::run_cli(argc, argv, std::cout, std::cerr);
}
