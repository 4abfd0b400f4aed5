#include <iostream>

#include "rankphase/cli.hpp"

int main(int argc, char** argv) {
  return rankphase::run_cli(argc, argv, std::cout, std::cerr);
}
