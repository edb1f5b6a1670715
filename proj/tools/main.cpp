#include <iostream>

#include "echometrics/cli.hpp"

int main(int argc, char** argv) {
  return echometrics::cli::run(argc, argv, std::cout, std::cerr);
}
