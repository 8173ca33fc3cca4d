#include <exception>
#include <iostream>

#include "dpmreg/cli.hpp"

int main(int argc, char** argv) {
  try {
    return dpmreg::run_cli(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << "\n";
    return 1;
  }
}
