#include <iostream>

#include "blimp/cli.hpp"

int main(int argc, char** argv) {
  return blimp::cli::run(argc, argv, blimp::cli::process_env(), std::cout, std::cerr);
}
