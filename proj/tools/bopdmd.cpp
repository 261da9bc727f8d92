#include <iostream>

#include "bopdmd/cli.hpp"

int main(int argc, char** argv) {
  return bopdmd::cli_main(argc, argv, std::cout, std::cerr);
}
