#include <iostream>

#include "dercoord/cli.hpp"

int main(int argc, char** argv) {
  return dercoord::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
}
