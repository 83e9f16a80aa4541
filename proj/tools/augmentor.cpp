#include <iostream>
#include <string>
#include <vector>

#include "augmentor/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return augmentor::dispatch(args, std::cout, std::cerr);
}
