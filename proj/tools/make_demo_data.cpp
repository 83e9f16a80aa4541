// Regenerates the shipped demo corpus, templates, pools and replay fixtures.
//
//   make_demo_data [ROOT]     (default: data)

#include <exception>
#include <iostream>
#include <string>

#include "demo_data.hpp"

int main(int argc, char** argv) {
  std::string root = argc > 1 ? argv[1] : "data";
  try {
    std::size_t n = augmentor::demo::write_demo_data(root);
    std::cerr << "wrote " << n << " files under " << root << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
