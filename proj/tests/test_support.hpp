#pragma once

#include <stdlib.h>

#include <filesystem>
#include <string>

#include <doctest.h>

#include "augmentor/error.hpp"

namespace test_support {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string pattern = (std::filesystem::temp_directory_path() / "augmentor-XXXXXX").string();
    path_ = ::mkdtemp(pattern.data());
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string source_path(const std::string& rel) {
  return (std::filesystem::path(AUGMENTOR_SOURCE_DIR) / rel).string();
}

// Runs f and returns the kind of the augmentor::Error it throws ("" if none).
template <class F>
std::string error_kind(F&& f) {
  try {
    f();
  } catch (const augmentor::Error& e) {
    return e.kind();
  }
  return "";
}

}  // namespace test_support
