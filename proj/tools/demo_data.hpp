#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>

#include "augmentor/corpus.hpp"

namespace augmentor::demo {

// Mock tutoring task: label 1 responses draw words from a "student
// background" family, label 0 responses from a "task logistics" family.
// Human training samples only use the first few words of each family and
// carry label noise; validation and synthetic samples use every word.
struct DemoLayout {
  std::uint64_t seed = 20240611;
  std::size_t human_train = 51;
  std::size_t validation = 256;
  std::size_t seen_keywords = 4;       // per family, visible in human_train
  double human_noise = 0.12;
  double validation_noise = 0.03;
  std::size_t batch_size = 10;
  std::size_t main_per_label = 500;    // at kMainTemperature
  std::size_t other_per_label = 150;   // at the other temperatures
  std::size_t main_mismatches = 44;    // positive-intended samples written off-family
};

inline constexpr double kMainTemperature = 0.5;

// Builds the corpus alone (no files).
Corpus demo_corpus(const DemoLayout& layout = {});

// Writes, under root:
//   templates/{positive,negative,grading}.json
//   demo/corpus.jsonl
//   demo/fixtures/       generation replies for every temperature and
//                        grading replies for the main pool
//   demo/pools/pool-t<T>.jsonl   what `generate --fixtures` produces
// Returns the number of files written.
std::size_t write_demo_data(const std::string& root, const DemoLayout& layout = {});

}  // namespace augmentor::demo
