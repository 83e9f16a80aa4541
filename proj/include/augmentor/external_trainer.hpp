#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "augmentor/corpus.hpp"

namespace augmentor {

// Config block forwarded to the adapter. The defaults are the transformer
// fine-tuning settings, not the native model's.
struct AdapterTrainingConfig {
  double learning_rate = 2e-5;
  int patience = 2;
  int max_epochs = 20;
  std::uint64_t seed = 0;
  std::string stopping_metric = "accuracy";
};

nlohmann::ordered_json to_json(const AdapterTrainingConfig& cfg);

struct AdapterOptions {
  std::vector<std::string> argv;
  std::chrono::milliseconds timeout{std::chrono::hours(1)};
  AdapterTrainingConfig config;
};

// Splits a command line on whitespace, honoring single and double quotes.
std::vector<std::string> split_command_line(std::string_view cmd);

// A child process speaking line-delimited JSON on stdin/stdout.
//
//   -> {"cmd":"train","train":[{"id","text","label"}...],"valid":[...],"config":{...}}
//   <- {"status":"ok","valid_probs":[p0, p1, ...]}
//   -> {"cmd":"predict","texts":["...", ...]}
//   <- {"status":"ok","probs":[...]}
//
// Closing stdin asks the adapter to exit. Errors: AdapterCrashed (the child
// exited without replying), ProtocolError (a reply that does not match the
// schema), Timeout.
class ExternalTrainer {
 public:
  explicit ExternalTrainer(AdapterOptions options);
  ~ExternalTrainer();
  ExternalTrainer(const ExternalTrainer&) = delete;
  ExternalTrainer& operator=(const ExternalTrainer&) = delete;

  // Probabilities for `valid`, aligned by index.
  std::vector<double> train(const Pool& train, const Pool& valid);
  std::vector<double> predict(const std::vector<std::string>& texts);

  // Closes stdin and waits; returns the exit code.
  int finish();

 private:
  nlohmann::json exchange(const std::string& line, const char* probs_key, std::size_t expected);
  std::string read_line();
  void kill_child();
  int wait_child();

  AdapterOptions options_;
  int pid_ = -1;
  int fd_ = -1;
  std::string buffer_;
  std::optional<int> exit_code_;
};

// Spawns the adapter, trains, collects validation probabilities, and shuts it
// down.
std::vector<double> external_trainer_roundtrip(const AdapterOptions& options, const Pool& train,
                                               const Pool& valid);

}  // namespace augmentor
