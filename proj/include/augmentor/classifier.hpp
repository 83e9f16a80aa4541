#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "augmentor/corpus.hpp"
#include "augmentor/features.hpp"

namespace augmentor {

enum class Optimizer { kSgd, kAdaptiveMoments };
enum class StoppingMetric { kAccuracy, kAuc };

std::string_view to_string(Optimizer o);
std::string_view to_string(StoppingMetric m);
Optimizer parse_optimizer(std::string_view s);
StoppingMetric parse_stopping_metric(std::string_view s);

inline constexpr double kDefaultLearningRate = 0.05;
inline constexpr int kDefaultPatience = 2;
inline constexpr int kDefaultMaxEpochs = 50;

struct TrainingConfig {
  double learning_rate = kDefaultLearningRate;
  int patience = kDefaultPatience;
  int max_epochs = kDefaultMaxEpochs;
  std::uint64_t seed = 0;
  StoppingMetric stopping_metric = StoppingMetric::kAccuracy;
  Optimizer optimizer = Optimizer::kAdaptiveMoments;
  unsigned hash_bits = kDefaultHashBits;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

void validate(const TrainingConfig& cfg);

// Logistic model over hashed features.
struct LinearModel {
  unsigned bits = kDefaultHashBits;
  std::vector<double> weights;  // length 2^bits
  double bias = 0.0;
  int trained_epochs = 0;

  explicit LinearModel(unsigned hash_bits = kDefaultHashBits);
  double margin(const FeatureVector& fv) const;
  bool operator==(const LinearModel&) const = default;
};

struct Example {
  FeatureVector features;
  int label = 0;
};
using Dataset = std::vector<Example>;

Dataset make_dataset(const Pool& pool, unsigned bits);

double sigmoid(double z);
double predict_proba(const LinearModel& model, const FeatureVector& fv);
std::vector<double> predict_proba(const LinearModel& model, const Dataset& data);

// Binary cross-entropy of one example, computed stably from the margin.
double bce_loss(const LinearModel& model, const Example& ex);
double mean_loss(const LinearModel& model, const Dataset& data);

struct Gradient {
  std::vector<std::pair<std::uint32_t, double>> weights;  // nonzero coordinates only
  double bias = 0.0;
};

// d(bce_loss)/d(weights, bias) = (p - y) * (x, 1).
Gradient bce_gradient(const LinearModel& model, const Example& ex);

// Moment estimates for the adaptive optimizer. Updates are lazy: a
// coordinate's moments only change when its feature is present, while the
// bias correction uses the global step count.
struct OptimizerState {
  std::vector<double> m;
  std::vector<double> v;
  double m_bias = 0.0;
  double v_bias = 0.0;
  std::uint64_t step = 0;

  explicit OptimizerState(unsigned bits = kDefaultHashBits);
};

// One pass over `data` in an order shuffled by (cfg.seed, model.trained_epochs),
// one update per example. Throws NonFiniteLoss.
LinearModel train_epoch(LinearModel model, const Dataset& data, const TrainingConfig& cfg,
                        OptimizerState& state);
LinearModel train_epoch(LinearModel model, const Dataset& data, const TrainingConfig& cfg);

double validation_metric(const LinearModel& model, const Dataset& valid, StoppingMetric metric);

// Patience-based stopping: an epoch improves only if its metric is strictly
// greater than the best so far.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience);

  // Records the metric for the next epoch; returns true if it improved.
  bool observe(double metric);
  bool should_stop() const { return since_best_ >= patience_; }

  int epochs() const { return epochs_; }
  int best_epoch() const { return best_epoch_; }
  double best_metric() const { return best_metric_; }

 private:
  int patience_;
  int epochs_ = 0;
  int best_epoch_ = 0;
  int since_best_ = 0;
  double best_metric_ = 0.0;
};

struct SaturationTrace {
  int stop_epoch = 0;
  int best_epoch = 0;
  double best_metric = 0.0;
  std::vector<double> history;
};

// Calls run_epoch(epoch) for epoch = 1, 2, ... until patience runs out or
// max_epochs is reached. on_improve(epoch) fires whenever a new best is seen
// so the caller can snapshot its state.
SaturationTrace run_until_saturation(int patience, int max_epochs,
                                     const std::function<double(int)>& run_epoch,
                                     const std::function<void(int)>& on_improve);

struct TrainResult {
  LinearModel model;  // snapshot from the best epoch
  SaturationTrace trace;
  std::vector<double> train_losses;
};

// Trains from `model`'s current weights with fresh optimizer state.
TrainResult train_until_saturation(LinearModel model, const Dataset& train, const Dataset& valid,
                                   const TrainingConfig& cfg);

// Runs exactly `epochs` epochs and reports the validation metric of the last.
TrainResult train_fixed_epochs(LinearModel model, const Dataset& train, const Dataset& valid,
                               const TrainingConfig& cfg, int epochs);

// Checkpoint: {"format", "version", "bits", "bias", "trained_epochs",
// "weights": [[index, value], ...]} with zero weights omitted.
void save_model(const LinearModel& model, const std::string& path);
LinearModel load_model(const std::string& path);

}  // namespace augmentor
