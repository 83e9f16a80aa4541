#include "augmentor/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "augmentor/error.hpp"
#include "augmentor/evaluation.hpp"
#include "augmentor/random.hpp"
#include "augmentor/text_util.hpp"

namespace augmentor {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Optimizer o) {
  return o == Optimizer::kSgd ? "sgd" : "adaptive_moments";
}

std::string_view to_string(StoppingMetric m) {
  return m == StoppingMetric::kAccuracy ? "accuracy" : "auc";
}

Optimizer parse_optimizer(std::string_view s) {
  if (s == "sgd") return Optimizer::kSgd;
  if (s == "adaptive_moments" || s == "adam") return Optimizer::kAdaptiveMoments;
  throw PreconditionError("InvalidConfig", "unknown optimizer '" + std::string(s) + "'");
}

StoppingMetric parse_stopping_metric(std::string_view s) {
  if (s == "accuracy") return StoppingMetric::kAccuracy;
  if (s == "auc") return StoppingMetric::kAuc;
  throw PreconditionError("InvalidConfig", "unknown stopping metric '" + std::string(s) + "'");
}

void validate(const TrainingConfig& cfg) {
  if (!std::isfinite(cfg.learning_rate) || cfg.learning_rate <= 0.0) {
    throw PreconditionError("InvalidConfig", "learning_rate must be finite and > 0");
  }
  if (cfg.patience < 1) throw PreconditionError("InvalidConfig", "patience must be >= 1");
  if (cfg.max_epochs < 1) throw PreconditionError("InvalidConfig", "max_epochs must be >= 1");
  if (cfg.hash_bits < 1 || cfg.hash_bits > 30) {
    throw PreconditionError("InvalidConfig", "hash_bits must be in [1, 30]");
  }
}

LinearModel::LinearModel(unsigned hash_bits)
    : bits(hash_bits), weights(std::size_t{1} << hash_bits, 0.0) {}

double LinearModel::margin(const FeatureVector& fv) const {
  if (fv.bits != bits) {
    throw PreconditionError("FeatureMismatch", "feature bits " + std::to_string(fv.bits) +
                                                   " vs model bits " + std::to_string(bits));
  }
  double z = bias;
  for (auto [idx, count] : fv.entries) z += weights[idx] * static_cast<double>(count);
  return z;
}

Dataset make_dataset(const Pool& pool, unsigned bits) {
  Dataset out;
  out.reserve(pool.size());
  for (const auto& r : pool) out.push_back({featurize(r.text, bits), r.label});
  return out;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

double predict_proba(const LinearModel& model, const FeatureVector& fv) {
  return sigmoid(model.margin(fv));
}

std::vector<double> predict_proba(const LinearModel& model, const Dataset& data) {
  std::vector<double> out;
  out.reserve(data.size());
  for (const auto& ex : data) out.push_back(predict_proba(model, ex.features));
  return out;
}

double bce_loss(const LinearModel& model, const Example& ex) {
  // log(1 + e^z) - y z == softplus(s) with s = z for y=0, -z for y=1. Computing it as one
  // softplus keeps small losses accurate instead of cancelling two large terms.
  double z = model.margin(ex.features);
  double s = ex.label == 1 ? -z : z;
  return std::max(s, 0.0) + std::log1p(std::exp(-std::abs(s)));
}

double mean_loss(const LinearModel& model, const Dataset& data) {
  if (data.empty()) return 0.0;
  double total = 0.0;
  for (const auto& ex : data) total += bce_loss(model, ex);
  return total / static_cast<double>(data.size());
}

Gradient bce_gradient(const LinearModel& model, const Example& ex) {
  double residual = predict_proba(model, ex.features) - ex.label;
  Gradient g;
  g.bias = residual;
  g.weights.reserve(ex.features.entries.size());
  for (auto [idx, count] : ex.features.entries) {
    g.weights.emplace_back(idx, residual * static_cast<double>(count));
  }
  return g;
}

OptimizerState::OptimizerState(unsigned bits)
    : m(std::size_t{1} << bits, 0.0), v(std::size_t{1} << bits, 0.0) {}

LinearModel train_epoch(LinearModel model, const Dataset& data, const TrainingConfig& cfg,
                        OptimizerState& state) {
  validate(cfg);
  if (data.empty()) throw PreconditionError("EmptyInput", "training data is empty");
  if (state.m.size() != model.weights.size()) state = OptimizerState(model.bits);

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(model.trained_epochs)));
  rng.shuffle(order);

  const double lr = cfg.learning_rate;
  double loss_sum = 0.0;
  for (std::size_t i : order) {
    const Example& ex = data[i];
    loss_sum += bce_loss(model, ex);
    Gradient g = bce_gradient(model, ex);

    if (cfg.optimizer == Optimizer::kSgd) {
      for (auto [idx, gj] : g.weights) model.weights[idx] -= lr * gj;
      model.bias -= lr * g.bias;
      continue;
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    auto adam = [&](double& w, double& m, double& v, double grad) {
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad * grad;
      w -= lr * (m / c1) / (std::sqrt(v / c2) + cfg.epsilon);
    };
    for (auto [idx, gj] : g.weights) adam(model.weights[idx], state.m[idx], state.v[idx], gj);
    adam(model.bias, state.m_bias, state.v_bias, g.bias);
  }

  bool finite = std::isfinite(loss_sum) && std::isfinite(model.bias);
  for (std::size_t k = 0; finite && k < model.weights.size(); ++k) {
    finite = std::isfinite(model.weights[k]);
  }
  if (!finite) {
    throw PreconditionError("NonFiniteLoss", "epoch " + std::to_string(model.trained_epochs + 1) +
                                                 " diverged; lower the learning rate");
  }
  ++model.trained_epochs;
  return model;
}

LinearModel train_epoch(LinearModel model, const Dataset& data, const TrainingConfig& cfg) {
  OptimizerState state(model.bits);
  return train_epoch(std::move(model), data, cfg, state);
}

double validation_metric(const LinearModel& model, const Dataset& valid, StoppingMetric metric) {
  if (valid.empty()) throw PreconditionError("EmptyInput", "validation data is empty");
  auto probs = predict_proba(model, valid);
  std::vector<int> labels;
  labels.reserve(valid.size());
  for (const auto& ex : valid) labels.push_back(ex.label);
  if (metric == StoppingMetric::kAuc) return roc_auc(probs, labels);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    correct += static_cast<std::size_t>((probs[i] >= 0.5 ? 1 : 0) == labels[i]);
  }
  return static_cast<double>(correct) / static_cast<double>(valid.size());
}

EarlyStopping::EarlyStopping(int patience) : patience_(patience) {
  if (patience < 1) throw PreconditionError("InvalidConfig", "patience must be >= 1");
}

bool EarlyStopping::observe(double metric) {
  ++epochs_;
  if (epochs_ == 1 || metric > best_metric_) {
    best_metric_ = metric;
    best_epoch_ = epochs_;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

SaturationTrace run_until_saturation(int patience, int max_epochs,
                                     const std::function<double(int)>& run_epoch,
                                     const std::function<void(int)>& on_improve) {
  if (max_epochs < 1) throw PreconditionError("InvalidConfig", "max_epochs must be >= 1");
  EarlyStopping stopper(patience);
  SaturationTrace trace;
  for (int epoch = 1; epoch <= max_epochs; ++epoch) {
    double metric = run_epoch(epoch);
    trace.history.push_back(metric);
    if (stopper.observe(metric)) on_improve(epoch);
    if (stopper.should_stop()) break;
  }
  trace.stop_epoch = stopper.epochs();
  trace.best_epoch = stopper.best_epoch();
  trace.best_metric = stopper.best_metric();
  return trace;
}

TrainResult train_until_saturation(LinearModel model, const Dataset& train, const Dataset& valid,
                                   const TrainingConfig& cfg) {
  validate(cfg);
  if (valid.empty()) throw PreconditionError("EmptyInput", "validation data is empty");
  OptimizerState state(model.bits);
  TrainResult result{model, {}, {}};
  auto trace = run_until_saturation(
      cfg.patience, cfg.max_epochs,
      [&](int) {
        model = train_epoch(std::move(model), train, cfg, state);
        result.train_losses.push_back(mean_loss(model, train));
        return validation_metric(model, valid, cfg.stopping_metric);
      },
      [&](int) { result.model = model; });
  result.trace = std::move(trace);
  return result;
}

TrainResult train_fixed_epochs(LinearModel model, const Dataset& train, const Dataset& valid,
                               const TrainingConfig& cfg, int epochs) {
  validate(cfg);
  if (epochs < 1) throw PreconditionError("InvalidConfig", "epochs must be >= 1");
  OptimizerState state(model.bits);
  TrainResult result{model, {}, {}};
  for (int e = 1; e <= epochs; ++e) {
    model = train_epoch(std::move(model), train, cfg, state);
    result.train_losses.push_back(mean_loss(model, train));
    result.trace.history.push_back(validation_metric(model, valid, cfg.stopping_metric));
  }
  result.model = std::move(model);
  result.trace.stop_epoch = epochs;
  result.trace.best_epoch = epochs;
  result.trace.best_metric = result.trace.history.back();
  return result;
}

void save_model(const LinearModel& model, const std::string& path) {
  ordered_json j;
  j["format"] = "augmentor-linear-model";
  j["version"] = 1;
  j["bits"] = model.bits;
  j["bias"] = model.bias;
  j["trained_epochs"] = model.trained_epochs;
  j["weights"] = ordered_json::array();
  for (std::size_t i = 0; i < model.weights.size(); ++i) {
    if (model.weights[i] != 0.0) j["weights"].push_back({i, model.weights[i]});
  }
  write_file(path, j.dump() + "\n");
}

LinearModel load_model(const std::string& path) {
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || j.value("format", "") != "augmentor-linear-model") {
    throw PreconditionError("MalformedModel", path + " is not a model checkpoint");
  }
  if (j.value("version", 0) != 1) {
    throw PreconditionError("MalformedModel", "unsupported checkpoint version");
  }
  try {
    LinearModel model(j.at("bits").get<unsigned>());
    model.bias = j.at("bias").get<double>();
    model.trained_epochs = j.at("trained_epochs").get<int>();
    for (const auto& w : j.at("weights")) {
      auto idx = w.at(0).get<std::size_t>();
      if (idx >= model.weights.size()) {
        throw PreconditionError("MalformedModel", "weight index out of range");
      }
      model.weights[idx] = w.at(1).get<double>();
    }
    return model;
  } catch (const json::exception& e) {
    throw PreconditionError("MalformedModel", e.what());
  }
}

}  // namespace augmentor
