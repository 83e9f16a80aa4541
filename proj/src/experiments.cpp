#include "augmentor/experiments.hpp"

#include <algorithm>
#include <future>
#include <set>

#include "augmentor/error.hpp"
#include "augmentor/random.hpp"
#include "augmentor/text_util.hpp"

namespace augmentor {

using nlohmann::ordered_json;

namespace {

// Stream ids for seeds derived from ScheduleConfig::seed.
constexpr std::uint64_t kDrawStream = 1;

struct ValidationSet {
  Dataset data;
  std::vector<int> labels;
  std::map<std::string, std::vector<std::size_t>> by_phase;
};

ValidationSet prepare_validation(const Corpus& corpus, unsigned bits) {
  ValidationSet v;
  v.data = make_dataset(corpus.validation, bits);
  for (std::size_t i = 0; i < corpus.validation.size(); ++i) {
    v.labels.push_back(corpus.validation[i].label);
    if (const auto& phase = corpus.validation[i].phase) {
      v.by_phase[std::string(to_string(*phase))].push_back(i);
    }
  }
  return v;
}

CurvePoint evaluate(const LinearModel& model, const ValidationSet& valid, const EvalSettings& eval) {
  auto probs = predict_proba(model, valid.data);
  auto result = bootstrap_auc(probs, valid.labels, eval.n_resamples, eval.ci_level, eval.seed);
  CurvePoint p;
  p.auc = result.auc;
  p.ci_low = result.ci_low;
  p.ci_high = result.ci_high;
  for (const auto& [phase, idx] : valid.by_phase) {
    std::vector<double> s;
    std::vector<int> y;
    for (auto i : idx) {
      s.push_back(probs[i]);
      y.push_back(valid.labels[i]);
    }
    bool both = std::count(y.begin(), y.end(), 1) > 0 && std::count(y.begin(), y.end(), 0) > 0;
    if (both) p.phase_auc[phase] = roc_auc(s, y);
  }
  return p;
}

void require_two_classes(const Pool& validation) {
  bool pos = false, neg = false;
  for (const auto& r : validation) (r.label ? pos : neg) = true;
  if (!pos || !neg) {
    throw PreconditionError("SingleClass", "validation set needs both classes");
  }
}

double ratio(std::size_t synthetic, std::size_t human) {
  return static_cast<double>(synthetic) / static_cast<double>(synthetic + human);
}

}  // namespace

void validate(const ScheduleConfig& cfg) {
  if (cfg.increment < 1) throw PreconditionError("InvalidConfig", "increment must be >= 1");
  if (cfg.epochs_per_increment && *cfg.epochs_per_increment < 1) {
    throw PreconditionError("InvalidConfig", "epochs_per_increment must be >= 1");
  }
}

BaselineResult run_baseline(const Corpus& corpus, const TrainingConfig& cfg,
                            const EvalSettings& eval) {
  validate(cfg);
  if (corpus.human_train.empty()) {
    throw PreconditionError("EmptyInput", "human_train is empty");
  }
  require_two_classes(corpus.validation);
  auto valid = prepare_validation(corpus, cfg.hash_bits);
  auto train = make_dataset(corpus.human_train, cfg.hash_bits);
  auto result = train_until_saturation(LinearModel(cfg.hash_bits), train, valid.data, cfg);

  CurvePoint point = evaluate(result.model, valid, eval);
  BaselineResult out{std::move(result.model), std::move(point)};
  out.point.synthetic_count = 0;
  out.point.synthetic_ratio = 0.0;
  out.point.stop_epoch = result.trace.stop_epoch;
  return out;
}

AugmentationRun run_augmentation(const LinearModel& baseline, const Corpus& corpus,
                                 const Pool& pool, double temperature,
                                 const ScheduleConfig& schedule, const TrainingConfig& cfg,
                                 const EvalSettings& eval) {
  validate(schedule);
  validate(cfg);
  require_two_classes(corpus.validation);
  if (corpus.human_train.empty()) throw PreconditionError("EmptyInput", "human_train is empty");
  if (baseline.bits != cfg.hash_bits) {
    throw PreconditionError("FeatureMismatch", "baseline model uses different hash bits");
  }

  AugmentationRun run;
  run.temperature = temperature;
  run.final_model = baseline;

  std::size_t target = schedule.max_synthetic;
  if (pool.size() < target) {
    if (!schedule.truncate_short_pool) {
      throw PreconditionError("InsufficientPool", "requested " + std::to_string(target) +
                                                      ", available " +
                                                      std::to_string(pool.size()));
    }
    run.warnings.push_back("pool at temperature " + format_double(temperature) + " holds " +
                           std::to_string(pool.size()) + " samples; schedule truncated");
    target = pool.size();
  }
  if (target % schedule.increment != 0) {
    run.warnings.push_back("last block truncated to " +
                           std::to_string(target % schedule.increment) + " samples");
  }

  const std::set<std::string> validation_ids = [&] {
    std::set<std::string> s;
    for (const auto& r : corpus.validation) s.insert(r.id);
    return s;
  }();

  auto valid = prepare_validation(corpus, cfg.hash_bits);
  Dataset train = make_dataset(corpus.human_train, cfg.hash_bits);
  auto order = sample_indices(pool.size(), target, derive_seed(schedule.seed, kDrawStream));

  std::vector<std::string> drawn;
  std::size_t k = 0;
  while (k < target) {
    std::size_t next = std::min(k + schedule.increment, target);
    for (; k < next; ++k) {
      const auto& sample = pool[order[k]];
      if (validation_ids.count(sample.id)) {
        throw PreconditionError("ValidationLeak",
                                "sample " + sample.id + " is part of the validation set");
      }
      drawn.push_back(sample.id);
      train.push_back({featurize(sample.text, cfg.hash_bits), sample.label});
    }

    TrainResult result =
        schedule.epochs_per_increment
            ? train_fixed_epochs(run.final_model, train, valid.data, cfg,
                                 *schedule.epochs_per_increment)
            : train_until_saturation(run.final_model, train, valid.data, cfg);
    run.final_model = std::move(result.model);

    CurvePoint p = evaluate(run.final_model, valid, eval);
    p.temperature = temperature;
    p.synthetic_count = k;
    p.synthetic_ratio = ratio(k, corpus.human_train.size());
    p.stop_epoch = result.trace.stop_epoch;
    run.points.push_back(std::move(p));
    run.drawn_ids.push_back(drawn);
  }
  return run;
}

std::size_t CurveTable::row_count() const {
  std::size_t n = 1;
  for (const auto& c : curves) n += c.points.size();
  return n;
}

namespace {

ordered_json base_metadata(const Corpus& corpus, const ScheduleConfig& schedule,
                           const TrainingConfig& cfg, const EvalSettings& eval) {
  ordered_json m;
  m["human_train_size"] = corpus.human_train.size();
  m["validation_size"] = corpus.validation.size();
  m["human_train_hash"] = pool_hash(corpus.human_train);
  m["validation_hash"] = pool_hash(corpus.validation);
  m["schedule"] = to_json(schedule);
  m["training"] = to_json(cfg);
  m["evaluation"] = to_json(eval);
  m["notes"] = ordered_json::array(
      {"synthetic_ratio is exact: synthetic_count / (synthetic_count + human_train_size)",
       "the reference share of about 0.85 at 250 synthetic samples is rounded; with 51 human "
       "samples the exact value is 250/301 = 0.8306"});
  // Published figures for the original tutor-response study; they depend on
  // data and a live model that are not available offline.
  m["reference_results"] = {
      {"baseline_auc", 0.744},
      {"best_auc", 0.774},
      {"best_temperature", 0.5},
      {"best_synthetic_count", 200},
      {"filtered_best_auc", 0.766},
      {"filtered_retained", 956},
      {"filtered_pool_size", 1000},
  };
  return m;
}

}  // namespace

CurveTable run_experiment_2(const Corpus& corpus, const std::map<double, Pool>& pools,
                            const ScheduleConfig& schedule, const TrainingConfig& cfg,
                            const EvalSettings& eval) {
  validate(schedule);
  if (schedule.temperatures.empty()) {
    throw PreconditionError("InvalidConfig", "no temperatures to sweep");
  }
  std::vector<double> temps = schedule.temperatures;
  std::sort(temps.begin(), temps.end());
  temps.erase(std::unique(temps.begin(), temps.end()), temps.end());
  for (double t : temps) {
    if (!pools.count(t)) {
      throw PreconditionError("MissingPool", "no pool for temperature " + format_double(t));
    }
  }

  CurveTable table;
  BaselineResult baseline = run_baseline(corpus, cfg, eval);
  table.baseline = baseline.point;

  // Branches share only immutable inputs and the baseline snapshot.
  std::vector<std::future<AugmentationRun>> branches;
  for (double t : temps) {
    branches.push_back(std::async(std::launch::async, [&, t] {
      return run_augmentation(baseline.model, corpus, pools.at(t), t, schedule, cfg, eval);
    }));
  }
  for (auto& b : branches) table.curves.push_back(b.get());

  table.metadata = base_metadata(corpus, schedule, cfg, eval);
  ordered_json hashes = ordered_json::object();
  for (double t : temps) hashes[format_double(t)] = pool_hash(pools.at(t));
  table.metadata["pool_hashes"] = hashes;
  ordered_json warnings = ordered_json::array();
  for (const auto& c : table.curves) {
    for (const auto& w : c.warnings) warnings.push_back(w);
  }
  table.metadata["warnings"] = warnings;
  return table;
}

CurveTable run_experiment_3(const Corpus& corpus, const Pool& filtered_pool, double temperature,
                            std::size_t unfiltered_size, const ScheduleConfig& schedule,
                            const TrainingConfig& cfg, const EvalSettings& eval) {
  ScheduleConfig sched = schedule;
  sched.temperatures = {temperature};
  sched.use_filtered_pool = true;
  sched.truncate_short_pool = true;
  CurveTable table = run_experiment_2(corpus, {{temperature, filtered_pool}}, sched, cfg, eval);
  if (unfiltered_size > 0) {
    table.retention = static_cast<double>(filtered_pool.size()) /
                      static_cast<double>(unfiltered_size);
    table.metadata["retention"] = *table.retention;
    table.metadata["retained"] = filtered_pool.size();
    table.metadata["unfiltered_pool_size"] = unfiltered_size;
  }
  return table;
}

ordered_json to_json(const ScheduleConfig& cfg) {
  ordered_json j;
  j["increment"] = cfg.increment;
  j["max_synthetic"] = cfg.max_synthetic;
  j["temperatures"] = cfg.temperatures;
  j["use_filtered_pool"] = cfg.use_filtered_pool;
  j["seed"] = cfg.seed;
  j["epochs_per_increment"] =
      cfg.epochs_per_increment ? ordered_json(*cfg.epochs_per_increment) : ordered_json(nullptr);
  j["truncate_short_pool"] = cfg.truncate_short_pool;
  return j;
}

ordered_json to_json(const TrainingConfig& cfg) {
  ordered_json j;
  j["learning_rate"] = cfg.learning_rate;
  j["patience"] = cfg.patience;
  j["max_epochs"] = cfg.max_epochs;
  j["seed"] = cfg.seed;
  j["stopping_metric"] = std::string(to_string(cfg.stopping_metric));
  j["optimizer"] = std::string(to_string(cfg.optimizer));
  j["hash_bits"] = cfg.hash_bits;
  return j;
}

ordered_json to_json(const EvalSettings& cfg) {
  ordered_json j;
  j["n_resamples"] = cfg.n_resamples;
  j["ci_level"] = cfg.ci_level;
  j["seed"] = cfg.seed;
  return j;
}

}  // namespace augmentor
