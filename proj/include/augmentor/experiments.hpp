#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "augmentor/classifier.hpp"
#include "augmentor/corpus.hpp"
#include "augmentor/evaluation.hpp"

namespace augmentor {

struct ScheduleConfig {
  std::size_t increment = 25;
  std::size_t max_synthetic = 250;
  std::vector<double> temperatures = {0.3, 0.5, 0.7, 1.0};
  bool use_filtered_pool = false;
  std::uint64_t seed = 7;
  // When set, each increment trains a fixed number of epochs instead of
  // re-running the patience loop.
  std::optional<int> epochs_per_increment;
  // When the pool is smaller than max_synthetic, stop at the pool size (with
  // a warning) instead of failing.
  bool truncate_short_pool = false;
};

void validate(const ScheduleConfig& cfg);

struct EvalSettings {
  std::size_t n_resamples = kDefaultResamples;
  double ci_level = kDefaultCiLevel;
  std::uint64_t seed = 0;
};

struct CurvePoint {
  std::optional<double> temperature;  // empty for the baseline row
  std::size_t synthetic_count = 0;
  double synthetic_ratio = 0.0;  // synthetic_count / (synthetic_count + |human_train|)
  double auc = 0.5;
  double ci_low = 0.5;
  double ci_high = 0.5;
  int stop_epoch = 0;
  std::map<std::string, double> phase_auc;  // per validation phase, when computable
};

struct BaselineResult {
  LinearModel model;
  CurvePoint point;
};

// Trains on human data only until the stopping rule fires.
BaselineResult run_baseline(const Corpus& corpus, const TrainingConfig& cfg,
                            const EvalSettings& eval = {});

struct AugmentationRun {
  double temperature = 0.0;
  std::vector<CurvePoint> points;
  // Synthetic ids used at each increment, cumulative.
  std::vector<std::vector<std::string>> drawn_ids;
  std::vector<std::string> warnings;
  LinearModel final_model;
};

// Adds synthetic samples in blocks of schedule.increment drawn from one
// seed-determined shuffle of `pool`, continuing training from `baseline`
// after each block and evaluating on the validation set.
AugmentationRun run_augmentation(const LinearModel& baseline, const Corpus& corpus,
                                 const Pool& pool, double temperature,
                                 const ScheduleConfig& schedule, const TrainingConfig& cfg,
                                 const EvalSettings& eval = {});

struct CurveTable {
  CurvePoint baseline;
  std::vector<AugmentationRun> curves;  // ascending temperature
  std::optional<double> retention;      // filtered-pool runs only
  nlohmann::ordered_json metadata = nlohmann::ordered_json::object();

  std::size_t row_count() const;
};

// One baseline, then an augmentation run per temperature from that baseline.
// Throws MissingPool.
CurveTable run_experiment_2(const Corpus& corpus, const std::map<double, Pool>& pools,
                            const ScheduleConfig& schedule, const TrainingConfig& cfg,
                            const EvalSettings& eval = {});

// Same protocol on a consistency-filtered pool; records retention.
CurveTable run_experiment_3(const Corpus& corpus, const Pool& filtered_pool, double temperature,
                            std::size_t unfiltered_size, const ScheduleConfig& schedule,
                            const TrainingConfig& cfg, const EvalSettings& eval = {});

enum class ReportFormat { kCsv, kJson };

inline constexpr const char* kReportCsvHeader =
    "temperature,synthetic_count,synthetic_ratio,auc,ci_low,ci_high,stop_epoch";

std::string render_csv(const CurveTable& table);
std::string render_json(const CurveTable& table);

// CSV writes the table to `path` and the metadata block to
// "<path>.meta.json"; JSON embeds both. Returns the paths written.
std::vector<std::string> emit_report(const CurveTable& table, ReportFormat format,
                                     const std::string& path);

CurveTable load_report_json(const std::string& path);

nlohmann::ordered_json to_json(const ScheduleConfig& cfg);
nlohmann::ordered_json to_json(const TrainingConfig& cfg);
nlohmann::ordered_json to_json(const EvalSettings& cfg);

}  // namespace augmentor
