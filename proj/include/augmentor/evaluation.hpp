#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace augmentor {

// 2x2 confusion counts with class 1 as the positive class.
struct Confusion {
  std::size_t tp = 0;  // actual 1, predicted 1
  std::size_t fn = 0;  // actual 1, predicted 0
  std::size_t fp = 0;  // actual 0, predicted 1
  std::size_t tn = 0;  // actual 0, predicted 0

  std::size_t n() const { return tp + fn + fp + tn; }
  bool operator==(const Confusion&) const = default;
};

// Binary agreement / classification metrics. All values are derived from
// `confusion` alone. Undefined ratios are reported as 0 with a flag set;
// kappa is empty when chance agreement is 1.
struct AgreementReport {
  Confusion confusion;
  std::size_t n = 0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::optional<double> kappa;
  bool precision_zero_division = false;
  bool recall_zero_division = false;
  bool f1_zero_division = false;
  bool degenerate_marginals = false;
};

AgreementReport metrics_from_confusion(const Confusion& c);

// Throws EmptyInput or LengthMismatch.
AgreementReport classification_metrics(std::span<const int> preds, std::span<const int> labels);

// Mann-Whitney AUC: share of (positive, negative) pairs ranked correctly,
// ties counting one half. Throws SingleClass.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct EvalResult {
  double auc = 0.5;
  double ci_low = 0.5;
  double ci_high = 0.5;
  std::size_t n_resamples = 1000;
  double ci_level = 0.95;
  std::uint64_t seed = 0;
  // Set when the percentile interval had to be widened to contain auc.
  bool ci_widened = false;
};

inline constexpr std::size_t kDefaultResamples = 1000;
inline constexpr double kDefaultCiLevel = 0.95;

// Stratified percentile bootstrap: each resample draws with replacement
// within each class, keeping class counts. Resample i uses its own stream
// derived from (seed, i).
EvalResult bootstrap_auc(std::span<const double> scores, std::span<const int> labels,
                         std::size_t n_resamples = kDefaultResamples,
                         double ci_level = kDefaultCiLevel, std::uint64_t seed = 0);

// Linear-interpolated quantile of an ascending-sorted sample.
double sorted_quantile(std::span<const double> sorted, double q);

}  // namespace augmentor
