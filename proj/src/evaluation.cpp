#include "augmentor/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "augmentor/error.hpp"
#include "augmentor/random.hpp"

namespace augmentor {

AgreementReport metrics_from_confusion(const Confusion& c) {
  AgreementReport r;
  r.confusion = c;
  r.n = c.n();
  if (r.n == 0) throw PreconditionError("EmptyInput", "no observations");
  const double n = static_cast<double>(r.n);
  const double tp = static_cast<double>(c.tp);

  r.accuracy = static_cast<double>(c.tp + c.tn) / n;

  if (c.tp + c.fp == 0) {
    r.precision_zero_division = true;
  } else {
    r.precision = tp / static_cast<double>(c.tp + c.fp);
  }
  if (c.tp + c.fn == 0) {
    r.recall_zero_division = true;
  } else {
    r.recall = tp / static_cast<double>(c.tp + c.fn);
  }
  // F1 = 2TP / (2TP + FP + FN) avoids going through possibly-flagged ratios.
  if (2 * c.tp + c.fp + c.fn == 0) {
    r.f1_zero_division = true;
  } else {
    r.f1 = 2.0 * tp / static_cast<double>(2 * c.tp + c.fp + c.fn);
  }

  const double actual_pos = static_cast<double>(c.tp + c.fn) / n;
  const double pred_pos = static_cast<double>(c.tp + c.fp) / n;
  const double p_e = actual_pos * pred_pos + (1.0 - actual_pos) * (1.0 - pred_pos);
  if (p_e >= 1.0) {
    r.degenerate_marginals = true;
  } else {
    r.kappa = (r.accuracy - p_e) / (1.0 - p_e);
  }
  return r;
}

AgreementReport classification_metrics(std::span<const int> preds, std::span<const int> labels) {
  if (preds.size() != labels.size()) {
    throw PreconditionError("LengthMismatch", std::to_string(preds.size()) + " predictions vs " +
                                                  std::to_string(labels.size()) + " labels");
  }
  if (preds.empty()) throw PreconditionError("EmptyInput", "no predictions");
  Confusion c;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    bool p = preds[i] != 0;
    bool y = labels[i] != 0;
    if (y && p) ++c.tp;
    else if (y) ++c.fn;
    else if (p) ++c.fp;
    else ++c.tn;
  }
  return metrics_from_confusion(c);
}

namespace {

struct Scored {
  double score;
  int label;
};

// Twice the Mann-Whitney U statistic for positives, computed exactly in
// integers over groups of tied scores.
std::uint64_t doubled_u(std::vector<Scored>& items) {
  std::sort(items.begin(), items.end(),
            [](const Scored& a, const Scored& b) { return a.score < b.score; });
  std::uint64_t neg_below = 0;
  std::uint64_t twice_u = 0;
  for (std::size_t i = 0; i < items.size();) {
    std::size_t j = i;
    std::uint64_t pos = 0, neg = 0;
    while (j < items.size() && items[j].score == items[i].score) {
      (items[j].label ? pos : neg)++;
      ++j;
    }
    twice_u += 2 * pos * neg_below + pos * neg;
    neg_below += neg;
    i = j;
  }
  return twice_u;
}

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw PreconditionError("LengthMismatch", std::to_string(scores.size()) + " scores vs " +
                                                  std::to_string(labels.size()) + " labels");
  }
  for (double s : scores) {
    if (std::isnan(s)) throw PreconditionError("InvalidScore", "NaN score");
  }
  for (int y : labels) {
    if (y != 0 && y != 1) throw PreconditionError("InvalidLabel", "labels must be 0 or 1");
  }
}

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  std::vector<Scored> items(scores.size());
  std::uint64_t n_pos = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    items[i] = {scores[i], labels[i]};
    n_pos += static_cast<std::uint64_t>(labels[i]);
  }
  const std::uint64_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw PreconditionError("SingleClass", "AUC needs both classes");
  }
  return static_cast<double>(doubled_u(items)) / (2.0 * static_cast<double>(n_pos * n_neg));
}

double sorted_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw PreconditionError("EmptyInput", "quantile of empty sample");
  double pos = q * static_cast<double>(sorted.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  auto hi = std::min(lo + 1, sorted.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

EvalResult bootstrap_auc(std::span<const double> scores, std::span<const int> labels,
                         std::size_t n_resamples, double ci_level, std::uint64_t seed) {
  if (n_resamples < 1) throw PreconditionError("InvalidConfig", "n_resamples must be >= 1");
  if (!(ci_level > 0.0 && ci_level < 1.0)) {
    throw PreconditionError("InvalidConfig", "ci_level must be within (0, 1)");
  }
  EvalResult result;
  result.auc = roc_auc(scores, labels);
  result.n_resamples = n_resamples;
  result.ci_level = ci_level;
  result.seed = seed;

  std::vector<double> pos_scores, neg_scores;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    (labels[i] ? pos_scores : neg_scores).push_back(scores[i]);
  }
  const std::uint64_t n_pos = pos_scores.size();
  const std::uint64_t n_neg = neg_scores.size();

  std::vector<double> aucs(n_resamples);
  std::vector<Scored> items(scores.size());
  for (std::size_t b = 0; b < n_resamples; ++b) {
    Rng rng(derive_seed(seed, b));
    std::size_t k = 0;
    for (std::uint64_t i = 0; i < n_pos; ++i) items[k++] = {pos_scores[rng.uniform_index(n_pos)], 1};
    for (std::uint64_t i = 0; i < n_neg; ++i) items[k++] = {neg_scores[rng.uniform_index(n_neg)], 0};
    aucs[b] = static_cast<double>(doubled_u(items)) / (2.0 * static_cast<double>(n_pos * n_neg));
  }
  std::sort(aucs.begin(), aucs.end());
  const double alpha = 1.0 - ci_level;
  result.ci_low = sorted_quantile(aucs, alpha / 2.0);
  result.ci_high = sorted_quantile(aucs, 1.0 - alpha / 2.0);
  if (result.ci_low > result.auc) {
    result.ci_low = result.auc;
    result.ci_widened = true;
  }
  if (result.ci_high < result.auc) {
    result.ci_high = result.auc;
    result.ci_widened = true;
  }
  return result;
}

}  // namespace augmentor
