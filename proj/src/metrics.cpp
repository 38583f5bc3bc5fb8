#include "cough/metrics.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace cough {
namespace {

void check_inputs(const std::vector<double>& scores,
                  const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("metrics: score/label size mismatch");
  if (scores.empty()) throw std::invalid_argument("metrics: empty input");
}

}  // namespace

RocCurve roc_curve(const std::vector<double>& scores,
                   const std::vector<int>& labels) {
  check_inputs(scores, labels);
  const double n_pos = static_cast<double>(
      std::count(labels.begin(), labels.end(), 1));
  const double n_neg = static_cast<double>(labels.size()) - n_pos;

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&scores](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  RocCurve roc;
  roc.thresholds.push_back(std::numeric_limits<double>::infinity());
  roc.tpr.push_back(0.0);
  roc.fpr.push_back(0.0);

  double tp = 0.0, fp = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    // Group tied scores into a single threshold step.
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      if (labels[order[i]] == 1)
        ++tp;
      else
        ++fp;
      ++i;
    }
    roc.thresholds.push_back(s);
    roc.tpr.push_back(n_pos > 0 ? tp / n_pos : 0.0);
    roc.fpr.push_back(n_neg > 0 ? fp / n_neg : 0.0);
  }
  return roc;
}

std::optional<double> auc(const std::vector<double>& scores,
                          const std::vector<int>& labels) {
  check_inputs(scores, labels);
  const auto n_pos = std::count(labels.begin(), labels.end(), 1);
  const auto n_neg = static_cast<long>(labels.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;

  const RocCurve roc = roc_curve(scores, labels);
  double area = 0.0;
  for (std::size_t i = 1; i < roc.tpr.size(); ++i)
    area += (roc.fpr[i] - roc.fpr[i - 1]) * (roc.tpr[i] + roc.tpr[i - 1]) / 2.0;
  return area;
}

OperatingPoint sens_spec_at(const std::vector<double>& scores,
                            const std::vector<int>& labels,
                            double target_sensitivity) {
  check_inputs(scores, labels);
  if (std::count(labels.begin(), labels.end(), 1) == 0)
    throw std::invalid_argument("sens_spec_at: no positives");

  const RocCurve roc = roc_curve(scores, labels);
  // Thresholds descend, sensitivity rises; the first point at or above the
  // target uses the largest admissible threshold.
  for (std::size_t i = 1; i < roc.thresholds.size(); ++i) {
    if (roc.tpr[i] >= target_sensitivity) {
      return {roc.thresholds[i], roc.tpr[i], 1.0 - roc.fpr[i]};
    }
  }
  // Unreachable: sensitivity is 1 at the lowest threshold.
  return {roc.thresholds.back(), roc.tpr.back(), 1.0 - roc.fpr.back()};
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median: empty input");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

}  // namespace cough
