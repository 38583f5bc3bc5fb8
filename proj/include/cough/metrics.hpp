#pragma once

#include <optional>
#include <vector>

namespace cough {

// ROC points from the highest threshold (predict nothing positive) to the
// lowest. Tied scores collapse into a single threshold step.
struct RocCurve {
  std::vector<double> thresholds;  // descending; front is +inf
  std::vector<double> tpr;
  std::vector<double> fpr;
};

RocCurve roc_curve(const std::vector<double>& scores,
                   const std::vector<int>& labels);

// Trapezoidal area under the ROC. Equals the Mann-Whitney statistic
// P(s+ > s-) + 0.5 P(s+ = s-). Empty when only one class is present.
std::optional<double> auc(const std::vector<double>& scores,
                          const std::vector<int>& labels);

struct OperatingPoint {
  double threshold = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
};

// Largest threshold whose sensitivity reaches the target; the achieved
// sensitivity may exceed the target when scores are tied or discrete.
OperatingPoint sens_spec_at(const std::vector<double>& scores,
                            const std::vector<int>& labels,
                            double target_sensitivity = 0.8);

// Median with the even-count convention (mean of the two middle values).
double median(std::vector<double> values);

}  // namespace cough
