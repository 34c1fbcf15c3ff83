#pragma once

#include <Eigen/Core>

namespace gpda {

struct ConfusionCounts {
  Eigen::Index tp = 0, fp = 0, fn = 0, tn = 0;

  Eigen::Index total() const { return tp + fp + fn + tn; }
};

ConfusionCounts confusion(const Eigen::VectorXi& pred,
                          const Eigen::VectorXi& truth);

/// Error rate, true positive rate, true negative rate. Ratios with a zero
/// denominator come back as NaN with the matching flag cleared.
struct ClassificationMetrics {
  double error_rate = 0.0;
  double tpr = 0.0;
  double tnr = 0.0;
  bool tpr_defined = true;
  bool tnr_defined = true;
};

ClassificationMetrics classification_metrics(const Eigen::VectorXi& pred,
                                             const Eigen::VectorXi& truth);

/// Matthews correlation coefficient; 0 when any denominator factor vanishes.
double mcc(const Eigen::VectorXi& selected, const Eigen::VectorXi& gamma_star);

/// Thresholds inclusion probabilities into a binary selection vector.
Eigen::VectorXi threshold_selection(const Eigen::VectorXd& w,
                                    double threshold = 0.5);

}  // namespace gpda
