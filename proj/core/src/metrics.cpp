#include "gpda/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace gpda {

ConfusionCounts confusion(const Eigen::VectorXi& pred,
                          const Eigen::VectorXi& truth) {
  if (pred.size() != truth.size() || pred.size() == 0) {
    throw std::invalid_argument("confusion: length mismatch or empty input");
  }
  ConfusionCounts c;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    if (truth[i] == 1) {
      (pred[i] == 1 ? c.tp : c.fn)++;
    } else {
      (pred[i] == 1 ? c.fp : c.tn)++;
    }
  }
  return c;
}

ClassificationMetrics classification_metrics(const Eigen::VectorXi& pred,
                                             const Eigen::VectorXi& truth) {
  const ConfusionCounts c = confusion(pred, truth);
  ClassificationMetrics m;
  m.error_rate = static_cast<double>(c.fp + c.fn) /
                 static_cast<double>(c.total());
  if (c.tp + c.fn > 0) {
    m.tpr = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  } else {
    m.tpr = std::numeric_limits<double>::quiet_NaN();
    m.tpr_defined = false;
  }
  if (c.tn + c.fp > 0) {
    m.tnr = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
  } else {
    m.tnr = std::numeric_limits<double>::quiet_NaN();
    m.tnr_defined = false;
  }
  return m;
}

double mcc(const Eigen::VectorXi& selected, const Eigen::VectorXi& gamma_star) {
  const ConfusionCounts c = confusion(selected, gamma_star);
  const double denom =
      static_cast<double>(c.tp + c.fp) * static_cast<double>(c.tp + c.fn) *
      static_cast<double>(c.tn + c.fp) * static_cast<double>(c.tn + c.fn);
  if (denom <= 0.0) return 0.0;
  const double num = static_cast<double>(c.tp) * static_cast<double>(c.tn) -
                     static_cast<double>(c.fp) * static_cast<double>(c.fn);
  return num / std::sqrt(denom);
}

Eigen::VectorXi threshold_selection(const Eigen::VectorXd& w,
                                    double threshold) {
  Eigen::VectorXi out(w.size());
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    out[j] = (w[j] >= threshold) ? 1 : 0;
  }
  return out;
}

}  // namespace gpda
