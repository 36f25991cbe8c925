#pragma once

#include <Eigen/Dense>
#include <vector>

namespace mfkl {

// Identification: cmc[r-1] = fraction of probes whose true class sits within
// the top r ranked classes. scores is probes x classes (higher = more
// similar), column c scores class class_ids[c]. Equal scores rank the
// smaller class id first, so rank-1 equals an argmax with id tie-breaking.
std::vector<double> compute_cmc(const Eigen::MatrixXd& scores,
                                const std::vector<int>& class_ids,
                                const std::vector<int>& true_labels,
                                int rank_max);

struct RocPoint {
  double far = 0.0;  // false accept rate (impostor scores >= threshold)
  double vr = 0.0;   // verification rate  (genuine scores >= threshold)
};

// Verification: sweeps a threshold over the pooled score range and reports
// (FAR, VR) per threshold plus the (0,0) and (1,1) endpoints, sorted by FAR.
// points > 0 samples that many evenly spaced thresholds; points == 0 uses
// every distinct pooled score.
std::vector<RocPoint> compute_roc(const std::vector<double>& genuine_scores,
                                  const std::vector<double>& impostor_scores,
                                  int points = 0);

// Trapezoidal area under a compute_roc curve.
double roc_auc(const std::vector<RocPoint>& curve);

}  // namespace mfkl
