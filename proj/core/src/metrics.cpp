#include "mfkl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mfkl/errors.hpp"

namespace mfkl {

std::vector<double> compute_cmc(const Eigen::MatrixXd& scores,
                                const std::vector<int>& class_ids,
                                const std::vector<int>& true_labels,
                                int rank_max) {
  const Eigen::Index n_probes = scores.rows();
  const Eigen::Index n_classes = scores.cols();
  if (static_cast<Eigen::Index>(class_ids.size()) != n_classes)
    throw DataError("cmc: one class id per score column required");
  if (static_cast<Eigen::Index>(true_labels.size()) != n_probes)
    throw DataError("cmc: one true label per probe required");
  if (n_probes == 0 || n_classes == 0) throw DataError("cmc: empty score matrix");
  if (rank_max < 1) throw ConfigError("cmc: rank_max must be >= 1");
  if (!scores.allFinite()) throw DataError("cmc: scores must be finite");

  std::map<int, Eigen::Index> column_of;
  for (Eigen::Index c = 0; c < n_classes; ++c) {
    if (!column_of.emplace(class_ids[static_cast<std::size_t>(c)], c).second)
      throw DataError("cmc: duplicate class id");
  }

  std::vector<double> hits(static_cast<std::size_t>(rank_max), 0.0);
  for (Eigen::Index i = 0; i < n_probes; ++i) {
    auto it = column_of.find(true_labels[static_cast<std::size_t>(i)]);
    if (it == column_of.end())
      throw DataError("cmc: true label not among the scored classes");
    Eigen::Index t = it->second;
    double s_true = scores(i, t);
    int rank = 1;
    for (Eigen::Index c = 0; c < n_classes; ++c) {
      if (c == t) continue;
      double s = scores(i, c);
      if (s > s_true ||
          (s == s_true && class_ids[static_cast<std::size_t>(c)] <
                              class_ids[static_cast<std::size_t>(t)]))
        ++rank;
    }
    if (rank <= rank_max) hits[static_cast<std::size_t>(rank) - 1] += 1.0;
  }

  std::vector<double> cmc(static_cast<std::size_t>(rank_max), 0.0);
  double acc = 0.0;
  for (int r = 0; r < rank_max; ++r) {
    acc += hits[static_cast<std::size_t>(r)];
    cmc[static_cast<std::size_t>(r)] = acc / static_cast<double>(n_probes);
  }
  return cmc;
}

std::vector<RocPoint> compute_roc(const std::vector<double>& genuine_scores,
                                  const std::vector<double>& impostor_scores,
                                  int points) {
  if (genuine_scores.empty() || impostor_scores.empty())
    throw DataError("roc: both score lists must be non-empty");
  for (double s : genuine_scores)
    if (!std::isfinite(s)) throw DataError("roc: scores must be finite");
  for (double s : impostor_scores)
    if (!std::isfinite(s)) throw DataError("roc: scores must be finite");
  if (points < 0) throw ConfigError("roc: points must be >= 0");

  std::vector<double> thresholds;
  if (points == 0) {
    thresholds = genuine_scores;
    thresholds.insert(thresholds.end(), impostor_scores.begin(),
                      impostor_scores.end());
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                     thresholds.end());
  } else {
    double lo = std::min(*std::min_element(genuine_scores.begin(),
                                           genuine_scores.end()),
                         *std::min_element(impostor_scores.begin(),
                                           impostor_scores.end()));
    double hi = std::max(*std::max_element(genuine_scores.begin(),
                                           genuine_scores.end()),
                         *std::max_element(impostor_scores.begin(),
                                           impostor_scores.end()));
    if (hi == lo || points == 1) {
      thresholds.push_back(lo);
    } else {
      for (int i = 0; i < points; ++i)
        thresholds.push_back(lo + (hi - lo) * i / (points - 1));
    }
  }

  auto rate_at_or_above = [](const std::vector<double>& scores, double theta) {
    std::size_t hit = 0;
    for (double s : scores)
      if (s >= theta) ++hit;
    return static_cast<double>(hit) / static_cast<double>(scores.size());
  };

  std::vector<RocPoint> curve;
  curve.push_back({0.0, 0.0});
  for (auto it = thresholds.rbegin(); it != thresholds.rend(); ++it)
    curve.push_back({rate_at_or_above(impostor_scores, *it),
                     rate_at_or_above(genuine_scores, *it)});
  curve.push_back({1.0, 1.0});
  std::sort(curve.begin(), curve.end(), [](const RocPoint& a, const RocPoint& b) {
    return a.far != b.far ? a.far < b.far : a.vr < b.vr;
  });
  curve.erase(std::unique(curve.begin(), curve.end(),
                          [](const RocPoint& a, const RocPoint& b) {
                            return a.far == b.far && a.vr == b.vr;
                          }),
              curve.end());
  return curve;
}

double roc_auc(const std::vector<RocPoint>& curve) {
  if (curve.size() < 2) throw DataError("roc auc: need at least two points");
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i)
    area += 0.5 * (curve[i].vr + curve[i - 1].vr) *
            (curve[i].far - curve[i - 1].far);
  return area;
}

}  // namespace mfkl
