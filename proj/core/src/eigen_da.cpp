#include "mfkl/eigen_da.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "mfkl/errors.hpp"

namespace mfkl::da {

namespace {

// Index of the entry with the largest magnitude (first one wins on ties).
Eigen::Index argmax_abs(const Eigen::VectorXd& v) {
  Eigen::Index best = 0;
  double best_abs = std::abs(v[0]);
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    double a = std::abs(v[i]);
    if (a > best_abs) {
      best_abs = a;
      best = i;
    }
  }
  return best;
}

void sign_fix_columns(Eigen::MatrixXd& m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    Eigen::VectorXd col = m.col(c);
    if (col.size() > 0 && col[argmax_abs(col)] < 0) m.col(c) = -col;
  }
}

// Descending eigendecomposition of a symmetric matrix with truncation at
// rank_tol * lambda_max; non-positive eigenvalues are always dropped.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> truncated_eig(
    const Eigen::MatrixXd& sym, double rank_tol) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success)
    throw NumericError("eigendecomposition failed");
  // Eigen returns ascending order; walk from the back.
  Eigen::VectorXd all = es.eigenvalues();
  double lambda_max = all.size() > 0 ? all[all.size() - 1] : 0.0;
  double cutoff = rank_tol * std::max(lambda_max, 0.0);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = all.size() - 1; i >= 0; --i)
    if (all[i] > cutoff && all[i] > 0.0) keep.push_back(i);
  Eigen::MatrixXd vectors(sym.rows(), static_cast<Eigen::Index>(keep.size()));
  Eigen::VectorXd values(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    vectors.col(static_cast<Eigen::Index>(k)) = es.eigenvectors().col(keep[k]);
    values[static_cast<Eigen::Index>(k)] = all[keep[k]];
  }
  return {std::move(vectors), std::move(values)};
}

// Flips basis columns so that the largest-magnitude projection score over the
// centered samples is positive. For basis column u this inspects X_c * u,
// which is proportional to the matching Gram eigenvector, so the Gram-side
// convention in gram_eigvecs lands on the same signs.
void align_signs_by_score(const Eigen::MatrixXd& centered,
                          Eigen::MatrixXd& basis) {
  for (Eigen::Index c = 0; c < basis.cols(); ++c) {
    Eigen::VectorXd score = centered * basis.col(c);
    if (score.size() > 0 && score[argmax_abs(score)] < 0)
      basis.col(c) = -basis.col(c);
  }
}

Eigen::MatrixXd double_center(const Eigen::MatrixXd& k) {
  Eigen::Index n = k.rows();
  Eigen::VectorXd row_mean = k.rowwise().mean();
  Eigen::VectorXd col_mean = k.colwise().mean();
  double total = k.mean();
  Eigen::MatrixXd out = k;
  out.noalias() -= row_mean * Eigen::RowVectorXd::Ones(n);
  out.noalias() -= Eigen::VectorXd::Ones(n) * col_mean.transpose();
  out.array() += total;
  return 0.5 * (out + out.transpose());  // keep exact symmetry
}

}  // namespace

EigenBasis principal_components(const Eigen::MatrixXd& samples,
                                double rank_tol) {
  const Eigen::Index n = samples.rows();
  if (n < 2) throw DataError("principal_components: need at least 2 samples");
  if (samples.cols() < 1)
    throw DataError("principal_components: need at least 1 dimension");

  EigenBasis basis;
  basis.mean = samples.colwise().mean();
  Eigen::MatrixXd centered =
      samples - Eigen::VectorXd::Ones(n) * basis.mean.transpose();
  Eigen::MatrixXd cov =
      centered.transpose() * centered / static_cast<double>(n);
  cov = 0.5 * (cov + cov.transpose());

  auto [vectors, values] = truncated_eig(cov, rank_tol);
  if (values.size() == 0)
    throw DataError("principal_components: zero-variance input");
  sign_fix_columns(vectors);
  basis.vectors = std::move(vectors);
  basis.values = std::move(values);
  return basis;
}

Eigen::MatrixXd linear_da(const Eigen::MatrixXd& source,
                          const Eigen::MatrixXd& target, double rank_tol,
                          std::vector<std::string>* warnings) {
  if (source.cols() != target.cols())
    throw DataError("linear_da: source/target dimension mismatch");

  EigenBasis bs = principal_components(source, rank_tol);
  EigenBasis bt = principal_components(target, rank_tol);
  Eigen::Index r =
      std::min<Eigen::Index>(bs.vectors.cols(), bt.vectors.cols());
  if (bs.vectors.cols() != bt.vectors.cols() && warnings)
    warnings->push_back("linear_da: retained ranks differ (source " +
                        std::to_string(bs.vectors.cols()) + ", target " +
                        std::to_string(bt.vectors.cols()) +
                        "); truncated to common rank " + std::to_string(r));

  Eigen::MatrixXd u_s = bs.vectors.leftCols(r);
  Eigen::MatrixXd u_t = bt.vectors.leftCols(r);
  Eigen::MatrixXd source_c =
      source - Eigen::VectorXd::Ones(source.rows()) * bs.mean.transpose();
  Eigen::MatrixXd target_c =
      target - Eigen::VectorXd::Ones(target.rows()) * bt.mean.transpose();
  align_signs_by_score(source_c, u_s);
  align_signs_by_score(target_c, u_t);

  return source_c * u_s * u_t.transpose() +
         Eigen::VectorXd::Ones(source.rows()) * bt.mean.transpose();
}

GramEig gram_eigvecs(const Eigen::MatrixXd& gram, double rank_tol) {
  if (gram.rows() != gram.cols())
    throw DataError("gram_eigvecs: matrix must be square");
  double scale = std::max(1.0, gram.cwiseAbs().maxCoeff());
  double defect = (gram - gram.transpose()).cwiseAbs().maxCoeff();
  if (defect > 1e-8 * scale)
    throw DataError("gram_eigvecs: matrix is not symmetric (defect " +
                    std::to_string(defect) + ")");

  auto [vectors, values] = truncated_eig(0.5 * (gram + gram.transpose()), rank_tol);
  sign_fix_columns(vectors);
  GramEig out;
  out.vectors = std::move(vectors);
  out.values = std::move(values);
  return out;
}

DaGramSet kernel_da(const GramMatrix& k_ss, const GramMatrix& k_st,
                    const GramMatrix& k_tt, double rank_tol,
                    std::vector<std::string>* warnings) {
  if (!k_ss.square() || !k_tt.square())
    throw DataError("kernel_da: k_ss and k_tt must be square");
  const Eigen::Index ns = k_ss.rows();
  const Eigen::Index nt = k_tt.rows();
  if (k_st.rows() != ns || k_st.cols() != nt)
    throw DataError("kernel_da: k_st must be n_S x n_T");
  if (!(std::abs(k_ss.values.trace()) > 0) || !(std::abs(k_tt.values.trace()) > 0))
    throw NumericError("kernel_da: rank-0 (all-zero) Gram block");

  // Mean-center both domains in feature space.
  Eigen::MatrixXd kss_c = double_center(k_ss.values);
  Eigen::MatrixXd ktt_c = double_center(k_tt.values);

  GramEig es = gram_eigvecs(kss_c, rank_tol);
  GramEig et = gram_eigvecs(ktt_c, rank_tol);
  Eigen::Index r = std::min<Eigen::Index>(es.vectors.cols(), et.vectors.cols());
  if (es.vectors.cols() != et.vectors.cols() && warnings)
    warnings->push_back("kernel_da: retained ranks differ (source " +
                        std::to_string(es.vectors.cols()) + ", target " +
                        std::to_string(et.vectors.cols()) +
                        "); truncated to common rank " + std::to_string(r));

  // Scale eigenvectors so the implied feature-space basis has unit norm.
  Eigen::MatrixXd w_s = es.vectors.leftCols(r);
  Eigen::MatrixXd w_t = et.vectors.leftCols(r);
  for (Eigen::Index c = 0; c < r; ++c) {
    w_s.col(c) /= std::sqrt(es.values[c]);
    w_t.col(c) /= std::sqrt(et.values[c]);
  }

  DaGramSet out;
  // source_map carries centered target kernel columns onto adapted sources.
  out.source_map.noalias() = kss_c * w_s * w_t.transpose();  // n_S x n_T

  // Blocks of the transformed (still zero-mean) source against itself and
  // against the raw target.
  Eigen::VectorXd o_t = Eigen::VectorXd::Constant(nt, 1.0 / static_cast<double>(nt));
  Eigen::VectorXd o_s = Eigen::VectorXd::Constant(ns, 1.0 / static_cast<double>(ns));
  Eigen::MatrixXd ktt_rowcentered =
      k_tt.values - Eigen::VectorXd::Ones(nt) * (o_t.transpose() * k_tt.values);
  Eigen::MatrixXd pre_ss = out.source_map * ktt_c * out.source_map.transpose();
  Eigen::MatrixXd pre_st = out.source_map * ktt_rowcentered;

  // Mean shift: every adapted source sample is translated by
  // (target mean - adapted source mean) in feature space. Written out against
  // the Gram blocks this reads, entrywise,
  //   khat_ss = pre_ss - pre_ss o_s 1' + pre_st o_t 1' - 1 o_s' pre_ss
  //           + (o_s' pre_ss o_s) 11' - (o_s' pre_st o_t) 11'
  //           + 1 o_t' pre_st' - (o_t' pre_st' o_s) 11' + (o_t' k_tt o_t) 11'
  //   khat_st = pre_st - 1 o_s' pre_st + 1 o_t' k_tt.
  Eigen::VectorXd ones_s = Eigen::VectorXd::Ones(ns);
  Eigen::RowVectorXd ones_s_t = Eigen::RowVectorXd::Ones(ns);

  Eigen::VectorXd pre_ss_os = pre_ss * o_s;
  Eigen::VectorXd pre_st_ot = pre_st * o_t;
  Eigen::RowVectorXd os_pre_ss = o_s.transpose() * pre_ss;
  Eigen::RowVectorXd os_pre_st = o_s.transpose() * pre_st;
  Eigen::RowVectorXd ot_ktt = o_t.transpose() * k_tt.values;
  double s_ss = o_s.dot(pre_ss_os);
  double s_st = o_s.dot(pre_st_ot);
  double s_tt = o_t.dot(k_tt.values * o_t);

  out.k_ss = pre_ss;
  out.k_ss.noalias() -= pre_ss_os * ones_s_t;
  out.k_ss.noalias() += pre_st_ot * ones_s_t;
  out.k_ss.noalias() -= ones_s * os_pre_ss;
  out.k_ss.noalias() += ones_s * pre_st_ot.transpose();
  out.k_ss.array() += s_ss - 2.0 * s_st + s_tt;
  out.k_ss = 0.5 * (out.k_ss + out.k_ss.transpose());

  out.k_st = pre_st;
  out.k_st.noalias() -= ones_s * os_pre_st;
  out.k_st.noalias() += ones_s * ot_ktt;

  out.k_tt = k_tt.values;

  out.composite.resize(ns + nt, ns + nt);
  out.composite.topLeftCorner(ns, ns) = out.k_ss;
  out.composite.topRightCorner(ns, nt) = out.k_st;
  out.composite.bottomLeftCorner(nt, ns) = out.k_st.transpose();
  out.composite.bottomRightCorner(nt, nt) = out.k_tt;
  return out;
}

Eigen::MatrixXd extend_cross(const DaGramSet& da,
                             const Eigen::MatrixXd& k_t_probe) {
  const Eigen::Index nt = da.k_tt.rows();
  if (k_t_probe.rows() != nt)
    throw DataError("extend_cross: k_t_probe must have one row per target");
  Eigen::RowVectorXd col_mean = k_t_probe.colwise().mean();
  Eigen::MatrixXd centered =
      k_t_probe - Eigen::VectorXd::Ones(nt) * col_mean;
  Eigen::MatrixXd cross = da.source_map * centered;
  cross.noalias() += Eigen::VectorXd::Ones(da.source_map.rows()) * col_mean;
  return cross;
}

double rkhs_distance(const Eigen::MatrixXd& gram, Eigen::Index i,
                     Eigen::Index j) {
  if (gram.rows() != gram.cols())
    throw DataError("rkhs_distance: Gram must be square");
  if (i < 0 || j < 0 || i >= gram.rows() || j >= gram.rows())
    throw DataError("rkhs_distance: index out of range");
  return std::max(0.0, gram(i, i) + gram(j, j) - 2.0 * gram(i, j));
}

std::vector<int> knn_from_distances(const Eigen::MatrixXd& distances,
                                    const std::vector<int>& source_labels,
                                    int k) {
  const Eigen::Index np = distances.rows();
  const Eigen::Index ns = distances.cols();
  if (static_cast<Eigen::Index>(source_labels.size()) != ns)
    throw DataError("knn_from_distances: one label per source column required");
  if (k < 1 || k > ns)
    throw ConfigError("knn_from_distances: k must be in [1, n_source]");

  std::vector<int> out(static_cast<std::size_t>(np));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(ns));
  for (Eigen::Index p = 0; p < np; ++p) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) {
                       double da_ = distances(p, a), db = distances(p, b);
                       if (da_ != db) return da_ < db;
                       return a < b;
                     });
    // Vote count and mean distance per class over the k nearest.
    std::map<int, std::pair<int, double>> tally;  // label -> (count, dist sum)
    for (int i = 0; i < k; ++i) {
      Eigen::Index idx = order[static_cast<std::size_t>(i)];
      auto& t = tally[source_labels[static_cast<std::size_t>(idx)]];
      t.first += 1;
      t.second += distances(p, idx);
    }
    int best_label = 0;
    int best_count = -1;
    double best_mean = 0.0;
    for (const auto& [label, t] : tally) {
      double mean = t.second / t.first;
      bool better = t.first > best_count ||
                    (t.first == best_count && mean < best_mean) ||
                    (t.first == best_count && mean == best_mean && label < best_label);
      if (better) {
        best_label = label;
        best_count = t.first;
        best_mean = mean;
      }
    }
    out[static_cast<std::size_t>(p)] = best_label;
  }
  return out;
}

std::vector<int> knn_classify(const DaGramSet& da,
                              const std::vector<int>& source_labels, int k) {
  const Eigen::Index ns = da.k_ss.rows();
  const Eigen::Index nt = da.k_tt.rows();
  Eigen::MatrixXd dist(nt, ns);
  for (Eigen::Index t = 0; t < nt; ++t)
    for (Eigen::Index s = 0; s < ns; ++s)
      dist(t, s) = rkhs_distance(da.composite, ns + t, s);
  return knn_from_distances(dist, source_labels, k);
}

std::vector<int> vote_across_features(
    const std::vector<std::vector<int>>& per_feature_predictions,
    const std::vector<double>& beta) {
  if (per_feature_predictions.empty())
    throw DataError("vote_across_features: no predictions");
  if (beta.size() != per_feature_predictions.size())
    throw DataError("vote_across_features: one weight per feature required");
  for (double b : beta)
    if (b < 0) throw DataError("vote_across_features: negative weight");
  const std::size_t n = per_feature_predictions.front().size();
  for (const auto& preds : per_feature_predictions)
    if (preds.size() != n)
      throw DataError("vote_across_features: prediction length mismatch");

  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::map<int, double> mass;
    for (std::size_t f = 0; f < per_feature_predictions.size(); ++f)
      mass[per_feature_predictions[f][i]] += beta[f];
    int best_label = 0;
    double best_mass = -1.0;
    for (const auto& [label, m] : mass) {
      if (m > best_mass) {  // map iterates ascending labels: ties keep smaller id
        best_mass = m;
        best_label = label;
      }
    }
    out[i] = best_label;
  }
  return out;
}

}  // namespace mfkl::da
