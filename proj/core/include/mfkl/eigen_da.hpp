#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "mfkl/kernel.hpp"

namespace mfkl::da {

// Principal component basis of a sample set (rows = samples).
struct EigenBasis {
  Eigen::MatrixXd vectors;  // d x r, orthonormal columns
  Eigen::VectorXd values;   // r eigenvalues of the covariance, descending, > 0
  Eigen::VectorXd mean;     // d, column means of the input
};

// Eigenpairs of a symmetric Gram matrix after rank truncation.
struct GramEig {
  Eigen::MatrixXd vectors;  // n x r, orthonormal columns
  Eigen::VectorXd values;   // r eigenvalues, descending, > 0
};

// Gram blocks of the adapted source against itself and the target, plus the
// composite block matrix over [adapted source; target].
struct DaGramSet {
  Eigen::MatrixXd k_ss;       // n_S x n_S, adapted source (mean-shifted)
  Eigen::MatrixXd k_st;       // n_S x n_T, adapted source vs target
  Eigen::MatrixXd k_tt;       // n_T x n_T, original target block
  Eigen::MatrixXd composite;  // (n_S+n_T) x (n_S+n_T)
  // Maps mean-centered target kernel columns into the adapted source rows;
  // kept so new target-domain samples can be scored against the adapted
  // source without redoing the eigenanalysis (see extend_cross).
  Eigen::MatrixXd source_map;  // n_S x n_T
};

// PCA of the mean-centered samples. Covariance is X_c^T X_c / n; components
// with eigenvalue <= rank_tol * max eigenvalue are dropped. Each retained
// column is sign-fixed so its largest-magnitude entry is positive.
// Throws DataError for n < 2 or zero-variance input.
EigenBasis principal_components(const Eigen::MatrixXd& samples,
                                double rank_tol = 1e-10);

// Rebuilds the source in the target's principal frame:
//   result = (S - mean_S) * U_S * U_T^T + mean_T
// with both bases truncated to their common rank. Component signs are aligned
// by the projection-score rule (the largest-magnitude sample score along each
// component is made positive on both sides), which makes this construction
// and the Gram-side construction in kernel_da agree exactly for the linear
// kernel. Appends a note to `warnings` when the two ranks differ.
Eigen::MatrixXd linear_da(const Eigen::MatrixXd& source,
                          const Eigen::MatrixXd& target,
                          double rank_tol = 1e-10,
                          std::vector<std::string>* warnings = nullptr);

// Eigenvectors/values of a symmetric Gram, descending, truncated at
// rank_tol * max eigenvalue (non-positive eigenvalues always dropped), each
// column sign-fixed so its largest-magnitude entry is positive.
// Throws DataError when the input is not symmetric (defect > 1e-8 * scale).
GramEig gram_eigvecs(const Eigen::MatrixXd& gram, double rank_tol = 1e-10);

// Kernel-space analogue of linear_da, working purely on Gram blocks.
// The Gram blocks are mean-centered in feature space first; the truncated,
// variance-normalized eigenvector bases of both centered blocks define the
// transform; the resulting blocks are then mean-shifted so the adapted source
// carries the target's feature-space mean; finally the composite block matrix
// is assembled. The k_st block only participates in shape validation: the
// adapted source lives entirely in the span of the centered target features
// plus the target mean, so its values never enter the result.
// Throws DataError on shape mismatch, NumericError on an all-zero Gram.
DaGramSet kernel_da(const GramMatrix& k_ss, const GramMatrix& k_st,
                    const GramMatrix& k_tt, double rank_tol = 1e-10,
                    std::vector<std::string>* warnings = nullptr);

// Cross block between the adapted source and new target-domain samples.
// k_t_probe holds kernel values between the adaptation targets (rows) and the
// new samples (columns). Column j of the result equals what k_st would have
// contained had sample j been a target. Used to score probes at test time.
Eigen::MatrixXd extend_cross(const DaGramSet& da,
                             const Eigen::MatrixXd& k_t_probe);

// Squared RKHS distance read off a Gram: K(i,i) + K(j,j) - 2 K(i,j), clamped
// at zero against round-off.
double rkhs_distance(const Eigen::MatrixXd& gram, Eigen::Index i,
                     Eigen::Index j);

// k-nearest-neighbour vote from a probe-by-source distance matrix.
// Ties on the vote count are broken by smaller mean distance within the tied
// class, then by smaller class id.
std::vector<int> knn_from_distances(const Eigen::MatrixXd& distances,
                                    const std::vector<int>& source_labels,
                                    int k);

// Classifies the target rows of the composite against the adapted source
// rows by k-nearest-neighbour on RKHS distances. Only source labels are
// consumed: the target side stays unlabeled by construction.
std::vector<int> knn_classify(const DaGramSet& da,
                              const std::vector<int>& source_labels, int k);

// Weighted plurality vote across per-feature predictions. beta must have one
// non-negative weight per feature. Ties resolve to the smaller class id.
std::vector<int> vote_across_features(
    const std::vector<std::vector<int>>& per_feature_predictions,
    const std::vector<double>& beta);

}  // namespace mfkl::da
