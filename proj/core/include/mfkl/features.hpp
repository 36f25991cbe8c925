#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "mfkl/image.hpp"

namespace mfkl::feat {

enum class FeatureId {
  Lbp,
  EigenFace,
  FisherFace,
  GaborFace,
  WeberFace,
  Bow,
  Vlad,
};

std::string feature_name(FeatureId id);
FeatureId feature_from_name(const std::string& name);

// One fixed-length descriptor for one image. Histogram features (LBP, BOW)
// are non-negative and L1-normalized; Gabor and VLAD are L2-normalized.
struct FeatureVector {
  FeatureId id = FeatureId::Lbp;
  Eigen::VectorXd values;
  Eigen::Index dims() const { return values.size(); }
};

// Linear projection fitted on vectorized images (eigenfaces / fisherfaces).
// `basis` columns live in pixel space; project() maps an image to
// basis' * (pixels - mean).
struct ProjectionModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd basis;        // (w*h) x r
  Eigen::VectorXd eigenvalues;  // r, descending
  int width = 0;
  int height = 0;
  Eigen::VectorXd project(const GrayImage& img) const;
};

struct Codebook {
  Eigen::MatrixXd centers;  // k x d
  std::uint64_t seed = 0;
  std::string trained_on;  // provenance note (sample count, method)
  Eigen::Index k() const { return centers.rows(); }
  Eigen::Index dim() const { return centers.cols(); }
};

// Per-pixel 8-neighbor threshold codes (neighbor >= center sets the bit;
// bit 0 = top-left neighbor, continuing clockwise), histogrammed over a
// grid_rows x grid_cols split of the interior (border pixels carry no code).
// Each cell's 256-bin histogram is L1-normalized; cells are concatenated
// row-major, so dims = grid_rows * grid_cols * 256.
FeatureVector lbp_histogram(const GrayImage& img, int grid_rows, int grid_cols);

// PCA over vectorized images via the n x n inner-product matrix; keeps the
// smallest component count whose eigenvalue sum reaches variance_keep of the
// total (always at least one). Basis columns are unit norm with the
// largest-magnitude entry positive.
ProjectionModel fit_eigenfaces(const std::vector<GrayImage>& train,
                               double variance_keep = 0.95);

// PCA to (n - #classes) dimensions followed by Fisher LDA down to
// (#classes - 1). A singular within-class scatter is regularized by
// 1e-6 * trace * identity and a note is appended to *warnings.
ProjectionModel fit_fisherfaces(const std::vector<GrayImage>& train,
                                const std::vector<int>& labels,
                                std::vector<std::string>* warnings = nullptr);

// Magnitudes of a Gabor wavelet bank (scales x orientations_count filters,
// wave number k_max / f^scale, orientations spanning pi), each response map
// downsampled by 4 in both axes, concatenated, and globally L2-normalized.
// Kernels are zero-mean after truncation, so constant images respond with
// (numerically) zero.
FeatureVector gabor_face(const GrayImage& img, const std::vector<int>& scales,
                         int orientations_count, double sigma = 6.2831853071795864769,
                         double k_max = 3.1415926535897932385,
                         double f = 1.4142135623730950488);

// Per-pixel arctan(alpha_w * sum over the 8-neighborhood of
// (center - neighbor) / max(center, 1e-3)), borders replicate-clamped,
// vectorized row-major. Invariant to positive global rescaling of the image
// wherever the center intensity exceeds the 1e-3 guard.
FeatureVector weber_face(const GrayImage& img, double alpha_w = 1.0);

// Gradient-histogram patch descriptors on a dense grid: 16x16 patches, 4x4
// cells, 8 orientation bins of central-difference gradient magnitude,
// L2-normalized, clipped at 0.2, renormalized. Patches slide with `stride`.
std::vector<Eigen::VectorXd> dense_patch_descriptors(const GrayImage& img,
                                                     int patch = 16,
                                                     int stride = 4);

// k-means with k-means++ seeding; at most 100 Lloyd iterations or a 1e-6
// relative inertia change. Empty clusters take the point farthest from its
// current center. Deterministic for a fixed seed.
Codebook fit_codebook(const std::vector<Eigen::VectorXd>& descriptors, int k,
                      std::uint64_t seed);

// Hard-assignment histogram over codebook centers (ties to the lowest
// index), L1-normalized.
FeatureVector bow_encode(const std::vector<Eigen::VectorXd>& descriptors,
                         const Codebook& codebook);

// Per-center residual sums (descriptor - center) over hard assignments,
// concatenated to k * d values, signed-sqrt power normalization, then L2
// normalization (all-zero residuals stay zero).
FeatureVector vlad_encode(const std::vector<Eigen::VectorXd>& descriptors,
                          const Codebook& codebook);

// CSV feature exchange: one row per sample, "id,label,v1,...,vd" with no
// header; label "?" marks unlabeled (target-domain) samples.
struct FeatureTable {
  std::vector<std::string> ids;
  std::vector<int> labels;        // meaningful only where labeled[i]
  std::vector<bool> labeled;
  Eigen::MatrixXd values;         // n x d
};

FeatureTable read_feature_csv(const std::string& path);
void write_feature_csv(const std::string& path, const FeatureTable& table);

}  // namespace mfkl::feat
