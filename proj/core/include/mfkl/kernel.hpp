#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace mfkl {

// Kernel families. Two exponential families are kept distinct on purpose:
// Gaussian uses the squared Euclidean distance in the exponent, Rbf uses the
// unsquared distance. ChiSquare is the additive chi-square similarity
// 1 - sum_i (x_i-y_i)^2 / ((x_i+y_i)/2); RbfPlusChiSquare is the sum of the
// Rbf and ChiSquare values.
enum class KernelFamily {
  Linear,
  Polynomial,
  Gaussian,
  Rbf,
  ChiSquare,
  RbfPlusChiSquare,
};

std::string family_name(KernelFamily family);
KernelFamily family_from_name(const std::string& name);  // throws ConfigError

struct KernelSpec {
  KernelFamily family = KernelFamily::Linear;
  double c = 0.0;      // additive offset (Linear, Polynomial)
  double alpha = 1.0;  // inner-product scale (Polynomial)
  int degree = 2;      // Polynomial exponent, >= 1
  double sigma = 1.0;  // bandwidth (Gaussian, Rbf, RbfPlusChiSquare)

  // Human-readable form, e.g. "Gaussian(sigma=1.5)"; also used in results.
  std::string describe() const;
  // Throws ConfigError when parameters are out of range for the family
  // (sigma <= 0, degree < 1, Polynomial alpha <= 0 or c < 0).
  void validate() const;
};

// Row-major sample container: one row per sample, one column per coordinate.
struct SampleMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> ids;  // optional; empty or one id per row

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

struct GramMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> row_ids;
  std::vector<std::string> col_ids;
  KernelSpec spec;
  bool normalized = false;  // set by unit_trace_normalize

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
  bool square() const { return values.rows() == values.cols(); }
};

struct PsdReport {
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  double symmetry_defect = 0.0;  // max |K - K^T|
  bool pass = false;
};

// Single kernel evaluation k(x, y) by the family formula.
// Throws DataError on dimension mismatch or negative inputs for the
// chi-square families, NumericError if the result is not finite.
double eval_kernel(const KernelSpec& spec, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& y);

// Dense Gram matrix between row sets X and Y. When X and Y are the same
// object the result is exactly symmetric (upper triangle mirrored).
// Rows are computed in parallel (MFKL_THREADS caps the worker count).
GramMatrix gram(const KernelSpec& spec, const SampleMatrix& x,
                const SampleMatrix& y);
GramMatrix gram(const KernelSpec& spec, const SampleMatrix& x);  // X vs X

// Rescales a square Gram so that trace(K) == n and sets `normalized`.
// Throws NumericError when the trace is zero or negative.
GramMatrix unit_trace_normalize(const GramMatrix& k);

// Weighted sum of Gram matrices sharing shape and ids. Weights must be
// non-negative and of matching length.
GramMatrix combine(const std::vector<double>& weights,
                   const std::vector<GramMatrix>& grams);

// Symmetry and eigenvalue check for a square Gram: pass means
// min_eig >= -tol * max(1, |max_eig|) and symmetry defect <= tol.
PsdReport check_psd(const GramMatrix& k, double tol = 1e-8);

}  // namespace mfkl
