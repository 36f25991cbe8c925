#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "mfkl/kernel.hpp"

namespace mfkl {

// Options for the projected-subgradient solver. Defaults suit desk-scale
// problems; raise max_iterations for tighter tolerances.
struct SolverOptions {
  int max_iterations = 5000;
  int stall_window = 200;     // iterations without improvement before stopping
  double stall_tol = 1e-9;    // minimum relative improvement of the best value
  double tie_tol = 1e-10;     // J_j within this of the max share the gradient
  double active_slack = 1e-6; // relative slack for the active kernel set
  double initial_step_fraction = 0.1;  // first step <= fraction * C (inf-norm)
  bool record_trace = false;
};

struct TraceRow {
  int iteration = 0;
  double objective = 0.0;
  int max_kernel = 0;
};

struct MklSolution {
  Eigen::VectorXd alpha;
  double objective = 0.0;  // J(alpha) = max_j J_j(alpha)
  double gamma = 0.0;      // max_j sqrt(alpha' D K_j D alpha) / d_j
  std::vector<double> eta;             // kernel weights, sum 1 over support
  std::vector<int> active_kernels;     // indices with J_j at the max
  std::map<std::string, double> kkt_residuals;
  int iterations = 0;
  bool degenerate = false;  // single-sign labels: alpha = 0 is the only point
  std::vector<TraceRow> trace;
};

// J_j(alpha) = alpha' D(y) K D(y) alpha / (2 d^2) - sum(alpha).
double j_value(const Eigen::VectorXd& alpha, const GramMatrix& gram,
               const std::vector<int>& labels, double d_weight = 1.0);

// Euclidean projection onto {0 <= a <= C} intersected with {a'y = 0},
// computed by bisection on the hyperplane multiplier.
Eigen::VectorXd project_feasible(const Eigen::VectorXd& alpha,
                                 const std::vector<int>& labels, double C);

// Minimizes max_j J_j(alpha) over the box/hyperplane feasible set by a
// projected subgradient descent: the gradients of all max-attaining kernels
// are averaged, an Armijo backtracking search picks the step, and when the
// averaged direction stalls the minimum-norm element of the active gradients'
// convex hull (then each active gradient alone) is tried before declaring
// stationarity. Deterministic: no randomness enters the iteration.
// Requires unit-trace-normalized Grams, labels in {-1,+1}, C > 0 and positive
// d_weights (empty means all ones).
MklSolution solve_skm(const std::vector<GramMatrix>& grams,
                      const std::vector<int>& labels, double C,
                      const std::vector<double>& d_weights = {},
                      const SolverOptions& options = {});

// Kernel weights at a solution: supported on kernels whose J_j sits within
// active_slack * (1 + |J|) of the max, with the weights chosen to minimize
// the norm of the projected stationarity residual (the certificate that
// alpha is optimal), normalized to sum 1.
std::vector<double> recover_eta(const Eigen::VectorXd& alpha,
                                const std::vector<GramMatrix>& grams,
                                const std::vector<int>& labels, double C,
                                const std::vector<double>& d_weights = {},
                                double active_slack = 1e-6);

// Bias from the mean over free support vectors (tol < alpha_i < C - tol) of
// y_i - f0_i; falls back to the midpoint rule between the class margins when
// no support vector is free, and to the present class sign when only one
// class occurs.  k_combined is the effective train-by-train kernel.
double compute_bias(const Eigen::VectorXd& alpha,
                    const std::vector<int>& labels,
                    const Eigen::MatrixXd& k_combined, double C);

// f(z) = sum_i alpha_i y_i k(x_i, z) + bias for each row of k_test_train
// (one row per test sample, one column per training sample).
Eigen::VectorXd decision_function(const Eigen::VectorXd& alpha,
                                  const std::vector<int>& labels,
                                  const Eigen::MatrixXd& k_test_train,
                                  double bias);

// Residuals of the four optimality conditions of the margin problem:
//  margin_complementarity  max_i alpha_i * max(0, y_i f_i - 1)
//  box_complementarity     max_i (C - alpha_i) * max(0, 1 - y_i f_i)
//  kernel_complementarity  max_j eta_j * (J - J_j)
//  cone_tightness          gamma * |sum_j eta_j q_j - gamma|,
//                          q_j = sqrt(alpha' D K_j D alpha) / d_j
std::map<std::string, double> kkt_report(
    const MklSolution& solution, const std::vector<GramMatrix>& grams,
    const std::vector<int>& labels, double C,
    const std::vector<double>& d_weights = {});

// One selected kernel per retained feature plus its fused vote weight.
struct SelectedPair {
  std::string feature;
  int kernel_index = 0;
  KernelSpec kernel;
  double eta = 0.0;   // winning (mean) kernel weight
  double beta = 0.0;  // normalized vote weight across retained features
};

struct FeatureKernelPairing {
  std::vector<SelectedPair> pairs;
  std::vector<std::string> dropped_features;
};

// Per-feature kernel selection on a binary (+1/-1) task: solves the min-max
// problem over each feature's kernel list, keeps the argmax-eta kernel, drops
// features whose best eta is <= threshold, and sets beta proportional to the
// winning eta values (normalized to sum 1). Throws NumericError when every
// feature is dropped.
FeatureKernelPairing mfkl_select(
    const std::map<std::string, std::vector<GramMatrix>>& per_feature_grams,
    const std::vector<int>& labels, double C, double threshold,
    const SolverOptions& options = {});

// Multi-class wrapper: runs one-vs-rest tasks for every class id in
// class_labels, averages each kernel's eta across the tasks, then applies the
// same retain/drop rule to the mean weights. Solves run in parallel.
FeatureKernelPairing mfkl_select_multiclass(
    const std::map<std::string, std::vector<GramMatrix>>& per_feature_grams,
    const std::vector<int>& class_labels, double C, double threshold,
    const SolverOptions& options = {});

}  // namespace mfkl
