#include "mfkl/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mfkl/errors.hpp"
#include "mfkl/parallel.hpp"

namespace mfkl {

namespace {

struct Problem {
  std::vector<Eigen::MatrixXd> q;  // D(y) K_j D(y)
  std::vector<double> d2;          // d_j squared
  Eigen::VectorXd y;
  double C = 0.0;
  Eigen::Index n = 0;
  std::size_t m = 0;
};

Problem build_problem(const std::vector<GramMatrix>& grams,
                      const std::vector<int>& labels, double C,
                      const std::vector<double>& d_weights) {
  if (grams.empty()) throw DataError("solver: no Gram matrices");
  if (!(C > 0)) throw ConfigError("solver: C must be positive");
  Problem p;
  p.m = grams.size();
  p.n = grams.front().rows();
  p.C = C;
  if (static_cast<Eigen::Index>(labels.size()) != p.n)
    throw DataError("solver: label count must match Gram size");
  p.y.resize(p.n);
  for (Eigen::Index i = 0; i < p.n; ++i) {
    int l = labels[static_cast<std::size_t>(i)];
    if (l != 1 && l != -1) throw DataError("solver: labels must be +1 or -1");
    p.y[i] = static_cast<double>(l);
  }
  if (!d_weights.empty() && d_weights.size() != p.m)
    throw DataError("solver: d_weights must match kernel count");
  p.d2.resize(p.m, 1.0);
  for (std::size_t j = 0; j < d_weights.size(); ++j) {
    if (!(d_weights[j] > 0)) throw ConfigError("solver: d_weights must be positive");
    p.d2[j] = d_weights[j] * d_weights[j];
  }
  p.q.reserve(p.m);
  for (std::size_t j = 0; j < p.m; ++j) {
    const auto& g = grams[j];
    if (!g.square() || g.rows() != p.n)
      throw DataError("solver: Gram " + std::to_string(j) + " has wrong shape");
    if (!g.normalized)
      throw DataError("solver: Gram " + std::to_string(j) +
                      " is not unit-trace normalized");
    p.q.emplace_back(p.y.asDiagonal() * g.values * p.y.asDiagonal());
  }
  return p;
}

struct Evals {
  std::vector<double> quad;  // alpha' Q_j alpha
  std::vector<double> j;     // J_j(alpha)
  double max_j = 0.0;
  int argmax = 0;
  Eigen::MatrixXd grads;  // n x m, only when requested
};

Evals evaluate(const Problem& p, const Eigen::VectorXd& alpha, bool want_grads) {
  Evals e;
  e.quad.resize(p.m);
  e.j.resize(p.m);
  if (want_grads) e.grads.resize(p.n, static_cast<Eigen::Index>(p.m));
  double asum = alpha.sum();
  for (std::size_t j = 0; j < p.m; ++j) {
    Eigen::VectorXd v = p.q[j] * alpha;
    e.quad[j] = alpha.dot(v);
    e.j[j] = 0.5 * e.quad[j] / p.d2[j] - asum;
    if (want_grads)
      e.grads.col(static_cast<Eigen::Index>(j)) =
          v / p.d2[j] - Eigen::VectorXd::Ones(p.n);
    if (j == 0 || e.j[j] > e.max_j) {
      e.max_j = e.j[j];
      e.argmax = static_cast<int>(j);
    }
  }
  return e;
}

// Euclidean projection onto the probability simplex (sort-based, exact).
Eigen::VectorXd project_simplex(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cum = 0.0, theta = 0.0;
  int rho = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    cum += u[static_cast<std::size_t>(i)];
    double t = (cum - 1.0) / static_cast<double>(i + 1);
    if (u[static_cast<std::size_t>(i)] - t > 0) {
      rho = static_cast<int>(i + 1);
      theta = t;
    }
  }
  (void)rho;
  return (v.array() - theta).cwiseMax(0.0);
}

// Minimum-norm element of the convex hull of the columns of G, found by
// projected gradient descent on the simplex (deterministic).
Eigen::VectorXd min_norm_hull(const Eigen::MatrixXd& g) {
  const Eigen::Index m = g.cols();
  if (m == 1) return g.col(0);
  Eigen::VectorXd mu = Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
  Eigen::MatrixXd gtg = g.transpose() * g;
  double lip = std::max(gtg.cwiseAbs().maxCoeff() * static_cast<double>(m), 1e-12);
  double step = 1.0 / lip;
  for (int it = 0; it < 300; ++it) {
    Eigen::VectorXd grad = 2.0 * gtg * mu;
    Eigen::VectorXd next = project_simplex(mu - step * grad);
    if ((next - mu).cwiseAbs().maxCoeff() < 1e-14) break;
    mu = next;
  }
  return g * mu;
}

enum class Bound { Free, Lower, Upper };

std::vector<Bound> classify_bounds(const Eigen::VectorXd& alpha, double C) {
  double tol = 1e-7 * C;
  std::vector<Bound> b(static_cast<std::size_t>(alpha.size()));
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    if (alpha[i] <= tol)
      b[static_cast<std::size_t>(i)] = Bound::Lower;
    else if (alpha[i] >= C - tol)
      b[static_cast<std::size_t>(i)] = Bound::Upper;
    else
      b[static_cast<std::size_t>(i)] = Bound::Free;
  }
  return b;
}

// Squared norm of the stationarity residual for combined gradient ghat and
// multiplier nu; bound components only count violations the bound multipliers
// cannot absorb.
double certificate_value(const Eigen::VectorXd& ghat, double nu,
                         const Eigen::VectorXd& y,
                         const std::vector<Bound>& bounds,
                         Eigen::VectorXd* residual = nullptr) {
  double acc = 0.0;
  if (residual) residual->resize(ghat.size());
  for (Eigen::Index i = 0; i < ghat.size(); ++i) {
    double z = ghat[i] + nu * y[i];
    double r = 0.0;
    switch (bounds[static_cast<std::size_t>(i)]) {
      case Bound::Free: r = z; break;
      case Bound::Lower: r = std::min(0.0, z); break;
      case Bound::Upper: r = std::max(0.0, z); break;
    }
    if (residual) (*residual)[i] = r;
    acc += r * r;
  }
  return acc;
}

std::vector<double> eta_from_certificate(const Problem& p,
                                         const Eigen::VectorXd& alpha,
                                         const std::vector<double>& jvals,
                                         double max_j, double active_slack) {
  double slack = active_slack * (1.0 + std::abs(max_j));
  std::vector<int> active;
  for (std::size_t j = 0; j < p.m; ++j)
    if (jvals[j] >= max_j - slack) active.push_back(static_cast<int>(j));
  // The max is always attained, so `active` is never empty.

  std::vector<double> eta(p.m, 0.0);
  if (active.size() == 1) {
    eta[static_cast<std::size_t>(active[0])] = 1.0;
    return eta;
  }

  Eigen::MatrixXd g(p.n, static_cast<Eigen::Index>(active.size()));
  for (std::size_t a = 0; a < active.size(); ++a) {
    std::size_t j = static_cast<std::size_t>(active[a]);
    g.col(static_cast<Eigen::Index>(a)) =
        p.q[j] * alpha / p.d2[j] - Eigen::VectorXd::Ones(p.n);
  }
  std::vector<Bound> bounds = classify_bounds(alpha, p.C);

  // Minimize ||residual(G w, nu)||^2 over the simplex in w and free nu.
  Eigen::VectorXd w =
      Eigen::VectorXd::Constant(static_cast<Eigen::Index>(active.size()),
                                1.0 / static_cast<double>(active.size()));
  // Initial nu: least squares over free components of the initial residual.
  double nu = 0.0;
  {
    Eigen::VectorXd ghat = g * w;
    double num = 0.0;
    int cnt = 0;
    for (Eigen::Index i = 0; i < p.n; ++i) {
      if (bounds[static_cast<std::size_t>(i)] == Bound::Free) {
        num += ghat[i] * p.y[i];
        ++cnt;
      }
    }
    if (cnt > 0) nu = -num / cnt;
  }

  Eigen::VectorXd residual;
  double value = certificate_value(g * w, nu, p.y, bounds, &residual);
  double step = 1.0;
  for (int it = 0; it < 500; ++it) {
    Eigen::VectorXd grad_w = 2.0 * (g.transpose() * residual);
    double grad_nu = 2.0 * residual.dot(p.y);
    bool moved = false;
    double s = step;
    for (int ls = 0; ls < 40; ++ls) {
      Eigen::VectorXd w_next = project_simplex(w - s * grad_w);
      double nu_next = nu - s * grad_nu;
      Eigen::VectorXd res_next;
      double v_next = certificate_value(g * w_next, nu_next, p.y, bounds, &res_next);
      if (v_next < value - 1e-18) {
        w = w_next;
        nu = nu_next;
        value = v_next;
        residual = std::move(res_next);
        step = s * 1.5;
        moved = true;
        break;
      }
      s *= 0.5;
    }
    if (!moved) break;
  }

  double total = 0.0;
  for (std::size_t a = 0; a < active.size(); ++a) {
    double v = w[static_cast<Eigen::Index>(a)];
    if (v < 1e-12) v = 0.0;
    eta[static_cast<std::size_t>(active[a])] = v;
    total += v;
  }
  if (total <= 0) {  // fall back to a uniform split over the active set
    for (int j : active)
      eta[static_cast<std::size_t>(j)] = 1.0 / static_cast<double>(active.size());
  } else {
    for (double& v : eta) v /= total;
  }
  return eta;
}

std::map<std::string, double> kkt_from_parts(const Problem& p,
                                             const std::vector<GramMatrix>& grams,
                                             const Eigen::VectorXd& alpha,
                                             const std::vector<double>& eta,
                                             const std::vector<double>& jvals,
                                             double max_j) {
  // Effective kernel of the weighted combination: sum_j (eta_j / d_j^2) K_j.
  Eigen::MatrixXd k_comb = Eigen::MatrixXd::Zero(p.n, p.n);
  for (std::size_t j = 0; j < p.m; ++j)
    if (eta[j] > 0) k_comb += (eta[j] / p.d2[j]) * grams[j].values;

  std::vector<int> labels(static_cast<std::size_t>(p.n));
  for (Eigen::Index i = 0; i < p.n; ++i)
    labels[static_cast<std::size_t>(i)] = p.y[i] > 0 ? 1 : -1;
  double bias = compute_bias(alpha, labels, k_comb, p.C);

  Eigen::VectorXd f =
      k_comb * (alpha.array() * p.y.array()).matrix() +
      Eigen::VectorXd::Constant(p.n, bias);

  double r_margin = 0.0, r_box = 0.0;
  for (Eigen::Index i = 0; i < p.n; ++i) {
    double margin = p.y[i] * f[i];
    r_margin = std::max(r_margin, alpha[i] * std::max(0.0, margin - 1.0));
    r_box = std::max(r_box, (p.C - alpha[i]) * std::max(0.0, 1.0 - margin));
  }
  double r_kernel = 0.0;
  double gamma = 0.0;
  double eta_q = 0.0;
  for (std::size_t j = 0; j < p.m; ++j) {
    r_kernel = std::max(r_kernel, eta[j] * (max_j - jvals[j]));
    double quad = std::max(0.0, alpha.dot(p.q[j] * alpha));
    double qj = std::sqrt(quad) / std::sqrt(p.d2[j]);
    gamma = std::max(gamma, qj);
    eta_q += eta[j] * qj;
  }
  double r_cone = gamma * std::abs(eta_q - gamma);

  return {{"margin_complementarity", r_margin},
          {"box_complementarity", r_box},
          {"kernel_complementarity", r_kernel},
          {"cone_tightness", r_cone}};
}

}  // namespace

double j_value(const Eigen::VectorXd& alpha, const GramMatrix& gram,
               const std::vector<int>& labels, double d_weight) {
  if (!gram.square()) throw DataError("j_value: Gram must be square");
  if (alpha.size() != gram.rows() ||
      static_cast<Eigen::Index>(labels.size()) != gram.rows())
    throw DataError("j_value: size mismatch");
  if (!(d_weight > 0)) throw ConfigError("j_value: d_weight must be positive");
  Eigen::VectorXd ay(alpha.size());
  for (Eigen::Index i = 0; i < alpha.size(); ++i)
    ay[i] = alpha[i] * static_cast<double>(labels[static_cast<std::size_t>(i)]);
  double quad = ay.dot(gram.values * ay);
  return 0.5 * quad / (d_weight * d_weight) - alpha.sum();
}

Eigen::VectorXd project_feasible(const Eigen::VectorXd& alpha,
                                 const std::vector<int>& labels, double C) {
  const Eigen::Index n = alpha.size();
  if (static_cast<Eigen::Index>(labels.size()) != n)
    throw DataError("project_feasible: label count mismatch");
  if (!(C > 0)) throw ConfigError("project_feasible: C must be positive");
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    int l = labels[static_cast<std::size_t>(i)];
    if (l != 1 && l != -1)
      throw DataError("project_feasible: labels must be +1 or -1");
    y[i] = static_cast<double>(l);
  }
  auto balance = [&](double nu) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      s += y[i] * std::clamp(alpha[i] - nu * y[i], 0.0, C);
    return s;
  };
  // balance() is non-increasing in nu with a sign change inside [-M, M].
  double M = C + (n > 0 ? alpha.cwiseAbs().maxCoeff() : 0.0) + 1.0;
  double lo = -M, hi = M;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (balance(mid) > 0)
      lo = mid;
    else
      hi = mid;
  }
  double nu = 0.5 * (lo + hi);
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i)
    out[i] = std::clamp(alpha[i] - nu * y[i], 0.0, C);
  return out;
}

MklSolution solve_skm(const std::vector<GramMatrix>& grams,
                      const std::vector<int>& labels, double C,
                      const std::vector<double>& d_weights,
                      const SolverOptions& options) {
  Problem p = build_problem(grams, labels, C, d_weights);

  MklSolution sol;
  sol.alpha = Eigen::VectorXd::Zero(p.n);

  bool has_pos = false, has_neg = false;
  for (Eigen::Index i = 0; i < p.n; ++i) (p.y[i] > 0 ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg) {
    // alpha = 0 is the only feasible point when one class is absent.
    sol.degenerate = true;
    Evals e = evaluate(p, sol.alpha, false);
    sol.objective = e.max_j;
    sol.gamma = 0.0;
    sol.eta.assign(p.m, 1.0 / static_cast<double>(p.m));
    for (std::size_t j = 0; j < p.m; ++j)
      sol.active_kernels.push_back(static_cast<int>(j));
    sol.kkt_residuals = kkt_from_parts(p, grams, sol.alpha, sol.eta, e.j, e.max_j);
    return sol;
  }

  Eigen::VectorXd alpha = sol.alpha;
  Evals cur = evaluate(p, alpha, true);
  double best_obj = cur.max_j;
  Eigen::VectorXd best_alpha = alpha;
  int last_improvement = 0;
  double step = 0.0;  // calibrated from the first direction below
  const double armijo = 1e-4;

  auto tie_average = [&](const Evals& e) {
    double tol = options.tie_tol * (1.0 + std::abs(e.max_j));
    Eigen::VectorXd dir = Eigen::VectorXd::Zero(p.n);
    int count = 0;
    for (std::size_t j = 0; j < p.m; ++j) {
      if (e.j[j] >= e.max_j - tol) {
        dir += e.grads.col(static_cast<Eigen::Index>(j));
        ++count;
      }
    }
    return Eigen::VectorXd(dir / std::max(count, 1));
  };

  auto try_direction = [&](const Eigen::VectorXd& dir, double& io_step,
                           Eigen::VectorXd& io_alpha, Evals& io_evals) {
    double dir_norm = dir.cwiseAbs().maxCoeff();
    if (!(dir_norm > 1e-16)) return false;
    double s = io_step;
    for (int ls = 0; ls < 60; ++ls) {
      Eigen::VectorXd cand = project_feasible(io_alpha - s * dir, labels, p.C);
      double moved = (cand - io_alpha).squaredNorm();
      if (moved > 0) {
        Evals e = evaluate(p, cand, false);
        if (e.max_j <= io_evals.max_j - armijo * moved / s) {
          io_alpha = std::move(cand);
          io_evals = evaluate(p, io_alpha, true);
          io_step = s * 2.0;
          return true;
        }
      }
      s *= 0.5;
      if (s < 1e-18 * (1.0 + io_step)) break;
    }
    return false;
  };

  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    if (options.record_trace)
      sol.trace.push_back({iter, cur.max_j, cur.argmax});

    Eigen::VectorXd dir = tie_average(cur);
    if (step == 0.0) {
      double dn = dir.cwiseAbs().maxCoeff();
      step = dn > 0 ? options.initial_step_fraction * p.C / dn : 1.0;
    }

    bool moved = try_direction(dir, step, alpha, cur);
    if (!moved) {
      // Wider active set: minimum-norm hull direction, then single gradients.
      double slack = options.active_slack * (1.0 + std::abs(cur.max_j));
      std::vector<int> active;
      for (std::size_t j = 0; j < p.m; ++j)
        if (cur.j[j] >= cur.max_j - slack) active.push_back(static_cast<int>(j));
      if (active.size() > 1) {
        Eigen::MatrixXd g(p.n, static_cast<Eigen::Index>(active.size()));
        for (std::size_t a = 0; a < active.size(); ++a)
          g.col(static_cast<Eigen::Index>(a)) =
              cur.grads.col(static_cast<Eigen::Index>(active[a]));
        moved = try_direction(min_norm_hull(g), step, alpha, cur);
        for (std::size_t a = 0; !moved && a < active.size(); ++a)
          moved = try_direction(g.col(static_cast<Eigen::Index>(a)), step, alpha, cur);
      }
    }
    if (!moved) break;  // no descent direction left: stationary

    if (cur.max_j < best_obj - options.stall_tol * (1.0 + std::abs(best_obj))) {
      best_obj = cur.max_j;
      best_alpha = alpha;
      last_improvement = iter;
    } else if (cur.max_j < best_obj) {
      best_obj = cur.max_j;  // keep the best point even for tiny gains
      best_alpha = alpha;
    }
    if (iter - last_improvement >= options.stall_window) break;
  }

  sol.iterations = iter;
  sol.alpha = best_alpha;
  Evals fin = evaluate(p, sol.alpha, false);
  sol.objective = fin.max_j;
  double slack = options.active_slack * (1.0 + std::abs(fin.max_j));
  for (std::size_t j = 0; j < p.m; ++j)
    if (fin.j[j] >= fin.max_j - slack)
      sol.active_kernels.push_back(static_cast<int>(j));
  sol.eta = eta_from_certificate(p, sol.alpha, fin.j, fin.max_j,
                                 options.active_slack);
  double gamma_sq = 0.0;
  for (std::size_t j = 0; j < p.m; ++j)
    gamma_sq = std::max(gamma_sq, fin.quad[j] / p.d2[j]);
  sol.gamma = std::sqrt(std::max(0.0, gamma_sq));
  sol.kkt_residuals = kkt_from_parts(p, grams, sol.alpha, sol.eta, fin.j, fin.max_j);
  return sol;
}

std::vector<double> recover_eta(const Eigen::VectorXd& alpha,
                                const std::vector<GramMatrix>& grams,
                                const std::vector<int>& labels, double C,
                                const std::vector<double>& d_weights,
                                double active_slack) {
  Problem p = build_problem(grams, labels, C, d_weights);
  if (alpha.size() != p.n) throw DataError("recover_eta: alpha size mismatch");
  Evals e = evaluate(p, alpha, false);
  return eta_from_certificate(p, alpha, e.j, e.max_j, active_slack);
}

double compute_bias(const Eigen::VectorXd& alpha, const std::vector<int>& labels,
                    const Eigen::MatrixXd& k_combined, double C) {
  const Eigen::Index n = alpha.size();
  if (static_cast<Eigen::Index>(labels.size()) != n ||
      k_combined.rows() != n || k_combined.cols() != n)
    throw DataError("compute_bias: size mismatch");
  Eigen::VectorXd ay(n);
  for (Eigen::Index i = 0; i < n; ++i)
    ay[i] = alpha[i] * static_cast<double>(labels[static_cast<std::size_t>(i)]);
  Eigen::VectorXd f0 = k_combined * ay;

  double tol = 1e-6 * C;
  double acc = 0.0;
  int free_count = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (alpha[i] > tol && alpha[i] < C - tol) {
      acc += static_cast<double>(labels[static_cast<std::size_t>(i)]) - f0[i];
      ++free_count;
    }
  }
  if (free_count > 0) return acc / free_count;

  // Midpoint rule between the closest opposing decision values.
  bool has_pos = false, has_neg = false;
  double min_pos = 0.0, max_neg = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (labels[static_cast<std::size_t>(i)] > 0) {
      min_pos = has_pos ? std::min(min_pos, f0[i]) : f0[i];
      has_pos = true;
    } else {
      max_neg = has_neg ? std::max(max_neg, f0[i]) : f0[i];
      has_neg = true;
    }
  }
  if (has_pos && has_neg) return -0.5 * (min_pos + max_neg);
  return has_pos ? 1.0 : -1.0;  // single-class degenerate set
}

Eigen::VectorXd decision_function(const Eigen::VectorXd& alpha,
                                  const std::vector<int>& labels,
                                  const Eigen::MatrixXd& k_test_train,
                                  double bias) {
  const Eigen::Index n = alpha.size();
  if (static_cast<Eigen::Index>(labels.size()) != n || k_test_train.cols() != n)
    throw DataError("decision_function: size mismatch");
  Eigen::VectorXd ay(n);
  for (Eigen::Index i = 0; i < n; ++i)
    ay[i] = alpha[i] * static_cast<double>(labels[static_cast<std::size_t>(i)]);
  return (k_test_train * ay).array() + bias;
}

std::map<std::string, double> kkt_report(const MklSolution& solution,
                                         const std::vector<GramMatrix>& grams,
                                         const std::vector<int>& labels,
                                         double C,
                                         const std::vector<double>& d_weights) {
  Problem p = build_problem(grams, labels, C, d_weights);
  if (solution.alpha.size() != p.n)
    throw DataError("kkt_report: alpha size mismatch");
  if (solution.eta.size() != p.m)
    throw DataError("kkt_report: eta must have one weight per kernel");
  Evals e = evaluate(p, solution.alpha, false);
  return kkt_from_parts(p, grams, solution.alpha, solution.eta, e.j, e.max_j);
}

namespace {

// Shared engine for binary and one-vs-rest selection: solves every
// (feature, task) pair, averages eta per feature over tasks, then applies the
// retain/drop rule.
FeatureKernelPairing select_engine(
    const std::map<std::string, std::vector<GramMatrix>>& per_feature_grams,
    const std::vector<std::vector<int>>& task_labels, double C,
    double threshold, const SolverOptions& options) {
  if (per_feature_grams.empty()) throw DataError("mfkl_select: no features");
  if (task_labels.empty()) throw DataError("mfkl_select: no label tasks");

  std::vector<std::string> features;
  for (const auto& [name, grams] : per_feature_grams) {
    if (grams.empty())
      throw DataError("mfkl_select: feature '" + name + "' has no kernels");
    features.push_back(name);
  }

  const std::size_t n_tasks = task_labels.size();
  std::vector<std::vector<double>> mean_eta(features.size());
  std::vector<std::string> failures(features.size() * n_tasks);
  std::vector<std::vector<double>> etas(features.size() * n_tasks);

  parallel_for(features.size() * n_tasks, [&](std::size_t idx) {
    std::size_t f = idx / n_tasks;
    std::size_t t = idx % n_tasks;
    try {
      MklSolution s = solve_skm(per_feature_grams.at(features[f]),
                                task_labels[t], C, {}, options);
      etas[idx] = s.eta;
    } catch (const std::exception& ex) {
      failures[idx] = ex.what();
    }
  });
  for (const auto& msg : failures)
    if (!msg.empty()) throw NumericError("mfkl_select: " + msg);

  for (std::size_t f = 0; f < features.size(); ++f) {
    std::size_t m = per_feature_grams.at(features[f]).size();
    mean_eta[f].assign(m, 0.0);
    for (std::size_t t = 0; t < n_tasks; ++t) {
      const auto& eta = etas[f * n_tasks + t];
      for (std::size_t j = 0; j < m; ++j) mean_eta[f][j] += eta[j];
    }
    for (double& v : mean_eta[f]) v /= static_cast<double>(n_tasks);
  }

  FeatureKernelPairing out;
  double beta_total = 0.0;
  for (std::size_t f = 0; f < features.size(); ++f) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < mean_eta[f].size(); ++j)
      if (mean_eta[f][j] > mean_eta[f][best]) best = j;
    double best_eta = mean_eta[f][best];
    if (best_eta <= threshold) {
      out.dropped_features.push_back(features[f]);
      continue;
    }
    SelectedPair pair;
    pair.feature = features[f];
    pair.kernel_index = static_cast<int>(best);
    pair.kernel = per_feature_grams.at(features[f])[best].spec;
    pair.eta = best_eta;
    out.pairs.push_back(pair);
    beta_total += best_eta;
  }
  if (out.pairs.empty())
    throw NumericError(
        "mfkl_select: every feature fell below the eta threshold " +
        std::to_string(threshold) + "; lower the threshold");
  for (auto& pair : out.pairs) pair.beta = pair.eta / beta_total;
  return out;
}

}  // namespace

FeatureKernelPairing mfkl_select(
    const std::map<std::string, std::vector<GramMatrix>>& per_feature_grams,
    const std::vector<int>& labels, double C, double threshold,
    const SolverOptions& options) {
  for (int l : labels)
    if (l != 1 && l != -1)
      throw DataError("mfkl_select: labels must be +1 or -1");
  return select_engine(per_feature_grams, {labels}, C, threshold, options);
}

FeatureKernelPairing mfkl_select_multiclass(
    const std::map<std::string, std::vector<GramMatrix>>& per_feature_grams,
    const std::vector<int>& class_labels, double C, double threshold,
    const SolverOptions& options) {
  std::vector<int> classes(class_labels);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.size() < 2)
    throw DataError("mfkl_select_multiclass: need at least 2 classes");
  std::vector<std::vector<int>> tasks;
  tasks.reserve(classes.size());
  for (int c : classes) {
    std::vector<int> y(class_labels.size());
    for (std::size_t i = 0; i < class_labels.size(); ++i)
      y[i] = class_labels[i] == c ? 1 : -1;
    tasks.push_back(std::move(y));
  }
  return select_engine(per_feature_grams, tasks, C, threshold, options);
}

}  // namespace mfkl
