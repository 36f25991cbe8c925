#include "mfkl/kernel.hpp"

#include <cmath>
#include <sstream>

#include "mfkl/errors.hpp"
#include "mfkl/parallel.hpp"

namespace mfkl {

std::string family_name(KernelFamily family) {
  switch (family) {
    case KernelFamily::Linear: return "Linear";
    case KernelFamily::Polynomial: return "Polynomial";
    case KernelFamily::Gaussian: return "Gaussian";
    case KernelFamily::Rbf: return "Rbf";
    case KernelFamily::ChiSquare: return "ChiSquare";
    case KernelFamily::RbfPlusChiSquare: return "RbfPlusChiSquare";
  }
  throw ConfigError("unknown kernel family enum value");
}

KernelFamily family_from_name(const std::string& name) {
  if (name == "Linear") return KernelFamily::Linear;
  if (name == "Polynomial") return KernelFamily::Polynomial;
  if (name == "Gaussian") return KernelFamily::Gaussian;
  if (name == "Rbf") return KernelFamily::Rbf;
  if (name == "ChiSquare") return KernelFamily::ChiSquare;
  if (name == "RbfPlusChiSquare") return KernelFamily::RbfPlusChiSquare;
  throw ConfigError("unknown kernel family: " + name);
}

std::string KernelSpec::describe() const {
  std::ostringstream os;
  os << family_name(family);
  switch (family) {
    case KernelFamily::Linear:
      os << "(c=" << c << ")";
      break;
    case KernelFamily::Polynomial:
      os << "(alpha=" << alpha << ",c=" << c << ",degree=" << degree << ")";
      break;
    case KernelFamily::Gaussian:
    case KernelFamily::Rbf:
    case KernelFamily::RbfPlusChiSquare:
      os << "(sigma=" << sigma << ")";
      break;
    case KernelFamily::ChiSquare:
      break;
  }
  return os.str();
}

void KernelSpec::validate() const {
  switch (family) {
    case KernelFamily::Linear:
      break;
    case KernelFamily::Polynomial:
      if (degree < 1) throw ConfigError("Polynomial kernel needs degree >= 1");
      if (alpha <= 0) throw ConfigError("Polynomial kernel needs alpha > 0");
      if (c < 0) throw ConfigError("Polynomial kernel needs c >= 0");
      break;
    case KernelFamily::Gaussian:
    case KernelFamily::Rbf:
    case KernelFamily::RbfPlusChiSquare:
      if (!(sigma > 0)) throw ConfigError(family_name(family) + " kernel needs sigma > 0");
      break;
    case KernelFamily::ChiSquare:
      break;
  }
}

namespace {

double chi_square_value(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] < 0 || y[i] < 0)
      throw DataError("chi-square kernel requires non-negative inputs");
    double num = (x[i] - y[i]) * (x[i] - y[i]);
    double den = 0.5 * (x[i] + y[i]);
    if (den > 0) acc += num / den;  // 0/0 summand contributes nothing
  }
  return 1.0 - acc;
}

}  // namespace

double eval_kernel(const KernelSpec& spec, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& y) {
  if (x.size() != y.size())
    throw DataError("eval_kernel: dimension mismatch (" + std::to_string(x.size()) +
                    " vs " + std::to_string(y.size()) + ")");
  double v = 0.0;
  switch (spec.family) {
    case KernelFamily::Linear:
      v = x.dot(y) + spec.c;
      break;
    case KernelFamily::Polynomial:
      v = std::pow(spec.alpha * x.dot(y) + spec.c, spec.degree);
      break;
    case KernelFamily::Gaussian:
      v = std::exp(-(x - y).squaredNorm() / (2.0 * spec.sigma * spec.sigma));
      break;
    case KernelFamily::Rbf:
      v = std::exp(-(x - y).norm() / (2.0 * spec.sigma * spec.sigma));
      break;
    case KernelFamily::ChiSquare:
      v = chi_square_value(x, y);
      break;
    case KernelFamily::RbfPlusChiSquare:
      v = chi_square_value(x, y) +
          std::exp(-(x - y).norm() / (2.0 * spec.sigma * spec.sigma));
      break;
  }
  if (!std::isfinite(v))
    throw NumericError("eval_kernel: non-finite value for " + spec.describe());
  return v;
}

GramMatrix gram(const KernelSpec& spec, const SampleMatrix& x,
                const SampleMatrix& y) {
  if (x.cols() != y.cols())
    throw DataError("gram: sample dimension mismatch");
  const bool self = (&x == &y);
  GramMatrix out;
  out.spec = spec;
  out.row_ids = x.ids;
  out.col_ids = y.ids;
  out.values.resize(x.rows(), y.rows());

  const Eigen::Index n = x.rows();
  const Eigen::Index m = y.rows();
  enum class Kind { None, Data, Numeric };
  std::vector<std::pair<Kind, std::string>> errors(
      static_cast<std::size_t>(n), {Kind::None, {}});
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t r) {
    auto i = static_cast<Eigen::Index>(r);
    try {
      Eigen::VectorXd xi = x.values.row(i);
      Eigen::Index j0 = self ? i : 0;
      for (Eigen::Index j = j0; j < m; ++j) {
        out.values(i, j) = eval_kernel(spec, xi, y.values.row(j));
      }
    } catch (const NumericError& e) {
      errors[r] = {Kind::Numeric, e.what()};
    } catch (const std::exception& e) {
      errors[r] = {Kind::Data, e.what()};
    }
  });
  for (const auto& [kind, msg] : errors) {
    if (kind == Kind::Data) throw DataError("gram: " + msg);
    if (kind == Kind::Numeric) throw NumericError("gram: " + msg);
  }

  if (self) {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < i; ++j) out.values(i, j) = out.values(j, i);
  }
  return out;
}

GramMatrix gram(const KernelSpec& spec, const SampleMatrix& x) {
  return gram(spec, x, x);
}

GramMatrix unit_trace_normalize(const GramMatrix& k) {
  if (!k.square()) throw DataError("unit_trace_normalize: Gram must be square");
  double tr = k.values.trace();
  if (!(tr > 0))
    throw NumericError("unit_trace_normalize: trace must be positive, got " +
                       std::to_string(tr));
  GramMatrix out = k;
  out.values *= static_cast<double>(k.rows()) / tr;
  out.normalized = true;
  return out;
}

GramMatrix combine(const std::vector<double>& weights,
                   const std::vector<GramMatrix>& grams) {
  if (grams.empty()) throw DataError("combine: no Gram matrices");
  if (weights.size() != grams.size())
    throw DataError("combine: weight/Gram count mismatch");
  for (double w : weights)
    if (w < 0) throw DataError("combine: negative weight");
  const auto& first = grams.front();
  GramMatrix out;
  out.values = Eigen::MatrixXd::Zero(first.rows(), first.cols());
  out.row_ids = first.row_ids;
  out.col_ids = first.col_ids;
  out.normalized = false;
  for (std::size_t j = 0; j < grams.size(); ++j) {
    const auto& g = grams[j];
    if (g.rows() != first.rows() || g.cols() != first.cols())
      throw DataError("combine: Gram shape mismatch at index " + std::to_string(j));
    if (g.row_ids != first.row_ids || g.col_ids != first.col_ids)
      throw DataError("combine: Gram id mismatch at index " + std::to_string(j));
    out.values += weights[j] * g.values;
  }
  return out;
}

PsdReport check_psd(const GramMatrix& k, double tol) {
  if (!k.square()) throw DataError("check_psd: Gram must be square");
  PsdReport rep;
  rep.symmetry_defect = (k.values - k.values.transpose()).cwiseAbs().maxCoeff();
  Eigen::MatrixXd sym = 0.5 * (k.values + k.values.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw NumericError("check_psd: eigenvalue computation failed");
  rep.min_eigenvalue = es.eigenvalues().minCoeff();
  rep.max_eigenvalue = es.eigenvalues().maxCoeff();
  rep.pass = rep.min_eigenvalue >= -tol * std::max(1.0, std::abs(rep.max_eigenvalue)) &&
             rep.symmetry_defect <= tol;
  return rep;
}

}  // namespace mfkl
