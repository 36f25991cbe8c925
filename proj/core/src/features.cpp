#include "mfkl/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "mfkl/errors.hpp"

namespace mfkl::feat {

namespace {

constexpr double kPi = 3.14159265358979323846;

Eigen::VectorXd vectorize(const GrayImage& img) {
  return Eigen::Map<const Eigen::VectorXd>(img.pixels.data(),
                                           static_cast<Eigen::Index>(img.pixels.size()));
}

void check_same_size(const std::vector<GrayImage>& images) {
  for (const auto& img : images) {
    if (!img.valid()) throw DataError("feature fit: invalid image");
    if (img.width != images.front().width || img.height != images.front().height)
      throw DataError("feature fit: images must share one size");
  }
}

int argmax_abs(const Eigen::VectorXd& v) {
  int best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[best])) best = static_cast<int>(i);
  return best;
}

void orient_columns(Eigen::MatrixXd& basis) {
  for (Eigen::Index c = 0; c < basis.cols(); ++c)
    if (basis.col(c)[argmax_abs(basis.col(c))] < 0) basis.col(c) = -basis.col(c);
}

double clamped(const GrayImage& img, int x, int y) {
  x = std::clamp(x, 0, img.width - 1);
  y = std::clamp(y, 0, img.height - 1);
  return img.pixels[static_cast<std::size_t>(y) * img.width + x];
}

}  // namespace

std::string feature_name(FeatureId id) {
  switch (id) {
    case FeatureId::Lbp: return "lbp";
    case FeatureId::EigenFace: return "eigenface";
    case FeatureId::FisherFace: return "fisherface";
    case FeatureId::GaborFace: return "gaborface";
    case FeatureId::WeberFace: return "weberface";
    case FeatureId::Bow: return "bow";
    case FeatureId::Vlad: return "vlad";
  }
  throw ConfigError("unknown feature id");
}

FeatureId feature_from_name(const std::string& name) {
  if (name == "lbp") return FeatureId::Lbp;
  if (name == "eigenface") return FeatureId::EigenFace;
  if (name == "fisherface") return FeatureId::FisherFace;
  if (name == "gaborface") return FeatureId::GaborFace;
  if (name == "weberface") return FeatureId::WeberFace;
  if (name == "bow") return FeatureId::Bow;
  if (name == "vlad") return FeatureId::Vlad;
  throw ConfigError("unknown feature name '" + name + "'");
}

Eigen::VectorXd ProjectionModel::project(const GrayImage& img) const {
  if (img.width != width || img.height != height)
    throw DataError("projection: image size does not match the fitted model");
  return basis.transpose() * (vectorize(img) - mean);
}

FeatureVector lbp_histogram(const GrayImage& img, int grid_rows, int grid_cols) {
  if (!img.valid() || img.width < 3 || img.height < 3)
    throw DataError("lbp: image must be at least 3x3");
  if (grid_rows < 1 || grid_cols < 1)
    throw ConfigError("lbp: grid must be at least 1x1");
  const int iw = img.width - 2;   // interior carrying codes
  const int ih = img.height - 2;
  if (grid_cols > iw || grid_rows > ih)
    throw DataError("lbp: image too small for the requested grid");

  // Neighbor offsets, bit 0 at top-left then clockwise.
  static const int dx[8] = {-1, 0, 1, 1, 1, 0, -1, -1};
  static const int dy[8] = {-1, -1, -1, 0, 1, 1, 1, 0};

  FeatureVector out;
  out.id = FeatureId::Lbp;
  out.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid_rows) *
                                     grid_cols * 256);
  std::vector<double> cell_total(static_cast<std::size_t>(grid_rows) * grid_cols,
                                 0.0);
  for (int y = 1; y + 1 < img.height; ++y) {
    int cell_r = (y - 1) * grid_rows / ih;
    for (int x = 1; x + 1 < img.width; ++x) {
      int cell_c = (x - 1) * grid_cols / iw;
      double center = img.at(x, y);
      int code = 0;
      for (int b = 0; b < 8; ++b)
        if (img.at(x + dx[b], y + dy[b]) >= center) code |= 1 << b;
      std::size_t cell = static_cast<std::size_t>(cell_r) * grid_cols + cell_c;
      out.values[static_cast<Eigen::Index>(cell) * 256 + code] += 1.0;
      cell_total[cell] += 1.0;
    }
  }
  for (std::size_t cell = 0; cell < cell_total.size(); ++cell)
    if (cell_total[cell] > 0)
      out.values.segment(static_cast<Eigen::Index>(cell) * 256, 256) /=
          cell_total[cell];
  return out;
}

ProjectionModel fit_eigenfaces(const std::vector<GrayImage>& train,
                               double variance_keep) {
  if (train.size() < 2) throw DataError("eigenfaces: need at least 2 images");
  if (!(variance_keep > 0.0) || variance_keep > 1.0)
    throw ConfigError("eigenfaces: variance_keep must lie in (0, 1]");
  check_same_size(train);
  const Eigen::Index n = static_cast<Eigen::Index>(train.size());
  const Eigen::Index d = static_cast<Eigen::Index>(train.front().pixels.size());

  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    x.row(i) = vectorize(train[static_cast<std::size_t>(i)]).transpose();
  Eigen::VectorXd mean = x.colwise().mean();
  Eigen::MatrixXd xc = x.rowwise() - mean.transpose();

  // n x n inner-product trick: nonzero spectrum matches the pixel covariance.
  Eigen::MatrixXd small = xc * xc.transpose() / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(small);
  if (eig.info() != Eigen::Success)
    throw NumericError("eigenfaces: eigendecomposition failed");

  const Eigen::VectorXd& vals = eig.eigenvalues();  // ascending
  double max_val = vals[n - 1];
  if (!(max_val > 0)) throw DataError("eigenfaces: images carry no variance");
  double total = 0.0;
  std::vector<Eigen::Index> order;  // descending positives
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    if (vals[i] > 1e-12 * max_val) {
      order.push_back(i);
      total += vals[i];
    }
  }
  Eigen::Index rank = static_cast<Eigen::Index>(order.size());
  Eigen::Index keep = 1;
  double acc = vals[order[0]];
  while (keep < rank && acc < variance_keep * total) {
    acc += vals[order[static_cast<std::size_t>(keep)]];
    ++keep;
  }

  ProjectionModel model;
  model.width = train.front().width;
  model.height = train.front().height;
  model.mean = mean;
  model.basis.resize(d, keep);
  model.eigenvalues.resize(keep);
  for (Eigen::Index c = 0; c < keep; ++c) {
    Eigen::Index src = order[static_cast<std::size_t>(c)];
    model.eigenvalues[c] = vals[src];
    model.basis.col(c) =
        xc.transpose() * eig.eigenvectors().col(src) /
        std::sqrt(static_cast<double>(n) * vals[src]);
  }
  orient_columns(model.basis);
  return model;
}

ProjectionModel fit_fisherfaces(const std::vector<GrayImage>& train,
                                const std::vector<int>& labels,
                                std::vector<std::string>* warnings) {
  if (train.size() != labels.size())
    throw DataError("fisherfaces: one label per image required");
  std::vector<int> classes(labels);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  const Eigen::Index c = static_cast<Eigen::Index>(classes.size());
  if (c < 2) throw DataError("fisherfaces: need at least 2 classes");
  for (int cls : classes) {
    auto count = std::count(labels.begin(), labels.end(), cls);
    if (count < 2)
      throw DataError("fisherfaces: every class needs at least 2 samples");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(train.size());

  // Stage 1: PCA to at most (n - c) dimensions.
  ProjectionModel pca = fit_eigenfaces(train, 1.0);
  Eigen::Index p = std::min<Eigen::Index>(pca.basis.cols(), n - c);
  if (p < 1) throw DataError("fisherfaces: not enough samples for PCA stage");
  Eigen::MatrixXd pca_basis = pca.basis.leftCols(p);

  Eigen::MatrixXd z(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    z.row(i) =
        (pca_basis.transpose() *
         (vectorize(train[static_cast<std::size_t>(i)]) - pca.mean))
            .transpose();

  // Stage 2: Fisher discriminant in the PCA space.
  Eigen::VectorXd global_mean = z.colwise().mean();
  Eigen::MatrixXd sw = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd sb = Eigen::MatrixXd::Zero(p, p);
  for (int cls : classes) {
    Eigen::VectorXd class_mean = Eigen::VectorXd::Zero(p);
    int count = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (labels[static_cast<std::size_t>(i)] == cls) {
        class_mean += z.row(i).transpose();
        ++count;
      }
    }
    class_mean /= count;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (labels[static_cast<std::size_t>(i)] == cls) {
        Eigen::VectorXd dev = z.row(i).transpose() - class_mean;
        sw.noalias() += dev * dev.transpose();
      }
    }
    Eigen::VectorXd shift = class_mean - global_mean;
    sb.noalias() += count * shift * shift.transpose();
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> sw_probe(sw);
  double sw_trace = sw.trace();
  if (sw_probe.eigenvalues()[0] <= 1e-12 * std::max(sw_trace, 1e-300)) {
    if (sw_trace > 0) {
      sw += 1e-6 * sw_trace * Eigen::MatrixXd::Identity(p, p);
      if (warnings)
        warnings->push_back(
            "fisherfaces: singular within-class scatter regularized by "
            "1e-6 * trace * identity");
    } else {
      sw = Eigen::MatrixXd::Identity(p, p);
      if (warnings)
        warnings->push_back(
            "fisherfaces: zero within-class scatter replaced by identity");
    }
  }

  Eigen::LLT<Eigen::MatrixXd> llt(sw);
  if (llt.info() != Eigen::Success) {
    sw += (1e-6 * std::max(sw_trace, 1.0)) * Eigen::MatrixXd::Identity(p, p);
    llt.compute(sw);
    if (llt.info() != Eigen::Success)
      throw NumericError("fisherfaces: within-class scatter not factorizable");
    if (warnings)
      warnings->push_back("fisherfaces: extra scatter regularization applied");
  }
  Eigen::MatrixXd l_inv_sb =
      llt.matrixL().solve(sb);  // L^-1 Sb
  Eigen::MatrixXd m =
      llt.matrixL().solve(l_inv_sb.transpose());  // L^-1 Sb L^-T (symmetric)
  m = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  if (eig.info() != Eigen::Success)
    throw NumericError("fisherfaces: discriminant eigendecomposition failed");

  Eigen::Index keep = std::min<Eigen::Index>(c - 1, p);
  ProjectionModel model;
  model.width = pca.width;
  model.height = pca.height;
  model.mean = pca.mean;
  model.basis.resize(pca.basis.rows(), keep);
  model.eigenvalues.resize(keep);
  for (Eigen::Index k = 0; k < keep; ++k) {
    Eigen::Index src = p - 1 - k;  // descending
    Eigen::VectorXd w = llt.matrixU().solve(eig.eigenvectors().col(src));
    Eigen::VectorXd dir = pca_basis * w;
    double norm = dir.norm();
    if (norm > 0) dir /= norm;
    model.basis.col(k) = dir;
    model.eigenvalues[k] = std::max(0.0, eig.eigenvalues()[src]);
  }
  orient_columns(model.basis);
  return model;
}

FeatureVector gabor_face(const GrayImage& img, const std::vector<int>& scales,
                         int orientations_count, double sigma, double k_max,
                         double f) {
  if (!img.valid()) throw DataError("gabor: invalid image");
  if (scales.empty() || orientations_count < 1)
    throw ConfigError("gabor: empty scale or orientation set");
  if (!(sigma > 0) || !(k_max > 0) || !(f > 0))
    throw ConfigError("gabor: sigma, k_max and f must be positive");

  const int w = img.width, h = img.height;
  const int out_w = (w + 3) / 4, out_h = (h + 3) / 4;
  FeatureVector out;
  out.id = FeatureId::GaborFace;
  out.values.resize(static_cast<Eigen::Index>(scales.size()) *
                    orientations_count * out_w * out_h);

  Eigen::Index cursor = 0;
  for (int v : scales) {
    double kv = k_max / std::pow(f, v);
    int radius = static_cast<int>(std::ceil(3.0 * sigma / kv));
    radius = std::min(radius, std::max(w, h));
    const int side = 2 * radius + 1;
    for (int mu = 0; mu < orientations_count; ++mu) {
      double phi = kPi * mu / orientations_count;
      double kx = kv * std::cos(phi), ky = kv * std::sin(phi);

      // Sample the wavelet; then shift the carrier so the truncated kernel
      // sums to exactly zero (constant input -> zero response).
      Eigen::MatrixXd env(side, side), cosw(side, side), sinw(side, side);
      double env_sum = 0.0, cos_sum = 0.0, sin_sum = 0.0;
      for (int yy = -radius; yy <= radius; ++yy) {
        for (int xx = -radius; xx <= radius; ++xx) {
          double r2 = static_cast<double>(xx) * xx + static_cast<double>(yy) * yy;
          double e = (kv * kv / (sigma * sigma)) *
                     std::exp(-kv * kv * r2 / (2.0 * sigma * sigma));
          double phase = kx * xx + ky * yy;
          env(yy + radius, xx + radius) = e;
          cosw(yy + radius, xx + radius) = std::cos(phase);
          sinw(yy + radius, xx + radius) = std::sin(phase);
          env_sum += e;
          cos_sum += e * std::cos(phase);
          sin_sum += e * std::sin(phase);
        }
      }
      double cos_dc = env_sum > 0 ? cos_sum / env_sum : 0.0;
      double sin_dc = env_sum > 0 ? sin_sum / env_sum : 0.0;

      for (int oy = 0; oy < out_h; ++oy) {
        int y = oy * 4;
        for (int ox = 0; ox < out_w; ++ox) {
          int x = ox * 4;
          double re = 0.0, im = 0.0;
          for (int yy = -radius; yy <= radius; ++yy) {
            for (int xx = -radius; xx <= radius; ++xx) {
              double p = clamped(img, x - xx, y - yy);
              double e = env(yy + radius, xx + radius);
              re += p * e * (cosw(yy + radius, xx + radius) - cos_dc);
              im += p * e * (sinw(yy + radius, xx + radius) - sin_dc);
            }
          }
          out.values[cursor + static_cast<Eigen::Index>(oy) * out_w + ox] =
              std::hypot(re, im);
        }
      }
      cursor += static_cast<Eigen::Index>(out_w) * out_h;
    }
  }

  double norm = out.values.norm();
  if (norm > 1e-12) out.values /= norm;
  return out;
}

FeatureVector weber_face(const GrayImage& img, double alpha_w) {
  if (!img.valid()) throw DataError("weber: invalid image");
  static const int dx[8] = {-1, 0, 1, 1, 1, 0, -1, -1};
  static const int dy[8] = {-1, -1, -1, 0, 1, 1, 1, 0};
  FeatureVector out;
  out.id = FeatureId::WeberFace;
  out.values.resize(static_cast<Eigen::Index>(img.width) * img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double center = img.at(x, y);
      double excitation = 0.0;
      for (int b = 0; b < 8; ++b)
        excitation += (center - clamped(img, x + dx[b], y + dy[b])) /
                      std::max(center, 1e-3);
      out.values[static_cast<Eigen::Index>(y) * img.width + x] =
          std::atan(alpha_w * excitation);
    }
  }
  return out;
}

std::vector<Eigen::VectorXd> dense_patch_descriptors(const GrayImage& img,
                                                     int patch, int stride) {
  if (!img.valid()) throw DataError("descriptors: invalid image");
  if (patch < 4 || patch % 4 != 0)
    throw ConfigError("descriptors: patch must be a positive multiple of 4");
  if (stride < 1) throw ConfigError("descriptors: stride must be >= 1");
  if (img.width < patch || img.height < patch)
    throw DataError("descriptors: image smaller than the patch size");

  const int w = img.width, h = img.height;
  std::vector<double> gx(static_cast<std::size_t>(w) * h),
      gy(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      gx[static_cast<std::size_t>(y) * w + x] =
          0.5 * (clamped(img, x + 1, y) - clamped(img, x - 1, y));
      gy[static_cast<std::size_t>(y) * w + x] =
          0.5 * (clamped(img, x, y + 1) - clamped(img, x, y - 1));
    }
  }

  const int cell = patch / 4;
  std::vector<Eigen::VectorXd> out;
  for (int y0 = 0; y0 + patch <= h; y0 += stride) {
    for (int x0 = 0; x0 + patch <= w; x0 += stride) {
      Eigen::VectorXd desc = Eigen::VectorXd::Zero(128);
      for (int py = 0; py < patch; ++py) {
        for (int px = 0; px < patch; ++px) {
          std::size_t at = static_cast<std::size_t>(y0 + py) * w + (x0 + px);
          double mag = std::hypot(gx[at], gy[at]);
          if (mag <= 0) continue;
          double theta = std::atan2(gy[at], gx[at]);  // (-pi, pi]
          int bin = static_cast<int>((theta + kPi) * (8.0 / (2.0 * kPi)));
          bin = std::clamp(bin, 0, 7);
          int cr = py / cell, cc = px / cell;
          desc[(cr * 4 + cc) * 8 + bin] += mag;
        }
      }
      double norm = desc.norm();
      if (norm > 1e-12) {
        desc /= norm;
        desc = desc.cwiseMin(0.2);
        norm = desc.norm();
        if (norm > 1e-12) desc /= norm;
      } else {
        desc.setZero();
      }
      out.push_back(std::move(desc));
    }
  }
  return out;
}

namespace {

// Uniform double in [0, 1) from the raw engine output (keeps the seeding
// behavior identical across standard library implementations).
double unit_draw(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

}  // namespace

Codebook fit_codebook(const std::vector<Eigen::VectorXd>& descriptors, int k,
                      std::uint64_t seed) {
  if (k < 1) throw ConfigError("codebook: k must be >= 1");
  if (descriptors.size() < static_cast<std::size_t>(k))
    throw DataError("codebook: fewer descriptors than clusters");
  const Eigen::Index d = descriptors.front().size();
  for (const auto& v : descriptors)
    if (v.size() != d) throw DataError("codebook: descriptor dims differ");
  const std::size_t n = descriptors.size();

  std::mt19937_64 rng(seed);
  Eigen::MatrixXd centers(k, d);

  // k-means++ seeding.
  std::vector<double> dist2(n, std::numeric_limits<double>::infinity());
  std::size_t first = static_cast<std::size_t>(unit_draw(rng) * n);
  if (first >= n) first = n - 1;
  centers.row(0) = descriptors[first].transpose();
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double dd = (descriptors[i] - centers.row(c - 1).transpose()).squaredNorm();
      dist2[i] = std::min(dist2[i], dd);
      total += dist2[i];
    }
    std::size_t pick = 0;
    if (total > 0) {
      double target = unit_draw(rng) * total, acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += dist2[i];
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<std::size_t>(unit_draw(rng) * n);
      if (pick >= n) pick = n - 1;
    }
    centers.row(c) = descriptors[pick].transpose();
  }

  // Lloyd iterations.
  std::vector<int> assign(n, 0);
  double prev_inertia = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 100; ++it) {
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (descriptors[i] - centers.row(0).transpose()).squaredNorm();
      for (int c = 1; c < k; ++c) {
        double dd = (descriptors[i] - centers.row(c).transpose()).squaredNorm();
        if (dd < best_d) {
          best_d = dd;
          best = c;
        }
      }
      assign[i] = best;
      inertia += best_d;
    }

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, d);
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(assign[i]) += descriptors[i].transpose();
      ++counts[static_cast<std::size_t>(assign[i])];
    }
    std::vector<bool> taken(n, false);
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
      } else {
        // Re-seed an empty cluster with the point farthest from its center.
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (taken[i]) continue;
          double dd =
              (descriptors[i] - centers.row(assign[i]).transpose()).squaredNorm();
          if (dd > far_d) {
            far_d = dd;
            far = i;
          }
        }
        taken[far] = true;
        centers.row(c) = descriptors[far].transpose();
      }
    }

    if (std::isfinite(prev_inertia) &&
        std::abs(prev_inertia - inertia) <= 1e-6 * std::max(prev_inertia, 1e-300))
      break;
    prev_inertia = inertia;
  }

  Codebook book;
  book.centers = std::move(centers);
  book.seed = seed;
  book.trained_on = "k-means++ over " + std::to_string(n) + " descriptors";
  return book;
}

namespace {

int nearest_center(const Eigen::VectorXd& v, const Codebook& book) {
  int best = 0;
  double best_d = (v - book.centers.row(0).transpose()).squaredNorm();
  for (Eigen::Index c = 1; c < book.k(); ++c) {
    double dd = (v - book.centers.row(c).transpose()).squaredNorm();
    if (dd < best_d) {  // strict: ties keep the lowest index
      best_d = dd;
      best = static_cast<int>(c);
    }
  }
  return best;
}

void check_encode_inputs(const std::vector<Eigen::VectorXd>& descriptors,
                         const Codebook& book, const char* what) {
  if (descriptors.empty())
    throw DataError(std::string(what) + ": empty descriptor list");
  if (book.k() < 1) throw DataError(std::string(what) + ": empty codebook");
  for (const auto& v : descriptors)
    if (v.size() != book.dim())
      throw DataError(std::string(what) + ": descriptor dim differs from codebook");
}

}  // namespace

FeatureVector bow_encode(const std::vector<Eigen::VectorXd>& descriptors,
                         const Codebook& codebook) {
  check_encode_inputs(descriptors, codebook, "bow");
  FeatureVector out;
  out.id = FeatureId::Bow;
  out.values = Eigen::VectorXd::Zero(codebook.k());
  for (const auto& v : descriptors) out.values[nearest_center(v, codebook)] += 1.0;
  out.values /= static_cast<double>(descriptors.size());
  return out;
}

FeatureVector vlad_encode(const std::vector<Eigen::VectorXd>& descriptors,
                          const Codebook& codebook) {
  check_encode_inputs(descriptors, codebook, "vlad");
  const Eigen::Index d = codebook.dim();
  FeatureVector out;
  out.id = FeatureId::Vlad;
  out.values = Eigen::VectorXd::Zero(codebook.k() * d);
  for (const auto& v : descriptors) {
    int c = nearest_center(v, codebook);
    out.values.segment(c * d, d) += v - codebook.centers.row(c).transpose();
  }
  for (Eigen::Index i = 0; i < out.values.size(); ++i) {
    double v = out.values[i];
    out.values[i] = (v < 0 ? -1.0 : 1.0) * std::sqrt(std::abs(v));
  }
  double norm = out.values.norm();
  if (norm > 1e-12) out.values /= norm;
  else out.values.setZero();
  return out;
}

FeatureTable read_feature_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open feature csv '" + path + "'");
  FeatureTable table;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::stringstream ss(line);
    std::string token;
    if (!std::getline(ss, token, ',') || token.empty())
      throw DataError(path + ":" + std::to_string(line_no) + ": missing sample id");
    table.ids.push_back(token);
    if (!std::getline(ss, token, ','))
      throw DataError(path + ":" + std::to_string(line_no) + ": missing label");
    if (token == "?") {
      table.labels.push_back(0);
      table.labeled.push_back(false);
    } else {
      try {
        std::size_t used = 0;
        int label = std::stoi(token, &used);
        if (used != token.size()) throw std::invalid_argument(token);
        table.labels.push_back(label);
        table.labeled.push_back(true);
      } catch (const std::exception&) {
        throw DataError(path + ":" + std::to_string(line_no) + ": bad label '" +
                        token + "'");
      }
    }
    std::vector<double> row;
    while (std::getline(ss, token, ',')) {
      try {
        std::size_t used = 0;
        double v = std::stod(token, &used);
        if (used != token.size() || !std::isfinite(v))
          throw std::invalid_argument(token);
        row.push_back(v);
      } catch (const std::exception&) {
        throw DataError(path + ":" + std::to_string(line_no) + ": bad value '" +
                        token + "'");
      }
    }
    if (row.empty())
      throw DataError(path + ":" + std::to_string(line_no) + ": no feature values");
    if (!rows.empty() && row.size() != rows.front().size())
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": inconsistent feature dimension");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("feature csv '" + path + "' is empty");
  table.values.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          rows[i][j];
  return table;
}

void write_feature_csv(const std::string& path, const FeatureTable& table) {
  if (table.ids.size() != static_cast<std::size_t>(table.values.rows()) ||
      table.labels.size() != table.ids.size() ||
      table.labeled.size() != table.ids.size())
    throw DataError("feature csv write: inconsistent table");
  std::ofstream out(path);
  if (!out) throw DataError("cannot write feature csv '" + path + "'");
  char buf[64];
  for (std::size_t i = 0; i < table.ids.size(); ++i) {
    out << table.ids[i] << ',';
    if (table.labeled[i])
      out << table.labels[i];
    else
      out << '?';
    for (Eigen::Index j = 0; j < table.values.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g",
                    table.values(static_cast<Eigen::Index>(i), j));
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw DataError("failed writing feature csv '" + path + "'");
}

}  // namespace mfkl::feat
