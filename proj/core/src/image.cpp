#include "mfkl/image.hpp"

#include <algorithm>
#include <cmath>

#include "mfkl/errors.hpp"
#include "mfkl/parallel.hpp"

namespace mfkl::img {

namespace {

void require_valid(const GrayImage& in, const char* who) {
  if (!in.valid()) throw DataError(std::string(who) + ": invalid image");
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Catmull-Rom weight (bicubic with a = -0.5).
double cubic_weight(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return (((t - 5.0) * t + 8.0) * t - 4.0) * a;
  return 0.0;
}

int clamp_index(int i, int n) { return std::clamp(i, 0, n - 1); }

// Whole-sample mirror: ... 2 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
int mirror_index(int i, int n) {
  if (n == 1) return 0;
  int period = 2 * n;
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - 1 - m;
}

}  // namespace

GrayImage power_law(const GrayImage& in, double gamma, double k) {
  require_valid(in, "power_law");
  if (!(gamma > 0)) throw ConfigError("power_law: gamma must be positive");
  GrayImage out = in;
  for (auto& p : out.pixels) p = clamp01(k * std::pow(p, gamma));
  return out;
}

GrayImage bicubic_resample(const GrayImage& in, double factor) {
  return bicubic_resample(in, factor, factor);
}

GrayImage bicubic_resample(const GrayImage& in, double factor_x,
                           double factor_y) {
  require_valid(in, "bicubic_resample");
  if (!(factor_x > 0) || !(factor_y > 0))
    throw ConfigError("bicubic_resample: factor must be positive");
  GrayImage out;
  out.width = std::max(1, static_cast<int>(std::lround(in.width * factor_x)));
  out.height = std::max(1, static_cast<int>(std::lround(in.height * factor_y)));
  out.pixels.resize(static_cast<std::size_t>(out.width) * out.height);

  double sx = static_cast<double>(in.width) / out.width;
  double sy = static_cast<double>(in.height) / out.height;

  parallel_for(static_cast<std::size_t>(out.height), [&](std::size_t row) {
    int oy = static_cast<int>(row);
    double src_y = (oy + 0.5) * sy - 0.5;
    int y0 = static_cast<int>(std::floor(src_y));
    double fy = src_y - y0;
    double wy[4];
    for (int t = 0; t < 4; ++t) wy[t] = cubic_weight(fy - (t - 1));
    for (int ox = 0; ox < out.width; ++ox) {
      double src_x = (ox + 0.5) * sx - 0.5;
      int x0 = static_cast<int>(std::floor(src_x));
      double fx = src_x - x0;
      double wx[4];
      for (int t = 0; t < 4; ++t) wx[t] = cubic_weight(fx - (t - 1));
      double acc = 0.0;
      for (int ty = 0; ty < 4; ++ty) {
        int yy = clamp_index(y0 + ty - 1, in.height);
        double rowacc = 0.0;
        for (int tx = 0; tx < 4; ++tx) {
          int xx = clamp_index(x0 + tx - 1, in.width);
          rowacc += wx[tx] * in.at(xx, yy);
        }
        acc += wy[ty] * rowacc;
      }
      out.at(ox, oy) = clamp01(acc);
    }
  });
  return out;
}

GrayImage gaussian_blur(const GrayImage& in, double sigma) {
  require_valid(in, "gaussian_blur");
  if (sigma < 0) throw ConfigError("gaussian_blur: sigma must be non-negative");
  if (sigma == 0.0) return in;

  int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    double w = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
    taps[static_cast<std::size_t>(i + radius)] = w;
    sum += w;
  }
  for (auto& w : taps) w /= sum;

  // Horizontal pass.
  GrayImage mid = in;
  parallel_for(static_cast<std::size_t>(in.height), [&](std::size_t row) {
    int y = static_cast<int>(row);
    for (int x = 0; x < in.width; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += taps[static_cast<std::size_t>(i + radius)] *
               in.at(mirror_index(x + i, in.width), y);
      mid.at(x, y) = acc;
    }
  });
  // Vertical pass.
  GrayImage out = mid;
  parallel_for(static_cast<std::size_t>(in.height), [&](std::size_t row) {
    int y = static_cast<int>(row);
    for (int x = 0; x < in.width; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += taps[static_cast<std::size_t>(i + radius)] *
               mid.at(x, mirror_index(y + i, in.height));
      out.at(x, y) = acc;
    }
  });
  return out;
}

IntensityHistogram intensity_histogram(const std::vector<GrayImage>& images,
                                       double eps) {
  if (images.empty()) throw DataError("intensity_histogram: no images");
  if (eps < 0) throw ConfigError("intensity_histogram: eps must be non-negative");
  IntensityHistogram h;
  h.smoothing_eps = eps;
  for (const auto& im : images) {
    require_valid(im, "intensity_histogram");
    for (double p : im.pixels) {
      int bin = std::min(255, static_cast<int>(std::floor(clamp01(p) * 256.0)));
      h.bins[static_cast<std::size_t>(bin)] += 1.0;
    }
  }
  double total = 0.0;
  for (auto& b : h.bins) {
    b += eps;
    total += b;
  }
  if (!(total > 0)) throw NumericError("intensity_histogram: empty distribution");
  for (auto& b : h.bins) b /= total;
  return h;
}

double kl_divergence(const IntensityHistogram& p, const IntensityHistogram& q,
                     bool symmetric) {
  auto one_sided = [](const IntensityHistogram& a, const IntensityHistogram& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.bins.size(); ++i) {
      if (a.bins[i] <= 0.0) continue;
      if (b.bins[i] <= 0.0)
        throw NumericError("kl_divergence: zero bin in q against nonzero p; "
                           "use histogram smoothing");
      acc += a.bins[i] * std::log(a.bins[i] / b.bins[i]);
    }
    return acc;
  };
  double d = one_sided(p, q);
  if (symmetric) d += one_sided(q, p);
  return d;
}

SigmaEstimate estimate_sigma(const std::vector<GrayImage>& gallery,
                             const std::vector<GrayImage>& probes,
                             double lo, double hi, double step) {
  if (gallery.empty() || probes.empty())
    throw DataError("estimate_sigma: gallery and probes must be non-empty");
  if (!(step > 0) || hi < lo)
    throw ConfigError("estimate_sigma: need step > 0 and hi >= lo");

  IntensityHistogram probe_hist = intensity_histogram(probes);

  std::vector<double> sigmas;
  for (double s = lo; s <= hi + 1e-12; s += step) sigmas.push_back(s);

  std::vector<double> divergence(sigmas.size(), 0.0);
  std::vector<std::string> failures(sigmas.size());
  parallel_for(sigmas.size(), [&](std::size_t idx) {
    try {
      std::vector<GrayImage> blurred;
      blurred.reserve(gallery.size());
      for (const auto& g : gallery) blurred.push_back(gaussian_blur(g, sigmas[idx]));
      divergence[idx] =
          kl_divergence(intensity_histogram(blurred), probe_hist, /*symmetric=*/true);
    } catch (const std::exception& e) {
      failures[idx] = e.what();
    }
  });
  for (const auto& f : failures)
    if (!f.empty()) throw NumericError("estimate_sigma: " + f);

  SigmaEstimate result;
  std::size_t best = 0;
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    result.curve.emplace_back(sigmas[i], divergence[i]);
    if (divergence[i] < divergence[best]) best = i;  // strict: ties keep smaller sigma
  }
  result.sigma_opt = sigmas[best];
  return result;
}

}  // namespace mfkl::img
