#pragma once

#include <array>
#include <string>
#include <vector>

namespace mfkl::img {

// 8-bit-derived grayscale image held as doubles in [0, 1], row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;  // size == width * height

  double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  double& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  bool valid() const {
    return width > 0 && height > 0 &&
           pixels.size() == static_cast<std::size_t>(width) * height;
  }
};

// 256-bin intensity distribution; sums to 1 after smoothing.
struct IntensityHistogram {
  std::array<double, 256> bins{};
  double smoothing_eps = 0.0;
};

struct SigmaEstimate {
  double sigma_opt = 0.0;
  std::vector<std::pair<double, double>> curve;  // (sigma, symmetric KL)
};

// Power-law (gamma) intensity transform: clamp(k * p^gamma, 0, 1).
GrayImage power_law(const GrayImage& in, double gamma = 1.25, double k = 1.0);

// Catmull-Rom bicubic resampling (a = -0.5), edge-clamped, output clamped to
// [0, 1]. `factor` scales both dimensions; output sizes are rounded and at
// least 1. Throws ConfigError when factor <= 0, DataError on invalid input.
GrayImage bicubic_resample(const GrayImage& in, double factor);

// Same resampling with independent horizontal/vertical factors; used to hit
// an exact target size regardless of the input aspect ratio.
GrayImage bicubic_resample(const GrayImage& in, double factor_x,
                           double factor_y);

// Separable Gaussian blur with kernel radius ceil(3*sigma), taps renormalized
// to sum 1, whole-sample mirrored borders (mass-preserving). sigma == 0 is
// the identity. Throws ConfigError when sigma < 0.
GrayImage gaussian_blur(const GrayImage& in, double sigma);

// Pooled 256-bin histogram over a set of images; bin index is
// min(255, floor(p * 256)). Every bin gets +eps, then the whole histogram is
// renormalized to sum 1.
IntensityHistogram intensity_histogram(const std::vector<GrayImage>& images,
                                       double eps = 1e-10);

// Kullback-Leibler divergence D(p || q); symmetric variant returns
// D(p || q) + D(q || p). Zero p-bins contribute nothing.
double kl_divergence(const IntensityHistogram& p, const IntensityHistogram& q,
                     bool symmetric);

// Scans sigma over [lo, hi] in steps, blurring the (already downsampled)
// gallery at each sigma and measuring the symmetric KL divergence between the
// pooled gallery histogram and the pooled probe histogram. Returns the
// arg-min sigma (ties resolved toward the smaller sigma) plus the full curve.
// Grid points are processed in parallel.
SigmaEstimate estimate_sigma(const std::vector<GrayImage>& gallery,
                             const std::vector<GrayImage>& probes,
                             double lo = 0.5, double hi = 3.0,
                             double step = 0.05);

// --- File I/O -------------------------------------------------------------
// Binary PGM (P5, maxval 255) and 8-bit grayscale PNG. Loading maps byte v to
// v / 255.0; saving rounds clamp(p, 0, 1) * 255.

GrayImage read_image(const std::string& path);  // dispatches on magic bytes
GrayImage read_pgm(const std::string& path);
GrayImage read_png(const std::string& path);
void write_pgm(const GrayImage& image, const std::string& path);
void write_png(const GrayImage& image, const std::string& path);

}  // namespace mfkl::img
