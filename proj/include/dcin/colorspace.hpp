#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "dcin/error.hpp"
#include "dcin/image.hpp"

namespace dcin {

/// Planar real-valued l-alpha-beta raster (Reinhard et al. 2001 color space).
struct LabImage {
  int width = 0;
  int height = 0;
  std::array<std::vector<double>, 3> planes;  // l, alpha, beta

  LabImage() = default;
  LabImage(int w, int h) : width(w), height(h) {
    for (auto& p : planes) p.assign(static_cast<std::size_t>(w) * h, 0.0);
  }

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

/// Per-channel mean and population standard deviation in l-alpha-beta.
struct ChannelStats {
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> std{0.0, 0.0, 0.0};
};

namespace detail {

// RGB -> LMS matrix from Reinhard et al., "Color Transfer between Images".
inline constexpr double kRgbToLms[3][3] = {
    {0.3811, 0.5783, 0.0402},
    {0.1967, 0.7244, 0.0782},
    {0.0241, 0.1288, 0.8444},
};

// Exact inverse of kRgbToLms. The 4-digit LMS->RGB matrix printed in the
// original article is only an approximate inverse and costs up to 2/255 on
// a round trip, so the inverse is computed from the forward matrix instead.
inline constexpr std::array<std::array<double, 3>, 3> invert3(const double m[3][3]) {
  double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
               m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
               m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  std::array<std::array<double, 3>, 3> inv{};
  inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
  inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
  inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
  inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
  inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
  inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
  inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
  inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
  inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
  return inv;
}

inline constexpr std::array<std::array<double, 3>, 3> kLmsToRgb = invert3(kRgbToLms);

// Pre-log clamp floor in normalized RGB units.
inline constexpr double kLogFloor = 1e-4;

// sigma below this is treated as flat; transfer becomes shift-only.
inline constexpr double kFlatSigma = 1e-6;

inline std::uint8_t quantize8(double v) {
  double s = std::floor(v * 255.0 + 0.5);  // round half up
  if (s < 0.0) return 0;
  if (s > 255.0) return 255;
  return static_cast<std::uint8_t>(s);
}

}  // namespace detail

/// 8-bit RGB to l-alpha-beta: scale to (0,1], clamp channels to >= 1e-4,
/// RGB->LMS, log10, then the decorrelating 1/sqrt{3,6,2} mixing transform.
inline LabImage rgb_to_lab(const RgbImage& image) {
  check_valid(image);
  const double inv_sqrt3 = 1.0 / std::sqrt(3.0);
  const double inv_sqrt6 = 1.0 / std::sqrt(6.0);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);

  LabImage out(image.width, image.height);
  const std::size_t n = image.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    double r = image.data[i * 3 + 0] / 255.0;
    double g = image.data[i * 3 + 1] / 255.0;
    double b = image.data[i * 3 + 2] / 255.0;
    r = std::max(r, detail::kLogFloor);
    g = std::max(g, detail::kLogFloor);
    b = std::max(b, detail::kLogFloor);

    using detail::kRgbToLms;
    double lm = std::log10(kRgbToLms[0][0] * r + kRgbToLms[0][1] * g + kRgbToLms[0][2] * b);
    double mm = std::log10(kRgbToLms[1][0] * r + kRgbToLms[1][1] * g + kRgbToLms[1][2] * b);
    double sm = std::log10(kRgbToLms[2][0] * r + kRgbToLms[2][1] * g + kRgbToLms[2][2] * b);

    out.planes[0][i] = (lm + mm + sm) * inv_sqrt3;
    out.planes[1][i] = (lm + mm - 2.0 * sm) * inv_sqrt6;
    out.planes[2][i] = (lm - mm) * inv_sqrt2;
  }
  return out;
}

/// Inverse of rgb_to_lab. Out-of-gamut values are clipped to [0,255]
/// (endoscopic images saturate routinely), never wrapped.
inline RgbImage lab_to_rgb(const LabImage& image) {
  if (image.width < 1 || image.height < 1)
    throw UsageError("lab image: width and height must be >= 1");
  for (const auto& p : image.planes)
    if (p.size() != image.pixel_count())
      throw UsageError("lab image: plane length != width*height");

  const double sqrt3_3 = std::sqrt(3.0) / 3.0;
  const double sqrt6_6 = std::sqrt(6.0) / 6.0;
  const double sqrt2_2 = std::sqrt(2.0) / 2.0;

  RgbImage out(image.width, image.height);
  const std::size_t n = image.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    double l = image.planes[0][i] * sqrt3_3;
    double a = image.planes[1][i] * sqrt6_6;
    double b = image.planes[2][i] * sqrt2_2;

    double lm = std::pow(10.0, l + a + b);
    double mm = std::pow(10.0, l + a - b);
    double sm = std::pow(10.0, l - 2.0 * a);

    using detail::kLmsToRgb;
    double r = kLmsToRgb[0][0] * lm + kLmsToRgb[0][1] * mm + kLmsToRgb[0][2] * sm;
    double g = kLmsToRgb[1][0] * lm + kLmsToRgb[1][1] * mm + kLmsToRgb[1][2] * sm;
    double bb = kLmsToRgb[2][0] * lm + kLmsToRgb[2][1] * mm + kLmsToRgb[2][2] * sm;

    out.data[i * 3 + 0] = detail::quantize8(r);
    out.data[i * 3 + 1] = detail::quantize8(g);
    out.data[i * 3 + 2] = detail::quantize8(bb);
  }
  return out;
}

/// Per-channel arithmetic mean and population (1/N) standard deviation.
inline ChannelStats channel_stats(const LabImage& image) {
  if (image.width < 1 || image.height < 1)
    throw UsageError("lab image: width and height must be >= 1");
  const std::size_t n = image.pixel_count();
  ChannelStats stats;
  for (int c = 0; c < 3; ++c) {
    const auto& plane = image.planes[c];
    if (plane.size() != n) throw UsageError("lab image: plane length != width*height");
    double sum = 0.0;
    for (double v : plane) sum += v;
    double mean = sum / static_cast<double>(n);
    double sq = 0.0;
    for (double v : plane) {
      double d = v - mean;
      sq += d * d;
    }
    stats.mean[c] = mean;
    stats.std[c] = std::sqrt(sq / static_cast<double>(n));
  }
  return stats;
}

/// Statistics-matching transfer in l-alpha-beta, before any quantization:
/// out = (p - mu_test) * (sigma_ref / sigma_test) + mu_ref per channel.
/// A test sigma below 1e-6 switches that channel to shift-only (scale 1).
inline LabImage transfer_lab(const LabImage& test, const ChannelStats& reference) {
  ChannelStats src = channel_stats(test);
  LabImage out(test.width, test.height);
  const std::size_t n = test.pixel_count();
  for (int c = 0; c < 3; ++c) {
    double scale =
        src.std[c] < detail::kFlatSigma ? 1.0 : reference.std[c] / src.std[c];
    double mu_src = src.mean[c];
    double mu_ref = reference.mean[c];
    for (std::size_t i = 0; i < n; ++i)
      out.planes[c][i] = (test.planes[c][i] - mu_src) * scale + mu_ref;
  }
  return out;
}

/// Reinhard color transfer: move the test image's l-alpha-beta channel
/// statistics onto the reference statistics and convert back to 8-bit RGB.
inline RgbImage reinhard_transfer(const RgbImage& test, const ChannelStats& reference) {
  for (int c = 0; c < 3; ++c)
    if (!std::isfinite(reference.mean[c]) || !std::isfinite(reference.std[c]))
      throw UsageError("reference stats must be finite");
  return lab_to_rgb(transfer_lab(rgb_to_lab(test), reference));
}

}  // namespace dcin
