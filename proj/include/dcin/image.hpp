#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dcin/error.hpp"

namespace dcin {

/// Interleaved 8-bit RGB raster, row major. data.size() == width*height*3.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  RgbImage() = default;
  RgbImage(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, fill) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

  std::uint8_t& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }

  bool operator==(const RgbImage&) const = default;
};

/// Per-pixel integer class labels, row major.
struct LabelMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  LabelMask() = default;
  LabelMask(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

  std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }

  bool operator==(const LabelMask&) const = default;
};

/// Per-pixel class-probability map, row major, class fastest.
/// Valid masks have entries in [0,1] that sum to 1 per pixel.
struct ProbMask {
  int width = 0;
  int height = 0;
  int classes = 0;
  std::vector<double> data;

  ProbMask() = default;
  ProbMask(int w, int h, int c, double fill = 0.0)
      : width(w),
        height(h),
        classes(c),
        data(static_cast<std::size_t>(w) * h * c, fill) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

  double& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * classes + c];
  }
  double at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * classes + c];
  }

  bool operator==(const ProbMask&) const = default;
};

inline void check_valid(const RgbImage& image, const char* what = "image") {
  if (image.width < 1 || image.height < 1)
    throw UsageError(std::string(what) + ": width and height must be >= 1");
  if (image.data.size() != static_cast<std::size_t>(image.width) * image.height * 3)
    throw UsageError(std::string(what) + ": data length != width*height*3");
}

inline void check_valid(const LabelMask& mask, const char* what = "mask") {
  if (mask.width < 1 || mask.height < 1)
    throw UsageError(std::string(what) + ": width and height must be >= 1");
  if (mask.data.size() != static_cast<std::size_t>(mask.width) * mask.height)
    throw UsageError(std::string(what) + ": data length != width*height");
}

inline void check_valid(const ProbMask& mask, const char* what = "prob mask") {
  if (mask.width < 1 || mask.height < 1)
    throw UsageError(std::string(what) + ": width and height must be >= 1");
  if (mask.classes < 2)
    throw UsageError(std::string(what) + ": needs at least 2 classes");
  if (mask.data.size() !=
      static_cast<std::size_t>(mask.width) * mask.height * mask.classes)
    throw UsageError(std::string(what) + ": data length != width*height*classes");
}

/// Full invariant check (entries in [0,1], per-pixel sums == 1 +- 1e-6).
/// O(N); used at I/O boundaries rather than on every library call.
inline bool is_normalized(const ProbMask& mask, double tol = 1e-6) {
  for (std::size_t p = 0; p < mask.pixel_count(); ++p) {
    double sum = 0.0;
    for (int c = 0; c < mask.classes; ++c) {
      double v = mask.data[p * mask.classes + c];
      if (v < 0.0 || v > 1.0) return false;
      sum += v;
    }
    if (sum < 1.0 - tol || sum > 1.0 + tol) return false;
  }
  return true;
}

}  // namespace dcin
