#pragma once

// Shared synthetic-data helpers for the test suites.

#include <string>
#include <utility>
#include <vector>

#include "dcin/image.hpp"
#include "dcin/rng.hpp"

namespace dcin::test {

inline RgbImage random_image(Rng& rng, int w, int h, int lo = 0, int hi = 255) {
  RgbImage img(w, h);
  for (auto& v : img.data)
    v = static_cast<std::uint8_t>(rng.uniform_int(lo, hi));
  return img;
}

inline LabelMask random_label_mask(Rng& rng, int w, int h, int classes) {
  LabelMask mask(w, h);
  for (auto& v : mask.data)
    v = static_cast<std::uint8_t>(rng.uniform_int(0, classes - 1));
  return mask;
}

/// Random valid ProbMask: per pixel, positive uniforms normalized to sum 1.
inline ProbMask random_prob_mask(Rng& rng, int w, int h, int classes) {
  ProbMask mask(w, h, classes);
  for (std::size_t p = 0; p < mask.pixel_count(); ++p) {
    double sum = 0.0;
    for (int c = 0; c < classes; ++c) {
      double v = rng.uniform(1e-3, 1.0);
      mask.data[p * classes + c] = v;
      sum += v;
    }
    for (int c = 0; c < classes; ++c) mask.data[p * classes + c] /= sum;
  }
  return mask;
}

/// One-hot ProbMask matching a label mask.
inline ProbMask one_hot(const LabelMask& labels, int classes) {
  ProbMask mask(labels.width, labels.height, classes);
  for (std::size_t p = 0; p < labels.pixel_count(); ++p)
    mask.data[p * classes + labels.data[p]] = 1.0;
  return mask;
}

}  // namespace dcin::test
