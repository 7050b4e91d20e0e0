#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "dcin/error.hpp"
#include "dcin/image.hpp"

namespace dcin {

struct LossWeights {
  double lambda1 = 0.3;
  double lambda2 = 0.7;
  double lambda3 = 1.0;
};

struct LossBreakdown {
  double dice1 = 0.0;
  double ce1 = 0.0;
  double dice2 = 0.0;
  double ce2 = 0.0;
  double mse = 0.0;
  double total = 0.0;
};

/// Gradients of the total loss with respect to every probability entry,
/// laid out exactly like ProbMask::data. Entries are treated as free
/// variables; simplex re-normalization is the caller's concern.
struct CqgGradients {
  std::vector<double> pred1;
  std::vector<double> pred2;
};

namespace detail {

inline constexpr double kDiceEps = 1e-6;
inline constexpr double kCeFloor = 1e-7;

inline void check_pair(const ProbMask& pred, const LabelMask& gt) {
  check_valid(pred);
  check_valid(gt);
  if (pred.width != gt.width || pred.height != gt.height)
    throw UsageError("prediction and ground truth dimensions differ");
  for (std::uint8_t label : gt.data)
    if (label >= pred.classes)
      throw UsageError("ground-truth label " + std::to_string(label) +
                       " out of range for " + std::to_string(pred.classes) + " classes");
}

inline void check_pair(const ProbMask& a, const ProbMask& b) {
  check_valid(a);
  check_valid(b);
  if (a.width != b.width || a.height != b.height || a.classes != b.classes)
    throw UsageError("prediction mask shapes differ");
}

// Per-class soft-Dice accumulators: overlap = sum(p*g), pred_sum = sum(p),
// gt_count = |{gt == c}|.
struct DiceSums {
  std::vector<double> overlap;
  std::vector<double> pred_sum;
  std::vector<double> gt_count;
};

inline DiceSums dice_sums(const ProbMask& pred, const LabelMask& gt) {
  DiceSums s;
  const int C = pred.classes;
  s.overlap.assign(C, 0.0);
  s.pred_sum.assign(C, 0.0);
  s.gt_count.assign(C, 0.0);
  const std::size_t n = pred.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < C; ++c) s.pred_sum[c] += pred.data[i * C + c];
    int g = gt.data[i];
    s.overlap[g] += pred.data[i * C + g];
    s.gt_count[g] += 1.0;
  }
  return s;
}

}  // namespace detail

/// Soft Dice loss, averaged uniformly over all classes:
/// per class, 1 - (2*sum(p*g) + eps) / (sum(p) + sum(g) + eps), eps = 1e-6.
inline double dice_loss(const ProbMask& pred, const LabelMask& gt) {
  detail::check_pair(pred, gt);
  detail::DiceSums s = detail::dice_sums(pred, gt);
  double loss = 0.0;
  for (int c = 0; c < pred.classes; ++c) {
    double denom = s.pred_sum[c] + s.gt_count[c] + detail::kDiceEps;
    loss += 1.0 - (2.0 * s.overlap[c] + detail::kDiceEps) / denom;
  }
  return loss / pred.classes;
}

/// Mean over pixels of -ln p(correct class), probabilities clamped to
/// >= 1e-7 (a zero probability costs ln 1e7, never infinity).
inline double cross_entropy_loss(const ProbMask& pred, const LabelMask& gt) {
  detail::check_pair(pred, gt);
  const int C = pred.classes;
  const std::size_t n = pred.pixel_count();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    sum -= std::log(std::max(pred.data[i * C + gt.data[i]], detail::kCeFloor));
  return sum / static_cast<double>(n);
}

/// Mean over all pixels and classes of the squared prediction difference.
inline double mse_loss(const ProbMask& pred1, const ProbMask& pred2) {
  detail::check_pair(pred1, pred2);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred1.data.size(); ++i) {
    double d = pred1.data[i] - pred2.data[i];
    sum += d * d;
  }
  return sum / static_cast<double>(pred1.data.size());
}

/// Color-quality generalization objective:
/// lambda1*(Dice+CE)(gt, pred1) + lambda2*(Dice+CE)(gt, pred2)
/// + lambda3*MSE(pred1, pred2).
inline LossBreakdown cqg_loss(const ProbMask& pred1, const ProbMask& pred2,
                              const LabelMask& gt, const LossWeights& w = {}) {
  if (!(w.lambda1 >= 0.0) || !(w.lambda2 >= 0.0) || !(w.lambda3 >= 0.0) ||
      !std::isfinite(w.lambda1) || !std::isfinite(w.lambda2) || !std::isfinite(w.lambda3))
    throw UsageError("loss weights must be finite and non-negative");
  detail::check_pair(pred1, pred2);
  LossBreakdown b;
  b.dice1 = dice_loss(pred1, gt);
  b.ce1 = cross_entropy_loss(pred1, gt);
  b.dice2 = dice_loss(pred2, gt);
  b.ce2 = cross_entropy_loss(pred2, gt);
  b.mse = mse_loss(pred1, pred2);
  b.total = w.lambda1 * (b.dice1 + b.ce1) + w.lambda2 * (b.dice2 + b.ce2) + w.lambda3 * b.mse;
  return b;
}

/// Analytic gradient of cqg_loss(...).total with respect to both
/// prediction masks.
inline CqgGradients cqg_loss_gradient(const ProbMask& pred1, const ProbMask& pred2,
                                      const LabelMask& gt, const LossWeights& w = {}) {
  detail::check_pair(pred1, gt);
  detail::check_pair(pred2, gt);
  detail::check_pair(pred1, pred2);

  const int C = pred1.classes;
  const std::size_t n = pred1.pixel_count();
  const std::size_t m = pred1.data.size();
  CqgGradients g;
  g.pred1.assign(m, 0.0);
  g.pred2.assign(m, 0.0);

  auto accumulate_dc = [&](const ProbMask& pred, std::vector<double>& grad, double lambda) {
    if (lambda == 0.0) return;
    detail::DiceSums s = detail::dice_sums(pred, gt);
    // d(dice_c)/dp = [(2*overlap + eps) - 2*g*(denom)] / (C * denom^2)
    std::vector<double> denom(C), numer_const(C);
    for (int c = 0; c < C; ++c) {
      denom[c] = s.pred_sum[c] + s.gt_count[c] + detail::kDiceEps;
      numer_const[c] = 2.0 * s.overlap[c] + detail::kDiceEps;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      int gt_class = gt.data[i];
      for (int c = 0; c < C; ++c) {
        double is_gt = (c == gt_class) ? 1.0 : 0.0;
        double d_dice =
            (numer_const[c] - 2.0 * is_gt * denom[c]) / (C * denom[c] * denom[c]);
        double p = pred.data[i * C + c];
        double d_ce = (is_gt != 0.0 && p > detail::kCeFloor) ? -inv_n / p : 0.0;
        grad[i * C + c] += lambda * (d_dice + d_ce);
      }
    }
  };

  accumulate_dc(pred1, g.pred1, w.lambda1);
  accumulate_dc(pred2, g.pred2, w.lambda2);

  const double scale = 2.0 * w.lambda3 / static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i) {
    double d = pred1.data[i] - pred2.data[i];
    g.pred1[i] += scale * d;
    g.pred2[i] -= scale * d;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Evaluation metric
// ---------------------------------------------------------------------------

/// Per-class hard Dice on a 0-100 scale: 2|P∩G| / (|P|+|G|) for every class
/// present in either mask. Classes absent from both are not reported.
inline std::map<int, double> dice_per_class(const LabelMask& pred, const LabelMask& gt) {
  check_valid(pred);
  check_valid(gt);
  if (pred.width != gt.width || pred.height != gt.height)
    throw UsageError("dice_score: mask dimensions differ");

  std::array<std::size_t, 256> pred_count{}, gt_count{}, overlap{};
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    ++pred_count[pred.data[i]];
    ++gt_count[gt.data[i]];
    if (pred.data[i] == gt.data[i]) ++overlap[pred.data[i]];
  }

  std::map<int, double> result;
  for (int c = 0; c < 256; ++c) {
    std::size_t denom = pred_count[c] + gt_count[c];
    if (denom == 0) continue;  // absent from both: skipped, never 0/0
    result[c] = 100.0 * (2.0 * static_cast<double>(overlap[c])) /
                static_cast<double>(denom);
  }
  return result;
}

/// Mean of dice_per_class over the classes that scored, on [0,100].
inline double dice_score(const LabelMask& pred, const LabelMask& gt) {
  std::map<int, double> per_class = dice_per_class(pred, gt);
  double sum = 0.0;
  for (const auto& [c, d] : per_class) sum += d;
  return sum / static_cast<double>(per_class.size());
}

}  // namespace dcin
