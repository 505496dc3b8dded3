#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "spherebev/grid.hpp"

namespace spherebev {

/// p_t is clamped to [kProbClamp, 1 - kProbClamp] before the log, which is
/// singular at p_t = 0.
inline constexpr double kProbClamp = 1e-7;

struct FocalConfig {
  double gamma = 2.0;

  void validate() const {
    if (!(gamma >= 0.0)) throw std::invalid_argument("FocalConfig: gamma must be >= 0");
  }
};

/// Probability assigned to the true class: p if y = 1, else 1 - p.
inline double p_t(double p, int y) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("p_t: p must lie in [0, 1]");
  if (y != 0 && y != 1) throw std::domain_error("p_t: y must be 0 or 1");
  return y == 1 ? p : 1.0 - p;
}

/// Focal loss -(1 - p_t)^gamma * log(p_t). At gamma = 0 this is exactly the
/// cross-entropy -log(p_t).
inline double focal_loss(double p, int y, const FocalConfig& cfg) {
  cfg.validate();
  const double pt = std::clamp(p_t(p, y), kProbClamp, 1.0 - kProbClamp);
  return -std::pow(1.0 - pt, cfg.gamma) * std::log(pt);
}

/// Analytic d(focal_loss)/dp, valid away from the clamp boundaries.
inline double focal_loss_gradient(double p, int y, const FocalConfig& cfg) {
  cfg.validate();
  const double pt = std::clamp(p_t(p, y), kProbClamp, 1.0 - kProbClamp);
  const double modulating = cfg.gamma == 0.0
      ? 0.0
      : cfg.gamma * std::pow(1.0 - pt, cfg.gamma - 1.0) * std::log(pt);
  const double d_pt = modulating - std::pow(1.0 - pt, cfg.gamma) / pt;
  return y == 1 ? d_pt : -d_pt;
}

/// Mean per-cell focal loss between a probability grid and a binary target.
inline double focal_loss_grid(const ValueGrid& pred, const LabelGrid& target,
                              const FocalConfig& cfg) {
  if (!same_shape(pred, target)) {
    throw std::invalid_argument("focal_loss_grid: shape mismatch");
  }
  double sum = 0.0;
  const std::size_t count = pred.data().size();
  for (std::size_t i = 0; i < count; ++i) {
    sum += focal_loss(pred.data()[i], target.data()[i] != 0 ? 1 : 0, cfg);
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

/// Balanced MSE: the squared error is averaged separately over foreground and
/// background cells and the two means carry equal weight. An empty partition
/// contributes 0.
inline double centerness_loss(const ValueGrid& pred, const ValueGrid& target,
                              const LabelGrid& fg_mask) {
  if (!same_shape(pred, target) || !same_shape(pred, fg_mask)) {
    throw std::invalid_argument("centerness_loss: shape mismatch");
  }
  double fg_sum = 0.0, bg_sum = 0.0;
  std::size_t fg_count = 0, bg_count = 0;
  for (std::size_t i = 0; i < pred.data().size(); ++i) {
    const double d = pred.data()[i] - target.data()[i];
    if (fg_mask.data()[i] != 0) {
      fg_sum += d * d;
      ++fg_count;
    } else {
      bg_sum += d * d;
      ++bg_count;
    }
  }
  const double fg_term = fg_count ? fg_sum / static_cast<double>(fg_count) : 0.0;
  const double bg_term = bg_count ? bg_sum / static_cast<double>(bg_count) : 0.0;
  return 0.5 * fg_term + 0.5 * bg_term;
}

/// Mean L1 error of the offset vectors over foreground cells; 0 when the mask
/// is empty. Background offsets are undefined and never read.
inline double offset_loss(const VectorGrid& pred, const VectorGrid& target,
                          const LabelGrid& fg_mask) {
  if (!same_shape(pred, target) || !same_shape(pred, fg_mask)) {
    throw std::invalid_argument("offset_loss: shape mismatch");
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < pred.data().size(); ++i) {
    if (fg_mask.data()[i] == 0) continue;
    const Vec2& a = pred.data()[i];
    const Vec2& b = target.data()[i];
    sum += std::abs(a.x - b.x) + std::abs(a.y - b.y);
    ++count;
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

struct TaskWeights {
  double segmentation = 1.0;
  double centerness = 1.0;
  double offset = 1.0;
};

inline double multi_task_loss(double seg_loss, double centerness_loss_value,
                              double offset_loss_value, const TaskWeights& w = {}) {
  if (!(w.segmentation > 0.0) || !(w.centerness > 0.0) || !(w.offset > 0.0)) {
    throw std::invalid_argument("multi_task_loss: weights must be positive");
  }
  if (!std::isfinite(seg_loss) || !std::isfinite(centerness_loss_value) ||
      !std::isfinite(offset_loss_value)) {
    throw std::invalid_argument("multi_task_loss: losses must be finite");
  }
  return w.segmentation * seg_loss + w.centerness * centerness_loss_value +
         w.offset * offset_loss_value;
}

}  // namespace spherebev
