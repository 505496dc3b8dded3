#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "spherebev/grid.hpp"

namespace spherebev {

/// Intersection over union of two binary grids. Both empty counts as perfect
/// agreement (1.0); exactly one empty gives 0.
inline double iou(const LabelGrid& pred, const LabelGrid& gt) {
  if (!same_shape(pred, gt)) throw std::invalid_argument("iou: shape mismatch");
  std::size_t intersection = 0, union_count = 0;
  for (std::size_t i = 0; i < pred.data().size(); ++i) {
    const bool a = pred.data()[i] != 0;
    const bool b = gt.data()[i] != 0;
    intersection += a && b;
    union_count += a || b;
  }
  if (union_count == 0) return 1.0;
  return static_cast<double>(intersection) / static_cast<double>(union_count);
}

/// Centered range_meters x range_meters window of a grid. range_meters must
/// be an integer multiple of the resolution and no larger than the side.
template <typename T>
Grid<T> crop_centered(const Grid<T>& grid, double range_meters) {
  const double res = grid.spec().resolution();
  const double cells = range_meters / res;
  const auto m = static_cast<std::int64_t>(std::llround(cells));
  if (m < 1 || std::abs(cells - static_cast<double>(m)) > 1e-9 * static_cast<double>(m)) {
    throw std::invalid_argument("crop_centered: range must be an integer multiple of resolution");
  }
  if (static_cast<std::size_t>(m) > grid.n()) {
    throw std::invalid_argument("crop_centered: range exceeds grid side");
  }
  const std::size_t side = static_cast<std::size_t>(m);
  const std::size_t start = (grid.n() - side) / 2;
  Grid<T> out(GridSpec(range_meters, res));
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t c = 0; c < side; ++c) {
      out.at(r, c) = grid.at(start + r, start + c);
    }
  }
  return out;
}

/// IoU of each centered metric window, in the order the ranges are given.
inline std::vector<double> iou_at_ranges(const LabelGrid& pred, const LabelGrid& gt,
                                         std::span<const double> ranges) {
  if (!(pred.spec() == gt.spec())) {
    throw std::invalid_argument("iou_at_ranges: grids must share a grid spec");
  }
  std::vector<double> out;
  out.reserve(ranges.size());
  for (double range : ranges) {
    out.push_back(iou(crop_centered(pred, range), crop_centered(gt, range)));
  }
  return out;
}

/// IoU at the canonical 100 m / 50 m / 20 m evaluation windows (fractional).
struct IouReport {
  double iou_100 = 0.0;
  double iou_50 = 0.0;
  double iou_20 = 0.0;
};

inline IouReport iou_report(const LabelGrid& pred, const LabelGrid& gt) {
  const double ranges[] = {100.0, 50.0, 20.0};
  const auto values = iou_at_ranges(pred, gt, ranges);
  return {values[0], values[1], values[2]};
}

/// Efficiency score: IoU percentage per million model parameters.
inline double eff_score(double iou_100_percent, double params_millions) {
  if (!(params_millions > 0.0)) {
    throw std::invalid_argument("eff_score: parameter count must be positive");
  }
  return iou_100_percent / params_millions;
}

/// Thresholds logits into a binary grid; strictly greater than threshold
/// maps to 1, so a logit exactly at the threshold stays 0.
inline LabelGrid binarize(const ValueGrid& logits, double threshold = 0.0) {
  LabelGrid out(logits.spec(), 0);
  for (std::size_t i = 0; i < logits.data().size(); ++i) {
    out.data()[i] = logits.data()[i] > threshold ? 1 : 0;
  }
  return out;
}

}  // namespace spherebev
