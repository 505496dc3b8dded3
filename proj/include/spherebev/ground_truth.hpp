#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>

#include "spherebev/camera.hpp"
#include "spherebev/grid.hpp"

namespace spherebev {

enum class ClassLabel { vehicle, pedestrian, bicycle };

inline const char* to_string(ClassLabel label) {
  switch (label) {
    case ClassLabel::vehicle: return "vehicle";
    case ClassLabel::pedestrian: return "pedestrian";
    case ClassLabel::bicycle: return "bicycle";
  }
  return "vehicle";
}

inline std::optional<ClassLabel> class_from_string(std::string_view s) {
  if (s == "vehicle") return ClassLabel::vehicle;
  if (s == "pedestrian") return ClassLabel::pedestrian;
  if (s == "bicycle") return ClassLabel::bicycle;
  return std::nullopt;
}

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

struct BoxSize {
  double length = 0.0;  ///< extent along the box's local x axis
  double width = 0.0;   ///< extent along the box's local y axis
  double height = 0.0;
};

/// Annotated 3D object in the ego frame. Only the yaw component (rotation.z)
/// affects the BEV footprint; pitch and roll are carried but ignored by the
/// top-down projection.
struct BoundingBox3D {
  Point3 center;
  Vec3 rotation;  ///< per-axis rotation (rx, ry, rz), radians
  BoxSize size;
  ClassLabel class_label = ClassLabel::vehicle;
  std::optional<double> sensor_distance;
  std::optional<std::int64_t> point_count;

  void validate() const {
    if (!(size.length > 0.0) || !(size.width > 0.0) || !(size.height > 0.0)) {
      throw std::invalid_argument("BoundingBox3D: size components must be positive");
    }
  }
};

/// True when the metric point lies inside the box's yaw-rotated BEV
/// footprint, boundary inclusive.
inline bool footprint_contains(const BoundingBox3D& box, double x, double y) {
  const double dx = x - box.center.x;
  const double dy = y - box.center.y;
  const double c = std::cos(box.rotation.z);
  const double s = std::sin(box.rotation.z);
  const double local_x = c * dx + s * dy;
  const double local_y = -s * dx + c * dy;
  return std::abs(local_x) <= 0.5 * box.size.length &&
         std::abs(local_y) <= 0.5 * box.size.width;
}

/// Footprint corners in counter-clockwise order (for polygon-based consumers).
inline std::array<Vec2, 4> footprint_corners(const BoundingBox3D& box) {
  const double c = std::cos(box.rotation.z);
  const double s = std::sin(box.rotation.z);
  const double hl = 0.5 * box.size.length;
  const double hw = 0.5 * box.size.width;
  const std::array<Vec2, 4> local{{{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}}};
  std::array<Vec2, 4> out;
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = {box.center.x + c * local[i].x - s * local[i].y,
              box.center.y + s * local[i].x + c * local[i].y};
  }
  return out;
}

namespace detail {

inline bool class_matches(const BoundingBox3D& box, std::optional<ClassLabel> filter) {
  return !filter.has_value() || box.class_label == *filter;
}

/// Conservative row/col range of cells whose centers may fall inside the
/// footprint. Clamped to the grid.
struct CellRange {
  std::int32_t row_begin, row_end, col_begin, col_end;  // half-open
};

inline CellRange footprint_cell_range(const BoundingBox3D& box, const GridSpec& grid) {
  const double r = 0.5 * std::hypot(box.size.length, box.size.width);
  const CellIndex lo = grid.cell_of(box.center.x + r, box.center.y + r);
  const CellIndex hi = grid.cell_of(box.center.x - r, box.center.y - r);
  const auto n = static_cast<std::int32_t>(grid.n());
  return {std::max<std::int32_t>(lo.row, 0), std::min<std::int32_t>(hi.row + 1, n),
          std::max<std::int32_t>(lo.col, 0), std::min<std::int32_t>(hi.col + 1, n)};
}

}  // namespace detail

/// Binary BEV occupancy from 3D boxes: a cell is positive iff its center lies
/// inside the yaw-rotated footprint of any box passing the class filter
/// (nullopt admits every class). The z extent of a box never matters.
inline LabelGrid rasterize(std::span<const BoundingBox3D> boxes, const GridSpec& grid,
                           std::optional<ClassLabel> class_filter = ClassLabel::vehicle) {
  LabelGrid out(grid, 0);
  for (const BoundingBox3D& box : boxes) {
    box.validate();
    if (!detail::class_matches(box, class_filter)) continue;
    const auto range = detail::footprint_cell_range(box, grid);
    for (std::int32_t r = range.row_begin; r < range.row_end; ++r) {
      for (std::int32_t c = range.col_begin; c < range.col_end; ++c) {
        const Vec2 center = grid.cell_center({r, c});
        if (footprint_contains(box, center.x, center.y)) out[{r, c}] = 1;
      }
    }
  }
  return out;
}

/// Segmentation, centerness and offset training targets.
///
/// offset holds box_center_xy - cell_center_xy for the cell's owning box and
/// is NaN on background cells, where it is undefined.
struct BevTargets {
  LabelGrid segmentation;
  ValueGrid centerness;
  VectorGrid offset;
};

/// Builds the three BEV target grids.
///
/// Centerness is a per-box isotropic Gaussian exp(-d^2 / (2 sigma^2)) anchored
/// at the center of the cell containing the box center, so the peak is exactly
/// 1.0 there; overlapping bumps combine by max. For overlapping footprints a
/// cell is owned by the box whose center is nearest the cell center, earlier
/// input order winning ties.
inline BevTargets build_targets(std::span<const BoundingBox3D> boxes, const GridSpec& grid,
                                std::optional<ClassLabel> class_filter = ClassLabel::vehicle,
                                double centerness_sigma = 1.0) {
  if (!(centerness_sigma > 0.0)) {
    throw std::invalid_argument("build_targets: sigma must be positive");
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  BevTargets targets{LabelGrid(grid, 0), ValueGrid(grid, 0.0), VectorGrid(grid, {nan, nan})};

  ValueGrid owner_distance(grid, std::numeric_limits<double>::infinity());
  for (const BoundingBox3D& box : boxes) {
    box.validate();
    if (!detail::class_matches(box, class_filter)) continue;

    const auto range = detail::footprint_cell_range(box, grid);
    for (std::int32_t r = range.row_begin; r < range.row_end; ++r) {
      for (std::int32_t c = range.col_begin; c < range.col_end; ++c) {
        const Vec2 center = grid.cell_center({r, c});
        if (!footprint_contains(box, center.x, center.y)) continue;
        targets.segmentation[{r, c}] = 1;
        const double dist = std::hypot(box.center.x - center.x, box.center.y - center.y);
        if (dist < owner_distance[{r, c}]) {  // strict: first box keeps ties
          owner_distance[{r, c}] = dist;
          targets.offset[{r, c}] = {box.center.x - center.x, box.center.y - center.y};
        }
      }
    }

    // Gaussian bump around the box's center cell. Evaluated on a window wide
    // enough that the tail outside is below double precision noise.
    const CellIndex center_cell = grid.cell_of(box.center.x, box.center.y);
    const Vec2 anchor = grid.cell_center(center_cell);
    const auto reach = static_cast<std::int32_t>(
        std::ceil(9.0 * centerness_sigma / grid.resolution()));
    const auto n = static_cast<std::int32_t>(grid.n());
    const std::int32_t r0 = std::max(center_cell.row - reach, 0);
    const std::int32_t r1 = std::min(center_cell.row + reach, n - 1);
    const std::int32_t c0 = std::max(center_cell.col - reach, 0);
    const std::int32_t c1 = std::min(center_cell.col + reach, n - 1);
    const double inv = 1.0 / (2.0 * centerness_sigma * centerness_sigma);
    for (std::int32_t r = r0; r <= r1; ++r) {
      for (std::int32_t c = c0; c <= c1; ++c) {
        const Vec2 center = grid.cell_center({r, c});
        const double dx = center.x - anchor.x;
        const double dy = center.y - anchor.y;
        const double value = std::clamp(std::exp(-(dx * dx + dy * dy) * inv), 0.0, 1.0);
        double& cell = targets.centerness[{r, c}];
        cell = std::max(cell, value);
      }
    }
  }
  return targets;
}

}  // namespace spherebev
