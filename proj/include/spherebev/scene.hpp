#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "spherebev/camera.hpp"
#include "spherebev/detail/rng.hpp"
#include "spherebev/feature_map.hpp"
#include "spherebev/grid.hpp"
#include "spherebev/ground_truth.hpp"
#include "spherebev/sampling.hpp"

namespace spherebev {

/// Recipe for a synthetic desk-scale scene. Identical specs produce
/// byte-identical scenes.
struct SceneSpec {
  std::uint64_t seed = 0;
  std::size_t n_boxes = 5;
  double placement_half_extent = 45.0;  ///< box centers drawn uniformly in +-this (meters)
  std::array<double, 2> length_range{3.5, 5.5};
  std::array<double, 2> width_range{1.6, 2.2};
  std::array<double, 2> height_range{1.4, 2.0};
  std::size_t channels = 8;
  std::size_t fm_height = 128;
  std::size_t fm_width = 256;
  GridSpec grid{};
  CameraCalibration calibration = CameraCalibration::dual_lens();
  SamplingConfig sampling{};  ///< pillar geometry used for the feature lift
};

struct Scene {
  std::vector<BoundingBox3D> boxes;
  FeatureMap feature_map;
  CameraCalibration calibration;
  LabelGrid ground_truth;
};

/// Generates boxes, their BEV ground truth, and a feature map lifted from the
/// ground truth through the camera model: every pillar point of every positive
/// cell saturates the four texels around its projection in channel 0, so
/// pulling features back at a positive cell reads exactly 1 there. Remaining
/// channels carry seeded noise. An ideal decoder over channel 0 can therefore
/// approximately recover the ground truth, which makes end-to-end pipeline
/// checks self-contained.
inline Scene generate_scene(const SceneSpec& spec) {
  detail::Rng rng(spec.seed);

  std::vector<BoundingBox3D> boxes;
  boxes.reserve(spec.n_boxes);
  for (std::size_t i = 0; i < spec.n_boxes; ++i) {
    BoundingBox3D box;
    box.center.x = rng.uniform(-spec.placement_half_extent, spec.placement_half_extent);
    box.center.y = rng.uniform(-spec.placement_half_extent, spec.placement_half_extent);
    box.size = {rng.uniform(spec.length_range[0], spec.length_range[1]),
                rng.uniform(spec.width_range[0], spec.width_range[1]),
                rng.uniform(spec.height_range[0], spec.height_range[1])};
    box.center.z = 0.5 * box.size.height;
    box.rotation = {0.0, 0.0, rng.uniform(-std::numbers::pi, std::numbers::pi)};
    box.class_label = ClassLabel::vehicle;
    box.sensor_distance = std::hypot(box.center.x, box.center.y);
    box.point_count = static_cast<std::int64_t>(50 + rng.below(4951));
    boxes.push_back(box);
  }

  LabelGrid gt = rasterize(boxes, spec.grid, ClassLabel::vehicle);

  FeatureMap fm(spec.channels, spec.fm_height, spec.fm_width, 0.0f);
  for (std::size_t c = 1; c < spec.channels; ++c) {
    for (std::size_t y = 0; y < spec.fm_height; ++y) {
      for (std::size_t x = 0; x < spec.fm_width; ++x) {
        fm.at(c, y, x) = static_cast<float>(rng.uniform(-1.0, 1.0));
      }
    }
  }

  const double scale_u = static_cast<double>(spec.fm_width) /
                         static_cast<double>(spec.calibration.width());
  const double scale_v = static_cast<double>(spec.fm_height) /
                         static_cast<double>(spec.calibration.height());
  const auto n = static_cast<std::int32_t>(spec.grid.n());
  std::vector<CellIndex> positive;
  for (std::int32_t r = 0; r < n; ++r) {
    for (std::int32_t c = 0; c < n; ++c) {
      if (gt[{r, c}]) positive.push_back({r, c});
    }
  }
  if (!positive.empty()) {
    const PillarSet pillars = make_pillars(positive, spec.sampling, spec.grid);
    for (const Point3& point : pillars.points) {
      const PixelCoord px = project(point, spec.calibration);
      const double u = std::clamp(px.u * scale_u, 0.0, static_cast<double>(spec.fm_width - 1));
      const double v = std::clamp(px.v * scale_v, 0.0, static_cast<double>(spec.fm_height - 1));
      const auto x0 = static_cast<std::size_t>(std::floor(u));
      const auto y0 = static_cast<std::size_t>(std::floor(v));
      const std::size_t x1 = std::min(x0 + 1, spec.fm_width - 1);
      const std::size_t y1 = std::min(y0 + 1, spec.fm_height - 1);
      fm.at(0, y0, x0) = 1.0f;
      fm.at(0, y0, x1) = 1.0f;
      fm.at(0, y1, x0) = 1.0f;
      fm.at(0, y1, x1) = 1.0f;
    }
  }

  return {std::move(boxes), std::move(fm), spec.calibration, std::move(gt)};
}

}  // namespace spherebev
