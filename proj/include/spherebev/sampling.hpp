#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "spherebev/camera.hpp"
#include "spherebev/detail/parallel.hpp"
#include "spherebev/detail/rng.hpp"
#include "spherebev/feature_map.hpp"
#include "spherebev/grid.hpp"

namespace spherebev {

/// Logit assigned to cells the sparse passes never sampled
/// (sigmoid(-10) ~ 4.5e-5: confidently background).
inline constexpr double kBackgroundLogit = -10.0;

inline std::vector<std::pair<int, int>> default_fine_pattern() {
  std::vector<std::pair<int, int>> offsets;
  for (int dr = -1; dr <= 1; ++dr) {
    for (int dc = -1; dc <= 1; ++dc) offsets.emplace_back(dr, dc);
  }
  return offsets;
}

struct SamplingConfig {
  std::size_t n_coarse = 2500;      ///< target size of the coarse anchor set
  std::size_t anchors_kept = 100;   ///< k, anchors promoted to the fine stage
  std::vector<std::pair<int, int>> fine_pattern = default_fine_pattern();
  std::size_t points_per_pillar = 8;
  double z_min = -1.0;
  double z_max = 3.0;
  bool random_coarse = false;  ///< seeded random anchor subset instead of the stride lattice
  std::uint64_t seed = 0;
};

/// Vertical columns of 3D sample points, one column per BEV anchor cell.
/// Points within a pillar share the anchor's metric cell center and ascend in
/// z, evenly spaced over [z_min, z_max] inclusive of both ends.
struct PillarSet {
  std::vector<CellIndex> anchors;
  std::size_t points_per_pillar = 0;
  double z_min = 0.0;
  double z_max = 0.0;
  std::vector<Point3> points;  // anchors.size() * points_per_pillar, pillar-major

  std::span<const Point3> pillar(std::size_t anchor_index) const {
    return {points.data() + anchor_index * points_per_pillar, points_per_pillar};
  }
};

/// Per-anchor blocks of points_per_pillar x channels features, rows ordered
/// by ascending z.
struct FeatureVolume {
  std::size_t n_anchors = 0;
  std::size_t points_per_pillar = 0;
  std::size_t channels = 0;
  std::vector<double> data;  // [anchor][point][channel]

  std::span<const double> anchor_block(std::size_t anchor_index) const {
    const std::size_t stride = points_per_pillar * channels;
    return {data.data() + anchor_index * stride, stride};
  }
};

/// Compresses one anchor's feature block to a single logit. Implementations
/// must be deterministic: identical inputs yield identical logits.
class Decoder {
 public:
  virtual ~Decoder() = default;
  virtual double decode(std::span<const double> features, std::size_t points_per_pillar,
                        std::size_t channels) const = 0;
};

/// Mean-pools the pillar rows and applies a fixed affine map. A deterministic
/// stand-in for a learned decoder that keeps the sampling pipeline testable
/// end to end.
class AffineMeanDecoder final : public Decoder {
 public:
  AffineMeanDecoder(std::vector<double> weights, double bias)
      : weights_(std::move(weights)), bias_(bias) {
    if (weights_.empty()) throw std::invalid_argument("AffineMeanDecoder: empty weights");
  }

  double decode(std::span<const double> features, std::size_t points_per_pillar,
                std::size_t channels) const override {
    if (channels != weights_.size()) {
      throw std::invalid_argument("AffineMeanDecoder: channel count does not match weights");
    }
    double logit = bias_;
    if (points_per_pillar == 0) return logit;
    for (std::size_t c = 0; c < channels; ++c) {
      double sum = 0.0;
      for (std::size_t p = 0; p < points_per_pillar; ++p) {
        sum += features[p * channels + c];
      }
      logit += weights_[c] * (sum / static_cast<double>(points_per_pillar));
    }
    return logit;
  }

  const std::vector<double>& weights() const { return weights_; }
  double bias() const { return bias_; }

 private:
  std::vector<double> weights_;
  double bias_;
};

/// Logits over a sparse subset of cells; cells are kept sorted by row-major
/// ordinal and unique.
struct SparseLogits {
  std::vector<CellIndex> cells;
  std::vector<double> values;

  std::optional<double> find(CellIndex cell, std::size_t cells_per_side) const {
    const auto key = cell_ordinal(cell, cells_per_side);
    auto it = std::lower_bound(cells.begin(), cells.end(), key,
                               [cells_per_side](CellIndex c, std::uint64_t k) {
                                 return cell_ordinal(c, cells_per_side) < k;
                               });
    if (it == cells.end() || !(*it == cell)) return std::nullopt;
    return values[static_cast<std::size_t>(it - cells.begin())];
  }
};

/// Builds vertical pillars over the given anchor cells.
inline PillarSet make_pillars(std::span<const CellIndex> anchors, const SamplingConfig& cfg,
                              const GridSpec& grid) {
  if (cfg.points_per_pillar == 0 ||
      (cfg.points_per_pillar == 1 && cfg.z_min != cfg.z_max)) {
    throw std::invalid_argument(
        "make_pillars: need at least 2 points per pillar (or 1 with z_min == z_max)");
  }
  // Strictly increasing z within a pillar.
  if (cfg.points_per_pillar > 1 && !(cfg.z_min < cfg.z_max)) {
    throw std::invalid_argument("make_pillars: z_min must be below z_max");
  }
  PillarSet set;
  set.anchors.assign(anchors.begin(), anchors.end());
  set.points_per_pillar = cfg.points_per_pillar;
  set.z_min = cfg.z_min;
  set.z_max = cfg.z_max;
  set.points.reserve(anchors.size() * cfg.points_per_pillar);
  const double step = cfg.points_per_pillar > 1
      ? (cfg.z_max - cfg.z_min) / static_cast<double>(cfg.points_per_pillar - 1)
      : 0.0;
  for (const CellIndex anchor : anchors) {
    if (!grid.in_bounds(anchor)) {
      throw std::invalid_argument("make_pillars: anchor cell out of bounds");
    }
    const Vec2 center = grid.cell_center(anchor);
    for (std::size_t i = 0; i < cfg.points_per_pillar; ++i) {
      set.points.push_back({center.x, center.y, cfg.z_min + static_cast<double>(i) * step});
    }
  }
  return set;
}

/// Projects every pillar point into the feature map and samples it
/// bilinearly. Projection happens in calibration pixel coordinates, which are
/// rescaled by (W_fm / W_cal, H_fm / H_cal) when the feature map and the
/// calibrated image differ in size (backbones downsample).
inline FeatureVolume pull_features(const PillarSet& pillars, const FeatureMap& fm,
                                   const CameraCalibration& cal) {
  FeatureVolume volume;
  volume.n_anchors = pillars.anchors.size();
  volume.points_per_pillar = pillars.points_per_pillar;
  volume.channels = fm.channels();
  volume.data.resize(volume.n_anchors * volume.points_per_pillar * volume.channels);
  const double scale_u = static_cast<double>(fm.width()) / static_cast<double>(cal.width());
  const double scale_v = static_cast<double>(fm.height()) / static_cast<double>(cal.height());
  detail::parallel_for(pillars.points.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const PixelCoord px = project(pillars.points[i], cal);
      std::span<double> row{volume.data.data() + i * volume.channels, volume.channels};
      bilinear_sample_into(fm, px.u * scale_u, px.v * scale_v, row);
    }
  });
  return volume;
}

/// The coarse BEV anchor set. Default: a uniform stride lattice, with the
/// stride chosen so the count approximates n_coarse (n_coarse >= cell count
/// selects every cell). With random_coarse, a seeded uniform subset of
/// exactly n_coarse cells. Both are returned in row-major order.
inline std::vector<CellIndex> coarse_anchor_cells(const GridSpec& grid,
                                                  const SamplingConfig& cfg) {
  const std::size_t total = grid.cell_count();
  if (cfg.n_coarse == 0 || cfg.n_coarse > total) {
    throw std::invalid_argument("coarse_anchor_cells: n_coarse must be in [1, cell count]");
  }
  std::vector<CellIndex> anchors;
  if (cfg.random_coarse) {
    std::vector<std::uint64_t> ordinals(total);
    std::iota(ordinals.begin(), ordinals.end(), 0);
    detail::Rng rng(cfg.seed);
    for (std::size_t i = 0; i < cfg.n_coarse; ++i) {  // partial Fisher-Yates
      const std::size_t j = i + static_cast<std::size_t>(rng.below(total - i));
      std::swap(ordinals[i], ordinals[j]);
    }
    ordinals.resize(cfg.n_coarse);
    std::sort(ordinals.begin(), ordinals.end());
    anchors.reserve(cfg.n_coarse);
    for (const std::uint64_t ord : ordinals) {
      anchors.push_back({static_cast<std::int32_t>(ord / grid.n()),
                         static_cast<std::int32_t>(ord % grid.n())});
    }
    return anchors;
  }
  const auto n = static_cast<std::int32_t>(grid.n());
  const auto stride = std::max<std::int32_t>(
      1, static_cast<std::int32_t>(std::llround(
             std::sqrt(static_cast<double>(total) / static_cast<double>(cfg.n_coarse)))));
  const std::int32_t offset = stride / 2;
  for (std::int32_t r = offset; r < n; r += stride) {
    for (std::int32_t c = offset; c < n; c += stride) {
      anchors.push_back({r, c});
    }
  }
  return anchors;
}

namespace detail {

/// Pull + decode over an anchor list; logits[i] belongs to anchors[i].
inline std::vector<double> decode_anchors(std::span<const CellIndex> anchors,
                                          const FeatureMap& fm, const CameraCalibration& cal,
                                          const SamplingConfig& cfg, const GridSpec& grid,
                                          const Decoder& decoder) {
  const PillarSet pillars = make_pillars(anchors, cfg, grid);
  const FeatureVolume volume = pull_features(pillars, fm, cal);
  std::vector<double> logits(anchors.size());
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    logits[i] = decoder.decode(volume.anchor_block(i), volume.points_per_pillar,
                               volume.channels);
  }
  return logits;
}

inline SparseLogits sparse_from(std::vector<CellIndex> cells, std::vector<double> values) {
  return {std::move(cells), std::move(values)};
}

}  // namespace detail

struct CoarseResult {
  SparseLogits logits;
  std::vector<CellIndex> anchors_kept;  ///< k highest-logit cells, row-major order
};

/// Coarse stage: decode the coarse anchor set and keep the k cells with the
/// highest logits. Equal logits are broken by ascending row-major ordinal.
inline CoarseResult coarse_pass(const FeatureMap& fm, const CameraCalibration& cal,
                                const SamplingConfig& cfg, const GridSpec& grid,
                                const Decoder& decoder) {
  std::vector<CellIndex> anchors = coarse_anchor_cells(grid, cfg);
  if (cfg.anchors_kept > anchors.size()) {
    throw std::invalid_argument("coarse_pass: k exceeds the coarse anchor count");
  }
  std::vector<double> logits =
      detail::decode_anchors(anchors, fm, cal, cfg, grid, decoder);

  std::vector<std::size_t> order(anchors.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (logits[a] != logits[b]) return logits[a] > logits[b];
    return cell_ordinal(anchors[a], grid.n()) < cell_ordinal(anchors[b], grid.n());
  });
  std::vector<CellIndex> kept;
  kept.reserve(cfg.anchors_kept);
  for (std::size_t i = 0; i < cfg.anchors_kept; ++i) kept.push_back(anchors[order[i]]);
  std::sort(kept.begin(), kept.end(), [&](CellIndex a, CellIndex b) {
    return cell_ordinal(a, grid.n()) < cell_ordinal(b, grid.n());
  });
  return {detail::sparse_from(std::move(anchors), std::move(logits)), std::move(kept)};
}

/// Fine stage: densify around the kept anchors. The fine anchor set is the
/// union of anchor + fine_pattern offsets, clipped to the grid and
/// deduplicated, decoded exactly like the coarse stage.
inline SparseLogits fine_pass(std::span<const CellIndex> anchors_kept, const FeatureMap& fm,
                              const CameraCalibration& cal, const SamplingConfig& cfg,
                              const GridSpec& grid, const Decoder& decoder) {
  if (cfg.fine_pattern.empty()) {
    throw std::invalid_argument("fine_pass: fine_pattern must be nonempty");
  }
  std::vector<std::uint64_t> ordinals;
  ordinals.reserve(anchors_kept.size() * cfg.fine_pattern.size());
  for (const CellIndex anchor : anchors_kept) {
    for (const auto& [dr, dc] : cfg.fine_pattern) {
      const CellIndex cell{anchor.row + dr, anchor.col + dc};
      if (grid.in_bounds(cell)) ordinals.push_back(cell_ordinal(cell, grid.n()));
    }
  }
  std::sort(ordinals.begin(), ordinals.end());
  ordinals.erase(std::unique(ordinals.begin(), ordinals.end()), ordinals.end());
  std::vector<CellIndex> cells;
  cells.reserve(ordinals.size());
  for (const std::uint64_t ord : ordinals) {
    cells.push_back({static_cast<std::int32_t>(ord / grid.n()),
                     static_cast<std::int32_t>(ord % grid.n())});
  }
  std::vector<double> logits = detail::decode_anchors(cells, fm, cal, cfg, grid, decoder);
  return detail::sparse_from(std::move(cells), std::move(logits));
}

/// Scatters both sparse stages onto a dense grid. Fine logits win over coarse
/// ones; cells neither stage sampled get the background fill.
inline ValueGrid combine(const SparseLogits& coarse, const SparseLogits& fine,
                         const GridSpec& grid, double background_fill = kBackgroundLogit) {
  ValueGrid out(grid, background_fill);
  for (std::size_t i = 0; i < coarse.cells.size(); ++i) {
    if (!grid.in_bounds(coarse.cells[i])) throw std::invalid_argument("combine: cell out of bounds");
    out[coarse.cells[i]] = coarse.values[i];
  }
  for (std::size_t i = 0; i < fine.cells.size(); ++i) {
    if (!grid.in_bounds(fine.cells[i])) throw std::invalid_argument("combine: cell out of bounds");
    out[fine.cells[i]] = fine.values[i];
  }
  return out;
}

}  // namespace spherebev
