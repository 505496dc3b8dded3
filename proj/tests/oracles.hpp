#pragma once

// Independent reference implementations used to freeze expected values.
// Everything here deliberately avoids the library's computation paths:
// brute-force geometry, naive summation, full sorts, global matching.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <spherebev/camera.hpp>
#include <spherebev/grid.hpp>
#include <spherebev/ground_truth.hpp>
#include <spherebev/sampling.hpp>
#include <spherebev/sync.hpp>

namespace oracles {

/// Naive power-sum polynomial evaluation (vs the library's Horner scheme).
inline double poly_power_sum(const std::array<double, 5>& a, double phi) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sum += a[i] * std::pow(phi, static_cast<double>(i));
  }
  return sum;
}

/// Point-in-convex-polygon by cross-product signs, boundary inclusive.
/// Corners must be in counter-clockwise order.
inline bool point_in_convex_polygon(std::span<const spherebev::Vec2> corners, double x,
                                    double y) {
  for (std::size_t i = 0; i < corners.size(); ++i) {
    const spherebev::Vec2& a = corners[i];
    const spherebev::Vec2& b = corners[(i + 1) % corners.size()];
    const double cross = (b.x - a.x) * (y - a.y) - (b.y - a.y) * (x - a.x);
    if (cross < 0.0) return false;
  }
  return true;
}

/// Brute-force BEV rasterization: polygon containment test per cell center.
inline spherebev::LabelGrid rasterize_oracle(std::span<const spherebev::BoundingBox3D> boxes,
                                             const spherebev::GridSpec& grid,
                                             std::optional<spherebev::ClassLabel> filter) {
  spherebev::LabelGrid out(grid, 0);
  const auto n = static_cast<std::int32_t>(grid.n());
  for (const auto& box : boxes) {
    if (filter && box.class_label != *filter) continue;
    const auto corners = spherebev::footprint_corners(box);
    for (std::int32_t r = 0; r < n; ++r) {
      for (std::int32_t c = 0; c < n; ++c) {
        const auto center = grid.cell_center({r, c});
        if (point_in_convex_polygon(corners, center.x, center.y)) out[{r, c}] = 1;
      }
    }
  }
  return out;
}

/// Cell-by-cell IoU counting.
inline double iou_counting_oracle(const spherebev::LabelGrid& a,
                                  const spherebev::LabelGrid& b) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const bool pa = a.data()[i] != 0;
    const bool pb = b.data()[i] != 0;
    if (pa && pb) ++inter;
    if (pa || pb) ++uni;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// Full-sort top-k with the documented tie rule (row-major ordinal ascending).
inline std::vector<spherebev::CellIndex> top_k_oracle(
    std::span<const spherebev::CellIndex> cells, std::span<const double> values,
    std::size_t k, std::size_t cells_per_side) {
  std::vector<std::size_t> order(cells.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (values[a] != values[b]) return values[a] > values[b];
    return spherebev::cell_ordinal(cells[a], cells_per_side) <
           spherebev::cell_ordinal(cells[b], cells_per_side);
  });
  std::vector<spherebev::CellIndex> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(cells[order[i]]);
  std::sort(out.begin(), out.end(), [&](spherebev::CellIndex a, spherebev::CellIndex b) {
    return spherebev::cell_ordinal(a, cells_per_side) <
           spherebev::cell_ordinal(b, cells_per_side);
  });
  return out;
}

/// Direct dense evaluation of the feature-pulling pipeline: one pillar per
/// cell, decoded independently of the coarse/fine machinery.
inline spherebev::ValueGrid dense_eval_oracle(const spherebev::FeatureMap& fm,
                                              const spherebev::CameraCalibration& cal,
                                              const spherebev::SamplingConfig& cfg,
                                              const spherebev::GridSpec& grid,
                                              const spherebev::Decoder& decoder) {
  spherebev::ValueGrid out(grid, 0.0);
  const auto n = static_cast<std::int32_t>(grid.n());
  for (std::int32_t r = 0; r < n; ++r) {
    for (std::int32_t c = 0; c < n; ++c) {
      const spherebev::CellIndex cell{r, c};
      const auto pillars = spherebev::make_pillars({&cell, 1}, cfg, grid);
      const auto volume = spherebev::pull_features(pillars, fm, cal);
      out[cell] = decoder.decode(volume.anchor_block(0), volume.points_per_pillar,
                                 volume.channels);
    }
  }
  return out;
}

/// Offline global matcher over a complete trace: walks reference messages in
/// time order with full knowledge of every stream, picks the nearest in-slop
/// candidate per stream among messages not yet consumed or superseded, and
/// drops everything older on emission (mirroring the online semantics minus
/// the arrival-order constraints).
inline std::vector<spherebev::SyncedFrame> offline_match_oracle(
    std::span<const spherebev::StampedMessage> trace,
    std::span<const spherebev::StreamId> streams, const spherebev::SyncConfig& cfg) {
  std::vector<std::vector<spherebev::StampedMessage>> per_stream(streams.size());
  std::vector<std::size_t> cursor(streams.size(), 0);
  auto stream_index = [&](spherebev::StreamId id) {
    for (std::size_t i = 0; i < streams.size(); ++i) {
      if (streams[i] == id) return i;
    }
    return streams.size();
  };
  for (const auto& msg : trace) per_stream[stream_index(msg.stream)].push_back(msg);
  const std::size_t ref = stream_index(cfg.reference);

  std::vector<spherebev::SyncedFrame> frames;
  for (std::size_t ri = 0; ri < per_stream[ref].size(); ++ri) {
    if (ri < cursor[ref]) continue;  // consumed or dropped by an earlier frame
    const double t = per_stream[ref][ri].timestamp;
    std::vector<std::size_t> chosen(streams.size());
    chosen[ref] = ri;
    bool ok = true;
    for (std::size_t s = 0; s < streams.size() && ok; ++s) {
      if (s == ref) continue;
      double best = std::numeric_limits<double>::infinity();
      std::size_t best_index = 0;
      for (std::size_t i = cursor[s]; i < per_stream[s].size(); ++i) {
        const double dist = std::abs(per_stream[s][i].timestamp - t);
        if (dist < best) {
          best = dist;
          best_index = i;
        }
      }
      if (!(best <= cfg.slop)) {
        ok = false;
        break;
      }
      chosen[s] = best_index;
    }
    if (!ok) continue;
    spherebev::SyncedFrame frame;
    frame.frame_time = t;
    for (std::size_t s = 0; s < streams.size(); ++s) {
      frame.members.push_back(per_stream[s][chosen[s]]);
      cursor[s] = chosen[s] + 1;
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

/// Central finite difference.
template <typename F>
double central_diff(F&& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// 4-connected positive components.
inline std::size_t connected_components(const spherebev::LabelGrid& grid) {
  const auto n = static_cast<std::int32_t>(grid.n());
  std::vector<char> seen(grid.data().size(), 0);
  std::size_t components = 0;
  std::deque<spherebev::CellIndex> frontier;
  for (std::int32_t r = 0; r < n; ++r) {
    for (std::int32_t c = 0; c < n; ++c) {
      const std::size_t idx = static_cast<std::size_t>(r) * grid.n() + c;
      if (!grid[{r, c}] || seen[idx]) continue;
      ++components;
      seen[idx] = 1;
      frontier.push_back({r, c});
      while (!frontier.empty()) {
        const auto cell = frontier.front();
        frontier.pop_front();
        const std::array<spherebev::CellIndex, 4> neighbors{
            {{cell.row - 1, cell.col}, {cell.row + 1, cell.col},
             {cell.row, cell.col - 1}, {cell.row, cell.col + 1}}};
        for (const auto nb : neighbors) {
          if (nb.row < 0 || nb.col < 0 || nb.row >= n || nb.col >= n) continue;
          const std::size_t nidx = static_cast<std::size_t>(nb.row) * grid.n() + nb.col;
          if (grid[nb] && !seen[nidx]) {
            seen[nidx] = 1;
            frontier.push_back(nb);
          }
        }
      }
    }
  }
  return components;
}

}  // namespace oracles
