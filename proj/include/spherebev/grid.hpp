#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace spherebev {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

struct CellIndex {
  std::int32_t row = 0;
  std::int32_t col = 0;

  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

/// Row-major ordinal of a cell. All deterministic orderings and tie-breaks in
/// this library sort by this value.
inline std::uint64_t cell_ordinal(CellIndex cell, std::size_t cells_per_side) {
  return static_cast<std::uint64_t>(cell.row) * cells_per_side +
         static_cast<std::uint64_t>(cell.col);
}

/// Square, ego-centered metric grid geometry.
///
/// Orientation convention (fixed for file interchange): +x is forward and
/// maps to decreasing row index, so row 0 is the front edge of the grid.
/// +y is left and maps to decreasing column index, so column 0 is the left
/// edge. A point exactly on the leading (front/left) boundary belongs to the
/// first cell; the trailing boundary is exclusive.
class GridSpec {
 public:
  GridSpec() : GridSpec(100.0, 0.5) {}

  GridSpec(double side_meters, double resolution)
      : side_meters_(side_meters), resolution_(resolution) {
    if (!(side_meters > 0.0) || !(resolution > 0.0)) {
      throw std::invalid_argument("GridSpec: side and resolution must be positive");
    }
    const double cells = side_meters / resolution;
    const auto n = static_cast<std::int64_t>(std::llround(cells));
    if (n < 1 || std::abs(cells - static_cast<double>(n)) > 1e-9 * static_cast<double>(n)) {
      throw std::invalid_argument("GridSpec: side must be an integer multiple of resolution");
    }
    n_ = static_cast<std::size_t>(n);
  }

  double side_meters() const { return side_meters_; }
  double resolution() const { return resolution_; }

  /// Cells per side.
  std::size_t n() const { return n_; }
  std::size_t cell_count() const { return n_ * n_; }

  /// Metric coordinates of a cell's center. Works for out-of-range indices
  /// too (extrapolates the lattice).
  Vec2 cell_center(CellIndex cell) const {
    const double half = 0.5 * side_meters_;
    return {half - (static_cast<double>(cell.row) + 0.5) * resolution_,
            half - (static_cast<double>(cell.col) + 0.5) * resolution_};
  }

  /// Cell containing a metric point. The result may be out of bounds; check
  /// with in_bounds().
  CellIndex cell_of(double x, double y) const {
    const double half = 0.5 * side_meters_;
    return {static_cast<std::int32_t>(std::floor((half - x) / resolution_)),
            static_cast<std::int32_t>(std::floor((half - y) / resolution_))};
  }

  bool in_bounds(CellIndex cell) const {
    return cell.row >= 0 && cell.col >= 0 &&
           static_cast<std::size_t>(cell.row) < n_ &&
           static_cast<std::size_t>(cell.col) < n_;
  }

  friend bool operator==(const GridSpec& a, const GridSpec& b) {
    return a.n_ == b.n_ && a.side_meters_ == b.side_meters_ &&
           a.resolution_ == b.resolution_;
  }

 private:
  double side_meters_;
  double resolution_;
  std::size_t n_ = 0;
};

/// Dense square grid of per-cell payloads, row-major.
template <typename T>
class Grid {
 public:
  Grid() : spec_(100.0, 0.5), data_(spec_.cell_count()) {}

  explicit Grid(GridSpec spec, T fill = T{})
      : spec_(spec), data_(spec.cell_count(), fill) {}

  const GridSpec& spec() const { return spec_; }
  std::size_t n() const { return spec_.n(); }

  // Indexing is unchecked; the size invariant is maintained by construction.
  T& at(std::size_t row, std::size_t col) { return data_[row * spec_.n() + col]; }
  const T& at(std::size_t row, std::size_t col) const { return data_[row * spec_.n() + col]; }

  T& operator[](CellIndex cell) {
    return at(static_cast<std::size_t>(cell.row), static_cast<std::size_t>(cell.col));
  }
  const T& operator[](CellIndex cell) const {
    return at(static_cast<std::size_t>(cell.row), static_cast<std::size_t>(cell.col));
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.spec_ == b.spec_ && a.data_ == b.data_;
  }

 private:
  GridSpec spec_;
  std::vector<T> data_;
};

using LabelGrid = Grid<std::uint8_t>;
using ValueGrid = Grid<double>;
using VectorGrid = Grid<Vec2>;

/// True when two grids have the same cell layout (payload types may differ).
template <typename A, typename B>
bool same_shape(const Grid<A>& a, const Grid<B>& b) {
  return a.spec().n() == b.spec().n();
}

}  // namespace spherebev
