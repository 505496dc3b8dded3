#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "spherebev/detail/parallel.hpp"

namespace spherebev {

/// Point in the sensor Cartesian frame: x forward, y left, z up (meters).
struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

/// Continuous pixel coordinates. Consumers decide rounding; sub-pixel values
/// feed straight into bilinear sampling.
struct PixelCoord {
  double u = 0.0;
  double v = 0.0;
};

struct SphericalAngles {
  double theta = 0.0;  ///< azimuth, (-pi, pi]
  double phi = 0.0;    ///< polar angle from +x, [0, pi]
};

/// Calibrated dual-fisheye camera model.
///
/// A fourth-order polynomial r(phi) maps the polar angle to a normalized
/// image-plane radius; the two hemispheres are packed side by side in one
/// image, back lens in the left half and front lens in the right half.
class CameraCalibration {
 public:
  CameraCalibration(const std::array<double, 5>& coeffs, int width, int height,
                    double epsilon = 1e-9)
      : coeffs_(coeffs), width_(width), height_(height), epsilon_(epsilon) {
    if (width < 2 || width % 2 != 0) {
      throw std::invalid_argument("CameraCalibration: width must be even and >= 2");
    }
    if (height < 1) {
      throw std::invalid_argument("CameraCalibration: height must be >= 1");
    }
    if (!(epsilon > 0.0)) {
      throw std::invalid_argument("CameraCalibration: epsilon must be positive");
    }
    for (double a : coeffs) {
      if (!std::isfinite(a)) {
        throw std::invalid_argument("CameraCalibration: coefficients must be finite");
      }
    }
  }

  /// Equidistant mapping r = (2/pi) * phi: the 90-degree rim lands exactly on
  /// the fisheye circle edge. Dimensions default to the 1280x640 dual-fisheye
  /// frame.
  static CameraCalibration equidistant(int width = 1280, int height = 640) {
    return CameraCalibration({0.0, 2.0 / std::numbers::pi, 0.0, 0.0, 0.0}, width, height);
  }

  /// Per-lens mapping folded into one polynomial: r(phi) = (4/pi)phi -
  /// (4/pi^2)phi^2, so r(0) = r(pi) = 0 and r(pi/2) = 1. Both optical axes
  /// land at their fisheye circle centers, which keeps every direction inside
  /// the image disks.
  static CameraCalibration dual_lens(int width = 1280, int height = 640) {
    const double pi = std::numbers::pi;
    return CameraCalibration({0.0, 4.0 / pi, -4.0 / (pi * pi), 0.0, 0.0}, width, height);
  }

  const std::array<double, 5>& coeffs() const { return coeffs_; }
  int width() const { return width_; }
  int height() const { return height_; }
  double epsilon() const { return epsilon_; }

 private:
  std::array<double, 5> coeffs_;
  int width_;
  int height_;
  double epsilon_;
};

/// Spherical angles of a Cartesian point.
///
/// theta = atan2(y, z) with theta = 0 when y = z = 0 (any azimuth is valid
/// there since the radius collapses; 0 keeps it deterministic).
/// phi = atan2(sqrt(y^2 + z^2), x + epsilon), which lands in [0, pi] and
/// distinguishes the front and back hemispheres.
inline SphericalAngles to_spherical(const Point3& p, const CameraCalibration& cal) {
  const double lateral = std::sqrt(p.y * p.y + p.z * p.z);
  double theta = (p.y == 0.0 && p.z == 0.0) ? 0.0 : std::atan2(p.y, p.z);
  if (theta == -std::numbers::pi) theta = std::numbers::pi;  // negative-zero y
  const double phi = std::atan2(lateral, p.x + cal.epsilon());
  return {theta, phi};
}

/// Polynomial radius r(phi) = a4 phi^4 + a3 phi^3 + a2 phi^2 + a1 phi + a0,
/// evaluated with Horner's scheme.
inline double radius(double phi, const CameraCalibration& cal) {
  const auto& a = cal.coeffs();
  return ((((a[4] * phi + a[3]) * phi + a[2]) * phi + a[1]) * phi + a[0]);
}

/// Projects a 3D point to continuous pixel coordinates of the dual-fisheye
/// image. Front-hemisphere points (x > 0) shift into the right image half,
/// back-hemisphere points into the left half; the result is clipped to
/// [0, W-1] x [0, H-1].
inline PixelCoord project(const Point3& p, const CameraCalibration& cal) {
  const auto [theta, phi] = to_spherical(p, cal);
  const double r = radius(phi, cal);
  double x = r * std::cos(theta);
  const double y = r * std::sin(theta);
  x = (p.x > 0.0) ? (x + 1.0) / 2.0 : (x - 1.0) / 2.0;
  double u = (x + 1.0) / 2.0 * static_cast<double>(cal.width());
  double v = (-y + 1.0) / 2.0 * static_cast<double>(cal.height());
  u = std::clamp(u, 0.0, static_cast<double>(cal.width() - 1));
  v = std::clamp(v, 0.0, static_cast<double>(cal.height() - 1));
  return {u, v};
}

/// Elementwise project(); order preserved. May run across threads, with
/// results bit-identical to the sequential evaluation.
inline std::vector<PixelCoord> project_batch(std::span<const Point3> points,
                                             const CameraCalibration& cal) {
  std::vector<PixelCoord> out(points.size());
  detail::parallel_for(points.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) out[i] = project(points[i], cal);
  });
  return out;
}

}  // namespace spherebev
