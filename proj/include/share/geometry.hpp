#pragma once

// Camera viewpoints on a sphere around the subject and the uniform
// (elevation, azimuth) grids used for evaluation and sampling.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "share/error.hpp"
#include "share/io.hpp"

namespace share {

inline constexpr double kThetaMin = -60.0;
inline constexpr double kThetaMax = 60.0;
inline constexpr double kDefaultRadius = 2.5;

constexpr double deg2rad(double d) noexcept { return d * std::numbers::pi / 180.0; }
constexpr double rad2deg(double r) noexcept { return r * 180.0 / std::numbers::pi; }

/// Maps any azimuth into [0, 360). -0.0 becomes +0.0.
inline double canonical_phi(double phi_deg) {
  double p = std::fmod(phi_deg, 360.0);
  if (p < 0.0) p += 360.0;
  if (p >= 360.0) p -= 360.0;
  return p == 0.0 ? 0.0 : p;
}

/// Spherical viewpoint: theta is elevation, phi azimuth (degrees), radius in meters.
struct CameraPose {
  double theta_deg = 0.0;
  double phi_deg = 0.0;
  double radius = kDefaultRadius;

  /// Validating constructor; phi is canonicalised.
  static CameraPose make(double theta_deg, double phi_deg, double radius) {
    if (!std::isfinite(theta_deg) || theta_deg < kThetaMin || theta_deg > kThetaMax)
      throw InvalidArgument("theta_deg must lie in [-60, 60], got " + io::format_sig(theta_deg, 9));
    if (!std::isfinite(phi_deg)) throw InvalidArgument("phi_deg must be finite");
    if (!std::isfinite(radius) || radius <= 0.0)
      throw InvalidArgument("radius must be positive, got " + io::format_sig(radius, 9));
    return CameraPose{theta_deg, canonical_phi(phi_deg), radius};
  }

  bool valid() const noexcept {
    return std::isfinite(theta_deg) && theta_deg >= kThetaMin && theta_deg <= kThetaMax &&
           phi_deg >= 0.0 && phi_deg < 360.0 && std::isfinite(radius) && radius > 0.0;
  }

  friend bool operator==(const CameraPose&, const CameraPose&) = default;
};

/// Lexicographic (phi, theta, radius) order; this is the sweep order of a grid.
inline bool sweep_less(const CameraPose& a, const CameraPose& b) noexcept {
  if (a.phi_deg != b.phi_deg) return a.phi_deg < b.phi_deg;
  if (a.theta_deg != b.theta_deg) return a.theta_deg < b.theta_deg;
  return a.radius < b.radius;
}

struct DegreeRange {
  double lo = 0.0;
  double hi = 0.0;
};

struct PoseGrid {
  std::vector<CameraPose> poses;  // phi-major, theta-minor
  std::size_t n_theta = 0;
  std::size_t n_phi = 0;

  std::size_t size() const noexcept { return poses.size(); }
  const CameraPose& at(std::size_t i_theta, std::size_t j_phi) const { return poses.at(j_phi * n_theta + i_theta); }
};

/// Theta values include both endpoints; phi values cover [lo, hi) so 0 and
/// 360 never both appear.
inline PoseGrid build_grid(std::size_t n_theta, std::size_t n_phi, DegreeRange theta_range,
                           DegreeRange phi_range, double radius) {
  if (n_theta < 1 || n_phi < 1) throw InvalidArgument("grid counts must be at least 1");
  if (!(theta_range.lo <= theta_range.hi)) throw InvalidArgument("theta range is inverted");
  if (!(phi_range.lo <= phi_range.hi)) throw InvalidArgument("phi range is inverted");
  if (theta_range.lo < kThetaMin || theta_range.hi > kThetaMax)
    throw InvalidArgument("theta range must lie within [-60, 60]");
  if (phi_range.lo < 0.0 || phi_range.hi > 360.0) throw InvalidArgument("phi range must lie within [0, 360]");
  if (!std::isfinite(radius) || radius <= 0.0) throw InvalidArgument("radius must be positive");
  if (n_theta > 1 && theta_range.lo == theta_range.hi)
    throw InvalidArgument("empty theta range cannot hold more than one theta step");
  if (n_phi > 1 && phi_range.lo == phi_range.hi)
    throw InvalidArgument("empty phi range cannot hold more than one phi step");

  PoseGrid grid;
  grid.n_theta = n_theta;
  grid.n_phi = n_phi;
  grid.poses.reserve(n_theta * n_phi);
  const double dtheta = n_theta > 1 ? (theta_range.hi - theta_range.lo) / static_cast<double>(n_theta - 1) : 0.0;
  const double dphi = (phi_range.hi - phi_range.lo) / static_cast<double>(n_phi);
  for (std::size_t j = 0; j < n_phi; ++j) {
    const double phi = phi_range.lo + dphi * static_cast<double>(j);
    for (std::size_t i = 0; i < n_theta; ++i) {
      // Pin the last theta to the endpoint so rounding cannot leave the domain.
      const double theta =
          (n_theta > 1 && i == n_theta - 1) ? theta_range.hi : theta_range.lo + dtheta * static_cast<double>(i);
      grid.poses.push_back(CameraPose{theta, canonical_phi(phi), radius});
    }
  }
  return grid;
}

/// 50 x 50 poses over the full domain.
inline PoseGrid default_grid(double radius = kDefaultRadius) {
  return build_grid(50, 50, {kThetaMin, kThetaMax}, {0.0, 360.0}, radius);
}

inline Eigen::Vector3d to_cartesian(const CameraPose& pose) {
  const double t = deg2rad(pose.theta_deg);
  const double p = deg2rad(pose.phi_deg);
  return {pose.radius * std::cos(t) * std::cos(p), pose.radius * std::cos(t) * std::sin(p),
          pose.radius * std::sin(t)};
}

/// Inverse of to_cartesian. Throws for the origin or points above |theta| = 60.
inline CameraPose from_cartesian(const Eigen::Vector3d& point) {
  const double r = point.norm();
  if (!(r > 0.0)) throw InvalidArgument("cannot convert the origin to a camera pose");
  const double theta = rad2deg(std::asin(std::clamp(point.z() / r, -1.0, 1.0)));
  const double phi = rad2deg(std::atan2(point.y(), point.x()));
  return CameraPose::make(std::clamp(theta, kThetaMin, kThetaMax), phi, r);
}

/// Unit viewing direction; great-circle distances are acos of dot products.
inline Eigen::Vector3d direction(const CameraPose& pose) {
  CameraPose unit = pose;
  unit.radius = 1.0;
  return to_cartesian(unit);
}

inline double angular_distance_deg(const CameraPose& a, const CameraPose& b) {
  return rad2deg(std::acos(std::clamp(direction(a).dot(direction(b)), -1.0, 1.0)));
}

inline constexpr const char* kGridCsvHeader = "theta_deg,phi_deg,radius";

inline std::string grid_to_csv(const std::vector<CameraPose>& poses) {
  std::string out = kGridCsvHeader;
  out += '\n';
  for (const auto& p : poses) {
    out += io::format_sig(p.theta_deg, 9);
    out += ',';
    out += io::format_sig(p.phi_deg, 9);
    out += ',';
    out += io::format_sig(p.radius, 9);
    out += '\n';
  }
  return out;
}

inline std::vector<CameraPose> poses_from_csv(std::string_view text, const std::string& source) {
  std::vector<CameraPose> poses;
  for (const auto& row : io::parse_numeric_csv(text, kGridCsvHeader, source)) {
    try {
      poses.push_back(CameraPose::make(row.values[0], row.values[1], row.values[2]));
    } catch (const InvalidArgument& e) {
      throw ParseError(source, row.line, e.what());
    }
  }
  return poses;
}

}  // namespace share
