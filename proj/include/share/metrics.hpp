#pragma once

// MPJPE and Procrustes-aligned PA-MPJPE over 3D joint sets.
//
// Joints are stored as rows, and a similarity acts on row vectors:
// T(x) = s * x * R + t.

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "share/error.hpp"
#include "share/io.hpp"

namespace share {

using JointMatrix = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Ordered joint positions in millimeters, one row per joint.
class JointSet {
 public:
  JointSet() = default;
  explicit JointSet(JointMatrix joints) : joints_(std::move(joints)) {
    if (joints_.rows() < 1) throw InvalidArgument("a joint set needs at least one joint");
    if (!joints_.allFinite()) throw InvalidArgument("joint coordinates must be finite");
  }
  JointSet(std::initializer_list<Eigen::RowVector3d> rows) : JointSet(stack(rows)) {}

  Eigen::Index size() const noexcept { return joints_.rows(); }
  const JointMatrix& matrix() const noexcept { return joints_; }
  Eigen::RowVector3d joint(Eigen::Index j) const { return joints_.row(j); }

 private:
  static JointMatrix stack(std::initializer_list<Eigen::RowVector3d> rows) {
    JointMatrix m(static_cast<Eigen::Index>(rows.size()), 3);
    Eigen::Index i = 0;
    for (const auto& r : rows) m.row(i++) = r;
    return m;
  }
  JointMatrix joints_;
};

struct RigidTransform {
  double s = 1.0;
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::RowVector3d t = Eigen::RowVector3d::Zero();

  static RigidTransform identity() { return {}; }

  /// T^{-1}(y) = (y - t) R^T / s.
  RigidTransform inverse() const {
    RigidTransform inv;
    inv.s = 1.0 / s;
    inv.R = R.transpose();
    inv.t = -(t * R.transpose()) / s;
    return inv;
  }
};

inline void require_same_count(const JointSet& pred, const JointSet& gt) {
  if (pred.size() != gt.size())
    throw InvalidArgument("joint count mismatch: pred has " + std::to_string(pred.size()) + ", gt has " +
                          std::to_string(gt.size()));
}

inline double mpjpe(const JointSet& pred, const JointSet& gt) {
  require_same_count(pred, gt);
  return (pred.matrix() - gt.matrix()).rowwise().norm().mean();
}

inline JointSet apply_transform(const RigidTransform& T, const JointSet& x) {
  JointMatrix out = (T.s * (x.matrix() * T.R)).rowwise() + T.t;
  return JointSet(std::move(out));
}

/// Relative singular-value floor below which the rotation is not unique.
inline constexpr double kRankTolerance = 1e-10;

/// Least-squares similarity mapping pred onto gt, reflections excluded.
inline RigidTransform procrustes_align(const JointSet& pred, const JointSet& gt) {
  require_same_count(pred, gt);
  if (pred.size() < 3) throw InvalidArgument("Procrustes alignment needs at least 3 joints");

  const Eigen::RowVector3d mu_p = pred.matrix().colwise().mean();
  const Eigen::RowVector3d mu_g = gt.matrix().colwise().mean();
  const JointMatrix P = pred.matrix().rowwise() - mu_p;
  const JointMatrix G = gt.matrix().rowwise() - mu_g;

  const double var_p = P.squaredNorm();
  if (!(var_p > 0.0)) throw DegenerateGeometry("prediction joints are all coincident");

  // Maximise tr(R^T P^T G): with P^T G = U S V^T the optimum is R = U D V^T.
  const Eigen::Matrix3d H = P.transpose() * G;
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(1) <= kRankTolerance * sv(0))
    throw DegenerateGeometry("cross-covariance has rank < 2; rotation is not unique");

  Eigen::Vector3d d(1.0, 1.0, 1.0);
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2) = -1.0;

  RigidTransform T;
  T.R = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
  T.s = sv.dot(d) / var_p;
  if (!(T.s > 0.0)) throw DegenerateGeometry("alignment scale is not positive");
  T.t = mu_g - T.s * (mu_p * T.R);
  return T;
}

inline double pa_mpjpe(const JointSet& pred, const JointSet& gt) {
  return mpjpe(apply_transform(procrustes_align(pred, gt), pred), gt);
}

inline constexpr const char* kJointCsvHeader = "x_mm,y_mm,z_mm";

/// All rows of a joint CSV as one matrix.
inline JointMatrix joints_from_csv(std::string_view text, const std::string& source) {
  const auto rows = io::parse_numeric_csv(text, kJointCsvHeader, source);
  JointMatrix m(static_cast<Eigen::Index>(rows.size()), 3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      if (!std::isfinite(rows[i].values[c])) throw ParseError(source, rows[i].line, "non-finite coordinate");
      m(static_cast<Eigen::Index>(i), c) = rows[i].values[c];
    }
  }
  return m;
}

/// Splits a stacked joint matrix into consecutive blocks of `joints_per_set` rows.
inline std::vector<JointSet> split_blocks(const JointMatrix& all, Eigen::Index joints_per_set) {
  if (joints_per_set < 1) throw InvalidArgument("joints per set must be positive");
  if (all.rows() == 0 || all.rows() % joints_per_set != 0)
    throw InvalidArgument(std::to_string(all.rows()) + " joint rows do not divide into blocks of " +
                          std::to_string(joints_per_set));
  std::vector<JointSet> sets;
  for (Eigen::Index r = 0; r < all.rows(); r += joints_per_set)
    sets.emplace_back(JointMatrix(all.middleRows(r, joints_per_set)));
  return sets;
}

inline std::string joints_to_csv(const JointSet& set) {
  std::string out = kJointCsvHeader;
  out += '\n';
  for (Eigen::Index j = 0; j < set.size(); ++j) {
    for (int c = 0; c < 3; ++c) {
      out += io::format_exact(set.matrix()(j, c));
      out += c < 2 ? ',' : '\n';
    }
  }
  return out;
}

}  // namespace share
