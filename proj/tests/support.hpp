#pragma once

// Helpers shared by the unit tests and the acceptance runner.

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include <Eigen/Geometry>

#include "share/metrics.hpp"
#include "share/random.hpp"

namespace testing_support {

/// Upper 1% point of chi-square with 2499 degrees of freedom (scipy.stats.chi2.ppf).
inline constexpr double kChiSquare99Df2499 = 2666.39997572903;

/// Pearson statistic of observed counts against a uniform expectation.
template <typename Counts>
double chi_square_uniform(const Counts& counts, double total) {
  const double expected = total / static_cast<double>(counts.size());
  double stat = 0.0;
  for (const auto c : counts) stat += (static_cast<double>(c) - expected) * (static_cast<double>(c) - expected) / expected;
  return stat;
}

inline Eigen::Matrix3d random_rotation(share::Rng& rng) {
  Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  return q.toRotationMatrix();
}

inline share::JointSet random_joints(share::Rng& rng, int J, double spread = 300.0) {
  share::JointMatrix m(J, 3);
  for (int j = 0; j < J; ++j)
    for (int c = 0; c < 3; ++c) m(j, c) = spread * rng.normal();
  return share::JointSet(m);
}

inline share::RigidTransform random_similarity(share::Rng& rng, double smin = 0.1, double smax = 10.0) {
  share::RigidTransform T;
  T.s = std::exp(rng.uniform(std::log(smin), std::log(smax)));
  T.R = random_rotation(rng);
  T.t = Eigen::RowVector3d(rng.uniform(-1000, 1000), rng.uniform(-1000, 1000), rng.uniform(-1000, 1000));
  return T;
}

/// PA-MPJPE through Eigen's Umeyama similarity estimate (column vectors),
/// independent of the library's SVD path.
inline double umeyama_pa_mpjpe(const share::JointSet& pred, const share::JointSet& gt) {
  const Eigen::MatrixXd src = pred.matrix().transpose();
  const Eigen::MatrixXd dst = gt.matrix().transpose();
  const Eigen::Matrix4d T = Eigen::umeyama(src, dst, true);
  const Eigen::MatrixXd aligned = (T.topLeftCorner<3, 3>() * src).colwise() + T.topRightCorner<3, 1>();
  return (aligned - dst).colwise().norm().mean();
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  std::filesystem::path operator/(const std::string& name) const { return path / name; }

 private:
  static int& counter() {
    static int n = 0;
    return n;
  }
};

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr, interleaved
};

/// Runs a shell command in `cwd`, capturing combined output.
inline RunResult run(const std::string& command, const std::filesystem::path& cwd) {
  const std::string full = "cd '" + cwd.string() + "' && " + command + " 2>&1";
  RunResult r;
  FILE* pipe = ::popen(full.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

}  // namespace testing_support
