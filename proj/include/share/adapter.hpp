#pragma once

// Model adapters: the trainable, per-pose-evaluable stand-in for a pose and
// shape regressor. Two implementations ship: an analytic synthetic oracle
// and a file-exchange bridge to an external process.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <numbers>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include <Eigen/Core>

#include "share/datagen.hpp"
#include "share/error.hpp"
#include "share/geometry.hpp"
#include "share/io.hpp"
#include "share/landscape.hpp"
#include "share/random.hpp"

namespace share {

class ModelAdapter {
 public:
  virtual ~ModelAdapter() = default;

  /// Fine-tunes on `dataset` for `epochs` epochs.
  virtual void train(const DatasetSpec& dataset, int epochs) = 0;

  /// Mean error per pose, in grid order. Repeatable between train calls.
  virtual std::vector<ErrorSample> evaluate(const PoseGrid& grid) = 0;

  /// Whether evaluate may run concurrently with itself.
  virtual bool parallel_evaluate_safe() const { return false; }
};

// ---------------------------------------------------------------------------

struct OracleConfig {
  double base_error_mm = 60.0;
  /// Peak-to-trough height of the azimuthal oscillation.
  double azimuth_amplitude_mm = 60.0;
  int harmonics = 2;
  /// Exponent q in ((1 + cos(h phi)) / 2)^q; larger q gives narrower peaks.
  int sharpness = 2;
  double elevation_slope_mm_per_deg = 0.25;
  double noise_sigma_mm = 1.0;
  /// Error multiplier per epoch-equivalent of excess exposure, in (0, 1).
  double adaptation_rate = 0.7;
  double neighborhood_deg = 15.0;
  /// Expected error never drops below this fraction of base_error_mm.
  double irreducible_fraction = 0.2;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(base_error_mm > 0.0)) throw InvalidArgument("oracle base error must be positive");
    if (!(azimuth_amplitude_mm >= 0.0)) throw InvalidArgument("oracle amplitude must be non-negative");
    if (harmonics < 0 || sharpness < 1) throw InvalidArgument("oracle harmonics >= 0 and sharpness >= 1 required");
    if (!(noise_sigma_mm >= 0.0)) throw InvalidArgument("oracle noise sigma must be non-negative");
    if (!(adaptation_rate > 0.0 && adaptation_rate < 1.0)) throw InvalidArgument("adaptation rate must lie in (0, 1)");
    if (!(neighborhood_deg > 0.0)) throw InvalidArgument("neighborhood radius must be positive");
    if (!(irreducible_fraction >= 0.0 && irreducible_fraction < 1.0))
      throw InvalidArgument("irreducible fraction must lie in [0, 1)");
    if (base_error_mm - std::abs(elevation_slope_mm_per_deg) * kThetaMax < 0.0)
      throw InvalidArgument("elevation slope would drive the initial error negative");
  }
};

/// Analytic error surface that improves where training data over-represents
/// a neighbourhood.
///
/// Initial expected error:
///   e0 = base + amplitude * ((1 + cos(h * phi)) / 2)^q + slope * theta.
/// Each train call measures, for every pose p, how many training images lie
/// within the neighbourhood radius of p relative to the count a uniform
/// spread over the reference grid would put there. The excess ratio
/// max(0, observed / uniform - 1), times epochs * augmentation_fraction, is
/// the epoch-equivalent exposure x; the expected error is multiplied by
/// rate^x and floored at the irreducible error. Uniform data therefore leaves
/// the model unchanged.
class SyntheticOracle final : public ModelAdapter {
 public:
  SyntheticOracle(OracleConfig config, PoseGrid reference)
      : config_(config), reference_(std::move(reference)), cos_radius_(std::cos(deg2rad(config.neighborhood_deg))) {
    config_.validate();
    if (reference_.poses.empty()) throw InvalidArgument("oracle reference grid must not be empty");
    for (const auto& p : reference_.poses) ref_dirs_.push_back(direction(p));
    ref_neighbors_.resize(ref_dirs_.size());
    for (std::size_t i = 0; i < ref_dirs_.size(); ++i) ref_neighbors_[i] = neighbor_count(ref_dirs_[i]);
    ref_log_factor_.assign(ref_dirs_.size(), 0.0);
  }

  const OracleConfig& config() const noexcept { return config_; }
  std::size_t train_calls() const noexcept { return history_.size(); }

  double initial_error(const CameraPose& p) const {
    const double wave = 0.5 * (1.0 + std::cos(config_.harmonics * deg2rad(p.phi_deg)));
    return config_.base_error_mm + config_.azimuth_amplitude_mm * std::pow(wave, config_.sharpness) +
           config_.elevation_slope_mm_per_deg * p.theta_deg;
  }

  /// Closed-form mean of e0 over a grid whose phi steps are uniform over a
  /// full turn with n_phi > h * q: the mean of ((1 + cos)/2)^q is
  /// C(2q, q) / 4^q, and the theta term averages to slope * mean(theta).
  double analytic_grid_mean(const PoseGrid& grid) const {
    double mean_theta = 0.0;
    for (const auto& p : grid.poses) mean_theta += p.theta_deg;
    mean_theta /= static_cast<double>(grid.size());
    double wave_mean = 1.0;
    if (config_.harmonics > 0) {
      const int q = config_.sharpness;
      double binom = 1.0;
      for (int k = 1; k <= q; ++k) binom = binom * (q + k) / k;
      wave_mean = binom / std::pow(4.0, q);
    }
    return config_.base_error_mm + config_.azimuth_amplitude_mm * wave_mean +
           config_.elevation_slope_mm_per_deg * mean_theta;
  }

  double floor_error() const { return config_.irreducible_fraction * config_.base_error_mm; }

  double expected_error(const CameraPose& p) const {
    return std::max(floor_error(), initial_error(p) * std::exp(log_factor(p)));
  }

  void train(const DatasetSpec& dataset, int epochs) override {
    if (epochs < 0) throw InvalidArgument("epochs must be non-negative");
    Record rec;
    rec.weight = epochs * dataset.augmentation_fraction;
    rec.total = static_cast<double>(dataset.scenes.size());
    std::map<std::pair<double, double>, std::size_t> slot;
    for (const auto& s : dataset.scenes) {
      const auto key = std::make_pair(s.camera.theta_deg, s.camera.phi_deg);
      auto [it, inserted] = slot.try_emplace(key, rec.dirs.size());
      if (inserted) {
        rec.dirs.push_back(direction(s.camera));
        rec.counts.push_back(0.0);
      }
      rec.counts[it->second] += 1.0;
    }
    for (std::size_t i = 0; i < ref_dirs_.size(); ++i)
      ref_log_factor_[i] += exposure(rec, ref_dirs_[i], ref_neighbors_[i]) * std::log(config_.adaptation_rate);
    history_.push_back(std::move(rec));
  }

  std::vector<ErrorSample> evaluate(const PoseGrid& grid) override {
    const bool on_reference = grid.poses == reference_.poses;
    std::vector<ErrorSample> out;
    out.reserve(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const CameraPose& p = grid.poses[i];
      const double lf = on_reference ? ref_log_factor_[i] : log_factor(p);
      const double expected = std::max(floor_error(), initial_error(p) * std::exp(lf));
      const double noise = config_.noise_sigma_mm * hashed_normal(config_.seed, history_.size(), pose_key(p));
      out.push_back({p, std::max(0.0, expected + noise)});
    }
    return out;
  }

  bool parallel_evaluate_safe() const override { return true; }

 private:
  struct Record {
    std::vector<Eigen::Vector3d> dirs;
    std::vector<double> counts;
    double total = 0.0;
    double weight = 0.0;  // epochs * augmentation fraction
  };

  static std::uint64_t pose_key(const CameraPose& p) {
    std::uint64_t a = 0;
    std::uint64_t b = 0;
    std::memcpy(&a, &p.theta_deg, sizeof a);
    std::memcpy(&b, &p.phi_deg, sizeof b);
    return mix_seed(a) ^ (b * 0x9e3779b97f4a7c15ULL);
  }

  double neighbor_count(const Eigen::Vector3d& dir) const {
    double k = 0.0;
    for (const auto& r : ref_dirs_)
      if (dir.dot(r) >= cos_radius_) k += 1.0;
    return k;
  }

  double exposure(const Record& rec, const Eigen::Vector3d& dir, double neighbors) const {
    if (rec.total <= 0.0 || neighbors <= 0.0) return 0.0;
    double observed = 0.0;
    for (std::size_t q = 0; q < rec.dirs.size(); ++q)
      if (dir.dot(rec.dirs[q]) >= cos_radius_) observed += rec.counts[q];
    const double uniform = rec.total * neighbors / static_cast<double>(ref_dirs_.size());
    return rec.weight * std::max(0.0, observed / uniform - 1.0);
  }

  double log_factor(const CameraPose& p) const {
    const Eigen::Vector3d dir = direction(p);
    const double k = neighbor_count(dir);
    double lf = 0.0;
    for (const auto& rec : history_) lf += exposure(rec, dir, k) * std::log(config_.adaptation_rate);
    return lf;
  }

  OracleConfig config_;
  PoseGrid reference_;
  double cos_radius_;
  std::vector<Eigen::Vector3d> ref_dirs_;
  std::vector<double> ref_neighbors_;
  std::vector<double> ref_log_factor_;
  std::vector<Record> history_;
};

// ---------------------------------------------------------------------------

struct FileBridgeConfig {
  std::filesystem::path directory;
  std::chrono::milliseconds timeout{std::chrono::minutes(10)};
  std::chrono::milliseconds poll{50};
};

/// Exchanges requests with an external responder through files named
/// NNN.<kind>, NNN being the zero-padded interval index:
///   train:    writes NNN.trainspec.json, waits for NNN.ack
///   evaluate: writes NNN.grid.csv, waits for NNN.errors.csv
/// Responders should create their files atomically (write, then rename).
class FileBridge final : public ModelAdapter {
 public:
  explicit FileBridge(FileBridgeConfig config) : config_(std::move(config)) {
    std::filesystem::create_directories(config_.directory);
  }

  static std::string stem(int interval) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%03d", interval);
    return buf;
  }

  std::filesystem::path path_for(const std::string& kind) const {
    return config_.directory / (stem(interval_) + "." + kind);
  }

  void train(const DatasetSpec& dataset, int epochs) override {
    interval_ = dataset.interval;
    const auto ack = path_for("ack");
    std::filesystem::remove(ack);
    Json request = to_json(dataset);
    request["epochs"] = epochs;
    io::write_atomic(path_for("trainspec.json"), request.dump(1) + '\n');
    wait_for(ack, [](const std::filesystem::path&) { return 0; });
  }

  std::vector<ErrorSample> evaluate(const PoseGrid& grid) override {
    const auto reply = path_for("errors.csv");
    std::filesystem::remove(reply);
    io::write_atomic(path_for("grid.csv"), grid_to_csv(grid.poses));
    return wait_for(reply, [&](const std::filesystem::path& p) { return match(grid, p); });
  }

 private:
  template <typename Read>
  std::invoke_result_t<Read, const std::filesystem::path&> wait_for(const std::filesystem::path& target, Read read) {
    const auto deadline = std::chrono::steady_clock::now() + config_.timeout;
    for (;;) {
      if (std::filesystem::exists(target)) {
        try {
          return read(target);
        } catch (const ParseError&) {
          // A responder that writes in place may still be mid-write.
          if (std::chrono::steady_clock::now() >= deadline) throw;
        }
      } else if (std::chrono::steady_clock::now() >= deadline) {
        throw TimeoutError("no response " + target.filename().string() + " in " + config_.directory.string() +
                           " after " + std::to_string(config_.timeout.count()) + " ms");
      }
      std::this_thread::sleep_for(config_.poll);
    }
  }

  /// Pairs reply rows with grid poses by position; coordinates must agree to
  /// the 9 significant digits the grid file carries.
  static std::vector<ErrorSample> match(const PoseGrid& grid, const std::filesystem::path& path) {
    const auto rows = errors_from_csv(io::read_file(path), path.string());
    if (rows.size() != grid.size())
      throw ParseError(path.string(), 0,
                       "expected " + std::to_string(grid.size()) + " rows, got " + std::to_string(rows.size()));
    std::vector<ErrorSample> out;
    out.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& want = grid.poses[i];
      const double tol = 1e-6 * (1.0 + std::abs(want.phi_deg));
      if (std::abs(rows[i].pose.theta_deg - want.theta_deg) > tol || std::abs(rows[i].pose.phi_deg - want.phi_deg) > tol)
        throw ParseError(path.string(), i + 2, "row does not match grid pose " + std::to_string(i));
      out.push_back({want, rows[i].error_mm});
    }
    return out;
  }

  FileBridgeConfig config_;
  int interval_ = 0;
};

}  // namespace share
