#pragma once

// Camera-pose samplers: greedy (strictly above the mean error) and
// Regions of Maximal Error (RoME), which tiles the scaled (X, Y, W) cube
// into P^3 regions and draws more densely from high-W regions.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "share/error.hpp"
#include "share/geometry.hpp"
#include "share/io.hpp"
#include "share/landscape.hpp"
#include "share/random.hpp"

namespace share {

enum class SelectionRule { high, low, fallback };

inline std::string to_string(SelectionRule r) {
  switch (r) {
    case SelectionRule::high:
      return "high";
    case SelectionRule::low:
      return "low";
    case SelectionRule::fallback:
      return "fallback";
  }
  return "unknown";
}

inline SelectionRule selection_rule_from_string(std::string_view s) {
  if (s == "high") return SelectionRule::high;
  if (s == "low") return SelectionRule::low;
  if (s == "fallback") return SelectionRule::fallback;
  throw InvalidArgument("unknown selection rule '" + std::string(s) + "'");
}

using RegionIndex = std::array<int, 3>;

struct Region {
  RegionIndex index{};
  std::array<double, 3> lower{};  // scaled (X, Y, W)
  std::array<double, 3> upper{};
  std::vector<std::size_t> members;
};

struct SelectedPose {
  CameraPose pose;
  RegionIndex region{};
  SelectionRule rule = SelectionRule::high;
  friend bool operator==(const SelectedPose&, const SelectedPose&) = default;
};

struct SamplingPlan {
  std::vector<SelectedPose> selected;
  double tau = 0.0;
  int partitions = 1;
  std::vector<std::size_t> per_region_counts;  // linear region index -> selections
  /// No region survived pruning (or nothing was strictly above the mean).
  bool fallback = false;
  std::size_t quota_high = 0;
  std::size_t quota_low = 0;

  std::vector<CameraPose> poses() const {
    std::vector<CameraPose> out;
    out.reserve(selected.size());
    for (const auto& s : selected) out.push_back(s.pose);
    return out;
  }
  std::size_t count(SelectionRule rule) const {
    return static_cast<std::size_t>(
        std::count_if(selected.begin(), selected.end(), [rule](const SelectedPose& s) { return s.rule == rule; }));
  }
};

/// Whether M = alpha * N / P^3 counts every sample or only members of
/// regions that survive pruning.
enum class QuotaBase { all_samples, surviving_samples };

struct RomeConfig {
  int P = 8;
  double alpha = 4.0;
  std::uint64_t seed = 0;
  QuotaBase quota_base = QuotaBase::all_samples;

  void validate() const {
    if (P < 1) throw InvalidArgument("RoME needs P >= 1");
    if (!(alpha >= 1.0) || !std::isfinite(alpha)) throw InvalidArgument("RoME needs a finite alpha >= 1");
  }
};

/// A scored sample with the pose it came from.
struct PoseScore {
  CameraPose pose;
  WeightedSample score;
};

inline int linear_index(const RegionIndex& r, int P) { return (r[0] * P + r[1]) * P + r[2]; }

inline double arithmetic_mean(std::span<const double> v) {
  // long double keeps the strict comparisons against the mean stable for
  // ordinary sample sizes.
  long double sum = 0.0L;
  for (double x : v) sum += x;
  return static_cast<double>(sum / static_cast<long double>(v.size()));
}

/// Every pose whose error is strictly greater than the mean error.
inline SamplingPlan greedy_sample(std::span<const ErrorSample> samples) {
  if (samples.empty()) throw InvalidArgument("greedy sampling needs at least one sample");
  std::vector<double> errors;
  errors.reserve(samples.size());
  for (const auto& s : samples) errors.push_back(s.error_mm);
  const bool all_equal =
      std::all_of(errors.begin(), errors.end(), [&](double e) { return e == errors.front(); });
  SamplingPlan plan;
  plan.tau = arithmetic_mean(errors);
  plan.per_region_counts.assign(1, 0);
  if (!all_equal) {
    for (const auto& s : samples)
      if (s.error_mm > plan.tau) plan.selected.push_back({s.pose, {0, 0, 0}, SelectionRule::high});
  }
  plan.per_region_counts[0] = plan.selected.size();
  plan.fallback = plan.selected.empty();
  return plan;
}

/// Cell of `v` in [-1, 1] split into P equal bins: lower edge inclusive,
/// upper edge exclusive, top face inclusive.
inline int bin_of(double v, int P) {
  const int b = static_cast<int>(std::floor((v + 1.0) * 0.5 * P));
  return std::clamp(b, 0, P - 1);
}

/// Min-max rescaling of W across the sample set into [-1, 1].
inline std::vector<double> scaled_weights(std::span<const WeightedSample> samples) {
  if (samples.empty()) return {};
  auto [lo, hi] = std::minmax_element(samples.begin(), samples.end(),
                                      [](const WeightedSample& a, const WeightedSample& b) { return a.W < b.W; });
  const AxisScale axis{lo->W, hi->W};
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(axis.scale(s.W));
  return out;
}

inline std::vector<Region> partition_regions(std::span<const WeightedSample> samples, int P) {
  if (P < 1) throw InvalidArgument("partition count must be at least 1");
  const std::vector<double> w = scaled_weights(samples);
  const double width = 2.0 / P;
  std::vector<Region> regions(static_cast<std::size_t>(P) * P * P);
  for (int i = 0; i < P; ++i)
    for (int j = 0; j < P; ++j)
      for (int k = 0; k < P; ++k) {
        Region& r = regions[static_cast<std::size_t>(linear_index({i, j, k}, P))];
        r.index = {i, j, k};
        r.lower = {-1.0 + i * width, -1.0 + j * width, -1.0 + k * width};
        r.upper = {i + 1 == P ? 1.0 : -1.0 + (i + 1) * width, j + 1 == P ? 1.0 : -1.0 + (j + 1) * width,
                   k + 1 == P ? 1.0 : -1.0 + (k + 1) * width};
      }
  for (std::size_t n = 0; n < samples.size(); ++n) {
    const auto& s = samples[n];
    if (!(s.X >= -1.0 && s.X <= 1.0 && s.Y >= -1.0 && s.Y <= 1.0))
      throw InvalidArgument("sample " + std::to_string(n) + " lies outside the scaled [-1, 1] square");
    const RegionIndex idx{bin_of(s.X, P), bin_of(s.Y, P), bin_of(w[n], P)};
    regions[static_cast<std::size_t>(linear_index(idx, P))].members.push_back(n);
  }
  return regions;
}

/// Quotas implied by a configuration and a population of N samples.
struct RomeQuota {
  std::size_t high = 1;
  std::size_t low = 1;
};

inline RomeQuota rome_quota(std::size_t N, const RomeConfig& cfg) {
  const double cells = static_cast<double>(cfg.P) * cfg.P * cfg.P;
  const auto m = static_cast<std::size_t>(std::floor(cfg.alpha * static_cast<double>(N) / cells));
  RomeQuota q;
  q.high = std::max<std::size_t>(1, m);
  q.low = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(static_cast<double>(q.high) / cfg.alpha)));
  return q;
}

inline SamplingPlan rome_sample(std::span<const PoseScore> samples, const RomeConfig& cfg) {
  if (samples.empty()) throw InvalidArgument("RoME sampling needs at least one sample");
  cfg.validate();
  std::vector<WeightedSample> scores;
  std::vector<double> w;
  scores.reserve(samples.size());
  for (const auto& s : samples) {
    if (!std::isfinite(s.score.W)) throw InvalidArgument("composite score W must be finite");
    scores.push_back(s.score);
    w.push_back(s.score.W);
  }
  const double tau = arithmetic_mean(w);
  std::vector<Region> regions = partition_regions(scores, cfg.P);

  SamplingPlan plan;
  plan.tau = tau;
  plan.partitions = cfg.P;
  plan.per_region_counts.assign(regions.size(), 0);

  std::vector<bool> survives(regions.size(), false);
  std::size_t surviving_members = 0;
  for (std::size_t r = 0; r < regions.size(); ++r) {
    for (std::size_t m : regions[r].members)
      if (w[m] > tau) {
        survives[r] = true;
        break;
      }
    if (survives[r]) surviving_members += regions[r].members.size();
  }
  const std::size_t base = cfg.quota_base == QuotaBase::all_samples ? samples.size() : surviving_members;
  const RomeQuota quota = rome_quota(base, cfg);
  plan.quota_high = quota.high;
  plan.quota_low = quota.low;

  Rng rng(cfg.seed);
  for (std::size_t r = 0; r < regions.size(); ++r) {
    if (!survives[r]) continue;
    std::vector<std::size_t> members = regions[r].members;
    long double sum = 0.0L;
    for (std::size_t m : members) sum += w[m];
    const double regional = static_cast<double>(sum / static_cast<long double>(members.size()));
    const bool high = regional > tau;
    const std::size_t take = std::min(high ? quota.high : quota.low, members.size());
    rng.partial_shuffle(members, take);
    for (std::size_t k = 0; k < take; ++k)
      plan.selected.push_back(
          {samples[members[k]].pose, regions[r].index, high ? SelectionRule::high : SelectionRule::low});
    plan.per_region_counts[r] = take;
  }
  plan.fallback = plan.selected.empty();
  return plan;
}

/// Uniform draw of `count` distinct poses, tagged as fallback selections.
inline SamplingPlan uniform_sample(std::span<const CameraPose> poses, std::size_t count, std::uint64_t seed) {
  if (poses.empty()) throw InvalidArgument("uniform sampling needs at least one pose");
  std::vector<std::size_t> order(poses.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  const std::size_t take = std::min(count, poses.size());
  rng.partial_shuffle(order, take);
  SamplingPlan plan;
  plan.per_region_counts.assign(1, take);
  for (std::size_t k = 0; k < take; ++k) plan.selected.push_back({poses[order[k]], {0, 0, 0}, SelectionRule::fallback});
  return plan;
}

/// Fallback size: floor(N / P^3) * alpha, at least one pose.
inline std::size_t fallback_count(std::size_t N, const RomeConfig& cfg) {
  const double cells = static_cast<double>(cfg.P) * cfg.P * cfg.P;
  const double n = std::floor(static_cast<double>(N) / cells) * cfg.alpha;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(n)));
}

enum class RegionStatus { empty, pruned, high, low };

struct RegionDensity {
  RegionIndex index{};
  std::size_t members = 0;
  std::size_t selected = 0;
  double density = 0.0;
  RegionStatus status = RegionStatus::empty;
};

/// Selections per member for every region of a RoME plan.
inline std::vector<RegionDensity> density_report(const SamplingPlan& plan, std::span<const Region> regions) {
  std::vector<RegionDensity> out;
  out.reserve(regions.size());
  for (const auto& r : regions) {
    RegionDensity d;
    d.index = r.index;
    d.members = r.members.size();
    std::size_t high = 0;
    std::size_t low = 0;
    for (const auto& s : plan.selected) {
      if (s.region != r.index) continue;
      ++d.selected;
      if (s.rule == SelectionRule::high) ++high;
      if (s.rule == SelectionRule::low) ++low;
    }
    d.density = d.members ? static_cast<double>(d.selected) / static_cast<double>(d.members) : 0.0;
    if (d.members == 0)
      d.status = RegionStatus::empty;
    else if (high > 0)
      d.status = RegionStatus::high;
    else if (low > 0)
      d.status = RegionStatus::low;
    else
      d.status = RegionStatus::pruned;
    out.push_back(d);
  }
  return out;
}

// ---------------------------------------------------------------------------

inline constexpr const char* kPlanCsvHeader = "theta_deg,phi_deg,region_i,region_j,region_k,rule";

inline std::string plan_to_csv(const SamplingPlan& plan) {
  std::string out = kPlanCsvHeader;
  out += '\n';
  for (const auto& s : plan.selected) {
    out += io::format_sig(s.pose.theta_deg, 9) + ',' + io::format_sig(s.pose.phi_deg, 9) + ',' +
           std::to_string(s.region[0]) + ',' + std::to_string(s.region[1]) + ',' + std::to_string(s.region[2]) +
           ',' + to_string(s.rule) + '\n';
  }
  return out;
}

/// Reads a plan CSV. Poses get `radius`, since the plan format carries none.
inline SamplingPlan plan_from_csv(std::string_view text, const std::string& source, double radius = kDefaultRadius) {
  SamplingPlan plan;
  std::size_t line_no = 0;
  bool seen_header = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string_view line = io::trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;
    if (!seen_header) {
      if (line != kPlanCsvHeader) throw ParseError(source, line_no, "expected header '" + std::string(kPlanCsvHeader) + "'");
      seen_header = true;
      continue;
    }
    const auto f = io::split(line);
    if (f.size() != 6) throw ParseError(source, line_no, "expected 6 fields, got " + std::to_string(f.size()));
    try {
      SelectedPose s;
      s.pose = CameraPose::make(io::parse_double(f[0], source, line_no), io::parse_double(f[1], source, line_no), radius);
      for (int c = 0; c < 3; ++c) {
        const double v = io::parse_double(f[static_cast<std::size_t>(2 + c)], source, line_no);
        if (v < 0 || v != std::floor(v)) throw InvalidArgument("region indices must be non-negative integers");
        s.region[static_cast<std::size_t>(c)] = static_cast<int>(v);
      }
      s.rule = selection_rule_from_string(f[5]);
      plan.selected.push_back(s);
    } catch (const InvalidArgument& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  if (!seen_header) throw ParseError(source, 0, "missing header '" + std::string(kPlanCsvHeader) + "'");
  return plan;
}

}  // namespace share
