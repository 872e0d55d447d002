#pragma once

// The four-phase adversarial augmentation interval:
//   1. train the adapter on the pending dataset (full grid on interval 0),
//   2. evaluate per-pose errors on the fixed grid,
//   3. fit the landscape and pick poses with the configured sampler,
//   4. generate the next interval's dataset from the picked poses.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "share/adapter.hpp"
#include "share/datagen.hpp"
#include "share/error.hpp"
#include "share/geometry.hpp"
#include "share/landscape.hpp"
#include "share/random.hpp"
#include "share/sampling.hpp"

namespace share {

enum class SamplerKind { rome, greedy, random };

inline std::string to_string(SamplerKind k) {
  switch (k) {
    case SamplerKind::rome:
      return "rome";
    case SamplerKind::greedy:
      return "greedy";
    case SamplerKind::random:
      return "random";
  }
  return "unknown";
}

inline SamplerKind sampler_from_string(const std::string& s) {
  if (s == "rome") return SamplerKind::rome;
  if (s == "greedy") return SamplerKind::greedy;
  if (s == "random") return SamplerKind::random;
  throw InvalidArgument("unknown sampler '" + s + "' (expected rome, greedy or random)");
}

/// Landscape settings sized for a fit inside every interval.
inline FitConfig loop_fit_defaults() {
  FitConfig f;
  f.hidden = {32, 32};
  f.train.iterations = 1500;
  f.train.learning_rate = 0.05;
  f.w_error = ErrorTerm::raw_mm;
  return f;
}

struct LoopConfig {
  int intervals = 8;
  int epochs_per_interval = 5;
  double augmentation_fraction = 0.15;
  std::size_t samples_per_cycle = 50000;
  std::size_t grid_n_theta = 50;
  std::size_t grid_n_phi = 50;
  double radius = kDefaultRadius;
  SamplerKind sampler = SamplerKind::rome;
  RomeConfig rome{};
  /// Poses drawn by the random sampler; 0 means every grid pose.
  std::size_t random_count = 0;
  FitConfig fit = loop_fit_defaults();
  DiversityConfig diversity{};
  std::uint64_t seed = 0;

  void validate() const {
    if (intervals < 0) throw InvalidArgument("interval count must be non-negative");
    if (epochs_per_interval < 1) throw InvalidArgument("epochs per interval must be at least 1");
    if (!(augmentation_fraction > 0.0 && augmentation_fraction <= 1.0))
      throw InvalidArgument("augmentation fraction must lie in (0, 1]");
    if (samples_per_cycle < 1) throw InvalidArgument("samples per cycle must be at least 1");
    if (grid_n_theta < 1 || grid_n_phi < 1) throw InvalidArgument("grid counts must be at least 1");
    if (!(radius > 0.0)) throw InvalidArgument("radius must be positive");
    rome.validate();
    diversity.validate();
  }

  PoseGrid grid() const {
    return build_grid(grid_n_theta, grid_n_phi, {kThetaMin, kThetaMax}, {0.0, 360.0}, radius);
  }
};

struct PlanSummary {
  std::string method;
  std::size_t selected = 0;
  std::size_t high = 0;
  std::size_t low = 0;
  std::size_t fallback_selected = 0;
  bool fallback = false;
  double tau = 0.0;
  std::size_t quota_high = 0;
  std::size_t quota_low = 0;
  int partitions = 0;

  friend bool operator==(const PlanSummary&, const PlanSummary&) = default;
};

struct DatasetSummary {
  std::size_t samples = 0;
  double augmentation_fraction = 0.0;
  std::size_t distinct_poses = 0;

  friend bool operator==(const DatasetSummary&, const DatasetSummary&) = default;
};

struct IterationReport {
  int interval = 0;
  std::vector<ErrorSample> errors;
  double mean_error_mm = 0.0;
  double std_error_mm = 0.0;  // population standard deviation
  PlanSummary plan;
  std::optional<FitReport> fit;
  DatasetSummary trained_on;
};

/// Mean and population standard deviation.
inline std::pair<double, double> error_stats(std::span<const ErrorSample> errors) {
  if (errors.empty()) return {0.0, 0.0};
  long double sum = 0.0L;
  for (const auto& e : errors) sum += e.error_mm;
  const long double mean = sum / static_cast<long double>(errors.size());
  long double ss = 0.0L;
  for (const auto& e : errors) ss += (e.error_mm - mean) * (e.error_mm - mean);
  return {static_cast<double>(mean), static_cast<double>(std::sqrt(ss / static_cast<long double>(errors.size())))};
}

inline DatasetSummary summarize(const DatasetSpec& d) {
  std::set<std::pair<double, double>> distinct;
  for (const auto& s : d.scenes) distinct.emplace(s.camera.theta_deg, s.camera.phi_deg);
  return {d.samples_per_cycle, d.augmentation_fraction, distinct.size()};
}

inline PlanSummary summarize(const SamplingPlan& p, SamplerKind kind) {
  PlanSummary s;
  s.method = to_string(kind);
  s.selected = p.selected.size();
  s.high = p.count(SelectionRule::high);
  s.low = p.count(SelectionRule::low);
  s.fallback_selected = p.count(SelectionRule::fallback);
  s.fallback = p.fallback;
  s.tau = p.tau;
  s.quota_high = p.quota_high;
  s.quota_low = p.quota_low;
  s.partitions = p.partitions;
  return s;
}

/// Scores every evaluated pose on the fitted landscape.
inline std::vector<PoseScore> score_samples(const LossLandscape& landscape, std::span<const ErrorSample> samples) {
  std::vector<PoseScore> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({s.pose, landscape.composite_metric(s.pose)});
  return out;
}

struct IntervalOutcome {
  IterationReport report;
  SamplingPlan plan;
  DatasetSpec next_dataset;
};

/// Seed streams derived from the loop seed, one per interval and purpose.
enum class SeedStream : std::uint64_t { dataset = 1, fit = 2, sampler = 3, fallback = 4 };

inline std::uint64_t interval_seed(std::uint64_t seed, int interval, SeedStream stream) {
  return derive_seed(derive_seed(seed, static_cast<std::uint64_t>(interval)), static_cast<std::uint64_t>(stream));
}

/// One interval. `pending` is the dataset emitted by the previous interval;
/// without one, the first cycle is drawn uniformly from the full grid.
inline IntervalOutcome run_interval(ModelAdapter& adapter, const std::optional<DatasetSpec>& pending, int interval,
                                    const LoopConfig& config) {
  config.validate();
  const PoseGrid grid = config.grid();
  const std::string where = "interval " + std::to_string(interval) + ": ";
  try {
    // Phase 1
    const DatasetSpec dataset =
        pending ? *pending
                : generate_dataset_spec(grid.poses, config.samples_per_cycle, config.diversity,
                                        interval_seed(config.seed, interval, SeedStream::dataset), interval,
                                        config.augmentation_fraction);
    adapter.train(dataset, config.epochs_per_interval);

    // Phase 2
    IntervalOutcome out;
    IterationReport& report = out.report;
    report.interval = interval;
    report.trained_on = summarize(dataset);
    report.errors = adapter.evaluate(grid);
    if (report.errors.size() != grid.size())
      throw Error("adapter returned " + std::to_string(report.errors.size()) + " errors for " +
                  std::to_string(grid.size()) + " poses");
    check_samples(report.errors);
    std::tie(report.mean_error_mm, report.std_error_mm) = error_stats(report.errors);

    // Phase 3
    SamplingPlan& plan = out.plan;
    switch (config.sampler) {
      case SamplerKind::rome: {
        const LossLandscape landscape =
            fit_landscape(report.errors, config.fit, interval_seed(config.seed, interval, SeedStream::fit));
        report.fit = landscape.report();
        RomeConfig rome = config.rome;
        rome.seed = interval_seed(config.seed, interval, SeedStream::sampler);
        plan = rome_sample(score_samples(landscape, report.errors), rome);
        break;
      }
      case SamplerKind::greedy:
        plan = greedy_sample(report.errors);
        break;
      case SamplerKind::random: {
        const std::size_t n = config.random_count ? config.random_count : grid.size();
        plan = uniform_sample(grid.poses, n, interval_seed(config.seed, interval, SeedStream::sampler));
        break;
      }
    }
    if (plan.selected.empty()) {
      SamplingPlan fb = uniform_sample(grid.poses, fallback_count(grid.size(), config.rome),
                                       interval_seed(config.seed, interval, SeedStream::fallback));
      plan.selected = std::move(fb.selected);
      plan.fallback = true;
    }
    report.plan = summarize(plan, config.sampler);

    // Phase 4
    out.next_dataset = generate_dataset_spec(plan.poses(), config.samples_per_cycle, config.diversity,
                                             interval_seed(config.seed, interval + 1, SeedStream::dataset),
                                             interval + 1, config.augmentation_fraction);
    return out;
  } catch (const TimeoutError& e) {
    throw TimeoutError(where + e.what());
  } catch (const std::exception& e) {
    throw Error(where + e.what());
  }
}

/// Called after each interval, e.g. to persist artifacts.
using IntervalObserver = std::function<void(const IntervalOutcome&)>;

inline std::vector<IterationReport> run_loop(ModelAdapter& adapter, const LoopConfig& config,
                                             const IntervalObserver& observer = {}) {
  config.validate();
  std::vector<IterationReport> reports;
  std::optional<DatasetSpec> pending;
  for (int k = 0; k < config.intervals; ++k) {
    IntervalOutcome out = run_interval(adapter, pending, k, config);
    if (observer) observer(out);
    reports.push_back(std::move(out.report));
    pending = std::move(out.next_dataset);
  }
  return reports;
}

// ---------------------------------------------------------------------------

/// Per-pose errors in sweep order: phi-major, theta-minor.
inline std::vector<ErrorSample> sensitivity_report(std::span<const ErrorSample> errors) {
  std::vector<ErrorSample> rows(errors.begin(), errors.end());
  std::stable_sort(rows.begin(), rows.end(),
                   [](const ErrorSample& a, const ErrorSample& b) { return sweep_less(a.pose, b.pose); });
  return rows;
}

/// Mean error per distinct azimuth, in increasing phi.
inline std::vector<std::pair<double, double>> azimuth_profile(std::span<const ErrorSample> errors) {
  std::map<double, std::pair<double, std::size_t>> acc;
  for (const auto& e : errors) {
    auto& a = acc[e.pose.phi_deg];
    a.first += e.error_mm;
    ++a.second;
  }
  std::vector<std::pair<double, double>> out;
  for (const auto& [phi, a] : acc) out.emplace_back(phi, a.first / static_cast<double>(a.second));
  return out;
}

inline Json report_to_json(const IterationReport& r) {
  Json j;
  j["interval"] = r.interval;
  j["mean_error_mm"] = r.mean_error_mm;
  j["std_error_mm"] = r.std_error_mm;
  j["trained_on"] = {{"samples", r.trained_on.samples},
                     {"augmentation_fraction", r.trained_on.augmentation_fraction},
                     {"distinct_poses", r.trained_on.distinct_poses}};
  j["plan"] = {{"method", r.plan.method},         {"selected", r.plan.selected},
               {"high", r.plan.high},             {"low", r.plan.low},
               {"fallback_selected", r.plan.fallback_selected},
               {"fallback", r.plan.fallback},     {"tau", r.plan.tau},
               {"quota_high", r.plan.quota_high}, {"quota_low", r.plan.quota_low},
               {"partitions", r.plan.partitions}};
  if (r.fit) {
    j["fit"] = {{"final_loss", r.fit->final_loss},
                {"baseline_loss", r.fit->baseline_loss},
                {"iterations", r.fit->iterations},
                {"seed", r.fit->seed},
                {"warnings", r.fit->warnings}};
  } else {
    j["fit"] = nullptr;
  }
  Json errors = Json::array();
  for (const auto& e : r.errors)
    errors.push_back({{"theta_deg", e.pose.theta_deg}, {"phi_deg", e.pose.phi_deg}, {"error_mm", e.error_mm}});
  j["errors"] = std::move(errors);
  return j;
}

inline IterationReport report_from_json(const Json& j) {
  IterationReport r;
  r.interval = j.at("interval").get<int>();
  r.mean_error_mm = j.at("mean_error_mm").get<double>();
  r.std_error_mm = j.at("std_error_mm").get<double>();
  const Json& d = j.at("trained_on");
  r.trained_on = {d.at("samples").get<std::size_t>(), d.at("augmentation_fraction").get<double>(),
                  d.at("distinct_poses").get<std::size_t>()};
  const Json& p = j.at("plan");
  r.plan.method = p.at("method").get<std::string>();
  r.plan.selected = p.at("selected").get<std::size_t>();
  r.plan.high = p.at("high").get<std::size_t>();
  r.plan.low = p.at("low").get<std::size_t>();
  r.plan.fallback_selected = p.at("fallback_selected").get<std::size_t>();
  r.plan.fallback = p.at("fallback").get<bool>();
  r.plan.tau = p.at("tau").get<double>();
  r.plan.quota_high = p.at("quota_high").get<std::size_t>();
  r.plan.quota_low = p.at("quota_low").get<std::size_t>();
  r.plan.partitions = p.at("partitions").get<int>();
  if (!j.at("fit").is_null()) {
    const Json& f = j.at("fit");
    r.fit = FitReport{f.at("final_loss").get<double>(), f.at("baseline_loss").get<double>(),
                      f.at("iterations").get<int>(), f.at("seed").get<std::uint64_t>(),
                      f.at("warnings").get<std::vector<std::string>>()};
  }
  for (const auto& e : j.at("errors"))
    r.errors.push_back({CameraPose::make(e.at("theta_deg").get<double>(), e.at("phi_deg").get<double>(), kDefaultRadius),
                        e.at("error_mm").get<double>()});
  return r;
}

inline std::string report_file_name(int interval) { return "report." + FileBridge::stem(interval) + ".json"; }

}  // namespace share
