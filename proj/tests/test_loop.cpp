#include <catch_amalgamated.hpp>

#include <set>

#include "share/loop.hpp"

using namespace share;
using Catch::Matchers::WithinAbs;

namespace {

/// Wraps an adapter and records the call sequence.
class Recorder final : public ModelAdapter {
 public:
  explicit Recorder(ModelAdapter& inner) : inner_(inner) {}
  void train(const DatasetSpec& d, int epochs) override {
    calls.push_back("train");
    datasets.push_back(d);
    epochs_seen.push_back(epochs);
    inner_.train(d, epochs);
  }
  std::vector<ErrorSample> evaluate(const PoseGrid& g) override {
    calls.push_back("evaluate");
    return inner_.evaluate(g);
  }
  std::vector<std::string> calls;
  std::vector<DatasetSpec> datasets;
  std::vector<int> epochs_seen;

 private:
  ModelAdapter& inner_;
};

class ConstantAdapter final : public ModelAdapter {
 public:
  void train(const DatasetSpec&, int) override {}
  std::vector<ErrorSample> evaluate(const PoseGrid& g) override {
    std::vector<ErrorSample> out;
    for (const auto& p : g.poses) out.push_back({p, 40.0});
    return out;
  }
};

class FailingAdapter final : public ModelAdapter {
 public:
  bool timeout = false;
  void train(const DatasetSpec&, int) override {}
  std::vector<ErrorSample> evaluate(const PoseGrid&) override {
    if (timeout) throw TimeoutError("no reply");
    throw IoError("disk on fire");
  }
};

LoopConfig small_config(SamplerKind sampler, int intervals) {
  LoopConfig c;
  c.grid_n_theta = 20;
  c.grid_n_phi = 20;
  c.samples_per_cycle = 8000;
  c.intervals = intervals;
  c.sampler = sampler;
  return c;
}

}  // namespace

TEST_CASE("oracle closed-form grid mean") {
  const PoseGrid g = default_grid();
  SyntheticOracle oracle({}, g);
  double sum = 0;
  for (const auto& p : g.poses) sum += oracle.initial_error(p);
  CHECK_THAT(sum / 2500.0, WithinAbs(82.5, 1e-9));
  CHECK_THAT(oracle.analytic_grid_mean(g), WithinAbs(82.5, 1e-12));

  OracleConfig c;
  c.harmonics = 3;
  c.sharpness = 3;
  c.elevation_slope_mm_per_deg = -0.1;
  SyntheticOracle other(c, g);
  double s2 = 0;
  for (const auto& p : g.poses) s2 += other.initial_error(p);
  CHECK_THAT(s2 / 2500.0, WithinAbs(other.analytic_grid_mean(g), 1e-9));
}

TEST_CASE("oracle surface shape") {
  const PoseGrid g = default_grid();
  SyntheticOracle oracle({}, g);
  // Monotone in theta at fixed phi.
  for (std::size_t i = 1; i < 50; ++i) CHECK(oracle.initial_error(g.at(i, 7)) > oracle.initial_error(g.at(i - 1, 7)));
  // One peak per harmonic along the noise-free azimuth sweep.
  REQUIRE(azimuth_profile(oracle.evaluate(g)).size() == 50);
  int maxima = 0;
  for (std::size_t j = 0; j < 50; ++j) {
    const double prev = oracle.initial_error(g.at(25, (j + 49) % 50)), here = oracle.initial_error(g.at(25, j)),
                 next = oracle.initial_error(g.at(25, (j + 1) % 50));
    if (here > prev && here > next) ++maxima;
  }
  CHECK(maxima == oracle.config().harmonics);
}

TEST_CASE("oracle evaluation is repeatable and noise is bounded") {
  const PoseGrid g = build_grid(10, 12, {-60, 60}, {0, 360}, 2.5);
  SyntheticOracle oracle({}, g);
  const auto a = oracle.evaluate(g);
  const auto b = oracle.evaluate(g);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].error_mm == b[i].error_mm);
    CHECK(std::abs(a[i].error_mm - oracle.expected_error(g.poses[i])) < 6.0);
  }
  // Off-reference grids use the same surface.
  const PoseGrid other = build_grid(3, 5, {-30, 30}, {0, 360}, 2.5);
  const auto c = oracle.evaluate(other);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(std::abs(c[i].error_mm - oracle.expected_error(other.poses[i])) < 6.0);
}

TEST_CASE("oracle adapts only around over-represented poses") {
  const PoseGrid g = default_grid();
  SyntheticOracle oracle({}, g);
  const CameraPose target{0, 180, 2.5};
  DatasetSpec d = generate_dataset_spec(std::vector<CameraPose>{target}, 500, {}, 0);
  oracle.train(d, 5);
  const CameraPose near{5, 185, 2.5};
  const CameraPose far{0, 0, 2.5};
  CHECK(oracle.expected_error(near) < oracle.initial_error(near));
  CHECK(oracle.expected_error(far) == oracle.initial_error(far));
  // Never below the floor, however long it trains.
  for (int k = 0; k < 30; ++k) oracle.train(d, 5);
  CHECK(oracle.expected_error(target) == Catch::Approx(oracle.floor_error()));
  // Reference cache and the direct path agree.
  const auto errs = oracle.evaluate(g);
  for (std::size_t i = 0; i < g.size(); i += 97)
    CHECK(std::abs(errs[i].error_mm - oracle.expected_error(g.poses[i])) < 6.0);
}

TEST_CASE("uniform training leaves the oracle unchanged") {
  const PoseGrid g = build_grid(10, 10, {-60, 60}, {0, 360}, 2.5);
  SyntheticOracle oracle({}, g);
  DatasetSpec d;
  d.augmentation_fraction = 0.15;
  for (int rep = 0; rep < 3; ++rep)
    for (const auto& p : g.poses) d.scenes.push_back({{}, "", "", p, 0});
  oracle.train(d, 5);
  for (const auto& p : g.poses) CHECK_THAT(oracle.expected_error(p), WithinAbs(oracle.initial_error(p), 1e-9));
}

TEST_CASE("oracle config validation") {
  OracleConfig c;
  c.adaptation_rate = 1.0;
  CHECK_THROWS_AS(SyntheticOracle(c, default_grid()), InvalidArgument);
  c = {};
  c.elevation_slope_mm_per_deg = 2.0;
  CHECK_THROWS_AS(SyntheticOracle(c, default_grid()), InvalidArgument);
  CHECK(SyntheticOracle({}, default_grid()).parallel_evaluate_safe());
}

TEST_CASE("zero intervals make no adapter calls") {
  LoopConfig cfg = small_config(SamplerKind::rome, 0);
  SyntheticOracle oracle({}, cfg.grid());
  Recorder rec(oracle);
  CHECK(run_loop(rec, cfg).empty());
  CHECK(rec.calls.empty());
}

TEST_CASE("phases run in order and datasets have the requested size") {
  LoopConfig cfg = small_config(SamplerKind::greedy, 3);
  SyntheticOracle oracle({}, cfg.grid());
  Recorder rec(oracle);
  std::vector<DatasetSpec> emitted;
  const auto reports = run_loop(rec, cfg, [&](const IntervalOutcome& o) { emitted.push_back(o.next_dataset); });
  REQUIRE(reports.size() == 3);
  CHECK(rec.calls == std::vector<std::string>{"train", "evaluate", "train", "evaluate", "train", "evaluate"});
  for (int e : rec.epochs_seen) CHECK(e == 5);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(rec.datasets[k].interval == static_cast<int>(k));
    CHECK(rec.datasets[k].scenes.size() == cfg.samples_per_cycle);
    CHECK(rec.datasets[k].augmentation_fraction == 0.15);
    CHECK(emitted[k].scenes.size() == cfg.samples_per_cycle);
    CHECK(emitted[k].interval == static_cast<int>(k) + 1);
  }
  // The loop threads each emitted dataset into the next interval.
  CHECK(rec.datasets[1] == emitted[0]);
  CHECK(rec.datasets[2] == emitted[1]);
  // Interval 0 trains on the full grid.
  CHECK(reports[0].trained_on.distinct_poses == cfg.grid().size());
}

TEST_CASE("emitted cameras come from the plan") {
  LoopConfig cfg = small_config(SamplerKind::rome, 1);
  SyntheticOracle oracle({}, cfg.grid());
  run_loop(oracle, cfg, [&](const IntervalOutcome& o) {
    std::set<std::pair<double, double>> plan;
    for (const auto& p : o.plan.poses()) plan.emplace(p.theta_deg, p.phi_deg);
    for (const auto& s : o.next_dataset.scenes) CHECK(plan.count({s.camera.theta_deg, s.camera.phi_deg}) == 1);
    CHECK(o.report.fit.has_value());
  });
}

TEST_CASE("first interval mean matches the analytic mean") {
  LoopConfig cfg;
  cfg.intervals = 1;
  cfg.sampler = SamplerKind::greedy;
  SyntheticOracle oracle({}, cfg.grid());
  const auto reports = run_loop(oracle, cfg);
  CHECK_THAT(reports[0].mean_error_mm, WithinAbs(oracle.analytic_grid_mean(cfg.grid()), oracle.config().noise_sigma_mm));
}

TEST_CASE("reports are deterministic and internally consistent") {
  LoopConfig cfg = small_config(SamplerKind::rome, 2);
  cfg.seed = 13;
  OracleConfig oc;
  oc.seed = 13;
  SyntheticOracle a(oc, cfg.grid());
  SyntheticOracle b(oc, cfg.grid());
  const auto ra = run_loop(a, cfg);
  const auto rb = run_loop(b, cfg);
  for (std::size_t k = 0; k < ra.size(); ++k) {
    CHECK(report_to_json(ra[k]).dump() == report_to_json(rb[k]).dump());
    const auto [mean, sd] = error_stats(ra[k].errors);
    CHECK_THAT(ra[k].mean_error_mm, WithinAbs(mean, 1e-9));
    CHECK_THAT(ra[k].std_error_mm, WithinAbs(sd, 1e-9));
    // Two-pass recomputation in plain double.
    double m = 0;
    for (const auto& e : ra[k].errors) m += e.error_mm;
    m /= static_cast<double>(ra[k].errors.size());
    double v = 0;
    for (const auto& e : ra[k].errors) v += (e.error_mm - m) * (e.error_mm - m);
    CHECK_THAT(ra[k].std_error_mm, WithinAbs(std::sqrt(v / static_cast<double>(ra[k].errors.size())), 1e-9));
  }
}

TEST_CASE("report JSON round trip") {
  LoopConfig cfg = small_config(SamplerKind::rome, 1);
  SyntheticOracle oracle({}, cfg.grid());
  const auto r = run_loop(oracle, cfg).front();
  const Json j = report_to_json(r);
  const IterationReport back = report_from_json(Json::parse(j.dump()));
  CHECK(report_to_json(back).dump() == j.dump());
  CHECK(back.plan == r.plan);
  CHECK(back.fit == r.fit);
  CHECK(report_file_name(3) == "report.003.json");
}

TEST_CASE("rome lowers mean and spread over five intervals") {
  LoopConfig cfg = small_config(SamplerKind::rome, 5);
  cfg.grid_n_theta = cfg.grid_n_phi = 30;
  SyntheticOracle oracle({}, cfg.grid());
  const auto reports = run_loop(oracle, cfg);
  for (std::size_t k = 1; k < reports.size(); ++k) {
    INFO("interval " << k << ": " << reports[k - 1].mean_error_mm << " -> " << reports[k].mean_error_mm);
    CHECK(reports[k].mean_error_mm < reports[k - 1].mean_error_mm);
  }
  CHECK(reports.back().std_error_mm < reports.front().std_error_mm);
}

TEST_CASE("uniform errors fall back to uniform sampling") {
  LoopConfig cfg = small_config(SamplerKind::rome, 1);
  ConstantAdapter adapter;
  const auto r = run_loop(adapter, cfg, [&](const IntervalOutcome& o) {
    CHECK(o.plan.fallback);
    CHECK(o.plan.selected.size() == fallback_count(cfg.grid().size(), cfg.rome));
    for (const auto& s : o.plan.selected) CHECK(s.rule == SelectionRule::fallback);
  });
  CHECK(r[0].plan.fallback);
  CHECK(r[0].std_error_mm == 0.0);

  cfg.sampler = SamplerKind::greedy;
  CHECK(run_loop(adapter, cfg)[0].plan.fallback_selected == fallback_count(cfg.grid().size(), cfg.rome));
}

TEST_CASE("random sampler draws the configured count") {
  LoopConfig cfg = small_config(SamplerKind::random, 1);
  SyntheticOracle oracle({}, cfg.grid());
  CHECK(run_loop(oracle, cfg)[0].plan.selected == cfg.grid().size());
  cfg.random_count = 37;
  SyntheticOracle fresh({}, cfg.grid());
  CHECK(run_loop(fresh, cfg)[0].plan.selected == 37);
}

TEST_CASE("adapter failures carry the interval") {
  LoopConfig cfg = small_config(SamplerKind::greedy, 2);
  FailingAdapter bad;
  CHECK_THROWS_WITH(run_loop(bad, cfg), Catch::Matchers::StartsWith("interval 0: disk on fire"));
  bad.timeout = true;
  CHECK_THROWS_AS(run_loop(bad, cfg), TimeoutError);
}

TEST_CASE("loop config validation") {
  LoopConfig cfg;
  cfg.augmentation_fraction = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.epochs_per_interval = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.rome.P = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  CHECK(sampler_from_string("greedy") == SamplerKind::greedy);
  CHECK_THROWS_AS(sampler_from_string("best"), InvalidArgument);
}

TEST_CASE("sensitivity sweep order") {
  const PoseGrid g = build_grid(4, 5, {-60, 60}, {0, 360}, 2.5);
  std::vector<ErrorSample> shuffled;
  for (std::size_t i = g.size(); i-- > 0;) shuffled.push_back({g.poses[i], 3.0});
  const auto rows = sensitivity_report(shuffled);
  REQUIRE(rows.size() == g.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].pose == g.poses[i]);
    CHECK(rows[i].error_mm == 3.0);
  }
  SyntheticOracle oracle({}, default_grid());
  CHECK(sensitivity_report(oracle.evaluate(default_grid())).size() == 2500);
}
