// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "fake_responder.hpp"
#include "share/share.hpp"
#include "support.hpp"

using namespace share;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

const std::string kCli = SHARE_CLI_PATH;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------------------

Outcome metrics_invariance() {
  Outcome o;
  Rng rng(101);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const JointSet pred = random_joints(rng, 24);
    const JointSet gt = random_joints(rng, 24);
    const double pa = pa_mpjpe(pred, gt);
    const double moved = pa_mpjpe(apply_transform(random_similarity(rng), pred), gt);
    worst = std::max(worst, std::abs(moved - pa) / pa);
    o.require(pa <= mpjpe(pred, gt) + 1e-9, "PA-MPJPE above MPJPE in case " + std::to_string(t));
    o.require(mpjpe(gt, gt) == 0.0 && pa_mpjpe(gt, gt) < 1e-9, "non-zero metric on identical sets");
  }
  o.require(worst < 1e-6, "relative change " + fmt(worst));
  if (o.pass) o.detail = "max relative change " + fmt(worst);
  return o;
}

Outcome procrustes_oracle() {
  Outcome o;
  Rng rng(202);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int J = 3 + static_cast<int>(rng.index(8));
    const JointSet gt = random_joints(rng, J);
    JointMatrix noisy = apply_transform(random_similarity(rng), gt).matrix();
    for (Eigen::Index i = 0; i < noisy.size(); ++i) noisy.data()[i] += 20.0 * rng.normal();
    const JointSet pred(noisy);
    worst = std::max(worst, std::abs(pa_mpjpe(pred, gt) - umeyama_pa_mpjpe(pred, gt)));
  }
  o.require(worst < 1e-6, "max difference " + fmt(worst) + " mm");
  if (o.pass) o.detail = "max difference " + fmt(worst) + " mm";
  return o;
}

// Shared by the fit-quality and derivative criteria.
double surface_mm(double theta, double phi) { return 50.0 + 30.0 * std::cos(4.0 * deg2rad(phi)) + 0.3 * theta; }
Eigen::Vector2d surface_gradient(double theta, double phi) {
  return {0.3, -30.0 * 4.0 * std::numbers::pi / 180.0 * std::sin(4.0 * deg2rad(phi))};
}

std::optional<LossLandscape> g_fitted;

Outcome landscape_fit() {
  Outcome o;
  std::vector<ErrorSample> samples;
  for (const auto& p : default_grid().poses) samples.push_back({p, surface_mm(p.theta_deg, p.phi_deg)});
  g_fitted = fit_landscape(samples, FitConfig{}, 0);
  // Held out: cell midpoints of the training grid.
  const double dt = 120.0 / 49.0;
  const double dp = 360.0 / 50.0;
  double sq = 0.0;
  std::size_t n = 0;
  for (int i = 0; i < 49; ++i)
    for (int j = 0; j < 50; ++j) {
      const double theta = -60.0 + (i + 0.5) * dt;
      const double phi = (j + 0.5) * dp;
      const double e = g_fitted->predict({theta, phi, 2.5}) - surface_mm(theta, phi);
      sq += e * e;
      ++n;
    }
  const double rmse = std::sqrt(sq / n);
  o.require(rmse < 4.8, "held-out RMSE " + fmt(rmse) + " mm");
  if (o.pass) o.detail = "held-out RMSE " + fmt(rmse) + " mm (range 96 mm)";
  return o;
}

/// Exact input gradient of the fitted regressor, by the chain rule.
Eigen::Vector2d network_gradient(const LossLandscape& l, double X, double Y) {
  Eigen::VectorXd a = l.features(X, Y);
  Eigen::MatrixXd J = Eigen::MatrixXd::Identity(a.size(), 2);
  if (l.periodic_phi()) {
    const double phi = deg2rad(l.scaler().phi.unscale(Y));
    const double dphi = deg2rad(l.scaler().phi.span_factor());
    J(2, 1) = -std::sin(phi) * dphi;
    J(3, 1) = std::cos(phi) * dphi;
  }
  const auto& layers = l.regressor().layers();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const Eigen::VectorXd z = layers[k].weights * a + layers[k].bias;
    J = layers[k].weights * J;
    if (k + 1 < layers.size()) {
      a = z.array().tanh();
      J = (1.0 - a.array().square()).matrix().asDiagonal() * J;
    } else {
      a = z;
    }
  }
  return J.row(0).transpose();
}

struct GradientCheck {
  double relative_error = 0.0;  // RMS |fd - generator| / RMS |generator|
  double halving_ratio = 0.0;   // RMS fd error at h = 0.02 over that at h = 0.01
};

GradientCheck check_gradients(const LossLandscape& l) {
  const MinMaxScaler& s = l.scaler();
  double err_sq = 0.0, ref_sq = 0.0, e1 = 0.0, e2 = 0.0;
  const int n = 41;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      // Interior 80% of the scaled square.
      const double X = -0.8 + 1.6 * i / (n - 1);
      const double Y = -0.8 + 1.6 * j / (n - 1);
      const Eigen::Vector2d raw = surface_gradient(s.theta.unscale(X), s.phi.unscale(Y));
      const Eigen::Vector2d truth(raw(0) * s.theta.span_factor() / s.error.span_factor(),
                                  raw(1) * s.phi.span_factor() / s.error.span_factor());
      err_sq += (l.derivatives(X, Y).gradient - truth).squaredNorm();
      ref_sq += truth.squaredNorm();
      const Eigen::Vector2d exact = network_gradient(l, X, Y);
      e1 += (l.derivatives(X, Y, 0.02).gradient - exact).squaredNorm();
      e2 += (l.derivatives(X, Y, 0.01).gradient - exact).squaredNorm();
    }
  return {std::sqrt(err_sq / ref_sq), std::sqrt(e1 / e2)};
}

Outcome derivative_consistency() {
  Outcome o;
  // Azimuth enters through (cos, sin) features so the fit is periodic in phi;
  // the plain default fit is reported alongside for reference.
  std::vector<ErrorSample> samples;
  for (const auto& p : default_grid().poses) samples.push_back({p, surface_mm(p.theta_deg, p.phi_deg)});
  FitConfig cfg;
  cfg.periodic_phi = true;
  const GradientCheck c = check_gradients(fit_landscape(samples, cfg, 0));
  o.require(c.relative_error < 0.10, "relative gradient error " + fmt(c.relative_error));
  o.require(c.halving_ratio >= 2.0, "step halving ratio " + fmt(c.halving_ratio));
  std::string detail = "periodic fit: relative gradient error " + fmt(c.relative_error, 3) + ", step-halving ratio " +
                       fmt(c.halving_ratio, 3);
  if (g_fitted) {
    const GradientCheck d = check_gradients(*g_fitted);
    detail += "; default fit: " + fmt(d.relative_error, 3) + ", " + fmt(d.halving_ratio, 3);
  }
  o.detail = o.pass ? detail : o.detail + " (" + detail + ")";
  return o;
}

Outcome rome_laws() {
  Outcome o;
  Rng rng(303);
  for (int P : {1, 2, 4, 8}) {
    for (int t = 0; t < 20; ++t) {
      const std::size_t N = 50 + rng.index(600);
      RomeConfig cfg;
      cfg.P = P;
      cfg.alpha = rng.uniform(1.0, 6.0);
      cfg.seed = rng.next_u64();
      std::vector<PoseScore> scores;
      std::vector<WeightedSample> ws;
      for (std::size_t n = 0; n < N; ++n) {
        WeightedSample w{rng.uniform(-1, 1), rng.uniform(-1, 1), 0.0, std::exp(2.0 * rng.normal())};
        scores.push_back({{rng.uniform(-60, 60), rng.uniform(0, 360), 2.5}, w});
        ws.push_back(w);
      }
      const auto regions = partition_regions(ws, P);
      const std::string where = "P=" + std::to_string(P) + " case " + std::to_string(t);
      o.require(regions.size() == static_cast<std::size_t>(P * P * P), where + ": region count");
      std::vector<int> owner(N, 0);
      for (const auto& r : regions)
        for (std::size_t m : r.members) ++owner[m];
      o.require(std::all_of(owner.begin(), owner.end(), [](int c) { return c == 1; }), where + ": not a partition");

      const SamplingPlan plan = rome_sample(scores, cfg);
      long double total = 0.0L;
      for (const auto& w : ws) total += w.W;
      const double tau = static_cast<double>(total / N);
      const std::size_t M = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(cfg.alpha * N / (P * P * P))));
      const std::size_t low = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(M / cfg.alpha)));
      o.require(plan.quota_high == M && plan.quota_low == low, where + ": quotas");
      for (std::size_t r = 0; r < regions.size(); ++r) {
        const auto& mem = regions[r].members;
        bool above = false;
        long double sum = 0.0L;
        for (std::size_t m : mem) {
          above = above || ws[m].W > tau;
          sum += ws[m].W;
        }
        const double mean = mem.empty() ? 0.0 : static_cast<double>(sum / mem.size());
        const std::size_t expected = !above ? 0 : std::min(mem.size(), mean > tau ? M : low);
        o.require(plan.per_region_counts[r] == expected, where + ": region " + std::to_string(r) + " count");
      }
    }
  }
  RomeConfig cfg;
  o.require(rome_quota(512, cfg).high == 4, "P=8, N=512, alpha=4 quota is " + std::to_string(rome_quota(512, cfg).high));
  if (o.pass) o.detail = "80 random cases, quota(512) = 4";
  return o;
}

Outcome greedy_law() {
  Outcome o;
  Rng rng(404);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng.index(300);
    std::vector<ErrorSample> s;
    long double sum = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
      // Some repeated values so ties with the mean occur.
      const double e = t % 3 == 0 ? std::floor(rng.uniform(0, 4)) : rng.uniform(0, 200);
      s.push_back({{0.0, 360.0 * i / n, 2.5}, e});
      sum += e;
    }
    const double mean = static_cast<double>(sum / n);
    std::vector<CameraPose> expected;
    for (const auto& x : s)
      if (x.error_mm > mean) expected.push_back(x.pose);
    o.require(greedy_sample(s).poses() == expected, "vector " + std::to_string(t));
  }
  if (o.pass) o.detail = "1000 vectors";
  return o;
}

Outcome closed_loop() {
  Outcome o;
  std::map<SamplerKind, double> final_mean;
  double worst_mean_cut = 1.0, worst_std_cut = 1.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (SamplerKind kind : {SamplerKind::rome, SamplerKind::greedy, SamplerKind::random}) {
      LoopConfig cfg;
      cfg.intervals = 5;
      cfg.sampler = kind;
      cfg.seed = seed;
      OracleConfig oc;
      oc.seed = seed;
      SyntheticOracle oracle(oc, cfg.grid());
      const auto reports = run_loop(oracle, cfg);
      final_mean[kind] += reports.back().mean_error_mm / 10.0;
      if (kind == SamplerKind::rome) {
        const double mean_cut = 1.0 - reports.back().mean_error_mm / reports.front().mean_error_mm;
        const double std_cut = 1.0 - reports.back().std_error_mm / reports.front().std_error_mm;
        worst_mean_cut = std::min(worst_mean_cut, mean_cut);
        worst_std_cut = std::min(worst_std_cut, std_cut);
      }
    }
  }
  const double r = final_mean[SamplerKind::rome], g = final_mean[SamplerKind::greedy],
               u = final_mean[SamplerKind::random];
  o.require(worst_mean_cut >= 0.30, "RoME mean reduction " + fmt(100 * worst_mean_cut) + "%");
  o.require(worst_std_cut >= 0.30, "RoME std reduction " + fmt(100 * worst_std_cut) + "%");
  o.require(r <= g && g <= u, "final means rome " + fmt(r) + ", greedy " + fmt(g) + ", random " + fmt(u));
  o.detail = "worst-seed reductions mean " + fmt(100 * worst_mean_cut, 3) + "%, std " + fmt(100 * worst_std_cut, 3) +
             "%; final means rome " + fmt(r) + " <= greedy " + fmt(g) + " <= random " + fmt(u) + " mm";
  return o;
}

Json without_timing(const std::string& text) {
  Json j = Json::parse(text);
  j.erase("duration_s");
  return j;
}

Outcome cli_determinism() {
  Outcome o;
  TempDir a("accept-det-a"), b("accept-det-b");
  const std::vector<std::string> commands{
      "grid --n-theta 50 --n-phi 50 --out grid.csv",
      "loop --adapter synthetic --intervals 2 --samples 2000 --out run --emit-datasets",
      "fit --errors run/errors.csv --iterations 1500 --seed 1",
      "sample --method rome --landscape landscape.txt --out rome.csv --density density.csv",
      "sample --method greedy --errors run/errors.csv --out greedy.csv",
      "sample --method random --random-count 100 --seed 3 --out random.csv",
      "datagen --plan rome.csv --count 5000 --seed 7 --engine unity",
      "metrics --pred pred.csv --gt gt.csv --joints 24",
  };
  for (const TempDir* d : {&a, &b}) {
    Rng rng(5);
    std::ofstream(*d / "gt.csv") << joints_to_csv(random_joints(rng, 48));
    std::ofstream(*d / "pred.csv") << joints_to_csv(random_joints(rng, 48));
    for (const auto& c : commands) {
      if (c.rfind("fit", 0) == 0) {
        // Per-pose errors of the last loop interval, as a fit input.
        const auto r = report_from_json(Json::parse(io::read_file(*d / "run" / report_file_name(1))));
        std::ofstream(*d / "run" / "errors.csv") << errors_to_csv(r.errors);
      }
      const auto r = run("'" + kCli + "' " + c, d->path);
      o.require(r.exit_code == 0, "'" + c + "' exited " + std::to_string(r.exit_code) + ": " + r.output);
    }
  }
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a.path)) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), a.path);
    const fs::path other = b.path / rel;
    if (!fs::exists(other)) {
      o.require(false, rel.string() + " missing in rerun");
      continue;
    }
    const std::string x = io::read_file(e.path()), y = io::read_file(other);
    const bool same = rel.string().find("manifest") != std::string::npos ? without_timing(x) == without_timing(y) : x == y;
    o.require(same, rel.string() + " differs between runs");
    ++files;
  }
  if (o.pass) o.detail = std::to_string(commands.size()) + " commands, " + std::to_string(files) + " files identical";
  return o;
}

Outcome file_bridge() {
  Outcome o;
  {
    TempDir dir("accept-bridge");
    LoopConfig cfg;
    cfg.intervals = 2;
    cfg.grid_n_theta = 20;
    cfg.grid_n_phi = 20;
    cfg.samples_per_cycle = 2000;
    FakeResponder responder(dir.path, cfg.grid());
    FileBridge bridge({dir.path, std::chrono::seconds(60), std::chrono::milliseconds(5)});
    try {
      const auto reports = run_loop(bridge, cfg);
      o.require(reports.size() == 2, "scripted responder completed " + std::to_string(reports.size()) + " intervals");
    } catch (const std::exception& e) {
      o.require(false, std::string("scripted responder: ") + e.what());
    }
  }
  TempDir dir("accept-silent");
  const auto r = run("'" + kCli + "' loop --adapter file --exchange ex --timeout 0.5 --poll-ms 10 --out run", dir.path);
  o.require(r.exit_code == 1, "silent responder exit " + std::to_string(r.exit_code));
  o.require(r.output.find("\"error\":\"timeout\"") != std::string::npos, "no timeout error line");
  if (o.pass) o.detail = "2 intervals over files; silent responder -> exit 1 (timeout)";
  return o;
}

Outcome dataset_statistics() {
  Outcome o;
  const PoseGrid g = default_grid();
  std::map<std::pair<double, double>, std::size_t> index;
  for (std::size_t i = 0; i < g.size(); ++i) index[{g.poses[i].theta_deg, g.poses[i].phi_deg}] = i;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const DatasetSpec spec = generate_dataset_spec(g.poses, 50000, {}, seed);
    std::vector<std::size_t> counts(g.size(), 0);
    for (const auto& s : spec.scenes) ++counts[index.at({s.camera.theta_deg, s.camera.phi_deg})];
    const double stat = chi_square_uniform(counts, 50000.0);
    worst = std::max(worst, stat);
    o.require(stat < kChiSquare99Df2499, "seed " + std::to_string(seed) + " chi-square " + fmt(stat, 6));
  }
  Rng rng(505);
  for (int t = 0; t < 100; ++t) {
    std::vector<CameraPose> poses;
    for (std::size_t i = 0; i < 1 + rng.index(20); ++i)
      poses.push_back({rng.uniform(-60, 60), rng.uniform(0, 360), rng.uniform(0.5, 5)});
    const DatasetSpec spec =
        generate_dataset_spec(poses, 1 + rng.index(50), {}, rng.next_u64(), static_cast<int>(rng.index(9)),
                              rng.uniform(0.01, 1));
    const std::optional<std::string> engine = t % 2 ? std::optional<std::string>("blender") : std::nullopt;
    const LoadedConfig back = load_config(emit_config(spec, engine), "spec");
    o.require(back.spec == spec && back.engine == engine, "round trip " + std::to_string(t));
  }
  if (o.pass)
    o.detail = "max chi-square " + fmt(worst, 6) + " < " + fmt(kChiSquare99Df2499, 6) + "; 100 round trips lossless";
  return o;
}

struct Criterion {
  const char* name;
  std::function<Outcome()> check;
  double budget_s;  // 0 = no runtime bound
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"metrics invariance", metrics_invariance, 10},
      {"procrustes oracle equivalence", procrustes_oracle, 5},
      {"landscape fit quality", landscape_fit, 60},
      {"derivative consistency", derivative_consistency, 0},
      {"RoME combinatorial laws", rome_laws, 5},
      {"greedy law", greedy_law, 0},
      {"closed-loop improvement", closed_loop, 300},
      {"CLI determinism", cli_determinism, 0},
      {"file protocol conformance", file_bridge, 0},
      {"dataset-spec statistics", dataset_statistics, 0},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& c = criteria[i];
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_s > 0 && secs >= c.budget_s) {
      o.detail += (o.detail.empty() ? "" : "; ") + std::string("over the ") + fmt(c.budget_s) + " s budget";
      o.pass = false;
    }
    if (!o.pass) ++failed;
    std::printf("%s %2zu %-30s %7.2fs  %s\n", o.pass ? "PASS" : "FAIL", i + 1, c.name, secs, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
