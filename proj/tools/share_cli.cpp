// share: command-line front end for grid generation, landscape fitting,
// adversarial pose sampling, the augmentation loop, joint metrics and
// render-config generation.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error. Failures print a
// single JSON object on stderr.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "share/share.hpp"

namespace fs = std::filesystem;
using share::Json;

namespace {

/// Bad flag values: reported with exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// `--config` files: a JSON object whose keys are long flag names, either at
/// the top level or nested under a subcommand name.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    Json j;
    for (const CLI::Option* opt : app->get_options({})) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      const std::string& name = opt->get_lnames().front();
      if (opt->count() > 0)
        j[name] = opt->results().size() == 1 ? Json(opt->results().front()) : Json(opt->results());
      else if (default_also && !opt->get_default_str().empty())
        j[name] = opt->get_default_str();
    }
    return j.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    Json j;
    try {
      input >> j;
    } catch (const Json::exception& e) {
      throw CLI::ConversionError("config file is not valid JSON: " + std::string(e.what()));
    }
    std::vector<CLI::ConfigItem> items;
    collect(j, {}, items);
    return items;
  }

 private:
  static std::string scalar(const Json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void collect(const Json& j, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& out) {
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it->is_object()) {
        auto p = parents;
        p.push_back(it.key());
        collect(*it, p, out);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = it.key();
      if (it->is_array())
        for (const auto& v : *it) item.inputs.push_back(scalar(v));
      else
        item.inputs.push_back(scalar(*it));
      out.push_back(std::move(item));
    }
  }
};

class Manifest {
 public:
  Manifest(std::string command, std::uint64_t seed) : command_(std::move(command)), seed_(seed) {}

  void input(const fs::path& p) { inputs_.push_back(p.string()); }
  void output(const fs::path& p) { outputs_.push_back(p.string()); }

  void write(const CLI::App& sub, const fs::path& path) const {
    Json config = Json::object();
    for (const CLI::Option* opt : sub.get_options({})) {
      if (opt->get_lnames().empty()) continue;
      const std::string& name = opt->get_lnames().front();
      if (name == "help") continue;
      if (opt->count() > 0)
        config[name] = opt->results().size() == 1 ? Json(opt->results().front()) : Json(opt->results());
      else
        config[name] = opt->get_default_str();
    }
    Json j;
    j["command"] = command_;
    j["tool_version"] = share::kVersion;
    j["seed"] = seed_;
    j["config"] = std::move(config);
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    j["duration_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    share::io::write_atomic(path, j.dump(2) + '\n');
  }

 private:
  std::string command_;
  std::uint64_t seed_;
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

fs::path manifest_path(const fs::path& output) {
  fs::path m = output;
  m += ".manifest.json";
  return m;
}

void print_error(const std::string& kind, const std::string& message) {
  Json j{{"error", kind}, {"message", message}};
  std::cerr << j.dump() << '\n';
}

void warn(const std::string& message) {
  Json j{{"warning", message}};
  std::cerr << j.dump() << '\n';
}

template <typename F>
auto as_usage(F&& f) {
  try {
    return f();
  } catch (const share::InvalidArgument& e) {
    throw UsageError(e.what());
  }
}

// ---------------------------------------------------------------------------
// Shared flag groups

struct GridFlags {
  std::size_t n_theta = 50;
  std::size_t n_phi = 50;
  double theta_min = share::kThetaMin;
  double theta_max = share::kThetaMax;
  double phi_min = 0.0;
  double phi_max = 360.0;
  double radius = share::kDefaultRadius;

  void add(CLI::App* app, bool required) {
    auto* t = app->add_option("--n-theta", n_theta, "elevation steps")->capture_default_str();
    auto* p = app->add_option("--n-phi", n_phi, "azimuth steps")->capture_default_str();
    if (required) {
      t->required();
      p->required();
    }
    app->add_option("--theta-min", theta_min, "lowest elevation (deg)")->capture_default_str();
    app->add_option("--theta-max", theta_max, "highest elevation (deg)")->capture_default_str();
    app->add_option("--phi-min", phi_min, "first azimuth (deg)")->capture_default_str();
    app->add_option("--phi-max", phi_max, "azimuth upper bound, exclusive (deg)")->capture_default_str();
    app->add_option("--radius", radius, "camera distance (m)")->capture_default_str();
  }

  share::PoseGrid build() const {
    if (!(radius > 0.0)) throw UsageError("--radius must be positive (camera pose invariant radius > 0)");
    return as_usage([&] {
      return share::build_grid(n_theta, n_phi, {theta_min, theta_max}, {phi_min, phi_max}, radius);
    });
  }
};

struct FitFlags {
  share::FitConfig config;
  std::string w_error;

  explicit FitFlags(share::FitConfig defaults) : config(std::move(defaults)), w_error(to_string(config.w_error)) {}

  void add(CLI::App* app) {
    app->add_option("--hidden", config.hidden, "hidden layer widths")->capture_default_str();
    app->add_option("--iterations", config.train.iterations, "gradient steps")->capture_default_str();
    app->add_option("--learning-rate", config.train.learning_rate, "step size")->capture_default_str();
    app->add_option("--momentum", config.train.momentum, "momentum coefficient")->capture_default_str();
    app->add_option("--init-range", config.init_range, "uniform init half-width")->capture_default_str();
    app->add_flag("--periodic", config.periodic_phi, "add (cos phi, sin phi) inputs");
    app->add_option("--fd-step", config.fd_step, "finite-difference step (scaled units)")->capture_default_str();
    app->add_option("--w-error", w_error, "error term in W")
        ->check(CLI::IsMember({"scaled", "raw_mm"}))
        ->capture_default_str();
  }

  share::FitConfig resolve() const {
    share::FitConfig c = config;
    c.w_error = share::error_term_from_string(w_error);
    for (int h : c.hidden)
      if (h < 1) throw UsageError("--hidden widths must be positive");
    if (c.train.iterations < 0) throw UsageError("--iterations must be non-negative");
    if (!(c.train.learning_rate > 0.0)) throw UsageError("--learning-rate must be positive");
    if (!(c.fd_step > 0.0 && c.fd_step < 1.0)) throw UsageError("--fd-step must lie in (0, 1)");
    return c;
  }
};

struct RomeFlags {
  share::RomeConfig config;
  std::string quota_base = "all";

  void add(CLI::App* app) {
    app->add_option("--P", config.P, "partitions per axis")->capture_default_str();
    app->add_option("--alpha", config.alpha, "high-region quota scale")->capture_default_str();
    app->add_option("--quota-base", quota_base, "N in M = alpha N / P^3")
        ->check(CLI::IsMember({"all", "surviving"}))
        ->capture_default_str();
  }

  share::RomeConfig resolve(std::uint64_t seed) const {
    share::RomeConfig c = config;
    c.seed = seed;
    c.quota_base = quota_base == "all" ? share::QuotaBase::all_samples : share::QuotaBase::surviving_samples;
    as_usage([&] {
      c.validate();
      return 0;
    });
    return c;
  }
};

// ---------------------------------------------------------------------------
// grid

struct GridCommand {
  GridFlags grid;
  std::string out = "grid.csv";

  void add(CLI::App* app) {
    grid.add(app, true);
    app->add_option("--out", out, "output CSV")->capture_default_str();
  }

  void run(const CLI::App& app) const {
    Manifest m("grid", 0);
    const share::PoseGrid g = grid.build();
    share::io::write_atomic(out, share::grid_to_csv(g.poses));
    m.output(out);
    m.write(app, manifest_path(out));
    std::cout << "wrote " << g.size() << " poses to " << out << '\n';
  }
};

// ---------------------------------------------------------------------------
// fit

struct FitCommand {
  std::string errors;
  std::string out = "landscape.txt";
  std::string export_path = "surface.csv";
  GridFlags grid;
  FitFlags fit{share::FitConfig{}};
  std::uint64_t seed = 0;

  void add(CLI::App* app) {
    app->add_option("--errors", errors, "per-pose error CSV (theta_deg,phi_deg,error_mm)")->required();
    app->add_option("--out", out, "landscape file")->capture_default_str();
    app->add_option("--export", export_path, "surface CSV over the export grid")->capture_default_str();
    grid.add(app, false);
    fit.add(app);
    app->add_option("--seed", seed, "random seed")->capture_default_str();
  }

  void run(const CLI::App& app) const {
    Manifest m("fit", seed);
    const share::FitConfig cfg = fit.resolve();
    const share::PoseGrid g = grid.build();
    const auto samples = share::errors_from_csv(share::io::read_file(errors), errors);
    m.input(errors);
    const share::LossLandscape landscape = share::fit_landscape(samples, cfg, seed);
    for (const auto& w : landscape.report().warnings) warn(w);
    share::io::write_atomic(out, share::save_landscape(landscape));
    share::io::write_atomic(export_path, share::export_landscape(landscape, g));
    m.output(out);
    m.output(export_path);
    m.write(app, manifest_path(out));
    std::cout << "fit " << samples.size() << " samples: loss " << landscape.report().final_loss << " (constant baseline "
              << landscape.report().baseline_loss << ")\n";
  }
};

// ---------------------------------------------------------------------------
// sample

struct SampleCommand {
  std::string method = "rome";
  std::string errors;
  std::string landscape;
  std::string out = "plan.csv";
  std::string density;
  std::size_t random_count = 0;
  GridFlags grid;
  RomeFlags rome;
  FitFlags fit{share::FitConfig{}};
  std::uint64_t seed = 0;

  void add(CLI::App* app) {
    app->add_option("--method", method, "sampler")
        ->check(CLI::IsMember({"rome", "greedy", "random"}))
        ->capture_default_str();
    app->add_option("--errors", errors, "per-pose error CSV");
    app->add_option("--landscape", landscape, "fitted landscape file (rome)");
    app->add_option("--out", out, "plan CSV")->capture_default_str();
    app->add_option("--density", density, "per-region density CSV (rome)");
    app->add_option("--random-count", random_count, "poses drawn by the random method (0 = all)")
        ->capture_default_str();
    grid.add(app, false);
    rome.add(app);
    fit.add(app);
    app->add_option("--seed", seed, "random seed")->capture_default_str();
  }

  void run(const CLI::App& app) const {
    Manifest m("sample", seed);
    if (method == "greedy" && errors.empty()) throw UsageError("--method greedy requires --errors");
    if (method == "rome" && errors.empty() && landscape.empty())
      throw UsageError("--method rome requires --errors or --landscape");
    const share::RomeConfig rome_cfg = rome.resolve(seed);
    const share::FitConfig fit_cfg = fit.resolve();
    const share::PoseGrid g = grid.build();

    std::vector<share::ErrorSample> samples;
    if (!errors.empty()) {
      samples = share::errors_from_csv(share::io::read_file(errors), errors);
      m.input(errors);
    }

    share::SamplingPlan plan;
    std::vector<share::Region> regions;
    if (method == "greedy") {
      plan = share::greedy_sample(samples);
    } else if (method == "random") {
      std::vector<share::CameraPose> pool;
      if (samples.empty())
        pool = g.poses;
      else
        for (const auto& s : samples) pool.push_back(s.pose);
      plan = share::uniform_sample(pool, random_count ? random_count : pool.size(), seed);
    } else {
      std::optional<share::LossLandscape> fitted;
      if (!landscape.empty()) {
        fitted = share::load_landscape(share::io::read_file(landscape), landscape);
        m.input(landscape);
      } else {
        fitted = share::fit_landscape(samples, fit_cfg, seed);
      }
      std::vector<share::ErrorSample> at;
      if (samples.empty())
        for (const auto& p : g.poses) at.push_back({p, 0.0});
      else
        at = samples;
      const auto scored = share::score_samples(*fitted, at);
      plan = share::rome_sample(scored, rome_cfg);
      std::vector<share::WeightedSample> ws;
      for (const auto& s : scored) ws.push_back(s.score);
      regions = share::partition_regions(ws, rome_cfg.P);
    }

    if (plan.selected.empty()) warn("sampler selected no poses (uniform scores); fallback sampling is left to the caller");
    share::io::write_atomic(out, share::plan_to_csv(plan));
    m.output(out);
    if (!density.empty() && !regions.empty()) {
      std::string csv = "region_i,region_j,region_k,members,selected,density,status\n";
      for (const auto& d : share::density_report(plan, regions)) {
        static const char* names[] = {"empty", "pruned", "high", "low"};
        csv += std::to_string(d.index[0]) + ',' + std::to_string(d.index[1]) + ',' + std::to_string(d.index[2]) + ',' +
               std::to_string(d.members) + ',' + std::to_string(d.selected) + ',' + share::io::format_exact(d.density) +
               ',' + names[static_cast<int>(d.status)] + '\n';
      }
      share::io::write_atomic(density, csv);
      m.output(density);
    }
    m.write(app, manifest_path(out));
    std::cout << method << ": selected " << plan.selected.size() << " poses (tau " << plan.tau;
    if (method == "rome") std::cout << ", quota high " << plan.quota_high << ", low " << plan.quota_low;
    std::cout << ")\n";
  }
};

// ---------------------------------------------------------------------------
// loop

struct LoopCommand {
  std::string adapter;
  std::string out = "share_run";
  std::string exchange;
  double timeout_s = 600.0;
  int poll_ms = 50;
  bool emit_datasets = false;
  std::string sampler = "rome";
  share::LoopConfig config;
  share::OracleConfig oracle;
  RomeFlags rome;
  FitFlags fit{share::loop_fit_defaults()};
  std::string diversity;

  void add(CLI::App* app) {
    app->add_option("--adapter", adapter, "model adapter")->required()->check(CLI::IsMember({"synthetic", "file"}));
    app->add_option("--out", out, "output directory")->capture_default_str();
    app->add_option("--intervals", config.intervals, "augmentation intervals")->capture_default_str();
    app->add_option("--epochs", config.epochs_per_interval, "epochs per interval")->capture_default_str();
    app->add_option("--fraction", config.augmentation_fraction, "augmentation fraction")->capture_default_str();
    app->add_option("--samples", config.samples_per_cycle, "images per cycle")->capture_default_str();
    app->add_option("--sampler", sampler, "pose sampler")
        ->check(CLI::IsMember({"rome", "greedy", "random"}))
        ->capture_default_str();
    app->add_option("--random-count", config.random_count, "poses drawn by the random sampler (0 = all)")
        ->capture_default_str();
    app->add_option("--n-theta", config.grid_n_theta, "evaluation grid elevation steps")->capture_default_str();
    app->add_option("--n-phi", config.grid_n_phi, "evaluation grid azimuth steps")->capture_default_str();
    app->add_option("--radius", config.radius, "camera distance (m)")->capture_default_str();
    app->add_option("--seed", config.seed, "random seed")->capture_default_str();
    app->add_option("--diversity", diversity, "JSON appearance vocabularies / parameter bank");
    app->add_flag("--emit-datasets", emit_datasets, "write each generated dataset config");
    rome.add(app);
    fit.add(app);
    app->add_option("--exchange", exchange, "exchange directory (file adapter)");
    app->add_option("--timeout", timeout_s, "seconds to wait for a file responder")->capture_default_str();
    app->add_option("--poll-ms", poll_ms, "file polling interval")->capture_default_str();
    app->add_option("--oracle-base", oracle.base_error_mm)->capture_default_str();
    app->add_option("--oracle-amplitude", oracle.azimuth_amplitude_mm)->capture_default_str();
    app->add_option("--oracle-harmonics", oracle.harmonics)->capture_default_str();
    app->add_option("--oracle-sharpness", oracle.sharpness)->capture_default_str();
    app->add_option("--oracle-slope", oracle.elevation_slope_mm_per_deg)->capture_default_str();
    app->add_option("--oracle-noise", oracle.noise_sigma_mm)->capture_default_str();
    app->add_option("--oracle-rate", oracle.adaptation_rate)->capture_default_str();
    app->add_option("--oracle-neighborhood", oracle.neighborhood_deg)->capture_default_str();
    app->add_option("--oracle-floor", oracle.irreducible_fraction)->capture_default_str();
  }

  void run(const CLI::App& app) const {
    Manifest m("loop", config.seed);
    share::LoopConfig cfg = config;
    cfg.sampler = share::sampler_from_string(sampler);
    cfg.rome = rome.resolve(config.seed);
    cfg.fit = fit.resolve();
    if (!diversity.empty()) {
      cfg.diversity = as_usage([&] {
        try {
          return share::DiversityConfig::from_json(Json::parse(share::io::read_file(diversity)));
        } catch (const Json::exception& e) {
          throw share::ParseError(diversity, 0, e.what());
        }
      });
      m.input(diversity);
    }
    as_usage([&] {
      cfg.validate();
      return 0;
    });
    if (adapter == "file" && exchange.empty()) throw UsageError("--adapter file requires --exchange");
    if (!(timeout_s >= 0.0)) throw UsageError("--timeout must be non-negative");

    const fs::path dir(out);
    fs::create_directories(dir);
    std::unique_ptr<share::ModelAdapter> model;
    if (adapter == "synthetic") {
      share::OracleConfig oc = oracle;
      oc.seed = config.seed;
      model = as_usage([&] { return std::make_unique<share::SyntheticOracle>(oc, cfg.grid()); });
    } else {
      share::FileBridgeConfig fb;
      fb.directory = exchange;
      fb.timeout = std::chrono::milliseconds(static_cast<long long>(timeout_s * 1000.0));
      fb.poll = std::chrono::milliseconds(std::max(1, poll_ms));
      model = std::make_unique<share::FileBridge>(fb);
    }

    const auto reports = share::run_loop(*model, cfg, [&](const share::IntervalOutcome& o) {
      const int k = o.report.interval;
      const fs::path report = dir / share::report_file_name(k);
      share::io::write_atomic(report, share::report_to_json(o.report).dump(1) + '\n');
      m.output(report);
      const fs::path plan = dir / ("plan." + share::FileBridge::stem(k) + ".csv");
      share::io::write_atomic(plan, share::plan_to_csv(o.plan));
      m.output(plan);
      if (emit_datasets) {
        const fs::path ds = dir / ("dataset." + share::FileBridge::stem(k + 1) + ".json");
        share::io::write_atomic(ds, share::emit_config(o.next_dataset));
        m.output(ds);
      }
      if (o.report.plan.fallback) warn("interval " + std::to_string(k) + ": sampler selected nothing; used uniform fallback");
      std::cout << "interval " << k << ": mean " << o.report.mean_error_mm << " mm, std " << o.report.std_error_mm
                << " mm, selected " << o.report.plan.selected << '\n';
    });
    m.write(app, dir / "manifest.json");
    std::cout << "completed " << reports.size() << " intervals\n";
  }
};

// ---------------------------------------------------------------------------
// metrics

struct MetricsCommand {
  std::string pred;
  std::string gt;
  long joints = 0;
  std::string out = "metrics.json";

  void add(CLI::App* app) {
    app->add_option("--pred", pred, "predicted joints CSV (x_mm,y_mm,z_mm)")->required();
    app->add_option("--gt", gt, "ground-truth joints CSV")->required();
    app->add_option("--joints", joints, "joints per set for batch files (0 = one set per file)")
        ->capture_default_str();
    app->add_option("--out", out, "metrics JSON")->capture_default_str();
  }

  void run(const CLI::App& app) const {
    Manifest m("metrics", 0);
    if (joints < 0) throw UsageError("--joints must be non-negative");
    const auto p = share::joints_from_csv(share::io::read_file(pred), pred);
    const auto g = share::joints_from_csv(share::io::read_file(gt), gt);
    m.input(pred);
    m.input(gt);
    if (p.rows() != g.rows())
      throw share::InvalidArgument("joint count mismatch: pred has " + std::to_string(p.rows()) + " rows, gt has " +
                                   std::to_string(g.rows()));
    const Eigen::Index per = joints ? joints : p.rows();
    const auto ps = share::split_blocks(p, per);
    const auto gs = share::split_blocks(g, per);
    Json sets = Json::array();
    double sum_mpjpe = 0.0;
    double sum_pa = 0.0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const double a = share::mpjpe(ps[i], gs[i]);
      const double b = share::pa_mpjpe(ps[i], gs[i]);
      sum_mpjpe += a;
      sum_pa += b;
      sets.push_back({{"index", i}, {"mpjpe_mm", a}, {"pa_mpjpe_mm", b}});
    }
    const double n = static_cast<double>(ps.size());
    Json j{{"sets", ps.size()}, {"joints_per_set", per}, {"mpjpe_mm", sum_mpjpe / n}, {"pa_mpjpe_mm", sum_pa / n},
           {"per_set", std::move(sets)}};
    share::io::write_atomic(out, j.dump(1) + '\n');
    m.output(out);
    m.write(app, manifest_path(out));
    std::cout << "mpjpe_mm=" << share::io::format_exact(sum_mpjpe / n)
              << " pa_mpjpe_mm=" << share::io::format_exact(sum_pa / n) << '\n';
  }
};

// ---------------------------------------------------------------------------
// datagen

struct DatagenCommand {
  std::string plan;
  std::size_t count = 50000;
  std::string out = "dataset.json";
  std::string gt_out = "groundtruth.csv";
  std::string engine;
  std::string diversity;
  int interval = 0;
  double fraction = 0.15;
  GridFlags grid;
  std::uint64_t seed = 0;

  void add(CLI::App* app) {
    app->add_option("--plan", plan, "plan CSV supplying camera poses (default: the full grid)");
    app->add_option("--count", count, "scenes to generate")->capture_default_str();
    app->add_option("--out", out, "render config JSON")->capture_default_str();
    app->add_option("--gt", gt_out, "ground-truth joint bundle CSV")->capture_default_str();
    app->add_option("--engine", engine, "engine tag for engine-tagged configs");
    app->add_option("--diversity", diversity, "JSON appearance vocabularies / parameter bank");
    app->add_option("--interval", interval, "interval index recorded in the config")->capture_default_str();
    app->add_option("--fraction", fraction, "augmentation fraction recorded in the config")->capture_default_str();
    grid.add(app, false);
    app->add_option("--seed", seed, "random seed")->capture_default_str();
  }

  void run(const CLI::App& app) const {
    Manifest m("datagen", seed);
    if (count < 1) throw UsageError("--count must be at least 1");
    if (!(fraction > 0.0 && fraction <= 1.0)) throw UsageError("--fraction must lie in (0, 1]");
    std::vector<share::CameraPose> poses;
    if (!plan.empty()) {
      if (!(grid.radius > 0.0)) throw UsageError("--radius must be positive");
      poses = share::plan_from_csv(share::io::read_file(plan), plan, grid.radius).poses();
      m.input(plan);
      if (poses.empty()) throw share::Error(plan + ": plan holds no poses");
    } else {
      poses = grid.build().poses;
    }
    share::DiversityConfig div;
    if (!diversity.empty()) {
      try {
        div = share::DiversityConfig::from_json(Json::parse(share::io::read_file(diversity)));
      } catch (const Json::exception& e) {
        throw share::ParseError(diversity, 0, e.what());
      }
      m.input(diversity);
    }
    const auto spec = share::generate_dataset_spec(poses, count, div, seed, interval, fraction);
    share::io::write_atomic(out, share::emit_config(spec, engine.empty() ? std::nullopt : std::optional(engine)));
    m.output(out);
    const auto bundle = share::ground_truth_bundle(spec, share::stub_joint_regressor);
    share::io::write_atomic(gt_out, share::bundle_to_csv(bundle));
    m.output(gt_out);
    m.write(app, manifest_path(out));
    std::cout << "wrote " << spec.scenes.size() << " scenes to " << out << '\n';
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial camera-pose augmentation toolkit"};
  app.set_version_flag("--version", std::string(share::kVersion));
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file supplying flag values (command-line flags take precedence)");
  app.require_subcommand(1);

  GridCommand grid;
  FitCommand fit;
  SampleCommand sample;
  LoopCommand loop;
  MetricsCommand metrics;
  DatagenCommand datagen;
  auto* grid_app = app.add_subcommand("grid", "write a uniform camera-pose grid");
  auto* fit_app = app.add_subcommand("fit", "fit a loss landscape to per-pose errors");
  auto* sample_app = app.add_subcommand("sample", "select adversarial camera poses");
  auto* loop_app = app.add_subcommand("loop", "run the augmentation loop against a model adapter");
  auto* metrics_app = app.add_subcommand("metrics", "MPJPE and PA-MPJPE between joint files");
  auto* datagen_app = app.add_subcommand("datagen", "generate a render config and ground-truth joints");
  grid.add(grid_app);
  fit.add(fit_app);
  sample.add(sample_app);
  loop.add(loop_app);
  metrics.add(metrics_app);
  datagen.add(datagen_app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    const CLI::App* sub = nullptr;
    for (const CLI::App* s : app.get_subcommands()) sub = s;
    std::cerr << (sub ? sub->help() : app.help());
    return 2;
  }

  const CLI::App* active = app.get_subcommands().front();
  try {
    if (*grid_app) grid.run(*grid_app);
    if (*fit_app) fit.run(*fit_app);
    if (*sample_app) sample.run(*sample_app);
    if (*loop_app) loop.run(*loop_app);
    if (*metrics_app) metrics.run(*metrics_app);
    if (*datagen_app) datagen.run(*datagen_app);
  } catch (const UsageError& e) {
    print_error("usage", e.what());
    std::cerr << active->help();
    return 2;
  } catch (const share::TimeoutError& e) {
    print_error("timeout", e.what());
    return 1;
  } catch (const share::ParseError& e) {
    print_error("parse", e.what());
    return 1;
  } catch (const share::DegenerateGeometry& e) {
    print_error("degenerate_geometry", e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("runtime", e.what());
    return 1;
  }
  return 0;
}
