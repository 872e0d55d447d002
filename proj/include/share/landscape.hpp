#pragma once

// Continuous loss landscape E = f(theta, phi) fitted to per-pose errors.
//
// Theta, phi and E are min-max scaled into [-1, 1]; an MLP regresses scaled
// E on scaled (X, Y) = (theta, phi). Slope and curvature come from finite
// differences on that scaled surface and feed the composite score
//   W = |E| + |grad f|_2 + |Hess f|_F.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "share/error.hpp"
#include "share/geometry.hpp"
#include "share/io.hpp"
#include "share/mlp.hpp"

namespace share {

struct ErrorSample {
  CameraPose pose;
  double error_mm = 0.0;
};

/// Affine map of [min, max] onto [-1, 1]. A degenerate axis (max == min)
/// sends everything to 0 and unscales to min.
struct AxisScale {
  double min = 0.0;
  double max = 0.0;

  bool degenerate() const noexcept { return max == min; }
  double scale(double v) const noexcept { return degenerate() ? 0.0 : 2.0 * (v - min) / (max - min) - 1.0; }
  double unscale(double s) const noexcept { return degenerate() ? min : min + (s + 1.0) * 0.5 * (max - min); }
  /// d(raw)/d(scaled).
  double span_factor() const noexcept { return 0.5 * (max - min); }

  friend bool operator==(const AxisScale&, const AxisScale&) = default;
};

struct MinMaxScaler {
  AxisScale theta;
  AxisScale phi;
  AxisScale error;

  std::vector<std::string> warnings() const {
    std::vector<std::string> w;
    if (theta.degenerate()) w.push_back("theta axis is constant; scaled to 0");
    if (phi.degenerate()) w.push_back("phi axis is constant; scaled to 0");
    if (error.degenerate()) w.push_back("error axis is constant; scaled to 0");
    return w;
  }

  friend bool operator==(const MinMaxScaler&, const MinMaxScaler&) = default;
};

inline void check_samples(std::span<const ErrorSample> samples) {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (!s.pose.valid()) throw InvalidArgument("sample " + std::to_string(i) + " has an invalid pose");
    if (!std::isfinite(s.error_mm) || s.error_mm < 0.0)
      throw InvalidArgument("sample " + std::to_string(i) + " has a negative or non-finite error");
  }
}

inline MinMaxScaler fit_scaler(std::span<const ErrorSample> samples) {
  if (samples.empty()) throw InvalidArgument("cannot fit a scaler to no samples");
  check_samples(samples);
  auto extent = [&](auto get) {
    AxisScale a{get(samples[0]), get(samples[0])};
    for (const auto& s : samples) {
      a.min = std::min(a.min, get(s));
      a.max = std::max(a.max, get(s));
    }
    return a;
  };
  return MinMaxScaler{extent([](const ErrorSample& s) { return s.pose.theta_deg; }),
                      extent([](const ErrorSample& s) { return s.pose.phi_deg; }),
                      extent([](const ErrorSample& s) { return s.error_mm; })};
}

/// Which error magnitude enters W.
enum class ErrorTerm { scaled, raw_mm };

inline std::string to_string(ErrorTerm t) { return t == ErrorTerm::scaled ? "scaled" : "raw_mm"; }
inline ErrorTerm error_term_from_string(const std::string& s) {
  if (s == "scaled") return ErrorTerm::scaled;
  if (s == "raw_mm") return ErrorTerm::raw_mm;
  throw InvalidArgument("unknown error term '" + s + "' (expected scaled or raw_mm)");
}

struct FitConfig {
  std::vector<int> hidden{64, 64};
  TrainSettings train{};
  double init_range = 0.5;
  /// Adds (cos phi, sin phi) as extra regressor inputs.
  bool periodic_phi = false;
  /// Finite-difference step in scaled units.
  double fd_step = 0.01;
  ErrorTerm w_error = ErrorTerm::scaled;
};

struct FitReport {
  double final_loss = 0.0;     // MSE on scaled training targets
  double baseline_loss = 0.0;  // MSE of the best constant predictor
  int iterations = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;

  friend bool operator==(const FitReport&, const FitReport&) = default;
};

struct Derivatives {
  Eigen::Vector2d gradient = Eigen::Vector2d::Zero();
  Eigen::Matrix2d hessian = Eigen::Matrix2d::Zero();
};

struct WeightedSample {
  double X = 0.0;
  double Y = 0.0;
  double E = 0.0;  // scaled predicted error
  double W = 0.0;
};

class LossLandscape {
 public:
  LossLandscape() = default;
  LossLandscape(MinMaxScaler scaler, Mlp regressor, FitReport report, bool periodic_phi, double fd_step,
                ErrorTerm w_error)
      : scaler_(scaler),
        regressor_(std::move(regressor)),
        report_(std::move(report)),
        periodic_phi_(periodic_phi),
        fd_step_(fd_step),
        w_error_(w_error) {
    if (regressor_.input_size() != feature_count() || regressor_.output_size() != 1)
      throw InvalidArgument("regressor shape does not match the landscape inputs");
    if (!(fd_step_ > 0.0) || fd_step_ >= 1.0) throw InvalidArgument("finite-difference step must be in (0, 1)");
  }

  const MinMaxScaler& scaler() const noexcept { return scaler_; }
  const Mlp& regressor() const noexcept { return regressor_; }
  const FitReport& report() const noexcept { return report_; }
  bool periodic_phi() const noexcept { return periodic_phi_; }
  double fd_step() const noexcept { return fd_step_; }
  ErrorTerm w_error() const noexcept { return w_error_; }
  Eigen::Index feature_count() const noexcept { return periodic_phi_ ? 4 : 2; }

  /// Regressor input for scaled coordinates.
  Eigen::VectorXd features(double X, double Y) const {
    Eigen::VectorXd f(feature_count());
    f(0) = X;
    f(1) = Y;
    if (periodic_phi_) {
      const double phi = deg2rad(scaler_.phi.unscale(Y));
      f(2) = std::cos(phi);
      f(3) = std::sin(phi);
    }
    return f;
  }

  Eigen::MatrixXd features(std::span<const double> X, std::span<const double> Y) const {
    Eigen::MatrixXd f(feature_count(), static_cast<Eigen::Index>(X.size()));
    for (std::size_t i = 0; i < X.size(); ++i) f.col(static_cast<Eigen::Index>(i)) = features(X[i], Y[i]);
    return f;
  }

  /// Raw regressor output at scaled coordinates.
  double regressor_output(double X, double Y) const { return regressor_.predict_scalar(features(X, Y)); }

  /// Scaled predicted error. Identically 0 when the error axis is degenerate.
  double surface(double X, double Y) const {
    return scaler_.error.degenerate() ? 0.0 : regressor_output(X, Y);
  }

  double predict(const CameraPose& pose) const {
    return scaler_.error.unscale(surface(scaler_.theta.scale(pose.theta_deg), scaler_.phi.scale(pose.phi_deg)));
  }

  /// Central differences; an axis whose stencil would leave [-1, 1] switches
  /// to the second-order one-sided stencil pointing inwards.
  Derivatives derivatives(double X, double Y, double h) const {
    struct Stencil {
      double offsets[3];
      double first[3];   // weights for d/dx, already divided by h
      double second[3];  // weights for d2/dx2, already divided by h^2
    };
    auto stencil_for = [h](double x) {
      if (x - h < -1.0) return Stencil{{0, h, 2 * h}, {-1.5 / h, 2.0 / h, -0.5 / h}, {1 / (h * h), -2 / (h * h), 1 / (h * h)}};
      if (x + h > 1.0) return Stencil{{0, -h, -2 * h}, {1.5 / h, -2.0 / h, 0.5 / h}, {1 / (h * h), -2 / (h * h), 1 / (h * h)}};
      return Stencil{{-h, 0, h}, {-0.5 / h, 0.0, 0.5 / h}, {1 / (h * h), -2 / (h * h), 1 / (h * h)}};
    };
    const Stencil sx = stencil_for(X);
    const Stencil sy = stencil_for(Y);
    double f[3][3];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) f[i][j] = surface(X + sx.offsets[i], Y + sy.offsets[j]);
    // Row/column of the stencil that sits on the evaluation point.
    const int cx = sx.offsets[0] == 0 ? 0 : 1;
    const int cy = sy.offsets[0] == 0 ? 0 : 1;

    Derivatives d;
    double mixed = 0.0;
    for (int i = 0; i < 3; ++i) {
      d.gradient(0) += sx.first[i] * f[i][cy];
      d.gradient(1) += sy.first[i] * f[cx][i];
      d.hessian(0, 0) += sx.second[i] * f[i][cy];
      d.hessian(1, 1) += sy.second[i] * f[cx][i];
      for (int j = 0; j < 3; ++j) mixed += sx.first[i] * sy.first[j] * f[i][j];
    }
    d.hessian(0, 1) = d.hessian(1, 0) = mixed;
    return d;
  }

  Derivatives derivatives(double X, double Y) const { return derivatives(X, Y, fd_step_); }

  WeightedSample composite_metric(double X, double Y) const {
    const double e_scaled = surface(X, Y);
    const Derivatives d = derivatives(X, Y);
    const double magnitude = w_error_ == ErrorTerm::scaled ? std::abs(e_scaled)
                                                           : std::abs(scaler_.error.unscale(e_scaled));
    return WeightedSample{X, Y, e_scaled, magnitude + d.gradient.norm() + d.hessian.norm()};
  }

  WeightedSample composite_metric(const CameraPose& pose) const {
    return composite_metric(scaler_.theta.scale(pose.theta_deg), scaler_.phi.scale(pose.phi_deg));
  }

 private:
  MinMaxScaler scaler_;
  Mlp regressor_;
  FitReport report_;
  bool periodic_phi_ = false;
  double fd_step_ = 0.01;
  ErrorTerm w_error_ = ErrorTerm::scaled;
};

inline constexpr std::size_t kMinFitSamples = 16;

inline LossLandscape fit_landscape(std::span<const ErrorSample> samples, const FitConfig& config,
                                   std::uint64_t seed) {
  if (samples.size() < kMinFitSamples)
    throw InvalidArgument("fitting a landscape needs at least " + std::to_string(kMinFitSamples) + " samples, got " +
                          std::to_string(samples.size()));
  if (config.train.iterations < 0) throw InvalidArgument("iteration count must be non-negative");
  const MinMaxScaler scaler = fit_scaler(samples);

  std::vector<int> sizes{config.periodic_phi ? 4 : 2};
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  sizes.push_back(1);
  Mlp net = Mlp::random(sizes, config.init_range, seed);
  LossLandscape shell(scaler, net, {}, config.periodic_phi, config.fd_step, config.w_error);

  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd inputs(shell.feature_count(), n);
  Eigen::MatrixXd targets(1, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    inputs.col(i) = shell.features(scaler.theta.scale(s.pose.theta_deg), scaler.phi.scale(s.pose.phi_deg));
    targets(0, i) = scaler.error.scale(s.error_mm);
  }

  FitReport report;
  report.iterations = config.train.iterations;
  report.seed = seed;
  report.warnings = scaler.warnings();
  report.baseline_loss = (targets.array() - targets.mean()).square().mean();
  report.final_loss = net.train(inputs, targets, config.train);
  if (!std::isfinite(report.final_loss)) throw Error("landscape fit diverged; lower the learning rate");
  return LossLandscape(scaler, std::move(net), std::move(report), config.periodic_phi, config.fd_step,
                       config.w_error);
}

inline double predict(const LossLandscape& landscape, const CameraPose& pose) { return landscape.predict(pose); }

inline Derivatives derivatives(const LossLandscape& landscape, double X, double Y) {
  return landscape.derivatives(X, Y);
}

inline WeightedSample composite_metric(const LossLandscape& landscape, double X, double Y) {
  return landscape.composite_metric(X, Y);
}

// ---------------------------------------------------------------------------
// Tabular I/O

inline constexpr const char* kErrorCsvHeader = "theta_deg,phi_deg,error_mm";
inline constexpr const char* kSurfaceCsvHeader = "theta_deg,phi_deg,X,Y,E_scaled,E_mm,W";

inline std::vector<ErrorSample> errors_from_csv(std::string_view text, const std::string& source) {
  std::vector<ErrorSample> out;
  for (const auto& row : io::parse_numeric_csv(text, kErrorCsvHeader, source)) {
    try {
      const CameraPose pose = CameraPose::make(row.values[0], row.values[1], kDefaultRadius);
      if (!std::isfinite(row.values[2]) || row.values[2] < 0.0)
        throw InvalidArgument("error_mm must be finite and non-negative");
      out.push_back({pose, row.values[2]});
    } catch (const InvalidArgument& e) {
      throw ParseError(source, row.line, e.what());
    }
  }
  return out;
}

inline std::string errors_to_csv(std::span<const ErrorSample> samples) {
  std::string out = kErrorCsvHeader;
  out += '\n';
  for (const auto& s : samples) {
    out += io::format_sig(s.pose.theta_deg, 9) + ',' + io::format_sig(s.pose.phi_deg, 9) + ',' +
           io::format_exact(s.error_mm) + '\n';
  }
  return out;
}

/// One row per grid pose: coordinates, scaled and mm predictions, and W.
inline std::string export_landscape(const LossLandscape& landscape, const PoseGrid& grid) {
  std::string out = kSurfaceCsvHeader;
  out += '\n';
  for (const auto& pose : grid.poses) {
    const WeightedSample w = landscape.composite_metric(pose);
    out += io::format_sig(pose.theta_deg, 9) + ',' + io::format_sig(pose.phi_deg, 9) + ',' +
           io::format_exact(w.X) + ',' + io::format_exact(w.Y) + ',' + io::format_exact(w.E) + ',' +
           io::format_exact(landscape.predict(pose)) + ',' + io::format_exact(w.W) + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence. Line-oriented text; every double is written in shortest
// round-trip form so load(save(x)) reproduces x bit for bit.

inline constexpr const char* kLandscapeMagic = "share-landscape 1";

inline std::string save_landscape(const LossLandscape& l) {
  std::ostringstream out;
  auto num = [](double v) { return io::format_exact(v); };
  out << kLandscapeMagic << '\n';
  out << "activation " << to_string(l.regressor().activation()) << '\n';
  out << "periodic_phi " << (l.periodic_phi() ? 1 : 0) << '\n';
  out << "fd_step " << num(l.fd_step()) << '\n';
  out << "w_error " << to_string(l.w_error()) << '\n';
  out << "scaler theta " << num(l.scaler().theta.min) << ' ' << num(l.scaler().theta.max) << '\n';
  out << "scaler phi " << num(l.scaler().phi.min) << ' ' << num(l.scaler().phi.max) << '\n';
  out << "scaler error " << num(l.scaler().error.min) << ' ' << num(l.scaler().error.max) << '\n';
  const FitReport& r = l.report();
  out << "fit_report " << num(r.final_loss) << ' ' << num(r.baseline_loss) << ' ' << r.iterations << ' ' << r.seed
      << '\n';
  out << "warnings " << r.warnings.size() << '\n';
  for (const auto& w : r.warnings) out << "warning " << w << '\n';
  const auto sizes = l.regressor().sizes();
  out << "layers " << sizes.size();
  for (int s : sizes) out << ' ' << s;
  out << '\n';
  for (std::size_t k = 0; k < l.regressor().layers().size(); ++k) {
    const auto& layer = l.regressor().layers()[k];
    out << "weights " << k << ' ' << layer.weights.rows() << ' ' << layer.weights.cols() << '\n';
    for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) {
      for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) out << (j ? " " : "") << num(layer.weights(i, j));
      out << '\n';
    }
    out << "bias " << k;
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) out << ' ' << num(layer.bias(i));
    out << '\n';
  }
  out << "end\n";
  return out.str();
}

namespace detail {

class LineReader {
 public:
  LineReader(std::string_view text, std::string source) : text_(text), source_(std::move(source)) {}

  std::vector<std::string_view> next(std::string_view keyword) {
    for (;;) {
      if (pos_ > text_.size()) fail("unexpected end of file, expected '" + std::string(keyword) + "'");
      std::size_t eol = text_.find('\n', pos_);
      if (eol == std::string_view::npos) eol = text_.size();
      current_ = io::trim(text_.substr(pos_, eol - pos_));
      pos_ = eol + 1;
      ++line_;
      if (current_.empty()) continue;
      auto tokens = io::split(current_, ' ');
      if (!keyword.empty() && tokens[0] != keyword) fail("expected '" + std::string(keyword) + "'");
      return tokens;
    }
  }

  /// Remainder of the current line after the keyword.
  std::string rest_after(std::string_view keyword) const {
    return std::string(io::trim(current_.substr(std::min(current_.size(), keyword.size()))));
  }

  double number(std::string_view tok) const { return io::parse_double(tok, source_, line_); }

  long long integer(std::string_view tok) const {
    long long v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || p != tok.data() + tok.size()) fail("not an integer: '" + std::string(tok) + "'");
    return v;
  }

  std::uint64_t unsigned_integer(std::string_view tok) const {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || p != tok.data() + tok.size()) fail("not an unsigned integer: '" + std::string(tok) + "'");
    return v;
  }

  void expect_count(const std::vector<std::string_view>& t, std::size_t n) const {
    if (t.size() != n) fail("expected " + std::to_string(n) + " fields, got " + std::to_string(t.size()));
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(source_, line_, what); }

 private:
  std::string_view text_;
  std::string source_;
  std::string_view current_;
  std::size_t pos_ = 0;
  std::size_t line_ = 0;
};

}  // namespace detail

inline LossLandscape load_landscape(std::string_view text, const std::string& source) {
  detail::LineReader in(text, source);
  {
    auto t = in.next("");
    std::string header;
    for (std::size_t i = 0; i < t.size(); ++i) header += (i ? " " : "") + std::string(t[i]);
    if (header != kLandscapeMagic) in.fail("not a landscape file (expected '" + std::string(kLandscapeMagic) + "')");
  }
  auto t = in.next("activation");
  in.expect_count(t, 2);
  const Activation activation = activation_from_string(std::string(t[1]));
  t = in.next("periodic_phi");
  in.expect_count(t, 2);
  const bool periodic = in.integer(t[1]) != 0;
  t = in.next("fd_step");
  in.expect_count(t, 2);
  const double fd_step = in.number(t[1]);
  t = in.next("w_error");
  in.expect_count(t, 2);
  const ErrorTerm w_error = error_term_from_string(std::string(t[1]));

  MinMaxScaler scaler;
  for (auto [name, axis] : {std::pair{"theta", &scaler.theta}, {"phi", &scaler.phi}, {"error", &scaler.error}}) {
    t = in.next("scaler");
    in.expect_count(t, 4);
    if (t[1] != name) in.fail("expected scaler '" + std::string(name) + "'");
    *axis = AxisScale{in.number(t[2]), in.number(t[3])};
    if (!(axis->max >= axis->min)) in.fail("scaler max is below min");
  }

  FitReport report;
  t = in.next("fit_report");
  in.expect_count(t, 5);
  report.final_loss = in.number(t[1]);
  report.baseline_loss = in.number(t[2]);
  report.iterations = static_cast<int>(in.integer(t[3]));
  report.seed = in.unsigned_integer(t[4]);
  t = in.next("warnings");
  in.expect_count(t, 2);
  const auto n_warn = in.integer(t[1]);
  for (long long i = 0; i < n_warn; ++i) {
    in.next("warning");
    report.warnings.push_back(in.rest_after("warning"));
  }

  t = in.next("layers");
  if (t.size() < 2) in.fail("missing layer count");
  const auto n_sizes = in.integer(t[1]);
  if (n_sizes < 2 || static_cast<long long>(t.size()) != n_sizes + 2) in.fail("layer size list is malformed");
  std::vector<int> sizes;
  for (long long i = 0; i < n_sizes; ++i) sizes.push_back(static_cast<int>(in.integer(t[static_cast<std::size_t>(i + 2)])));

  std::vector<DenseLayer> layers;
  for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
    t = in.next("weights");
    in.expect_count(t, 4);
    if (in.integer(t[1]) != static_cast<long long>(k) || in.integer(t[2]) != sizes[k + 1] ||
        in.integer(t[3]) != sizes[k])
      in.fail("weight block header does not match the layer sizes");
    DenseLayer layer{Eigen::MatrixXd(sizes[k + 1], sizes[k]), Eigen::VectorXd(sizes[k + 1])};
    for (int i = 0; i < sizes[k + 1]; ++i) {
      auto row = in.next("");
      in.expect_count(row, static_cast<std::size_t>(sizes[k]));
      for (int j = 0; j < sizes[k]; ++j) layer.weights(i, j) = in.number(row[static_cast<std::size_t>(j)]);
    }
    t = in.next("bias");
    in.expect_count(t, static_cast<std::size_t>(sizes[k + 1]) + 2);
    for (int i = 0; i < sizes[k + 1]; ++i) layer.bias(i) = in.number(t[static_cast<std::size_t>(i) + 2]);
    layers.push_back(std::move(layer));
  }
  in.next("end");
  try {
    return LossLandscape(scaler, Mlp(std::move(layers), activation), std::move(report), periodic, fd_step, w_error);
  } catch (const InvalidArgument& e) {
    in.fail(e.what());
  }
}

}  // namespace share
