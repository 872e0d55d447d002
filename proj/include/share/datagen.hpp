#pragma once

// Render-configuration generation: scenes that pair a randomised body with
// appearance tags and a camera pose drawn from a sampling plan, serialised
// to an engine-neutral JSON schema, plus the matching ground-truth joints.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "share/error.hpp"
#include "share/geometry.hpp"
#include "share/io.hpp"
#include "share/metrics.hpp"
#include "share/random.hpp"

namespace share {

using Json = nlohmann::ordered_json;

inline constexpr std::size_t kShapeParams = 10;
inline constexpr std::size_t kPoseParams = 72;
inline constexpr std::size_t kBodyJoints = 24;
inline constexpr int kConfigVersion = 1;

struct HumanSpec {
  std::array<double, kShapeParams> shape{};
  std::array<double, kPoseParams> pose{};  // axis-angle, 3 per joint, joint 0 is the global orientation
  std::string skin;
  std::string clothing;
  double scale = 1.0;

  friend bool operator==(const HumanSpec&, const HumanSpec&) = default;
};

struct SceneSpec {
  HumanSpec human;
  std::string lighting;
  std::string background;
  CameraPose camera;
  std::uint64_t seed = 0;

  friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

struct DatasetSpec {
  std::vector<SceneSpec> scenes;
  std::size_t samples_per_cycle = 0;
  double augmentation_fraction = 0.15;
  int interval = 0;

  friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

/// Externally supplied (shape, pose) pair, e.g. from a motion-capture bank.
struct BodyParameters {
  std::array<double, kShapeParams> shape{};
  std::array<double, kPoseParams> pose{};
};

struct DiversityConfig {
  std::vector<std::string> skin_tones{"light", "medium_light", "medium", "medium_dark", "dark"};
  std::vector<std::string> clothing{"casual", "sport", "formal", "outdoor", "minimal"};
  std::vector<std::string> lighting{"daylight", "overcast", "indoor_warm", "indoor_cool", "studio", "dusk"};
  std::vector<std::string> backgrounds{"studio_grey", "office", "street", "park", "living_room", "gym"};
  double shape_limit = 2.0;
  double pose_limit = std::numbers::pi / 3.0;
  double scale_min = 0.9;
  double scale_max = 1.1;
  /// When non-empty, body parameters are drawn from here instead of the
  /// uniform ranges above.
  std::vector<BodyParameters> parameter_bank;

  void validate() const {
    for (const auto* vocab : {&skin_tones, &clothing, &lighting, &backgrounds})
      if (vocab->empty()) throw InvalidArgument("appearance vocabularies must not be empty");
    if (!(shape_limit >= 0.0) || !(pose_limit >= 0.0)) throw InvalidArgument("parameter limits must be non-negative");
    if (!(scale_min > 0.0) || !(scale_max >= scale_min)) throw InvalidArgument("body scale range must be positive");
  }

  /// Overrides fields present in `j`; unknown keys are rejected.
  static DiversityConfig from_json(const Json& j) {
    DiversityConfig c;
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      if (k == "skin_tones")
        c.skin_tones = it->get<std::vector<std::string>>();
      else if (k == "clothing")
        c.clothing = it->get<std::vector<std::string>>();
      else if (k == "lighting")
        c.lighting = it->get<std::vector<std::string>>();
      else if (k == "backgrounds")
        c.backgrounds = it->get<std::vector<std::string>>();
      else if (k == "shape_limit")
        c.shape_limit = it->get<double>();
      else if (k == "pose_limit")
        c.pose_limit = it->get<double>();
      else if (k == "scale_min")
        c.scale_min = it->get<double>();
      else if (k == "scale_max")
        c.scale_max = it->get<double>();
      else if (k == "parameter_bank") {
        for (const auto& entry : *it) {
          BodyParameters b;
          const auto shape = entry.at("shape").get<std::vector<double>>();
          const auto pose = entry.at("pose").get<std::vector<double>>();
          if (shape.size() != kShapeParams || pose.size() != kPoseParams)
            throw InvalidArgument("parameter bank entries need 10 shape and 72 pose values");
          std::copy(shape.begin(), shape.end(), b.shape.begin());
          std::copy(pose.begin(), pose.end(), b.pose.begin());
          c.parameter_bank.push_back(b);
        }
      } else
        throw InvalidArgument("unknown diversity key '" + k + "'");
    }
    c.validate();
    return c;
  }
};

namespace detail {

inline const std::string& pick(Rng& rng, const std::vector<std::string>& vocab) {
  return vocab[static_cast<std::size_t>(rng.index(vocab.size()))];
}

inline HumanSpec random_human(Rng& rng, const DiversityConfig& cfg) {
  HumanSpec h;
  if (!cfg.parameter_bank.empty()) {
    const auto& b = cfg.parameter_bank[static_cast<std::size_t>(rng.index(cfg.parameter_bank.size()))];
    h.shape = b.shape;
    h.pose = b.pose;
  } else {
    for (auto& v : h.shape) v = rng.uniform(-cfg.shape_limit, cfg.shape_limit);
    // Global orientation is unconstrained; body joints stay within pose_limit.
    for (std::size_t i = 0; i < kPoseParams; ++i)
      h.pose[i] = i < 3 ? rng.uniform(-std::numbers::pi, std::numbers::pi) : rng.uniform(-cfg.pose_limit, cfg.pose_limit);
  }
  h.skin = pick(rng, cfg.skin_tones);
  h.clothing = pick(rng, cfg.clothing);
  h.scale = rng.uniform(cfg.scale_min, cfg.scale_max);
  return h;
}

}  // namespace detail

/// Draws `count` scenes whose cameras come from `pose_source`: without
/// replacement while count fits the source, with replacement beyond that.
/// Each scene's body and appearance come from its own derived seed.
inline DatasetSpec generate_dataset_spec(std::span<const CameraPose> pose_source, std::size_t count,
                                         const DiversityConfig& diversity, std::uint64_t seed, int interval = 0,
                                         double augmentation_fraction = 0.15) {
  if (pose_source.empty()) throw InvalidArgument("dataset generation needs at least one camera pose");
  if (count < 1) throw InvalidArgument("dataset generation needs a positive sample count");
  if (!(augmentation_fraction > 0.0 && augmentation_fraction <= 1.0))
    throw InvalidArgument("augmentation fraction must lie in (0, 1]");
  diversity.validate();

  Rng pose_rng(derive_seed(seed, 1));
  std::vector<std::size_t> picks;
  picks.reserve(count);
  if (count <= pose_source.size()) {
    std::vector<std::size_t> order(pose_source.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    pose_rng.partial_shuffle(order, count);
    picks.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
  } else {
    for (std::size_t i = 0; i < count; ++i) picks.push_back(static_cast<std::size_t>(pose_rng.index(pose_source.size())));
  }

  DatasetSpec spec;
  spec.samples_per_cycle = count;
  spec.augmentation_fraction = augmentation_fraction;
  spec.interval = interval;
  spec.scenes.reserve(count);
  Rng seed_rng(derive_seed(seed, 2));
  for (std::size_t i = 0; i < count; ++i) {
    SceneSpec scene;
    scene.seed = seed_rng.next_u64();
    Rng rng(scene.seed);
    scene.human = detail::random_human(rng, diversity);
    scene.lighting = detail::pick(rng, diversity.lighting);
    scene.background = detail::pick(rng, diversity.backgrounds);
    scene.camera = pose_source[picks[i]];
    spec.scenes.push_back(std::move(scene));
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Config file

inline Json to_json(const DatasetSpec& spec, const std::optional<std::string>& engine = std::nullopt) {
  Json root;
  root["version"] = kConfigVersion;
  if (engine) root["engine"] = *engine;
  root["interval"] = spec.interval;
  root["samples"] = spec.samples_per_cycle;
  root["augmentation_fraction"] = spec.augmentation_fraction;
  Json scenes = Json::array();
  for (const auto& s : spec.scenes) {
    Json human;
    human["shape"] = s.human.shape;
    human["pose"] = s.human.pose;
    human["skin"] = s.human.skin;
    human["clothing"] = s.human.clothing;
    human["scale"] = s.human.scale;
    Json scene;
    scene["human"] = std::move(human);
    scene["lighting"] = s.lighting;
    scene["background"] = s.background;
    scene["camera"] = {{"theta_deg", s.camera.theta_deg}, {"phi_deg", s.camera.phi_deg}, {"radius", s.camera.radius}};
    scene["seed"] = s.seed;
    scenes.push_back(std::move(scene));
  }
  root["scenes"] = std::move(scenes);
  return root;
}

/// Serialised render configuration. `engine` adds the engine-tagged field.
inline std::string emit_config(const DatasetSpec& spec, const std::optional<std::string>& engine = std::nullopt) {
  return to_json(spec, engine).dump(1) + '\n';
}

struct LoadedConfig {
  DatasetSpec spec;
  std::optional<std::string> engine;
};

inline LoadedConfig config_from_json(const Json& root) {
  LoadedConfig out;
  if (root.at("version").get<int>() != kConfigVersion)
    throw InvalidArgument("unsupported config version " + root.at("version").dump());
  if (root.contains("engine")) out.engine = root.at("engine").get<std::string>();
  out.spec.interval = root.at("interval").get<int>();
  out.spec.samples_per_cycle = root.at("samples").get<std::size_t>();
  out.spec.augmentation_fraction = root.value("augmentation_fraction", 0.15);
  for (const auto& js : root.at("scenes")) {
    SceneSpec s;
    const Json& h = js.at("human");
    const auto shape = h.at("shape").get<std::vector<double>>();
    const auto pose = h.at("pose").get<std::vector<double>>();
    if (shape.size() != kShapeParams) throw InvalidArgument("human.shape must hold 10 values");
    if (pose.size() != kPoseParams) throw InvalidArgument("human.pose must hold 72 values");
    std::copy(shape.begin(), shape.end(), s.human.shape.begin());
    std::copy(pose.begin(), pose.end(), s.human.pose.begin());
    s.human.skin = h.at("skin").get<std::string>();
    s.human.clothing = h.at("clothing").get<std::string>();
    s.human.scale = h.at("scale").get<double>();
    if (!(s.human.scale > 0.0)) throw InvalidArgument("human.scale must be positive");
    s.lighting = js.at("lighting").get<std::string>();
    s.background = js.at("background").get<std::string>();
    const Json& cam = js.at("camera");
    s.camera = CameraPose::make(cam.at("theta_deg").get<double>(), cam.at("phi_deg").get<double>(),
                                cam.at("radius").get<double>());
    s.seed = js.at("seed").get<std::uint64_t>();
    out.spec.scenes.push_back(std::move(s));
  }
  return out;
}

inline LoadedConfig load_config(std::string_view text, const std::string& source) {
  try {
    return config_from_json(Json::parse(text));
  } catch (const Json::exception& e) {
    throw ParseError(source, 0, e.what());
  } catch (const InvalidArgument& e) {
    throw ParseError(source, 0, e.what());
  }
}

// ---------------------------------------------------------------------------
// Ground truth

using JointRegressor = std::function<JointSet(const HumanSpec&)>;

/// Canonical 24-joint T-pose in millimeters (x left, y up, z forward).
inline const std::array<Eigen::RowVector3d, kBodyJoints>& tpose_layout() {
  static const std::array<Eigen::RowVector3d, kBodyJoints> layout{{
      {0, 0, 0},        {90, -80, 0},     {-90, -80, 0},    {0, 110, 0},      {100, -480, 0},
      {-100, -480, 0},  {0, 240, 0},      {100, -880, 0},   {-100, -880, 0},  {0, 290, 0},
      {110, -940, 120}, {-110, -940, 120}, {0, 500, 0},      {80, 420, 0},     {-80, 420, 0},
      {0, 590, 0},      {180, 440, 0},    {-180, 440, 0},   {450, 440, 0},    {-450, 440, 0},
      {700, 440, 0},    {-700, 440, 0},   {790, 440, 0},    {-790, 440, 0},
  }};
  return layout;
}

/// Test stand-in for a body model: each joint is its T-pose position,
/// stretched vertically by the first shape coefficient, offset by 100 mm per
/// radian of that joint's axis-angle parameters, then scaled by body_scale.
inline JointSet stub_joint_regressor(const HumanSpec& human) {
  JointMatrix joints(static_cast<Eigen::Index>(kBodyJoints), 3);
  const double stretch = 1.0 + 0.02 * human.shape[0];
  for (std::size_t j = 0; j < kBodyJoints; ++j) {
    Eigen::RowVector3d p = tpose_layout()[j];
    p.y() *= stretch;
    p += 100.0 * Eigen::RowVector3d(human.pose[3 * j], human.pose[3 * j + 1], human.pose[3 * j + 2]);
    joints.row(static_cast<Eigen::Index>(j)) = human.scale * p;
  }
  return JointSet(std::move(joints));
}

inline std::vector<JointSet> ground_truth_bundle(const DatasetSpec& spec, const JointRegressor& regressor) {
  std::vector<JointSet> out;
  out.reserve(spec.scenes.size());
  for (std::size_t i = 0; i < spec.scenes.size(); ++i) {
    try {
      out.push_back(regressor(spec.scenes[i].human));
    } catch (const std::exception& e) {
      throw Error("joint regressor failed on scene " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

inline constexpr const char* kBundleCsvHeader = "scene_index,joint_index,x_mm,y_mm,z_mm";

inline std::string bundle_to_csv(std::span<const JointSet> bundle) {
  std::string out = kBundleCsvHeader;
  out += '\n';
  for (std::size_t s = 0; s < bundle.size(); ++s)
    for (Eigen::Index j = 0; j < bundle[s].size(); ++j) {
      const auto& m = bundle[s].matrix();
      out += std::to_string(s) + ',' + std::to_string(j) + ',' + io::format_exact(m(j, 0)) + ',' +
             io::format_exact(m(j, 1)) + ',' + io::format_exact(m(j, 2)) + '\n';
    }
  return out;
}

}  // namespace share
