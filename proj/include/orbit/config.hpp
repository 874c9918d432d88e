#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "orbit/catalog.hpp"
#include "orbit/flag.hpp"
#include "orbit/observation.hpp"
#include "orbit/pooling.hpp"
#include "orbit/stream.hpp"
#include "orbit/tracker.hpp"

namespace orbit {

using Json = nlohmann::json;

// Planar template: n ordered points on a wobbled ring, generic enough that
// every catalog action is identifiable from the ordered correspondence.
inline Observation rings_template(int n, double radius = 1.0,
                                  double wobble = 0.1) {
  if (n < 2) throw ConfigError("rings template needs at least 2 points");
  Matrix pts(n, 2);
  for (int i = 0; i < n; ++i) {
    const double ang = 2.0 * M_PI * static_cast<double>(i) / n;
    const double r = radius * (1.0 + wobble * std::cos(3.0 * ang));
    pts(i, 0) = r * std::cos(ang);
    pts(i, 1) = r * std::sin(ang);
  }
  return Observation(std::move(pts));
}

struct StackSpec {
  int cycles = 50;
  std::vector<double> lambdas;
  std::vector<PoolingSpec> pooling;
  bool algebra_messages = false;
  double mismatch_threshold = 1e-2;
  int patience = 10;
  Vector scene_theta;   // static scene: input = exp(theta) . template
  double scene_noise = 0.0;  // per-coordinate noise amplitude on the input
};

struct ScenarioConfig {
  std::string name;
  BasisPtr basis;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  std::optional<StreamConfig> stream;
  std::optional<TrackerConfig> tracker;
  double episode_T = 0.0;
  bool iss_enabled = false;
  std::optional<Flag> flag;
  ProjectorSemantics semantics = ProjectorSemantics::kCoset;
  std::optional<StackSpec> stack;
};

namespace detail {

inline Vector json_vector(const Json& j, const char* where) {
  if (!j.is_array()) throw ConfigError(std::string(where) + ": expected list");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number())
      throw ConfigError(std::string(where) + ": expected numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

inline Matrix json_matrix(const Json& j, const char* where) {
  if (!j.is_array() || j.empty())
    throw ConfigError(std::string(where) + ": expected list of rows");
  Matrix m;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Vector row = json_vector(j[i], where);
    if (i == 0)
      m.resize(static_cast<Eigen::Index>(j.size()), row.size());
    else if (row.size() != m.cols())
      throw ConfigError(std::string(where) + ": ragged rows");
    m.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return m;
}

inline Observation parse_template(const Json& j) {
  const std::string kind = j.value("kind", "rings");
  if (kind == "rings")
    return rings_template(j.value("points", 16), j.value("radius", 1.0),
                          j.value("wobble", 0.1));
  if (kind == "points") {
    if (!j.contains("rows")) throw ConfigError("template: missing rows");
    return Observation(json_matrix(j.at("rows"), "template.rows"));
  }
  throw ConfigError("template: unknown kind '" + kind + "'");
}

inline StreamMode parse_mode(const std::string& s) {
  if (s == "static") return StreamMode::kStatic;
  if (s == "drift") return StreamMode::kDrift;
  if (s == "random_walk") return StreamMode::kRandomWalk;
  throw ConfigError("stream: unknown mode '" + s + "'");
}

inline std::vector<std::vector<int>> parse_index_groups(const Json& j,
                                                        const char* where) {
  std::vector<std::vector<int>> out;
  if (!j.is_array()) throw ConfigError(std::string(where) + ": expected list");
  for (const auto& group : j) {
    if (!group.is_array())
      throw ConfigError(std::string(where) + ": expected lists of indices");
    std::vector<int> g;
    for (const auto& e : group) {
      if (!e.is_number_integer())
        throw ConfigError(std::string(where) + ": indices must be integers");
      g.push_back(e.get<int>());
    }
    out.push_back(std::move(g));
  }
  return out;
}

inline PoolingSpec parse_pooling(const Json& j) {
  PoolingSpec spec;
  if (!j.contains("blocks")) throw ConfigError("pooling: missing blocks");
  spec.blocks = parse_index_groups(j.at("blocks"), "pooling.blocks");
  if (j.contains("steps")) {
    for (const auto& s : j.at("steps")) {
      const std::string name = s.get<std::string>();
      if (name == "center")
        spec.steps.push_back(InvariantStep::kCenter);
      else if (name == "scale_normalize")
        spec.steps.push_back(InvariantStep::kScaleNormalize);
      else if (name == "radial_sort")
        spec.steps.push_back(InvariantStep::kRadialSort);
      else
        throw ConfigError("pooling: unknown step '" + name + "'");
    }
  }
  return spec;
}

}  // namespace detail

inline ScenarioConfig parse_scenario(const Json& j) {
  if (!j.is_object()) throw ConfigError("config: expected an object");
  ScenarioConfig cfg;
  cfg.name = j.value("name", "scenario");
  if (!j.contains("basis")) throw ConfigError("config: missing basis");
  cfg.basis = catalog_basis(j.at("basis").get<std::string>());
  cfg.output_dir = j.value("output_dir", std::string("out/") + cfg.name);
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();

  if (j.contains("stream")) {
    const Json& s = j.at("stream");
    StreamConfig st;
    st.basis = cfg.basis;
    st.template_obs = detail::parse_template(
        s.contains("template") ? s.at("template") : Json::object());
    st.mode = detail::parse_mode(s.value("mode", "static"));
    st.theta0 = s.contains("theta0")
                    ? detail::json_vector(s.at("theta0"), "stream.theta0")
                    : Vector(Vector::Zero(cfg.basis->dim()));
    if (s.contains("rate"))
      st.rate = detail::json_vector(s.at("rate"), "stream.rate");
    if (s.contains("sigma"))
      st.sigma = detail::json_vector(s.at("sigma"), "stream.sigma");
    if (st.mode == StreamMode::kRandomWalk && !j.contains("seed"))
      throw ConfigError("config: random_walk stream requires a seed");
    st.seed = cfg.seed;
    if (s.contains("factor_order"))
      st.factor_order =
          detail::parse_index_groups(s.at("factor_order"), "factor_order");
    detail::validate_stream(st);
    cfg.stream = std::move(st);
  }

  if (j.contains("tracker")) {
    const Json& t = j.at("tracker");
    for (const char* key : {"alpha", "W", "kappa", "dt", "T"})
      if (!t.contains(key))
        throw ConfigError(std::string("tracker: missing ") + key);
    const Matrix w = detail::json_matrix(t.at("W"), "tracker.W");
    if (t.contains("b"))
      cfg.tracker = TrackerConfig::unchecked(
          t.at("alpha").get<double>(), w,
          detail::json_vector(t.at("b"), "tracker.b"),
          t.at("kappa").get<double>(), t.at("dt").get<double>(), cfg.basis);
    else
      cfg.tracker = TrackerConfig::make(t.at("alpha").get<double>(), w,
                                        t.at("kappa").get<double>(),
                                        t.at("dt").get<double>(), cfg.basis);
    cfg.episode_T = t.at("T").get<double>();
    if (cfg.episode_T <= 0) throw ConfigError("tracker: T must be > 0");
    if (!cfg.stream) throw ConfigError("tracker: requires a stream");
  }

  cfg.iss_enabled = j.contains("iss") && j.at("iss").value("enabled", false);
  if (cfg.iss_enabled) {
    if (!cfg.tracker || !cfg.stream)
      throw ConfigError("iss: requires tracker and stream");
    if (cfg.stream->mode != StreamMode::kDrift)
      throw ConfigError("iss: requires a drift stream");
  }

  if (j.contains("flag")) {
    const Json& f = j.at("flag");
    if (!f.contains("levels")) throw ConfigError("flag: missing levels");
    Matrix inner;
    if (f.contains("inner_product"))
      inner = detail::json_matrix(f.at("inner_product"), "flag.inner_product");
    cfg.flag = build_flag(
        cfg.basis, detail::parse_index_groups(f.at("levels"), "flag.levels"),
        inner);
    const std::string sem = f.value("semantics", "coset");
    if (sem == "coset")
      cfg.semantics = ProjectorSemantics::kCoset;
    else if (sem == "subgroup")
      cfg.semantics = ProjectorSemantics::kSubgroup;
    else
      throw ConfigError("flag: unknown semantics '" + sem + "'");
  }

  if (j.contains("stack")) {
    if (!cfg.flag) throw ConfigError("stack: requires a flag");
    if (!cfg.stream)
      throw ConfigError("stack: requires a stream for its template");
    const Json& s = j.at("stack");
    StackSpec spec;
    spec.cycles = s.value("cycles", 50);
    if (spec.cycles < 1) throw ConfigError("stack: cycles must be >= 1");
    if (s.contains("lambdas"))
      for (const auto& l : s.at("lambdas"))
        spec.lambdas.push_back(l.get<double>());
    if (!s.contains("pooling")) throw ConfigError("stack: missing pooling");
    for (const auto& p : s.at("pooling"))
      spec.pooling.push_back(detail::parse_pooling(p));
    spec.algebra_messages = s.value("message_mode", "observation") == "algebra";
    spec.mismatch_threshold = s.value("mismatch_threshold", 1e-2);
    spec.patience = s.value("patience", 10);
    spec.scene_theta =
        s.contains("scene_theta")
            ? detail::json_vector(s.at("scene_theta"), "stack.scene_theta")
            : Vector(Vector::Zero(cfg.basis->dim()));
    if (spec.scene_theta.size() != cfg.basis->dim())
      throw ConfigError("stack: scene_theta size != basis dim");
    spec.scene_noise = s.value("scene_noise", 0.0);
    if (spec.scene_noise != 0.0 && !j.contains("seed"))
      throw ConfigError("config: scene noise requires a seed");
    cfg.stack = std::move(spec);
  }

  return cfg;
}

}  // namespace orbit
