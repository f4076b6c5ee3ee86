#include "onpalm/config/config.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "onpalm/scenario/state.h"

namespace onpalm {
namespace config {

using Eigen::Vector3d;
using Eigen::VectorXd;

std::string_view ToString(TaskKind kind) {
  switch (kind) {
    case TaskKind::kTray:
      return "tray";
    case TaskKind::kWall:
      return "wall";
    case TaskKind::kCustom:
      return "custom";
  }
  return "custom";
}

ConfigError::ConfigError(std::string source, int line, std::string field,
                         const std::string& message)
    : std::runtime_error(source + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " +
                         (field.empty() ? std::string() : field + ": ") + message),
      source_(std::move(source)),
      line_(line),
      field_(std::move(field)) {}

ExperimentConfig ExperimentConfig::TrayRetrieval() {
  ExperimentConfig c;
  c.task = TaskKind::kTray;
  c.scenario = scenario::ScenarioConfig::TrayRetrieval();
  c.c3 = c3::C3Params::TrayRetrieval();
  c.targets = harness::TaskSpec::TrayRetrieval();
  return c;
}

ExperimentConfig ExperimentConfig::WallRotation() {
  ExperimentConfig c;
  c.task = TaskKind::kWall;
  c.scenario = scenario::ScenarioConfig::WallRotation();
  c.c3 = c3::C3Params::WallRotation();
  c.targets = harness::TaskSpec::TrayRetrieval();
  c.targets.time_limit = c.wall.time_limit;
  return c;
}

namespace {

constexpr double kDeg = M_PI / 180.0;

std::string Shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

// Reads fields out of a YAML tree. Every map is checked for keys the schema
// does not know about once its fields have been visited.
class Reader {
 public:
  Reader(YAML::Node root, std::string source) : source_(std::move(source)) {
    stack_.push_back({std::move(root), "", {}});
  }

  static constexpr bool kReading = true;

  template <class F>
  void Section(const char* key, F&& body) {
    const YAML::Node found = Child(key);
    if (found && !found.IsMap()) Fail(found, Path(key), "expected a mapping");
    // A missing section keeps its defaults.
    stack_.push_back({found ? found : YAML::Node(YAML::NodeType::Map), Path(key), {}});
    body();
    CheckKeys();
    stack_.pop_back();
  }

  void Field(const char* key, double& v) {
    if (YAML::Node n = Child(key)) v = AsDouble(n, Path(key));
  }
  void Field(const char* key, int& v) {
    YAML::Node n = Child(key);
    if (!n) return;
    const double d = AsDouble(n, Path(key));
    if (d != std::floor(d) || std::abs(d) > 1e9) Fail(n, Path(key), "expected an integer");
    v = static_cast<int>(d);
  }
  void Field(const char* key, bool& v) {
    YAML::Node n = Child(key);
    if (!n) return;
    if (!n.IsScalar()) Fail(n, Path(key), "expected true or false");
    const std::string s = n.Scalar();
    if (s == "true") {
      v = true;
    } else if (s == "false") {
      v = false;
    } else {
      Fail(n, Path(key), "expected true or false, got '" + s + "'");
    }
  }
  void Field(const char* key, Vector3d& v) {
    YAML::Node n = Child(key);
    if (!n) return;
    const VectorXd x = AsVector(n, Path(key));
    if (x.size() != 3) Fail(n, Path(key), "expected 3 numbers, got " + std::to_string(x.size()));
    v = x;
  }
  // Either a list, or {scale: s, values: [...]} as the tables print it.
  void Field(const char* key, VectorXd& v) {
    YAML::Node n = Child(key);
    if (!n) return;
    if (n.IsMap()) {
      stack_.push_back({n, Path(key), {}});
      double scale = 1.0;
      VectorXd values;
      Field("scale", scale);
      YAML::Node vals = Child("values");
      if (!vals) Fail(n, Path(key), "scaled vector needs 'values'");
      values = AsVector(vals, Path("values"));
      CheckKeys();
      stack_.pop_back();
      v = scale * values;
      return;
    }
    v = AsVector(n, Path(key));
  }
  template <class E>
  void Enum(const char* key, E& v, const std::vector<std::pair<std::string, E>>& names) {
    YAML::Node n = Child(key);
    if (!n) return;
    if (!n.IsScalar()) Fail(n, Path(key), "expected a name");
    std::string allowed;
    for (const auto& [name, value] : names) {
      if (n.Scalar() == name) {
        v = value;
        return;
      }
      allowed += (allowed.empty() ? "" : ", ") + name;
    }
    Fail(n, Path(key), "unknown value '" + n.Scalar() + "' (expected one of " + allowed + ")");
  }
  // A list of maps; `make` fills one element from the current map.
  template <class T, class F>
  void List(const char* key, std::vector<T>& out, F&& item) {
    YAML::Node n = Child(key);
    if (!n) return;
    if (!n.IsSequence()) Fail(n, Path(key), "expected a list");
    out.clear();
    for (size_t i = 0; i < n.size(); ++i) {
      const std::string path = Path(key) + "[" + std::to_string(i) + "]";
      if (!n[i].IsMap()) Fail(n[i], path, "expected a mapping");
      stack_.push_back({n[i], path, {}});
      T value{};
      item(value);
      CheckKeys();
      stack_.pop_back();
      out.push_back(std::move(value));
    }
  }
  // An optional mapping; `null` or absence clears it.
  template <class T, class F>
  void Optional(const char* key, std::optional<T>& out, F&& item) {
    YAML::Node n = Child(key);
    if (!n) return;
    if (n.IsNull()) {
      out.reset();
      return;
    }
    if (!n.IsMap()) Fail(n, Path(key), "expected a mapping or null");
    stack_.push_back({n, Path(key), {}});
    T value = out.value_or(T{});
    item(value);
    CheckKeys();
    stack_.pop_back();
    out = std::move(value);
  }

  [[noreturn]] void FailField(const char* key, const std::string& msg) {
    YAML::Node n = Child(key);
    Fail(n ? n : stack_.back().node, Path(key), msg);
  }

 private:
  struct Frame {
    YAML::Node node;
    std::string path;
    std::set<std::string> seen;
  };

  std::string Path(const char* key) const {
    return stack_.back().path.empty() ? key : stack_.back().path + "." + key;
  }

  YAML::Node Child(const char* key) {
    Frame& f = stack_.back();
    f.seen.insert(key);
    const YAML::Node& node = f.node;
    return node[key];
  }

  void CheckKeys() {
    const Frame& f = stack_.back();
    for (auto it = f.node.begin(); it != f.node.end(); ++it) {
      const std::string k = it->first.Scalar();
      if (!f.seen.count(k)) {
        Fail(it->first, f.path.empty() ? k : f.path + "." + k, "unknown field");
      }
    }
  }

  double AsDouble(const YAML::Node& n, const std::string& path) const {
    if (!n.IsScalar()) Fail(n, path, "expected a number");
    const std::string& s = n.Scalar();
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      Fail(n, path, "expected a number, got '" + s + "'");
    }
    return v;
  }

  VectorXd AsVector(const YAML::Node& n, const std::string& path) const {
    if (!n.IsSequence()) Fail(n, path, "expected a list of numbers");
    VectorXd v(static_cast<int>(n.size()));
    for (size_t i = 0; i < n.size(); ++i) {
      v(static_cast<int>(i)) = AsDouble(n[i], path + "[" + std::to_string(i) + "]");
    }
    return v;
  }

  [[noreturn]] void Fail(const YAML::Node& n, const std::string& path,
                         const std::string& msg) const {
    const int line = n.Mark().is_null() ? 0 : n.Mark().line + 1;
    throw ConfigError(source_, line, path, msg);
  }

  std::string source_;
  std::vector<Frame> stack_;
};

class Writer {
 public:
  static constexpr bool kReading = false;

  Writer() { out_ << YAML::BeginMap; }

  std::string Finish() {
    out_ << YAML::EndMap;
    return std::string(out_.c_str()) + "\n";
  }

  template <class F>
  void Section(const char* key, F&& body) {
    out_ << YAML::Key << key << YAML::Value << YAML::BeginMap;
    body();
    out_ << YAML::EndMap;
  }
  void Field(const char* key, double v) { out_ << YAML::Key << key << YAML::Value << Shortest(v); }
  void Field(const char* key, int v) { out_ << YAML::Key << key << YAML::Value << v; }
  void Field(const char* key, bool v) {
    out_ << YAML::Key << key << YAML::Value << (v ? "true" : "false");
  }
  void Field(const char* key, const VectorXd& v) {
    out_ << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (int i = 0; i < v.size(); ++i) out_ << Shortest(v(i));
    out_ << YAML::EndSeq;
  }
  void Field(const char* key, const Vector3d& v) { Field(key, VectorXd(v)); }
  template <class E>
  void Enum(const char* key, E& v, const std::vector<std::pair<std::string, E>>& names) {
    for (const auto& [name, value] : names) {
      if (value == v) out_ << YAML::Key << key << YAML::Value << name;
    }
  }
  template <class T, class F>
  void List(const char* key, std::vector<T>& items, F&& item) {
    out_ << YAML::Key << key << YAML::Value << YAML::BeginSeq;
    for (T& v : items) {
      out_ << YAML::BeginMap;
      item(v);
      out_ << YAML::EndMap;
    }
    out_ << YAML::EndSeq;
  }
  template <class T, class F>
  void Optional(const char* key, std::optional<T>& v, F&& item) {
    out_ << YAML::Key << key << YAML::Value;
    if (!v) {
      out_ << YAML::Null;
      return;
    }
    out_ << YAML::BeginMap;
    item(*v);
    out_ << YAML::EndMap;
  }
  [[noreturn]] void FailField(const char*, const std::string& msg) {
    throw std::logic_error(msg);
  }

 private:
  YAML::Emitter out_;
};

// Angles are stored in radians and written in degrees.
template <class V>
void Degrees(V& v, const char* key, double& radians) {
  double deg = radians / kDeg;
  v.Field(key, deg);
  if constexpr (V::kReading) radians = deg * kDeg;
}

template <class V>
void Weights(V& v, const char* key, c3::ConsensusWeights& w) {
  v.Section(key, [&] {
    v.Field("x", w.x);
    v.Field("lambda", w.lambda);
    v.Field("u", w.u);
  });
}

template <class V>
void Schema(V& v, ExperimentConfig& c) {
  scenario::ScenarioConfig& s = c.scenario;
  v.Section("physical", [&] {
    v.Field("gravity", s.gravity);
    v.Section("tray", [&] {
      v.Field("mass", s.tray.mass);
      v.Field("radius", s.tray.radius);
      v.Field("thickness", s.tray.thickness);
      v.Field("height", s.tray.height);
    });
    v.Section("end_effector", [&] {
      v.Field("mass", s.ee.mass);
      v.Field("radius", s.ee.radius);
      v.Field("thickness", s.ee.thickness);
    });
    v.List("supports", s.supports, [&](scenario::SupportSegment& seg) {
      v.Field("start", seg.start);
      v.Field("end", seg.end);
    });
    v.Optional("wall", s.wall, [&](scenario::WallParams& w) {
      v.Field("center", w.center);
      v.Field("half_extents", w.half_extents);
    });
  });

  v.Section("contacts", [&] {
    v.Field("end_effector_points", s.ee.num_contacts);
    v.Field("point_circle_fraction", s.ee.contact_circle_fraction);
    v.Field("sphere_radius", s.contact_sphere_radius);
    v.Section("model_mu", [&] {
      v.Field("tray_ee", s.model_mu.tray_ee);
      v.Field("tray_env", s.model_mu.tray_env);
    });
    v.Section("measured_mu", [&] {
      v.Field("tray_ee", s.measured_mu.tray_ee);
      v.Field("tray_env", s.measured_mu.tray_env);
    });
  });

  c3::C3Params& p = c.c3;
  v.Section("c3", [&] {
    v.Field("N", p.N);
    v.Field("dt", p.dt);
    v.Field("rho", p.rho);
    v.Field("admm_iters", p.admm_iters);
    v.Field("Q_q", p.q_q);
    v.Field("Q_v", p.q_v);
    v.Field("Q_f", p.q_f);
    v.Field("R", p.r);
    Weights(v, "G", p.g);
    Weights(v, "U", p.u_weights);
    v.Field("u_min", p.u_min);
    v.Field("u_max", p.u_max);
    v.Field("ee_min", p.ee_min);
    v.Field("ee_max", p.ee_max);
    v.Enum("qp_backend", p.qp_backend,
           {{"active_set", c3::QpBackend::kActiveSet}, {"admm", c3::QpBackend::kAdmm}});
    v.Section("projection", [&] {
      v.Field("max_nodes", p.projection.max_nodes);
      v.Field("time_limit", p.projection.time_limit);
      v.Field("complementarity_tol", p.projection.complementarity_tol);
      v.Field("threads", p.projection_threads);
    });
    v.Field("pin_initial_state", p.pin_initial_state);
    v.Field("consensus_warm_start", p.consensus_warm_start);
    v.Field("rescale_duals", p.rescale_duals);
  });

  osc::OscParams& o = c.osc;
  v.Section("osc", [&] {
    v.Field("kp", o.kp);
    v.Field("kd", o.kd);
    v.Field("force_weight", o.force_weight);
    v.Field("force_objective", o.force_objective);
    v.Field("position_weight", o.position_weight);
    v.Field("posture_weight", o.posture_weight);
    v.Field("posture_kp", o.posture_kp);
    v.Field("posture_kd", o.posture_kd);
    v.Field("posture_target", o.posture_target);
    v.Field("tool_axis_weight", o.tool_axis_weight);
  });

  harness::EpisodeOptions& e = c.episode;
  v.Section("task", [&] {
    v.Enum("kind", c.task,
           {{"tray", TaskKind::kTray}, {"wall", TaskKind::kWall}, {"custom", TaskKind::kCustom}});
    v.Field("success_radius", c.targets.success_radius);
    v.Field("time_limit", c.targets.time_limit);
    v.List("targets", c.targets.targets, [&](harness::Target& t) {
      v.Field("tray", t.tray);
      v.Field("ee", t.ee);
      v.Field("idle_time", t.idle_time);
    });
    v.Field("ee_start", e.ee_start);
    v.Field("perturbation", e.perturbation);
    v.Field("fine_dt", e.fine_dt);
    v.Field("measurement_rate", e.measurement_rate);
    v.Field("latency", e.latency.fixed_delay);
    v.Field("direct_kp", e.direct_kp);
    v.Field("direct_kd", e.direct_kd);
    v.Field("log_period", e.log_period);
    v.Section("wall", [&] {
      v.Field("initial_yaw", c.wall.initial_yaw);
      v.Field("gain", c.wall.gain);
      v.Field("wall_bias", c.wall.wall_bias);
      Degrees(v, "success_yaw_deg", c.wall.success_yaw);
      v.Field("time_limit", c.wall.time_limit);
    });
  });
}

void Check(const ExperimentConfig& c, const std::string& source) {
  auto fail = [&source](const std::string& field, const std::string& msg) {
    throw ConfigError(source, 0, field, msg);
  };
  if (const auto errs = scenario::Validate(c.scenario); !errs.empty()) fail("physical", errs[0]);
  if (const auto errs = c3::Validate(c.c3, scenario::kNumStates, scenario::kNumInputs);
      !errs.empty()) {
    fail("c3", errs[0]);
  }
  if (c.task != TaskKind::kWall) {
    if (const auto errs = harness::Validate(c.targets); !errs.empty()) fail("task", errs[0]);
  }
  if (c.task == TaskKind::kWall && !c.scenario.wall) fail("physical.wall", "wall task needs a wall");
  if (!(c.episode.fine_dt > 0.0 && c.episode.fine_dt <= 0.002)) {
    fail("task.fine_dt", "must lie in (0, 0.002]");
  }
  if (!(c.episode.measurement_rate > 0.0)) fail("task.measurement_rate", "must be positive");
  if (c.episode.latency.fixed_delay < 0.0) fail("task.latency", "must be non-negative");
  if (c.episode.perturbation < 0.0) fail("task.perturbation", "must be non-negative");
}

void Flatten(const YAML::Node& n, const std::string& path, std::map<std::string, std::string>& out) {
  if (n.IsMap()) {
    for (auto it = n.begin(); it != n.end(); ++it) {
      Flatten(it->second, path.empty() ? it->first.Scalar() : path + "." + it->first.Scalar(),
              out);
    }
  } else if (n.IsSequence()) {
    out[path + ".size"] = std::to_string(n.size());
    for (size_t i = 0; i < n.size(); ++i) Flatten(n[i], path + "[" + std::to_string(i) + "]", out);
  } else if (n.IsNull()) {
    out[path] = "null";
  } else {
    out[path] = n.Scalar();
  }
}

}  // namespace

ExperimentConfig ParseConfig(const std::string& text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(source, e.mark.is_null() ? 0 : e.mark.line + 1, "", e.msg);
  }
  if (!root.IsMap()) throw ConfigError(source, 1, "", "top level must be a mapping");

  // Fields left out take the defaults of the named task.
  ExperimentConfig c = ExperimentConfig::TrayRetrieval();
  if (const YAML::Node task = root["task"]; task && task.IsMap() && task["kind"] &&
                                             task["kind"].IsScalar() &&
                                             task["kind"].Scalar() == "wall") {
    c = ExperimentConfig::WallRotation();
  }
  Reader r(root, source);
  Schema(r, c);
  {
    // Unknown top-level sections.
    static const std::set<std::string> kSections = {"physical", "contacts", "c3", "osc", "task"};
    for (auto it = root.begin(); it != root.end(); ++it) {
      if (!kSections.count(it->first.Scalar())) {
        throw ConfigError(source, it->first.Mark().line + 1, it->first.Scalar(),
                          "unknown section");
      }
    }
  }
  Check(c, source);
  return c;
}

ExperimentConfig LoadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, 0, "", "cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseConfig(ss.str(), path);
}

std::string EmitConfig(const ExperimentConfig& cfg) {
  ExperimentConfig copy = cfg;
  Writer w;
  Schema(w, copy);
  return w.Finish();
}

std::vector<std::string> Diff(const ExperimentConfig& a, const ExperimentConfig& b) {
  std::map<std::string, std::string> fa, fb;
  Flatten(YAML::Load(EmitConfig(a)), "", fa);
  Flatten(YAML::Load(EmitConfig(b)), "", fb);
  std::vector<std::string> out;
  for (const auto& [k, va] : fa) {
    const auto it = fb.find(k);
    const std::string vb = it == fb.end() ? "<missing>" : it->second;
    if (va != vb) out.push_back(k + ": " + va + " != " + vb);
  }
  for (const auto& [k, vb] : fb) {
    if (!fa.count(k)) out.push_back(k + ": <missing> != " + vb);
  }
  return out;
}

}  // namespace config
}  // namespace onpalm
