#ifndef SPF_IO_HPP
#define SPF_IO_HPP

// JSON for waypoints, paths and scenarios; CSV for run logs and portraits.
// Doubles are written so that they read back bit-identical.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "spf/control.hpp"
#include "spf/curves.hpp"
#include "spf/errors.hpp"
#include "spf/frame_policy.hpp"
#include "spf/sim.hpp"

namespace spf::io {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Small readers with schema errors

namespace detail {

inline void require_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::invalid_config, where + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) throw Error(ErrorCode::invalid_config, where + ": unknown key '" + key + "'");
  }
}

inline double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw Error(ErrorCode::invalid_config, where + ": expected a number");
  return j.get<double>();
}

inline int integer(const json& j, const std::string& where) {
  if (!j.is_number_integer()) throw Error(ErrorCode::invalid_config, where + ": expected an integer");
  return j.get<int>();
}

inline bool boolean(const json& j, const std::string& where) {
  if (!j.is_boolean()) throw Error(ErrorCode::invalid_config, where + ": expected true or false");
  return j.get<bool>();
}

inline std::string string(const json& j, const std::string& where) {
  if (!j.is_string()) throw Error(ErrorCode::invalid_config, where + ": expected a string");
  return j.get<std::string>();
}

inline VectorXd vector(const json& j, const std::string& where) {
  if (!j.is_array()) throw Error(ErrorCode::invalid_config, where + ": expected an array of numbers");
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], where);
  return v;
}

// Rows of equal length.
inline MatrixXd matrix(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw Error(ErrorCode::invalid_config, where + ": expected an array of rows");
  const auto cols = j[0].is_array() ? j[0].size() : 0;
  MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const VectorXd row = vector(j[r], where);
    if (static_cast<std::size_t>(row.size()) != cols) throw Error(ErrorCode::invalid_config, where + ": ragged matrix");
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

inline json to_json(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline json to_json(const MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(to_json(VectorXd(m.row(r).transpose())));
  return a;
}

}  // namespace detail

inline json read_json_file(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::io, "cannot open '" + file + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::invalid_config, file + ": " + e.what());
  }
}

inline void write_text_file(const std::string& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write '" + file + "'");
  out << text;
  if (!out) throw Error(ErrorCode::io, "write to '" + file + "' failed");
}

// ---------------------------------------------------------------------------
// Frame policy

inline FramePolicy frame_policy_from_json(const json& j) {
  detail::require_keys(j, {"mode", "normal", "vectors"}, "frame");
  const std::string mode = detail::string(j.at("mode"), "frame.mode");
  if (mode == "frenet_serret") return FramePolicy::frenet_serret();
  if (mode == "planar2d") return FramePolicy::planar2d();
  if (mode == "planar") {
    return j.contains("normal") ? FramePolicy::planar(detail::vector(j["normal"], "frame.normal")) : FramePolicy::planar();
  }
  if (mode == "line") {
    std::vector<VectorXd> v;
    for (const auto& c : j.at("vectors")) v.push_back(detail::vector(c, "frame.vectors"));
    return FramePolicy::line(std::move(v));
  }
  throw Error(ErrorCode::invalid_config, "frame.mode: unknown mode '" + mode + "'");
}

inline json to_json(const FramePolicy& p) {
  switch (p.mode) {
    case FrameMode::frenet_serret: return {{"mode", "frenet_serret"}};
    case FrameMode::planar_fallback:
      if (p.fixed_vectors.empty()) return {{"mode", "planar2d"}};
      return {{"mode", "planar"}, {"normal", detail::to_json(p.fixed_vectors.front())}};
    case FrameMode::line_fallback: {
      json v = json::array();
      for (const auto& c : p.fixed_vectors) v.push_back(detail::to_json(c));
      return {{"mode", "line"}, {"vectors", v}};
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// Waypoints: {"closed": bool, "smoothness": int, "frame": {...}, "points": [[...], ...]}

struct WaypointSet {
  std::vector<VectorXd> points;
  bool closed = false;
  int smoothness = -1;
  FramePolicy frame;
};

inline WaypointSet waypoints_from_json(const json& j) {
  detail::require_keys(j, {"closed", "smoothness", "frame", "points"}, "waypoints");
  WaypointSet w;
  if (!j.contains("points") || !j["points"].is_array()) throw Error(ErrorCode::invalid_config, "waypoints.points missing");
  for (const auto& p : j["points"]) w.points.push_back(detail::vector(p, "waypoints.points"));
  if (j.contains("closed")) w.closed = detail::boolean(j["closed"], "waypoints.closed");
  if (j.contains("smoothness")) w.smoothness = detail::integer(j["smoothness"], "waypoints.smoothness");
  if (j.contains("frame")) w.frame = frame_policy_from_json(j["frame"]);
  return w;
}

inline SplinePath fit(const WaypointSet& w) {
  SplinePath path = fit_spline(w.points, w.closed, w.smoothness);
  path.set_frame_policy(w.frame);
  return path;
}

// ---------------------------------------------------------------------------
// Paths
//
// {"closed": bool, "frame": {...}, "segments": [seg, ...]} with seg either
// {"lambda_min", "lambda_max", "coefficients": rows p × (d+1)} or
// {"lambda_min", "lambda_max", "analytic": {"type": "ellipse"|"circle"|"helix"|"line", ...}}.

inline CurveSegment segment_from_json(const json& j, std::size_t k) {
  const std::string where = "segments[" + std::to_string(k) + "]";
  detail::require_keys(j, {"lambda_min", "lambda_max", "coefficients", "analytic"}, where);
  const double lo = detail::number(j.at("lambda_min"), where + ".lambda_min");
  const double hi = detail::number(j.at("lambda_max"), where + ".lambda_max");
  if (!(lo < hi)) throw Error(ErrorCode::invalid_config, where + ": need lambda_min < lambda_max");
  if (j.contains("coefficients")) return CurveSegment::polynomial(detail::matrix(j["coefficients"], where), lo, hi);
  if (!j.contains("analytic")) throw Error(ErrorCode::invalid_config, where + ": needs coefficients or analytic");
  const json& a = j["analytic"];
  detail::require_keys(a, {"type", "a", "b", "radius", "pitch", "center", "start", "direction"}, where + ".analytic");
  const std::string type = detail::string(a.at("type"), where + ".analytic.type");
  const auto num = [&](const char* key) { return detail::number(a.at(key), where + ".analytic." + key); };
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  if (a.contains("center")) {
    const VectorXd c = detail::vector(a["center"], where + ".analytic.center");
    if (c.size() != 2) throw Error(ErrorCode::invalid_config, where + ": center must be 2-D");
    center = c;
  }
  if (type == "ellipse") return ellipse_segment(num("a"), num("b"), lo, hi, center);
  if (type == "circle") return circle_segment(num("radius"), lo, hi, center);
  if (type == "helix") return helix_segment(num("radius"), num("pitch"), lo, hi);
  if (type == "line") {
    return line_segment(detail::vector(a.at("start"), where + ".start"), detail::vector(a.at("direction"), where + ".direction"),
                        lo, hi);
  }
  throw Error(ErrorCode::invalid_config, where + ": unknown analytic type '" + type + "'");
}

inline SplinePath path_from_json(const json& j) {
  detail::require_keys(j, {"closed", "frame", "segments"}, "path");
  if (!j.contains("segments") || !j["segments"].is_array()) throw Error(ErrorCode::invalid_config, "path.segments missing");
  std::vector<CurveSegment> segs;
  for (std::size_t k = 0; k < j["segments"].size(); ++k) segs.push_back(segment_from_json(j["segments"][k], k));
  const bool closed = j.contains("closed") && detail::boolean(j["closed"], "path.closed");
  return SplinePath(std::move(segs), closed, j.contains("frame") ? frame_policy_from_json(j["frame"]) : FramePolicy{});
}

// Only polynomial segments have a file form.
inline json to_json(const SplinePath& path) {
  json segs = json::array();
  for (int k = 0; k < path.size(); ++k) {
    const auto& s = path.segment(k);
    if (!s.is_polynomial()) throw Error(ErrorCode::invalid_config, "closed-form segments cannot be serialized", k);
    segs.push_back({{"lambda_min", s.lambda_min()}, {"lambda_max", s.lambda_max()}, {"coefficients", detail::to_json(s.coefficients())}});
  }
  return {{"closed", path.closed()}, {"frame", to_json(path.frame_policy())}, {"segments", segs}};
}

// A scenario's "path" entry: inline path, inline waypoints, or a file of either.
inline SplinePath path_spec_from_json(const json& j, const std::filesystem::path& base) {
  if (j.contains("file")) {
    detail::require_keys(j, {"file", "frame"}, "path");
    const auto file = base / detail::string(j["file"], "path.file");
    json loaded = read_json_file(file.string());
    if (j.contains("frame")) loaded["frame"] = j["frame"];
    return path_spec_from_json(loaded, file.parent_path());
  }
  if (j.contains("points")) return fit(waypoints_from_json(j));
  return path_from_json(j);
}

// ---------------------------------------------------------------------------
// Scenario

inline ReferenceProfile profile_from_json(const json& j, const std::string& where) {
  if (j.is_number()) return ReferenceProfile::constant(j.get<double>());
  detail::require_keys(j, {"times", "values"}, where);
  ReferenceProfile r;
  const VectorXd t = detail::vector(j.at("times"), where + ".times");
  const VectorXd v = detail::vector(j.at("values"), where + ".values");
  r.times.assign(t.data(), t.data() + t.size());
  r.values.assign(v.data(), v.data() + v.size());
  r.validate();
  return r;
}

inline ProjectionConfig projection_from_json(const json& j) {
  detail::require_keys(j, {"epsilon", "alpha0", "grow", "shrink", "max_iters", "init_quantization"}, "projection");
  ProjectionConfig c;
  if (j.contains("epsilon")) c.epsilon = detail::number(j["epsilon"], "projection.epsilon");
  if (j.contains("alpha0")) c.alpha0 = detail::number(j["alpha0"], "projection.alpha0");
  if (j.contains("grow")) c.grow = detail::number(j["grow"], "projection.grow");
  if (j.contains("shrink")) c.shrink = detail::number(j["shrink"], "projection.shrink");
  if (j.contains("max_iters")) c.max_iters = detail::integer(j["max_iters"], "projection.max_iters");
  if (j.contains("init_quantization")) c.init_quantization = detail::number(j["init_quantization"], "projection.init_quantization");
  c.validate();
  return c;
}

inline TangentialGains tangential_from_json(const json& j) {
  detail::require_keys(j, {"mode", "kp", "ki", "kd", "integral_bound", "eta1_ref", "eta2_ref"}, "tangential");
  TangentialGains g;
  if (j.contains("mode")) {
    const std::string m = detail::string(j["mode"], "tangential.mode");
    if (m == "velocity_pi") {
      g.mode = TangentialMode::velocity_pi;
    } else if (m == "position_pd") {
      g.mode = TangentialMode::position_pd;
    } else {
      throw Error(ErrorCode::invalid_config, "tangential.mode: unknown mode '" + m + "'");
    }
  }
  if (j.contains("kp")) g.kp = detail::number(j["kp"], "tangential.kp");
  if (j.contains("ki")) g.ki = detail::number(j["ki"], "tangential.ki");
  if (j.contains("kd")) g.kd = detail::number(j["kd"], "tangential.kd");
  if (j.contains("integral_bound")) g.integral_bound = detail::number(j["integral_bound"], "tangential.integral_bound");
  if (j.contains("eta1_ref")) g.eta1_ref = detail::number(j["eta1_ref"], "tangential.eta1_ref");
  if (j.contains("eta2_ref")) g.eta2_ref = profile_from_json(j["eta2_ref"], "tangential.eta2_ref");
  g.validate();
  return g;
}

inline TransversalGains transversal_from_json(const json& j) {
  detail::require_keys(j, {"mode", "kp", "kd", "k", "k0", "k2", "mu"}, "transversal");
  TransversalGains g;
  const std::string m = j.contains("mode") ? detail::string(j["mode"], "transversal.mode") : "pd";
  if (m == "pd") {
    g.mode = TransversalMode::pd;
    g.kp = detail::vector(j.at("kp"), "transversal.kp");
    g.kd = detail::vector(j.at("kd"), "transversal.kd");
  } else if (m == "robust") {
    g.mode = TransversalMode::robust;
    g.k = detail::matrix(j.at("k"), "transversal.k");
    g.k0 = detail::matrix(j.at("k0"), "transversal.k0");
    g.k2 = detail::matrix(j.at("k2"), "transversal.k2");
    if (j.contains("mu")) g.mu = detail::number(j["mu"], "transversal.mu");
  } else {
    throw Error(ErrorCode::invalid_config, "transversal.mode: unknown mode '" + m + "'");
  }
  return g;
}

inline Limits limits_from_json(const json& j) {
  detail::require_keys(j, {"xc_min", "xc_max", "u_min", "u_max"}, "limits");
  return {detail::vector(j.at("xc_min"), "limits.xc_min"), detail::vector(j.at("xc_max"), "limits.xc_max"),
          detail::vector(j.at("u_min"), "limits.u_min"), detail::vector(j.at("u_max"), "limits.u_max")};
}

inline ControllerConfig controller_from_json(const json& j) {
  detail::require_keys(j, {"dt", "saturate", "projection", "tangential", "transversal", "redundancy", "limits"}, "controller");
  ControllerConfig c;
  if (j.contains("dt")) c.dt = detail::number(j["dt"], "controller.dt");
  if (j.contains("saturate")) c.saturate = detail::boolean(j["saturate"], "controller.saturate");
  if (j.contains("projection")) c.projection = projection_from_json(j["projection"]);
  if (j.contains("tangential")) c.tangential = tangential_from_json(j["tangential"]);
  if (j.contains("transversal")) c.transversal = transversal_from_json(j["transversal"]);
  if (j.contains("redundancy")) {
    const json& r = j["redundancy"];
    detail::require_keys(r, {"w", "bias"}, "redundancy");
    if (r.contains("w")) c.redundancy.w = detail::matrix(r["w"], "redundancy.w");
    if (r.contains("bias")) {
      const std::string b = detail::string(r["bias"], "redundancy.bias");
      if (b == "joint_limit") {
        c.redundancy.bias = BiasMode::joint_limit;
      } else if (b == "zero") {
        c.redundancy.bias = BiasMode::zero;
      } else {
        throw Error(ErrorCode::invalid_config, "redundancy.bias: unknown mode '" + b + "'");
      }
    }
  }
  if (j.contains("limits")) c.limits = limits_from_json(j["limits"]);
  return c;
}

inline InitialCondition initial_from_json(const json& j) {
  detail::require_keys(j, {"mode", "xc", "xv", "k", "lambda", "normal_offset", "speed", "zeta1", "zeta2", "seed"}, "initial");
  InitialCondition ic;
  const std::string m = j.contains("mode") ? detail::string(j["mode"], "initial.mode") : "explicit";
  if (m == "explicit") {
    ic.mode = InitialCondition::Mode::explicit_state;
    ic.state.xc = detail::vector(j.at("xc"), "initial.xc");
    ic.state.xv = j.contains("xv") ? detail::vector(j["xv"], "initial.xv") : VectorXd::Zero(ic.state.xc.size()).eval();
    return ic;
  }
  if (m != "on_path") throw Error(ErrorCode::invalid_config, "initial.mode: unknown mode '" + m + "'");
  ic.mode = InitialCondition::Mode::on_path;
  if (j.contains("k")) ic.k = detail::integer(j["k"], "initial.k");
  if (j.contains("lambda")) ic.lambda = detail::number(j["lambda"], "initial.lambda");
  if (j.contains("normal_offset")) ic.normal_offset = detail::vector(j["normal_offset"], "initial.normal_offset");
  if (j.contains("speed")) ic.speed = detail::number(j["speed"], "initial.speed");
  if (j.contains("zeta1")) ic.zeta1 = detail::number(j["zeta1"], "initial.zeta1");
  if (j.contains("zeta2")) ic.zeta2 = detail::number(j["zeta2"], "initial.zeta2");
  if (j.contains("seed")) ic.seed = detail::vector(j["seed"], "initial.seed");
  return ic;
}

inline PortraitConfig portrait_from_json(const json& j) {
  detail::require_keys(j, {"k", "lambda", "seed", "zeta1_ref", "zeta1_min", "zeta1_max", "zeta2_min", "zeta2_max", "n1", "n2",
                           "duration", "substeps", "manifold_step", "max_manifold_length", "converged_radius", "threads"},
                       "portrait");
  PortraitConfig p;
  const auto num = [&](const char* key, double& out) {
    if (j.contains(key)) out = detail::number(j[key], std::string("portrait.") + key);
  };
  const auto integer = [&](const char* key, int& out) {
    if (j.contains(key)) out = detail::integer(j[key], std::string("portrait.") + key);
  };
  integer("k", p.k);
  num("lambda", p.lambda);
  if (j.contains("seed")) p.seed = detail::vector(j["seed"], "portrait.seed");
  num("zeta1_ref", p.zeta1_ref);
  num("zeta1_min", p.zeta1_min);
  num("zeta1_max", p.zeta1_max);
  num("zeta2_min", p.zeta2_min);
  num("zeta2_max", p.zeta2_max);
  integer("n1", p.n1);
  integer("n2", p.n2);
  num("duration", p.duration);
  integer("substeps", p.substeps);
  num("manifold_step", p.manifold_step);
  num("max_manifold_length", p.max_manifold_length);
  num("converged_radius", p.converged_radius);
  integer("threads", p.threads);
  if (p.n1 < 1 || p.n2 < 1) throw Error(ErrorCode::invalid_config, "portrait grid needs n1, n2 >= 1");
  return p;
}

struct ScenarioFile {
  Scenario scenario;
  std::optional<PortraitConfig> portrait;
};

inline ScenarioFile scenario_from_json(const json& j, const std::filesystem::path& base = ".") {
  detail::require_keys(j, {"name", "plant", "plant_params", "path", "initial", "controller", "duration", "substeps",
                           "measurement", "portrait", "notes"},
                       "scenario");
  ScenarioFile f;
  Scenario& s = f.scenario;
  if (j.contains("name")) s.name = detail::string(j["name"], "name");
  if (j.contains("plant")) s.plant = detail::string(j["plant"], "plant");
  if (j.contains("plant_params")) s.plant_params = detail::vector(j["plant_params"], "plant_params");
  if (!j.contains("path")) throw Error(ErrorCode::invalid_config, "scenario needs a path");
  s.path = std::make_shared<const SplinePath>(path_spec_from_json(j["path"], base));
  if (j.contains("initial")) s.initial = initial_from_json(j["initial"]);
  if (j.contains("controller")) s.controller = controller_from_json(j["controller"]);
  if (j.contains("duration")) s.duration = detail::number(j["duration"], "duration");
  if (j.contains("substeps")) s.substeps = detail::integer(j["substeps"], "substeps");
  if (j.contains("measurement")) {
    const json& m = j["measurement"];
    detail::require_keys(m, {"quantize", "resolution"}, "measurement");
    if (m.contains("quantize")) s.measurement.quantize = detail::boolean(m["quantize"], "measurement.quantize");
    if (m.contains("resolution")) s.measurement.resolution = detail::vector(m["resolution"], "measurement.resolution");
  }
  if (j.contains("portrait")) f.portrait = portrait_from_json(j["portrait"]);
  s.validate();
  return f;
}

inline ScenarioFile load_scenario(const std::string& file) {
  return scenario_from_json(read_json_file(file), std::filesystem::path(file).parent_path());
}

// "a.b.c=value": the key must already exist and keep its JSON type. Numbers
// are interchangeable here; integer fields are checked when the scenario is parsed.
inline void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw Error(ErrorCode::invalid_config, "override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  std::string pointer;
  std::stringstream ks(key);
  for (std::string part; std::getline(ks, part, '.');) pointer += "/" + part;
  const json::json_pointer ptr(pointer);
  if (!doc.contains(ptr)) throw Error(ErrorCode::invalid_config, "override key '" + key + "' is not in the scenario");
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;  // bare strings
  }
  const json& old = doc.at(ptr);
  const bool same = (old.is_number() && value.is_number()) || old.type() == value.type();
  if (!same) throw Error(ErrorCode::invalid_config, "override '" + key + "' changes the value's type");
  doc[ptr] = value;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string log_header(int n, int p, int zeta_dim) {
  std::ostringstream h;
  h << "t";
  for (int i = 0; i < n; ++i) h << ",xc" << i;
  for (int i = 0; i < n; ++i) h << ",xv" << i;
  for (int i = 0; i < n; ++i) h << ",u" << i;
  h << ",eta1,eta2";
  for (int j = 1; j < p; ++j) h << ",xi1_" << j << ",xi2_" << j;
  for (int i = 0; i < zeta_dim; ++i) h << ",zeta" << i;
  h << ",k_star,lambda_star,saturated,iterations,beta_condition\n";
  return h.str();
}

inline void write_log_csv(std::ostream& out, const RunLog& log) {
  if (log.rows.empty()) return;
  const auto& first = log.rows.front();
  out << log_header(static_cast<int>(first.x.xc.size()), static_cast<int>(first.z.xi1.size()) + 1,
                    static_cast<int>(first.z.zeta.size()));
  for (const auto& r : log.rows) {
    out << fmt17(r.t);
    for (Eigen::Index i = 0; i < r.x.xc.size(); ++i) out << ',' << fmt17(r.x.xc(i));
    for (Eigen::Index i = 0; i < r.x.xv.size(); ++i) out << ',' << fmt17(r.x.xv(i));
    for (Eigen::Index i = 0; i < r.u.size(); ++i) out << ',' << fmt17(r.u(i));
    out << ',' << fmt17(r.z.eta1) << ',' << fmt17(r.z.eta2);
    for (Eigen::Index j = 0; j < r.z.xi1.size(); ++j) out << ',' << fmt17(r.z.xi1(j)) << ',' << fmt17(r.z.xi2(j));
    for (Eigen::Index i = 0; i < r.z.zeta.size(); ++i) out << ',' << fmt17(r.z.zeta(i));
    out << ',' << r.z.k_star << ',' << fmt17(r.z.lambda_star) << ',' << (r.saturated ? 1 : 0) << ',' << r.iterations << ','
        << fmt17(r.beta_condition) << '\n';
  }
}

inline json summary_json(const RunLog& log) {
  const auto& s = log.summary;
  json j = {{"rows", log.rows.size()},
            {"max_xi1", s.max_xi1},
            {"final_xi1", s.final_xi1},
            {"max_xi1_tail", s.max_xi1_tail},
            {"eta2_error_tail", s.eta2_error_tail},
            {"eta2_ref_final", s.eta2_ref_final},
            {"saturation_events", s.saturation_events},
            {"max_projection_iterations", s.max_iterations},
            {"zeta_min", detail::to_json(s.zeta_min)},
            {"zeta_max", detail::to_json(s.zeta_max)},
            {"xc_min", detail::to_json(s.xc_min)},
            {"xc_max", detail::to_json(s.xc_max)}};
  if (log.failure) {
    j["failure"] = *log.failure;
    j["failure_time"] = log.failure_time;
  }
  return j;
}

inline void write_portrait_csv(std::ostream& out, const PhasePortrait& pp) {
  out << "flow,zeta1_0,zeta2_0,t,zeta1,zeta2\n";
  for (std::size_t f = 0; f < pp.flows.size(); ++f) {
    const auto& fl = pp.flows[f];
    for (std::size_t i = 0; i < fl.t.size(); ++i) {
      out << f << ',' << fmt17(fl.zeta1_0) << ',' << fmt17(fl.zeta2_0) << ',' << fmt17(fl.t[i]) << ',' << fmt17(fl.zeta1[i]) << ','
          << fmt17(fl.zeta2[i]) << '\n';
    }
  }
}

inline json portrait_json(const PhasePortrait& pp) {
  json eq = json::array();
  for (const auto& e : pp.equilibria) {
    eq.push_back({{"q", detail::to_json(e.q)},
                  {"zeta", {e.zeta(0), e.zeta(1)}},
                  {"eigenvalues", {{e.eig0.real(), e.eig0.imag()}, {e.eig1.real(), e.eig1.imag()}}},
                  {"stable", e.stable},
                  {"jacobian_sigma_ratio", e.jacobian_sigma_ratio},
                  {"chart_slope", e.chart_slope}});
  }
  json flows = json::array();
  for (const auto& fl : pp.flows) {
    json f = {{"zeta1_0", fl.zeta1_0}, {"zeta2_0", fl.zeta2_0}, {"feasible", fl.feasible}, {"failed", fl.failed},
              {"converged_to_reference", fl.converged_to_reference}};
    if (!fl.message.empty()) f["message"] = fl.message;
    flows.push_back(f);
  }
  return {{"q_ref", detail::to_json(pp.q_ref)},
          {"manifold_samples", pp.manifold.size()},
          {"manifold_closed", pp.manifold_closed},
          {"equilibria", eq},
          {"flows", flows}};
}

}  // namespace spf::io

#endif  // SPF_IO_HPP
