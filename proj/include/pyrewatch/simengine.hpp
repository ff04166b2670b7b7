#pragma once
// Deterministic tick loop. Each tick runs, in order:
//   1 operator commands, 2 drone sweep and sensors, 3 radio,
//   4 base station, 5 retriever, 6 console events.
// Everything observable is written to an NDJSON event log; the console stream
// is the subset of records with src "gateway".

#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pyrewatch/basestation.hpp"
#include "pyrewatch/detect.hpp"
#include "pyrewatch/messages.hpp"
#include "pyrewatch/radio.hpp"
#include "pyrewatch/report.hpp"
#include "pyrewatch/retriever.hpp"
#include "pyrewatch/sensors.hpp"
#include "pyrewatch/turbidity.hpp"
#include "pyrewatch/world.hpp"

namespace pyrewatch::sim {

using nlohmann::json;

inline constexpr int kProtocolVersion = 1;

struct Area {
  double x0_m = -20, y0_m = -20, x1_m = 20, y1_m = 20;
};

struct DroneConfig {
  Area area;
  double alt_m = 10.0;
  double speed_mps = 2.0;
  int sensor_period_ticks = 10;
  double fov_deg = 60.0;
  double gps_sigma_m = kGpsSigmaM;
  int hot_threshold_dc = 600;  // thermal pixels above this count as hot
};

struct RetrieverConfig {
  LocalPoint start;
  double heading_deg = 0.0;
  retriever::TankModel tank;
  double gps_sigma_m = kGpsSigmaM;
  int status_period_ticks = 50;
};

struct TurbidityInput {
  std::string csv;  // resolved path
  std::string ref_sample;
  double threshold = turbidity::kDefaultThreshold;
};

struct ScriptedCommand {
  std::int64_t tick = 0;
  json command;
};

struct Scenario {
  std::string name = "unnamed";
  std::uint64_t seed = 0;
  int dt_ms = 100;
  std::int64_t max_ticks = 20'000;
  WorldSnapshot world;
  DroneConfig drone;
  RetrieverConfig retriever;
  radio::ChannelModel channel;
  DetectorConfig detector;
  base::DispatchPolicy policy;
  std::optional<TurbidityInput> turbidity;
  std::vector<ScriptedCommand> operator_commands;

  double dt_s() const noexcept { return dt_ms / 1000.0; }
  std::int64_t snapshot_period_ticks() const noexcept { return std::max(1, 1000 / dt_ms); }
};

// ---------------------------------------------------------------------------
// Strict scenario parsing. Every problem is collected with a JSON path and
// reported together.

namespace detail {

class Problems {
 public:
  void add(const std::string& path, const std::string& what) { list_.push_back(path + ": " + what); }
  bool empty() const noexcept { return list_.empty(); }
  const std::vector<std::string>& list() const noexcept { return list_; }

 private:
  std::vector<std::string> list_;
};

inline std::string fmt_num(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

class Fields {
 public:
  Fields(const json& j, std::string path, Problems& p) : j_(j), path_(std::move(path)), p_(p) {
    ok_ = j.is_object();
    if (!ok_) p_.add(path_, "expected an object");
  }
  Fields(const Fields&) = delete;
  Fields& operator=(const Fields&) = delete;
  ~Fields() {
    if (!ok_) return;
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) p_.add(at(k), "unknown field");
    }
  }

  std::string at(std::string_view key) const { return path_ + "." + std::string(key); }

  const json* raw(std::string_view key, bool required = false) {
    seen_.insert(std::string(key));
    if (!ok_) return nullptr;
    const auto it = j_.find(key);
    if (it == j_.end()) {
      if (required) p_.add(at(key), "is required");
      return nullptr;
    }
    return &*it;
  }

  double number(std::string_view key, double def, double lo = -std::numeric_limits<double>::infinity(),
                double hi = std::numeric_limits<double>::infinity(), bool required = false) {
    const json* v = raw(key, required);
    if (!v) return def;
    if (!v->is_number()) {
      p_.add(at(key), "expected a number");
      return def;
    }
    const double x = v->get<double>();
    if (!(x >= lo && x <= hi)) {
      p_.add(at(key), "must be in [" + fmt_num(lo) + ", " + fmt_num(hi) + "]");
      return def;
    }
    return x;
  }

  std::int64_t integer(std::string_view key, std::int64_t def, std::int64_t lo, std::int64_t hi,
                       bool required = false) {
    const json* v = raw(key, required);
    if (!v) return def;
    if (!v->is_number_integer()) {
      p_.add(at(key), "expected an integer");
      return def;
    }
    if (v->is_number_unsigned() && v->get<std::uint64_t>() > static_cast<std::uint64_t>(hi)) {
      p_.add(at(key), "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
      return def;
    }
    const auto x = v->get<std::int64_t>();
    if (x < lo || x > hi) {
      p_.add(at(key), "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
      return def;
    }
    return x;
  }

  std::string text(std::string_view key, std::string def, bool required = false) {
    const json* v = raw(key, required);
    if (!v) return def;
    if (!v->is_string()) {
      p_.add(at(key), "expected a string");
      return def;
    }
    return v->get<std::string>();
  }

  std::vector<std::string> strings(std::string_view key) {
    const json* v = raw(key);
    std::vector<std::string> out;
    if (!v) return out;
    if (!v->is_array()) {
      p_.add(at(key), "expected an array of strings");
      return out;
    }
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_string()) {
        p_.add(at(key) + "[" + std::to_string(i) + "]", "expected a string");
        continue;
      }
      out.push_back((*v)[i].get<std::string>());
    }
    return out;
  }

  const json* array(std::string_view key) {
    const json* v = raw(key);
    if (v && !v->is_array()) {
      p_.add(at(key), "expected an array");
      return nullptr;
    }
    return v;
  }

  Problems& problems() noexcept { return p_; }

 private:
  const json& j_;
  std::string path_;
  Problems& p_;
  bool ok_ = false;
  std::set<std::string> seen_;
};

inline const json& empty_object() {
  static const json e = json::object();
  return e;
}

template <class Parse>
void with_object(Fields& parent, std::string_view key, bool required, Parse&& parse) {
  const json* v = parent.raw(key, required);
  Fields f(v ? *v : empty_object(), parent.at(key), parent.problems());
  parse(f);
}

inline SmokeField parse_smoke(Fields& f) {
  const double cell = f.number("cell_m", 10.0, 1e-3, 1e4);
  const double ox = f.number("origin_x_m", -50.0);
  const double oy = f.number("origin_y_m", -50.0);
  if (const json* rows = f.array("rows")) {
    std::vector<std::vector<double>> grid;
    bool ok = !rows->empty();
    for (std::size_t r = 0; r < rows->size() && ok; ++r) {
      const json& row = (*rows)[r];
      if (!row.is_array() || row.empty() || (!grid.empty() && row.size() != grid.front().size())) {
        f.problems().add(f.at("rows") + "[" + std::to_string(r) + "]",
                         "rows must be nonempty arrays of equal length");
        ok = false;
        break;
      }
      std::vector<double> values;
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (!row[c].is_number() || !(row[c].get<double>() >= 0.0)) {
          f.problems().add(f.at("rows") + "[" + std::to_string(r) + "][" + std::to_string(c) + "]",
                           "density must be a number >= 0");
          ok = false;
          break;
        }
        values.push_back(row[c].get<double>());
      }
      grid.push_back(std::move(values));
    }
    for (auto k : {"rows_n", "cols_n", "fill"}) {
      if (f.raw(k)) f.problems().add(f.at(k), "not allowed together with rows");
    }
    if (ok) return SmokeField::from_rows(grid, cell, ox, oy);
    return SmokeField(1, 1, cell, ox, oy);
  }
  const auto rows_n = f.integer("rows_n", 10, 1, 4096);
  const auto cols_n = f.integer("cols_n", 10, 1, 4096);
  const double fill = f.number("fill", 0.0, 0.0);
  return SmokeField(static_cast<std::size_t>(rows_n), static_cast<std::size_t>(cols_n), cell, ox, oy, fill);
}

inline json strip(const json& j, std::initializer_list<const char*> keys) {
  json out = j;
  for (auto k : keys) out.erase(k);
  return out;
}

}  // namespace detail

inline Scenario parse_scenario(const json& doc, const std::filesystem::path& base_dir = {}) {
  using detail::Fields;
  detail::Problems problems;
  Scenario sc;
  {
    Fields f(doc, "$", problems);
    sc.name = f.text("name", sc.name);
    sc.seed = static_cast<std::uint64_t>(
        f.integer("seed", 0, 0, std::numeric_limits<std::int64_t>::max(), true));
    sc.dt_ms = static_cast<int>(f.integer("dt_ms", 100, 1, 10'000));
    sc.max_ticks = f.integer("max_ticks", sc.max_ticks, 1, 10'000'000);
    sc.world.bounds_m = f.number("bounds_m", kDefaultBoundsM, 1.0, 1e6);
    sc.world.ambient_c = f.number("ambient_c", kDefaultAmbientC, -40.0, 60.0);

    detail::with_object(f, "origin", true, [&](Fields& o) {
      const double lat = o.number("lat_deg", 0.0, -89.0, 89.0, true);
      const double lon = o.number("lon_deg", 0.0, -180.0, 180.0, true);
      sc.world.origin = GeoFix::from_degrees(lat, lon);
    });

    if (f.raw("smoke")) {
      detail::with_object(f, "smoke", false, [&](Fields& s) {
        try {
          sc.world.smoke = detail::parse_smoke(s);
        } catch (const Error& e) {
          problems.add(f.at("smoke"), e.what());
        }
      });
    } else {
      sc.world.smoke = SmokeField(1, 1, 1.0, 0.0, 0.0, 0.0);
    }

    if (const json* hs = f.array("heat_sources")) {
      for (std::size_t i = 0; i < hs->size(); ++i) {
        Fields h((*hs)[i], f.at("heat_sources") + "[" + std::to_string(i) + "]", problems);
        HeatSource src;
        src.position = {h.number("x_m", 0.0, -1e6, 1e6, true), h.number("y_m", 0.0, -1e6, 1e6, true),
                        h.number("z_m", 0.0, 0.0, 1e4)};
        src.temp_c = h.number("temp_c", 0.0, -40.0, 1500.0, true);
        src.radius_m = h.number("radius_m", 1.0, 1e-3, 1e3);
        sc.world.heat_sources.push_back(src);
      }
    }

    if (const json* es = f.array("entities")) {
      std::set<int> ids;
      for (std::size_t i = 0; i < es->size(); ++i) {
        const std::string path = f.at("entities") + "[" + std::to_string(i) + "]";
        Fields e((*es)[i], path, problems);
        Entity ent;
        ent.id = static_cast<int>(e.integer("id", 0, 1, 254, true));
        if (!ids.insert(ent.id).second) problems.add(path + ".id", "duplicate entity id");
        const std::string kind = e.text("kind", "Target");
        const auto k = parse_entity_kind(kind);
        if (!k || !is_physical(*k)) {
          problems.add(path + ".kind", "must be Target or Obstacle");
        } else {
          ent.kind = *k;
        }
        ent.label = e.text("label", "", true);
        const auto pv = parse_pose_view(e.text("pose_view", "None"));
        if (!pv) {
          problems.add(path + ".pose_view", "must be Front, Side or None");
        } else {
          ent.pose_view = *pv;
        }
        ent.position = {e.number("x_m", 0.0, -1e6, 1e6, true), e.number("y_m", 0.0, -1e6, 1e6, true),
                        e.number("z_m", 0.0, 0.0, 1e3)};
        ent.radius_m = e.number("radius_m", 0.3, 0.01, 100.0);
        ent.mass_g = static_cast<int>(e.integer("mass_g", 500, 0, 1'000'000));
        sc.world.entities.push_back(ent);
      }
    }

    detail::with_object(f, "drone", false, [&](Fields& d) {
      detail::with_object(d, "area", false, [&](Fields& a) {
        sc.drone.area = {a.number("x0_m", -20.0), a.number("y0_m", -20.0), a.number("x1_m", 20.0),
                         a.number("y1_m", 20.0)};
        if (!(sc.drone.area.x1_m >= sc.drone.area.x0_m && sc.drone.area.y1_m >= sc.drone.area.y0_m)) {
          problems.add(d.at("area"), "x1_m/y1_m must not be below x0_m/y0_m");
        }
      });
      sc.drone.alt_m = d.number("alt_m", sc.drone.alt_m, 0.5, 500.0);
      sc.drone.speed_mps = d.number("speed_mps", sc.drone.speed_mps, 0.0, 50.0);
      sc.drone.sensor_period_ticks = static_cast<int>(d.integer("sensor_period_ticks", 10, 1, 100'000));
      sc.drone.fov_deg = d.number("fov_deg", sc.drone.fov_deg, 1.0, 170.0);
      sc.drone.gps_sigma_m = d.number("gps_sigma_m", sc.drone.gps_sigma_m, 0.0, 100.0);
    });

    detail::with_object(f, "retriever", false, [&](Fields& r) {
      auto& rc = sc.retriever;
      rc.start = {r.number("x_m", 0.0, -1e6, 1e6), r.number("y_m", 0.0, -1e6, 1e6), 0.0};
      rc.heading_deg = r.number("heading_deg", 0.0, -360.0, 360.0);
      rc.tank.drive_v = r.number("drive_v", rc.tank.drive_v, 0.0, 8.4);
      rc.tank.load_g = static_cast<int>(r.integer("load_g", 0, 0, retriever::kMaxLoadG));
      rc.tank.v_max_mps = r.number("v_max_mps", rc.tank.v_max_mps, 0.0, 10.0);
      rc.tank.stall_v = r.number("stall_v", rc.tank.stall_v, 0.0, 8.4);
      rc.tank.full_v = r.number("full_v", rc.tank.full_v, 0.0, 8.4);
      rc.tank.load_derate = r.number("load_derate", rc.tank.load_derate, 0.0, 1.0);
      rc.gps_sigma_m = r.number("gps_sigma_m", rc.gps_sigma_m, 0.0, 100.0);
      rc.status_period_ticks = static_cast<int>(r.integer("status_period_ticks", 50, 1, 100'000));
      try {
        rc.tank.validate();
      } catch (const Error& e) {
        problems.add(f.at("retriever"), e.what());
      }
    });

    detail::with_object(f, "channel", false, [&](Fields& c) {
      sc.channel.loss_prob = c.number("loss_prob", 0.0, 0.0, 1.0);
      sc.channel.corrupt_prob = c.number("corrupt_prob", 0.0, 0.0, 1.0);
      sc.channel.latency_ticks = static_cast<int>(c.integer("latency_ticks", 1, 0, 1000));
    });

    detail::with_object(f, "detector", false, [&](Fields& d) {
      auto& dc = sc.detector;
      dc.conf_low = d.number("conf_low", dc.conf_low, 0.0, 1.0);
      dc.conf_high = d.number("conf_high", dc.conf_high, 0.0, 1.0);
      dc.fp_rate = d.number("fp_rate", dc.fp_rate, 0.0, 1.0);
      dc.labels = d.strings("labels");
      if (const json* rules = d.array("confusion_rules")) {
        for (std::size_t i = 0; i < rules->size(); ++i) {
          const std::string path = d.at("confusion_rules") + "[" + std::to_string(i) + "]";
          Fields r((*rules)[i], path, problems);
          ConfusionRule rule;
          rule.true_label = r.text("true_label", "", true);
          const auto pv = parse_pose_view(r.text("pose_view", "None"));
          if (!pv) problems.add(path + ".pose_view", "must be Front, Side or None");
          rule.pose_view = pv.value_or(PoseView::None);
          rule.confused_as = r.text("confused_as", "", true);
          rule.prob = r.number("prob", 0.0, 0.0, 1.0, true);
          dc.confusion_rules.push_back(rule);
        }
      }
      if (dc.conf_low > dc.conf_high) problems.add(f.at("detector"), "conf_low must not exceed conf_high");
    });

    detail::with_object(f, "policy", false, [&](Fields& p) {
      const auto mode = base::parse_policy_mode(p.text("mode", "Scripted"));
      if (!mode) problems.add(f.at("policy") + ".mode", "must be Scripted or Human");
      sc.policy.mode = mode.value_or(base::PolicyMode::Scripted);
      sc.policy.min_confidence = p.number("min_confidence", 0.6, 0.0, 1.0);
      const auto gate = parse_smoke_class(p.text("gas_gate", "ThickSmoke"));
      if (!gate) problems.add(f.at("policy") + ".gas_gate", "must be Normal, Elevated or ThickSmoke");
      sc.policy.gas_gate = gate.value_or(SmokeClass::ThickSmoke);
      sc.policy.target_labels = p.strings("target_labels");
    });

    if (f.raw("turbidity")) {
      detail::with_object(f, "turbidity", false, [&](Fields& t) {
        TurbidityInput ti;
        const std::string csv = t.text("csv", "", true);
        ti.csv = csv.empty() || base_dir.empty() ? csv : (base_dir / csv).lexically_normal().string();
        ti.ref_sample = t.text("ref_sample", "", true);
        ti.threshold = t.number("threshold", ti.threshold, 0.0, 100.0);
        sc.turbidity = ti;
      });
    }

    if (const json* ops = f.array("operator")) {
      for (std::size_t i = 0; i < ops->size(); ++i) {
        const std::string path = f.at("operator") + "[" + std::to_string(i) + "]";
        Fields o((*ops)[i], path, problems);
        ScriptedCommand c;
        c.tick = o.integer("tick", 0, 0, 10'000'000, true);
        const json* cmd = o.raw("command", true);
        if (cmd) {
          const std::string type = cmd->is_object() ? cmd->value("type", "") : "";
          if (type != "dispatch" && type != "reject" && type != "set_policy" && type != "snapshot") {
            problems.add(path + ".command.type", "must be dispatch, reject, set_policy or snapshot");
          }
          c.command = *cmd;
        }
        sc.operator_commands.push_back(std::move(c));
      }
      std::stable_sort(sc.operator_commands.begin(), sc.operator_commands.end(),
                       [](const ScriptedCommand& a, const ScriptedCommand& b) { return a.tick < b.tick; });
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid scenario";
    for (const auto& p : problems.list()) msg += "\n  " + p;
    throw Error(ErrorCode::Config, msg);
  }
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Config, "cannot open scenario " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Config, path + ": " + e.what());
  }
  return parse_scenario(doc, std::filesystem::path(path).parent_path());
}

// ---------------------------------------------------------------------------
// Drone sweep

inline double footprint_width_m(double alt_m, double fov_deg) {
  return 2.0 * alt_m * std::tan(fov_deg * std::numbers::pi / 360.0);
}

// North-south rows stepping east, spaced at 0.8 of the camera footprint.
inline std::vector<LocalPoint> lawnmower(const Area& a, double alt_m, double fov_deg) {
  const double spacing = 0.8 * footprint_width_m(alt_m, fov_deg);
  std::vector<double> xs;
  for (double x = a.x0_m; x < a.x1_m - 1e-9; x += spacing) xs.push_back(x);
  xs.push_back(a.x1_m);
  std::vector<LocalPoint> wps;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const bool up = k % 2 == 0;
    wps.push_back({xs[k], up ? a.y0_m : a.y1_m, alt_m});
    wps.push_back({xs[k], up ? a.y1_m : a.y0_m, alt_m});
  }
  return wps;
}

class DroneSweep {
 public:
  DroneSweep(std::vector<LocalPoint> waypoints, double speed_mps)
      : wps_(std::move(waypoints)), speed_(speed_mps), pos_(wps_.front()) {}

  const LocalPoint& position() const noexcept { return pos_; }
  double heading_rad() const noexcept { return heading_; }

  // Follows the waypoints back and forth.
  void advance(double dt) {
    double budget = speed_ * dt;
    while (budget > 0.0 && wps_.size() > 1) {
      const LocalPoint& goal = wps_[next_];
      const double d = horizontal_distance(pos_, goal);
      if (d > 0.0) heading_ = std::atan2(goal.y_m - pos_.y_m, goal.x_m - pos_.x_m);
      if (d <= budget) {
        pos_ = goal;
        budget -= d;
        if (next_ + 1 == wps_.size()) dir_ = -1;
        if (next_ == 0) dir_ = 1;
        next_ = static_cast<std::size_t>(static_cast<long>(next_) + dir_);
      } else {
        pos_.x_m += (goal.x_m - pos_.x_m) * budget / d;
        pos_.y_m += (goal.y_m - pos_.y_m) * budget / d;
        budget = 0.0;
      }
    }
  }

 private:
  std::vector<LocalPoint> wps_;
  double speed_;
  LocalPoint pos_;
  std::size_t next_ = 1;
  int dir_ = 1;
  double heading_ = 0.0;
};

// ---------------------------------------------------------------------------
// Engine

enum class Outcome { Running, TargetRetrieved, Timeout, Fault };

inline std::string_view to_string(Outcome o) noexcept {
  switch (o) {
    case Outcome::Running: return "Running";
    case Outcome::TargetRetrieved: return "TargetRetrieved";
    case Outcome::Timeout: return "Timeout";
    case Outcome::Fault: return "Fault";
  }
  return "Running";
}

/// FNV-1a, 64 bit.
class Fnv1a {
 public:
  void update(std::string_view s) noexcept {
    for (unsigned char c : s) {
      h_ ^= c;
      h_ *= 0x100000001b3ull;
    }
  }
  std::uint64_t value() const noexcept { return h_; }
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h_));
    return buf;
  }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ull;
};

struct RunSummary {
  Outcome outcome = Outcome::Running;
  std::int64_t ticks = 0;
  int dispatch_orders = 0;
  int candidates = 0;
  std::optional<int> retrieved_entity;
  retriever::FaultReason fault = retriever::FaultReason::None;
  // Measured against ground truth when the retriever entered FineApproach.
  std::optional<double> fine_entry_estimate_m;  // what the guidance itself saw
  std::optional<double> fine_entry_to_order_m;
  std::optional<double> fine_entry_to_target_m;
  // Beam-axis offset and standoff from the target surface on entering Grasp.
  std::optional<double> grasp_lateral_mm;
  std::optional<double> grasp_standoff_mm;
  std::uint64_t frames_sent = 0;
  std::size_t log_records = 0;
  std::string log_hash;

  json to_json() const {
    auto opt = [](const auto& v) { return v ? json(*v) : json(nullptr); };
    return {{"outcome", to_string(outcome)},
            {"ticks", ticks},
            {"dispatch_orders", dispatch_orders},
            {"candidates", candidates},
            {"retrieved_entity", opt(retrieved_entity)},
            {"fault", retriever::to_string(fault)},
            {"fine_entry_estimate_m", opt(fine_entry_estimate_m)},
            {"fine_entry_to_order_m", opt(fine_entry_to_order_m)},
            {"fine_entry_to_target_m", opt(fine_entry_to_target_m)},
            {"grasp_lateral_mm", opt(grasp_lateral_mm)},
            {"grasp_standoff_mm", opt(grasp_standoff_mm)},
            {"frames_sent", frames_sent},
            {"log_records", log_records},
            {"log_hash", log_hash}};
  }
};

class Engine {
 public:
  using LineSink = std::function<void(const std::string&)>;

  explicit Engine(Scenario sc)
      : sc_(std::move(sc)),
        world_(sc_.world),
        sweep_(lawnmower(sc_.drone.area, sc_.drone.alt_m, sc_.drone.fov_deg), sc_.drone.speed_mps),
        base_(make_base_config(sc_)),
        drone_ep_(base::kDroneId),
        base_drone_ep_(base::kBaseId),
        base_ret_ep_(base::kBaseId),
        ret_ep_(base::kRetrieverId),
        d2b_(channel(0xd2b)),
        b2d_(channel(0xb2d)),
        b2r_(channel(0xb23)),
        r2b_(channel(0x32b)) {
    guidance_.dt_s = sc_.dt_s();
    truth_ = Pose2D{sc_.retriever.start, sc_.retriever.heading_deg * std::numbers::pi / 180.0};
    state_.pose = truth_;
    state_.home = local_to_geo(sc_.retriever.start, world_.origin);
    for (const auto& c : sc_.operator_commands) scripted_.push_back(c);
  }

  const Scenario& scenario() const noexcept { return sc_; }
  std::int64_t tick() const noexcept { return tick_; }
  bool finished() const noexcept { return outcome_ != Outcome::Running; }
  bool paused() const noexcept { return paused_; }
  const base::BaseStation& base_station() const noexcept { return base_; }
  const retriever::RetrieverState& retriever_state() const noexcept { return state_; }
  const Pose2D& retriever_truth() const noexcept { return truth_; }
  const WorldSnapshot& world() const noexcept { return world_; }

  // Every log line as it is produced, and every console event line.
  void on_log(LineSink sink) { log_sink_ = std::move(sink); }
  void on_event(LineSink sink) { event_sink_ = std::move(sink); }

  // Live operator command; applied at the start of the next tick in arrival order.
  void submit(json command) { pending_.push_back(std::move(command)); }

  // Runs one tick. Returns false when nothing happened (paused or finished).
  bool step() {
    if (finished()) return false;
    if (paused_) {
      const bool resume = std::any_of(pending_.begin(), pending_.end(),
                                      [](const json& c) { return c.is_object() && c.value("type", "") == "resume"; });
      if (!resume) return false;
    }
    const std::int64_t t = tick_;
    if (t == 0) emit(make_hello());
    phase_commands(t);
    phase_drone(t);
    phase_radio(t);
    phase_base(t);
    phase_retriever(t);
    phase_events(t);
    ++tick_;
    return true;
  }

  RunSummary summary() const {
    RunSummary s = summary_;
    s.outcome = outcome_;
    s.ticks = tick_;
    s.dispatch_orders = base_.dispatch_count();
    s.candidates = static_cast<int>(base_.candidates().size());
    s.fault = state_.fault;
    s.frames_sent = d2b_.frames_sent() + b2d_.frames_sent() + b2r_.frames_sent() + r2b_.frames_sent();
    s.log_records = records_;
    s.log_hash = hash_.hex();
    return s;
  }

 private:
  static base::BaseConfig make_base_config(const Scenario& sc) {
    base::BaseConfig c;
    c.origin = sc.world.origin;
    c.policy = sc.policy;
    c.detector = sc.detector;
    c.detector.seed = mix_seed(sc.seed, {0xde7});
    c.fov_deg = sc.drone.fov_deg;
    for (const auto& e : sc.world.entities) c.catalog[e.id] = EntityTag{e.id, e.label, e.pose_view};
    return c;
  }

  radio::Channel channel(std::uint64_t tag) const {
    radio::ChannelModel m = sc_.channel;
    m.seed = mix_seed(sc_.seed, {tag});
    return radio::Channel(m);
  }

  // ------------------------------------------------------------------ output

  void record(std::int64_t t, int phase, std::string_view src, std::string_view kind, json data) {
    round_floats(data);
    const json rec{{"tick", t}, {"phase", phase}, {"src", src}, {"kind", kind}, {"data", std::move(data)}};
    const std::string line = rec.dump();
    hash_.update(line);
    hash_.update("\n");
    ++records_;
    if (log_sink_) log_sink_(line);
  }

  void emit(json event) { events_.push_back(std::move(event)); }

  json make_hello() const {
    const auto& a = sc_.drone.area;
    return base::make_event("hello", 0,
                            {{"protocol", kProtocolVersion},
                             {"scenario", sc_.name},
                             {"dt_ms", sc_.dt_ms},
                             {"origin", {{"lat_e7", world_.origin.lat_e7}, {"lon_e7", world_.origin.lon_e7}}},
                             {"bounds_m", world_.bounds_m},
                             {"area", {{"x0_m", a.x0_m}, {"y0_m", a.y0_m}, {"x1_m", a.x1_m}, {"y1_m", a.y1_m}}},
                             {"home", {{"x_m", sc_.retriever.start.x_m}, {"y_m", sc_.retriever.start.y_m}}},
                             {"policy", base_.policy_json()}});
  }

  json snapshot(std::int64_t t) const {
    json d = base_.snapshot_data();
    d["paused"] = paused_;
    return base::make_event("snapshot", t, std::move(d));
  }

  // ------------------------------------------------------------------ phase 1

  void phase_commands(std::int64_t t) {
    std::vector<json> batch;
    while (!scripted_.empty() && scripted_.front().tick <= t) {
      batch.push_back(scripted_.front().command);
      scripted_.pop_front();
    }
    for (auto& c : pending_) batch.push_back(std::move(c));
    pending_.clear();
    for (const auto& cmd : batch) {
      record(t, 1, "operator", "command", cmd);
      const std::string type = cmd.is_object() && cmd.contains("type") && cmd["type"].is_string()
                                   ? cmd["type"].get<std::string>()
                                   : "";
      if (type == "pause" || type == "resume" || type == "snapshot") {
        if (type == "pause") paused_ = true;
        if (type == "resume") paused_ = false;
        if (type == "snapshot") want_snapshot_ = true;
        emit(base::make_event("command", t, {{"command", type}, {"accepted", true}}));
      } else if (!cmd.is_object()) {
        emit(base::make_event("command", t, {{"command", ""}, {"accepted", false}, {"reason", "not an object"}}));
      } else {
        base_.command(cmd, t);
      }
    }
  }

  // ------------------------------------------------------------------ phase 2

  void phase_drone(std::int64_t t) {
    sweep_.advance(sc_.dt_s());
    if (t % sc_.drone.sensor_period_ticks != 0) return;
    const LocalPoint pos = sweep_.position();
    const GeoFix fix = sample_gps(pos, world_.origin, mix_seed(sc_.seed, {0xd6}), t, sc_.drone.gps_sigma_m);
    const auto t32 = static_cast<std::uint32_t>(t);

    const auto gas = sample_gas(world_.smoke, pos, mix_seed(sc_.seed, {0x6a5}), t);
    drone_out_.push_back({radio::MsgType::GasTelemetry, msg::GasTelemetry{static_cast<std::uint16_t>(gas.raw), t32, fix}.encode()});

    const double heading_deg = sweep_.heading_rad() * 180.0 / std::numbers::pi;
    drone_out_.push_back({radio::MsgType::GpsTelemetry,
                          msg::GpsTelemetry{fix, t32, static_cast<std::int16_t>(std::lround(heading_deg * 100.0))}
                              .encode()});

    const auto pose = CameraPose::nadir(pos);
    const auto thermal = capture_thermal(world_, pose, sc_.drone.fov_deg);
    int hot = 0;
    for (auto v : thermal.temps_dc) hot += v > sc_.drone.hot_threshold_dc;
    drone_out_.push_back({radio::MsgType::ThermalSummary,
                          msg::ThermalSummary{thermal.max(), static_cast<std::uint16_t>(hot), t32}.encode()});

    const auto frame = capture_visual(world_, pose, sc_.drone.fov_deg);
    std::vector<msg::VisualSummary> parts;
    for (const auto& tag : frame.entities) {
      msg::VisualSummary v;
      v.capture = capture_;
      v.entity = static_cast<std::uint8_t>(tag.id);
      int i0 = frame.w, j0 = frame.h, i1 = -1, j1 = -1, n = 0;
      for (int j = 0; j < frame.h; ++j) {
        for (int i = 0; i < frame.w; ++i) {
          if (frame.at(i, j).entity_id != tag.id) continue;
          i0 = std::min(i0, i);
          j0 = std::min(j0, j);
          i1 = std::max(i1, i);
          j1 = std::max(j1, j);
          ++n;
        }
      }
      if (n == 0) continue;
      v.i0 = static_cast<std::uint8_t>(i0);
      v.j0 = static_cast<std::uint8_t>(j0);
      v.i1 = static_cast<std::uint8_t>(i1);
      v.j1 = static_cast<std::uint8_t>(j1);
      v.pixels = static_cast<std::uint16_t>(n);
      v.drone_fix = fix;
      parts.push_back(v);
    }
    record(t, 2, "drone", "sample",
           {{"x_m", pos.x_m}, {"y_m", pos.y_m}, {"gas_raw", gas.raw}, {"thermal_max_dc", thermal.max()},
            {"visible", parts.size()}, {"capture", capture_}});
    // Empty captures are not worth the airtime.
    if (!parts.empty()) {
      for (std::size_t k = 0; k < parts.size(); ++k) {
        parts[k].part = static_cast<std::uint8_t>(k);
        parts[k].parts = static_cast<std::uint8_t>(parts.size());
        drone_ep_.send(radio::MsgType::VisualSummary, parts[k].encode());
      }
    }
    ++capture_;
  }

  // ------------------------------------------------------------------ phase 3

  struct Unsent {
    radio::MsgType type;
    radio::Payload payload;
  };

  void transmit(radio::Channel& ch, std::string_view link, const radio::Frame& f, std::int64_t t) {
    const auto d = ch.transmit(f, t);
    const auto type = static_cast<radio::MsgType>(f[2]);
    const int seq = (f[3] << 8) | f[4];
    std::string fate = d.fate == radio::Fate::Delivered ? "delivered" : d.fate == radio::Fate::Lost ? "lost" : "corrupted";
    record(t, 3, "radio", "tx", {{"link", link}, {"msg_type", radio::to_string(type)}, {"seq", seq}, {"fate", fate}});
  }

  void send_all(radio::Endpoint& ep, std::vector<Unsent>& unreliable, radio::Channel& ch, std::string_view link,
                std::int64_t t) {
    for (const auto& u : unreliable) transmit(ch, link, ep.send_unreliable(u.type, u.payload), t);
    unreliable.clear();
    for (const auto& f : ep.poll(t)) transmit(ch, link, f, t);
  }

  // Delivers due frames to `ep`; acks go back on `reverse`. New messages are
  // appended to `inbox`.
  void deliver(radio::Channel& ch, radio::Endpoint& ep, radio::Channel& reverse, std::string_view link,
               std::string_view reverse_link, std::vector<radio::Message>* inbox, std::int64_t t) {
    for (const auto& f : ch.poll(t)) {
      const auto r = ep.receive(f);
      if (r.error) {
        record(t, 3, "radio", "rx_error", {{"link", link}, {"error", error_tag(*r.error)}});
        continue;
      }
      if (r.duplicate) {
        record(t, 3, "radio", "duplicate",
               {{"link", link}, {"msg_type", radio::to_string(static_cast<radio::MsgType>(f[2]))},
                {"seq", (f[3] << 8) | f[4]}});
      }
      if (r.ack) transmit(reverse, reverse_link, *r.ack, t);
      if (r.message && inbox) inbox->push_back(*r.message);
    }
  }

  void phase_radio(std::int64_t t) {
    send_all(drone_ep_, drone_out_, d2b_, "drone>base", t);
    send_all(base_ret_ep_, base_out_, b2r_, "base>retriever", t);
    send_all(ret_ep_, ret_out_, r2b_, "retriever>base", t);
    deliver(d2b_, base_drone_ep_, b2d_, "drone>base", "base>drone", &base_inbox_, t);
    deliver(r2b_, base_ret_ep_, b2r_, "retriever>base", "base>retriever", &base_inbox_, t);
    deliver(b2r_, ret_ep_, r2b_, "base>retriever", "retriever>base", &ret_inbox_, t);
    deliver(b2d_, drone_ep_, d2b_, "base>drone", "drone>base", nullptr, t);
    for (const auto& l : drone_ep_.take_link_downs()) {
      record(t, 3, "drone", "link_down", {{"msg_type", radio::to_string(l.type)}, {"seq", l.seq}});
    }
  }

  // ------------------------------------------------------------------ phase 4

  void phase_base(std::int64_t t) {
    for (const auto& m : base_inbox_) {
      record(t, 4, "base", "ingest",
             {{"msg_type", radio::to_string(m.type)}, {"sender", m.sender_id}, {"seq", m.seq}});
      base_.ingest(m, t);
    }
    base_inbox_.clear();
    for (const auto& l : base_ret_ep_.take_link_downs()) {
      record(t, 4, "base", "link_down", {{"msg_type", radio::to_string(l.type)}, {"seq", l.seq}});
      base_.link_down(l, t);
    }
    base_.decide(t);
    for (const auto& o : base_.take_outgoing()) {
      if (o.type == radio::MsgType::DispatchOrder) {
        const auto d = msg::DispatchOrder::decode(o.payload);
        record(t, 4, "base", "dispatch_order",
               {{"candidate_id", d.candidate_id}, {"lat_e7", d.geo.lat_e7}, {"lon_e7", d.geo.lon_e7}});
      }
      base_ret_ep_.send(o.type, o.payload);
    }
  }

  // ------------------------------------------------------------------ phase 5

  void phase_retriever(std::int64_t t) {
    using retriever::Phase;
    const Phase before = state_.phase;
    for (const auto& m : ret_inbox_) {
      if (m.type == radio::MsgType::TargetReport) {
        fragments_[msg::TargetReport::fragment_index(m.payload) & 1] = m.payload;
        if (fragments_[0] && fragments_[1]) {
          try {
            const auto rep = msg::TargetReport::reassemble(*fragments_[0], *fragments_[1]);
            record(t, 5, "retriever", "target_report",
                   {{"candidate_id", rep.candidate_id}, {"label", rep.label},
                    {"confidence", rep.confidence_e4 / 10000.0}});
          } catch (const Error& e) {
            record(t, 5, "retriever", "error", {{"what", e.what()}});
          }
          fragments_ = {};
        }
      } else if (m.type == radio::MsgType::DispatchOrder) {
        const auto order = msg::DispatchOrder::decode(m.payload);
        if (state_.phase == Phase::Idle) {
          state_ = retriever::dispatch(state_, order.geo, order.candidate_id, sc_.retriever.tank);
          order_geo_ = order.geo;
          record(t, 5, "retriever", "dispatched",
                 {{"candidate_id", order.candidate_id}, {"phase", retriever::to_string(state_.phase)}});
        } else {
          record(t, 5, "retriever", "order_ignored",
                 {{"candidate_id", order.candidate_id}, {"phase", retriever::to_string(state_.phase)}});
        }
      }
    }
    ret_inbox_.clear();

    retriever::GuidanceInputs in;
    in.link_down = !ret_ep_.take_link_downs().empty();
    in.heading_rad = truth_.heading_rad;
    in.own_fix = sample_gps({truth_.position.x_m, truth_.position.y_m, 0}, world_.origin,
                            mix_seed(sc_.seed, {0x3e7}), t, sc_.retriever.gps_sigma_m);
    in.left = sample_range(world_, truth_, RangeSensor::Left);
    in.center = sample_range(world_, truth_, RangeSensor::Center);
    in.right = sample_range(world_, truth_, RangeSensor::Right);
    in.lidar = sample_range(world_, truth_, RangeSensor::Lidar);

    const Phase prev = state_.phase;
    const auto r = retriever::step_guidance(state_, in, world_.origin, sc_.retriever.tank, guidance_, t);
    state_ = r.state;
    for (const auto& s : r.servos) {
      record(t, 5, "retriever", "servo", {{"channel", s.command.channel}, {"pulse_us", s.command.pulse_us}});
    }
    if (state_.phase != prev) on_transition(prev, t);
    truth_ = retriever::integrate(truth_, r.drive, sc_.dt_s());

    if (state_.phase != before || state_.phase != prev) {
      record(t, 5, "retriever", "phase",
             {{"from", retriever::to_string(before)}, {"to", retriever::to_string(state_.phase)},
              {"fault", retriever::to_string(state_.fault)}, {"x_m", truth_.position.x_m},
              {"y_m", truth_.position.y_m}});
      ret_ep_.send(radio::MsgType::RetrieverStatus, status().encode());
    } else if (t % sc_.retriever.status_period_ticks == 0) {
      // Heartbeat only; the next one supersedes it, so it is not retried.
      ret_out_.push_back({radio::MsgType::RetrieverStatus, status().encode()});
    }
  }

  void on_transition(retriever::Phase from, std::int64_t t) {
    using retriever::Phase;
    const Phase to = state_.phase;
    if (to == Phase::FineApproach && order_geo_) {
      summary_.fine_entry_estimate_m =
          horizontal_distance(state_.pose.position, geo_to_local(*order_geo_, world_.origin));
      summary_.fine_entry_to_order_m = horizontal_distance(truth_.position, geo_to_local(*order_geo_, world_.origin));
      if (const Entity* e = nearest_target(truth_.position, std::numeric_limits<double>::infinity())) {
        summary_.fine_entry_to_target_m = horizontal_distance(truth_.position, e->position);
      }
    }
    if (to == Phase::Grasp) {
      if (const Entity* e = nearest_target(truth_.position, std::numeric_limits<double>::infinity())) {
        const double dx = e->position.x_m - truth_.position.x_m, dy = e->position.y_m - truth_.position.y_m;
        const double c = std::cos(truth_.heading_rad), s = std::sin(truth_.heading_rad);
        summary_.grasp_lateral_mm = 1000.0 * std::abs(-s * dx + c * dy);
        summary_.grasp_standoff_mm = 1000.0 * (std::hypot(dx, dy) - e->radius_m);
      }
    }
    if (from == Phase::Grasp && to == Phase::Return) {
      // The arm closes on whatever target is right in front of the tracks.
      if (const Entity* e = nearest_target(truth_.position, 1.0)) {
        const int id = e->id;
        const int mass = e->mass_g;
        world_.entities.erase(std::find_if(world_.entities.begin(), world_.entities.end(),
                                           [id](const Entity& x) { return x.id == id; }));
        state_ = retriever::attach_payload(state_, mass, sc_.retriever.tank);
        summary_.retrieved_entity = id;
        record(t, 5, "retriever", "picked_up", {{"entity", id}, {"mass_g", mass}});
      } else {
        record(t, 5, "retriever", "empty_grasp", json::object());
      }
    }
  }

  const Entity* nearest_target(const LocalPoint& p, double max_gap_m) const {
    const Entity* best = nullptr;
    double best_gap = max_gap_m;
    for (const auto& e : world_.entities) {
      if (e.kind != EntityKind::Target) continue;
      const double gap = horizontal_distance(p, e.position) - e.radius_m;
      if (gap <= best_gap) {
        best_gap = gap;
        best = &e;
      }
    }
    return best;
  }

  msg::RetrieverStatus status() const {
    using retriever::FaultReason;
    msg::RetrieverStatus s;
    s.phase = static_cast<std::uint8_t>(state_.phase);
    s.fix = local_to_geo({state_.pose.position.x_m, state_.pose.position.y_m, 0}, world_.origin);
    const auto lidar = sample_range(world_, truth_, RangeSensor::Lidar);
    s.lidar_mm = static_cast<std::uint16_t>(lidar.distance_mm);
    if (summary_.retrieved_entity) s.flags |= msg::status_flags::kGrasped;
    if (state_.fault == FaultReason::LinkDown) s.flags |= msg::status_flags::kLinkDown;
    if (state_.fault == FaultReason::GpsLost) s.flags |= msg::status_flags::kGpsLost;
    if (state_.fault == FaultReason::CapacityExceeded) s.flags |= msg::status_flags::kCapacity;
    if (state_.fault == FaultReason::TargetNotAcquired) s.flags |= msg::status_flags::kNotAcquired;
    s.candidate_id = state_.candidate_id;
    return s;
  }

  // ------------------------------------------------------------------ phase 6

  void phase_events(std::int64_t t) {
    for (auto& e : base_.take_events()) emit(std::move(e));
    if (t == 0 && sc_.turbidity) emit(turbidity_event(t));
    if (t % sc_.snapshot_period_ticks() == 0 || want_snapshot_) emit(snapshot(t));
    want_snapshot_ = false;

    update_outcome(t);
    if (finished()) emit(base::make_event("outcome", t, outcome_data()));

    for (auto& e : events_) {
      round_floats(e);
      const std::string type = e["type"].get<std::string>();
      record(t, 6, "gateway", type, e);
      if (event_sink_) event_sink_(e.dump());
    }
    events_.clear();
  }

  json turbidity_event(std::int64_t t) const {
    const auto& ti = *sc_.turbidity;
    json d;
    try {
      const auto reports = turbidity::monitor_samples(turbidity::read_readings_file(ti.csv), ti.ref_sample,
                                                      ti.threshold);
      d = to_json(reports, ti.ref_sample);
      d["source"] = std::filesystem::path(ti.csv).filename().string();
    } catch (const Error& e) {
      d = {{"ref_sample", ti.ref_sample}, {"error", e.what()}, {"error_code", e.tag()}};
    }
    return base::make_event("turbidity", t, std::move(d));
  }

  bool radio_quiet() const {
    return drone_ep_.idle() && base_ret_ep_.idle() && ret_ep_.idle() && b2r_.in_flight() == 0 &&
           r2b_.in_flight() == 0 && ret_out_.empty();
  }

  void update_outcome(std::int64_t t) {
    using retriever::Phase;
    const bool terminal = state_.phase == Phase::Done || state_.phase == Phase::Fault;
    if (terminal && radio_quiet()) {
      outcome_ = state_.phase == Phase::Fault       ? Outcome::Fault
                 : summary_.retrieved_entity        ? Outcome::TargetRetrieved
                                                    : Outcome::Timeout;
    } else if (t + 1 >= sc_.max_ticks) {
      outcome_ = state_.phase == Phase::Fault                                ? Outcome::Fault
                 : state_.phase == Phase::Done && summary_.retrieved_entity ? Outcome::TargetRetrieved
                                                                             : Outcome::Timeout;
    }
  }

  json outcome_data() const {
    RunSummary s = summary();
    s.outcome = outcome_;
    s.ticks = tick_ + 1;
    json d = s.to_json();
    d.erase("log_hash");
    d.erase("log_records");
    d.erase("frames_sent");
    return d;
  }

  Scenario sc_;
  WorldSnapshot world_;
  DroneSweep sweep_;
  base::BaseStation base_;
  radio::Endpoint drone_ep_, base_drone_ep_, base_ret_ep_, ret_ep_;
  radio::Channel d2b_, b2d_, b2r_, r2b_;
  retriever::GuidanceConfig guidance_;
  retriever::RetrieverState state_;
  Pose2D truth_;
  std::optional<GeoFix> order_geo_;
  std::array<std::optional<radio::Payload>, 2> fragments_;

  std::vector<Unsent> drone_out_, base_out_, ret_out_;
  std::vector<radio::Message> base_inbox_, ret_inbox_;
  std::uint16_t capture_ = 0;

  std::deque<ScriptedCommand> scripted_;
  std::vector<json> pending_;
  bool paused_ = false;
  bool want_snapshot_ = false;

  std::int64_t tick_ = 0;
  Outcome outcome_ = Outcome::Running;
  RunSummary summary_;
  std::vector<json> events_;
  Fnv1a hash_;
  std::size_t records_ = 0;
  LineSink log_sink_, event_sink_;
};

struct RunResult {
  RunSummary summary;
  std::vector<std::string> log;
  std::vector<std::string> events;
};

// Batch run; the scenario's own max_ticks applies unless overridden.
inline RunResult run(Scenario sc, std::optional<std::int64_t> max_ticks = std::nullopt, bool keep_log = true) {
  if (max_ticks) sc.max_ticks = *max_ticks;
  Engine engine(std::move(sc));
  RunResult out;
  if (keep_log) engine.on_log([&](const std::string& l) { out.log.push_back(l); });
  engine.on_event([&](const std::string& l) { out.events.push_back(l); });
  while (engine.step()) {
  }
  out.summary = engine.summary();
  return out;
}

// ---------------------------------------------------------------------------
// Replay

// Re-emits the console events of a log. A malformed line is an error naming
// its line number, except an unterminated final line, which is treated as a
// write cut short and ends the stream cleanly.
inline void replay(std::istream& in, const std::function<void(std::int64_t tick, const std::string&)>& emit_line) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const bool terminated = !in.eof();
    if (line.empty() && !terminated) break;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      if (!terminated) return;
      throw Error(ErrorCode::LogParse, "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!rec.is_object() || !rec.contains("tick") || !rec["tick"].is_number_integer() || !rec.contains("src") ||
        !rec["src"].is_string() || !rec.contains("kind") || !rec.contains("data")) {
      if (!terminated) return;
      throw Error(ErrorCode::LogParse,
                  "line " + std::to_string(line_no) + ": record needs tick, src, kind and data");
    }
    if (rec["src"] == "gateway") emit_line(rec["tick"].get<std::int64_t>(), rec["data"].dump());
  }
}

inline std::vector<std::string> replay_lines(std::istream& in) {
  std::vector<std::string> out;
  replay(in, [&](std::int64_t, const std::string& l) { out.push_back(l); });
  return out;
}

}  // namespace pyrewatch::sim
