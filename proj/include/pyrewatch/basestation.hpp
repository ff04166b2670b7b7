#pragma once
// Base station: ingests decoded radio messages, keeps the gas alarm, rebuilds
// drone captures for the detector, maintains the candidate-target list and
// decides dispatch (scripted policy or operator command).

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "pyrewatch/detect.hpp"
#include "pyrewatch/messages.hpp"
#include "pyrewatch/radio.hpp"
#include "pyrewatch/retriever.hpp"
#include "pyrewatch/sensors.hpp"
#include "pyrewatch/world.hpp"

namespace pyrewatch::base {

using nlohmann::json;

inline constexpr std::uint8_t kBaseId = 1;
inline constexpr std::uint8_t kDroneId = 2;
inline constexpr std::uint8_t kRetrieverId = 3;

struct AlarmState {
  SmokeClass level = SmokeClass::Normal;
  std::int64_t since_tick = 0;
  std::uint8_t source_drone = 0;
};

enum class CandidateStatus { Pending, Dispatched, Retrieved, Rejected };

inline std::string_view to_string(CandidateStatus s) noexcept {
  switch (s) {
    case CandidateStatus::Pending: return "Pending";
    case CandidateStatus::Dispatched: return "Dispatched";
    case CandidateStatus::Retrieved: return "Retrieved";
    case CandidateStatus::Rejected: return "Rejected";
  }
  return "Pending";
}

inline bool legal_status_change(CandidateStatus from, CandidateStatus to) noexcept {
  if (from == to) return true;
  switch (from) {
    case CandidateStatus::Pending: return to == CandidateStatus::Dispatched || to == CandidateStatus::Rejected;
    case CandidateStatus::Dispatched: return to == CandidateStatus::Retrieved;
    default: return false;
  }
}

struct CandidateTarget {
  int id = 0;
  std::string label;
  double confidence = 0.0;
  GeoFix geo;
  std::int64_t first_seen_tick = 0;
  CandidateStatus status = CandidateStatus::Pending;
};

enum class PolicyMode { Scripted, Human };

inline std::string_view to_string(PolicyMode m) noexcept { return m == PolicyMode::Scripted ? "Scripted" : "Human"; }

inline std::optional<PolicyMode> parse_policy_mode(std::string_view s) noexcept {
  if (s == "Scripted") return PolicyMode::Scripted;
  if (s == "Human") return PolicyMode::Human;
  return std::nullopt;
}

struct DispatchPolicy {
  PolicyMode mode = PolicyMode::Scripted;
  double min_confidence = 0.60;
  SmokeClass gas_gate = SmokeClass::ThickSmoke;
  // Labels worth retrieving; empty means any label.
  std::vector<std::string> target_labels;

  void validate() const {
    if (!(min_confidence >= 0.0 && min_confidence <= 1.0)) {
      throw Error(ErrorCode::Config, "min_confidence must be in [0,1]");
    }
  }

  bool wants(const std::string& label) const {
    return target_labels.empty() ||
           std::find(target_labels.begin(), target_labels.end(), label) != target_labels.end();
  }
};

inline bool gated(const AlarmState& alarm, const DispatchPolicy& policy) noexcept {
  return alarm.level >= policy.gas_gate;
}

// Scripted choice: highest confidence among eligible Pending candidates, ties
// by earliest first sighting, then lowest id. Nothing while the retriever is
// busy or the alarm is at or above the gas gate.
inline std::optional<int> decide_dispatch(const std::vector<CandidateTarget>& candidates, const AlarmState& alarm,
                                          const DispatchPolicy& policy, bool retriever_idle) {
  if (!retriever_idle || gated(alarm, policy)) return std::nullopt;
  const CandidateTarget* best = nullptr;
  for (const auto& c : candidates) {
    if (c.status != CandidateStatus::Pending || c.confidence < policy.min_confidence || !policy.wants(c.label)) {
      continue;
    }
    if (!best || c.confidence > best->confidence ||
        (c.confidence == best->confidence &&
         (c.first_seen_tick < best->first_seen_tick ||
          (c.first_seen_tick == best->first_seen_tick && c.id < best->id)))) {
      best = &c;
    }
  }
  if (!best) return std::nullopt;
  return best->id;
}

/// Console/gateway event: {"type", "tick", "data"}.
inline json make_event(std::string_view type, std::int64_t tick, json data = json::object()) {
  return json{{"type", type}, {"tick", tick}, {"data", std::move(data)}};
}

struct BaseConfig {
  GeoFix origin;
  DispatchPolicy policy;
  DetectorConfig detector;
  double fov_deg = 60.0;
  int frame_w = 64;
  int frame_h = 48;
  double dedup_radius_m = 3.0;
  // What each entity id "looks like"; stands in for image content.
  std::map<int, EntityTag> catalog;
};

/// A message for the retriever link, in send order.
struct Outgoing {
  radio::MsgType type;
  radio::Payload payload;
};

class BaseStation {
 public:
  explicit BaseStation(BaseConfig cfg, std::unique_ptr<Detector> detector = nullptr)
      : cfg_(std::move(cfg)), detector_(std::move(detector)) {
    cfg_.policy.validate();
    if (!detector_) detector_ = std::make_unique<SimulatedDetector>(cfg_.detector);
  }

  const std::vector<CandidateTarget>& candidates() const noexcept { return candidates_; }
  const AlarmState& alarm() const noexcept { return alarm_; }
  const DispatchPolicy& policy() const noexcept { return cfg_.policy; }
  bool retriever_idle() const noexcept { return retriever_idle_; }
  int dispatch_count() const noexcept { return dispatches_; }
  std::optional<retriever::Phase> retriever_phase() const noexcept { return retriever_phase_; }

  const CandidateTarget* find(int id) const noexcept {
    for (const auto& c : candidates_) {
      if (c.id == id) return &c;
    }
    return nullptr;
  }

  std::vector<json> take_events() { return std::exchange(events_, {}); }
  std::vector<Outgoing> take_outgoing() { return std::exchange(outgoing_, {}); }

  void ingest(const radio::Message& m, std::int64_t tick) {
    if (m.sender_id != kDroneId && m.sender_id != kRetrieverId) {
      notice(tick, "unknown sender", {{"sender", m.sender_id}, {"msg_type", radio::to_string(m.type)}});
      return;
    }
    try {
      dispatch_message(m, tick);
    } catch (const Error& e) {
      // A well-formed frame can still carry nonsense; never let it stop the base.
      notice(tick, e.what(), {{"sender", m.sender_id}, {"msg_type", radio::to_string(m.type)}});
    }
  }

  // Scripted policy step; returns the dispatched candidate id, if any.
  std::optional<int> decide(std::int64_t tick) {
    if (cfg_.policy.mode != PolicyMode::Scripted) return std::nullopt;
    const auto id = decide_dispatch(candidates_, alarm_, cfg_.policy, retriever_idle_);
    if (id) issue(*id, tick, "policy");
    return id;
  }

  // Operator command (already parsed JSON object). Engine-level commands
  // (pause/resume/snapshot) are not handled here.
  void command(const json& cmd, std::int64_t tick) {
    const std::string type = cmd.value("type", "");
    auto reply = [&](bool ok, const std::string& reason = {}) {
      json d{{"command", type}, {"accepted", ok}};
      if (cmd.contains("candidate_id")) d["candidate_id"] = cmd["candidate_id"];
      if (!reason.empty()) d["reason"] = reason;
      events_.push_back(make_event("command", tick, std::move(d)));
    };
    try {
      if (type == "dispatch" || type == "reject") {
        check_keys(cmd, {"type", "candidate_id"});
        if (!cmd.contains("candidate_id") || !cmd["candidate_id"].is_number_integer()) {
          return reply(false, "candidate_id must be an integer");
        }
        const int id = cmd["candidate_id"].get<int>();
        const CandidateTarget* c = find(id);
        if (!c) return reply(false, "unknown candidate " + std::to_string(id));
        if (c->status != CandidateStatus::Pending) {
          return reply(false, "candidate " + std::to_string(id) + " is " + std::string(to_string(c->status)));
        }
        if (type == "reject") {
          set_status(id, CandidateStatus::Rejected, tick);
          return reply(true);
        }
        if (!retriever_idle_) return reply(false, "retriever is busy");
        if (gated(alarm_, cfg_.policy)) {
          return reply(false, "alarm " + std::string(to_string(alarm_.level)) + " is at or above the gas gate");
        }
        reply(true);
        issue(id, tick, "operator");
        return;
      }
      if (type == "set_policy") {
        check_keys(cmd, {"type", "mode", "min_confidence", "gas_gate", "target_labels"});
        DispatchPolicy p = cfg_.policy;
        if (cmd.contains("mode")) {
          const auto m = parse_policy_mode(cmd["mode"].get<std::string>());
          if (!m) return reply(false, "mode must be Scripted or Human");
          p.mode = *m;
        }
        if (cmd.contains("min_confidence")) p.min_confidence = cmd["min_confidence"].get<double>();
        if (cmd.contains("gas_gate")) {
          const auto g = parse_smoke_class(cmd["gas_gate"].get<std::string>());
          if (!g) return reply(false, "gas_gate must be Normal, Elevated or ThickSmoke");
          p.gas_gate = *g;
        }
        if (cmd.contains("target_labels")) p.target_labels = cmd["target_labels"].get<std::vector<std::string>>();
        p.validate();
        cfg_.policy = p;
        reply(true);
        events_.push_back(make_event("policy", tick, policy_json()));
        return;
      }
    } catch (const json::exception& e) {
      return reply(false, std::string("malformed command: ") + e.what());
    } catch (const Error& e) {
      return reply(false, e.what());
    }
    reply(false, "unknown command type '" + type + "'");
  }

  // A reliable message to the retriever was abandoned after all retries.
  void link_down(const radio::LinkDown& l, std::int64_t tick) {
    events_.push_back(make_event("link", tick,
                                 {{"state", "down"}, {"peer", "retriever"}, {"msg_type", radio::to_string(l.type)},
                                  {"seq", l.seq}}));
  }

  json candidate_json(const CandidateTarget& c) const {
    const auto p = geo_to_local(c.geo, cfg_.origin);
    return {{"id", c.id},
            {"label", c.label},
            {"confidence", c.confidence},
            {"lat_e7", c.geo.lat_e7},
            {"lon_e7", c.geo.lon_e7},
            {"x_m", p.x_m},
            {"y_m", p.y_m},
            {"first_seen_tick", c.first_seen_tick},
            {"status", to_string(c.status)}};
  }

  json policy_json() const {
    return {{"mode", to_string(cfg_.policy.mode)},
            {"min_confidence", cfg_.policy.min_confidence},
            {"gas_gate", to_string(cfg_.policy.gas_gate)},
            {"target_labels", cfg_.policy.target_labels}};
  }

  // Everything the base station knows, for periodic console snapshots.
  json snapshot_data() const {
    json cands = json::array();
    for (const auto& c : candidates_) cands.push_back(candidate_json(c));
    json d{{"alarm", {{"level", to_string(alarm_.level)}, {"since_tick", alarm_.since_tick}}},
           {"candidates", std::move(cands)},
           {"policy", policy_json()},
           {"dispatches", dispatches_},
           {"retriever_idle", retriever_idle_}};
    d["drone"] = nullptr;
    if (last_drone_gps_) {
      const auto p = geo_to_local(last_drone_gps_->fix, cfg_.origin);
      d["drone"] = {{"lat_e7", last_drone_gps_->fix.lat_e7}, {"lon_e7", last_drone_gps_->fix.lon_e7},
                    {"alt_cm", last_drone_gps_->fix.alt_cm}, {"x_m", p.x_m}, {"y_m", p.y_m},
                    {"gas_raw", last_gas_raw_}, {"thermal_max_dc", last_thermal_ ? last_thermal_->max_dc : 0}};
    }
    d["retriever"] = nullptr;
    if (last_status_) d["retriever"] = status_json(*last_status_);
    return d;
  }

 private:
  void dispatch_message(const radio::Message& m, std::int64_t tick) {
    using radio::MsgType;
    switch (m.type) {
      case MsgType::GasTelemetry: on_gas(msg::GasTelemetry::decode(m.payload), m.sender_id, tick); break;
      case MsgType::GpsTelemetry: {
        const auto g = msg::GpsTelemetry::decode(m.payload);
        geo_to_local(g.fix, cfg_.origin);
        last_drone_gps_ = g;
        break;
      }
      case MsgType::ThermalSummary: last_thermal_ = msg::ThermalSummary::decode(m.payload); break;
      case MsgType::VisualSummary: on_visual(msg::VisualSummary::decode(m.payload), tick); break;
      case MsgType::RetrieverStatus: on_status(msg::RetrieverStatus::decode(m.payload), tick); break;
      default:
        notice(tick, "unexpected message", {{"sender", m.sender_id}, {"msg_type", radio::to_string(m.type)}});
    }
  }

  static void check_keys(const json& cmd, std::initializer_list<std::string_view> allowed) {
    for (const auto& [k, v] : cmd.items()) {
      if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
        throw Error(ErrorCode::Config, "unknown field '" + k + "'");
      }
    }
  }

  void notice(std::int64_t tick, const std::string& what, json detail) {
    detail["what"] = what;
    events_.push_back(make_event("notice", tick, std::move(detail)));
  }

  void on_gas(const msg::GasTelemetry& g, std::uint8_t sender, std::int64_t tick) {
    last_gas_raw_ = g.raw;
    const SmokeClass level = classify_smoke({g.raw, 0});
    if (level == alarm_.level) return;
    const SmokeClass previous = alarm_.level;
    alarm_ = {level, std::max(tick, alarm_.since_tick), sender};
    events_.push_back(make_event("alarm", tick,
                                 {{"level", to_string(level)}, {"previous", to_string(previous)}, {"raw", g.raw},
                                  {"since_tick", alarm_.since_tick}, {"source", sender}}));
  }

  void on_visual(const msg::VisualSummary& v, std::int64_t tick) {
    auto& parts = captures_[v.capture];
    parts[v.part] = v;
    if (parts.size() < std::max<std::size_t>(1, v.parts)) return;
    const auto done = std::move(parts);
    captures_.erase(v.capture);
    // Incomplete captures older than a few capture periods will not finish.
    while (captures_.size() > 16) captures_.erase(captures_.begin());
    process_capture(done, tick);
  }

  void process_capture(const std::map<std::uint8_t, msg::VisualSummary>& parts, std::int64_t tick) {
    auto frame = VisualFrame::empty(cfg_.frame_w, cfg_.frame_h);
    const msg::VisualSummary& head = parts.begin()->second;
    for (const auto& [idx, p] : parts) {
      if (p.entity == msg::kNoEntity) continue;
      const auto it = cfg_.catalog.find(p.entity);
      if (it == cfg_.catalog.end()) {
        notice(tick, "unknown entity in capture", {{"entity", p.entity}, {"capture", p.capture}});
        continue;
      }
      for (int j = p.j0; j <= std::min<int>(p.j1, frame.h - 1); ++j) {
        for (int i = p.i0; i <= std::min<int>(p.i1, frame.w - 1); ++i) {
          frame.pixels[static_cast<std::size_t>(j * frame.w + i)].entity_id = p.entity;
        }
      }
      if (!frame.tag(p.entity)) frame.entities.push_back(it->second);
    }
    std::sort(frame.entities.begin(), frame.entities.end(),
              [](const EntityTag& a, const EntityTag& b) { return a.id < b.id; });
    // Detection randomness is keyed by capture number, so it does not depend
    // on when the radio happened to deliver the capture.
    for (const auto& d : detector_->locate(frame, head.capture)) {
      if (!d.box) continue;
      GeoFix geo;
      try {
        geo = geolocate(d, head.drone_fix, head.drone_fix.alt_cm, cfg_.fov_deg);
      } catch (const Error& e) {
        notice(tick, e.what(), {{"capture", head.capture}});
        continue;
      }
      merge(d.label, d.confidence, geo, tick);
    }
  }

  void merge(const std::string& label, double confidence, const GeoFix& geo, std::int64_t tick) {
    const LocalPoint p = geo_to_local(geo, cfg_.origin);
    CandidateTarget* nearest = nullptr;
    double best = cfg_.dedup_radius_m;
    for (auto& c : candidates_) {
      if (c.label != label) continue;
      const double d = horizontal_distance(p, geo_to_local(c.geo, cfg_.origin));
      if (d <= best) {
        best = d;
        nearest = &c;
      }
    }
    if (!nearest) {
      candidates_.push_back({next_id_++, label, confidence, geo, tick, CandidateStatus::Pending});
      json d = candidate_json(candidates_.back());
      d["change"] = "new";
      events_.push_back(make_event("candidate", tick, std::move(d)));
      return;
    }
    if (confidence <= nearest->confidence) return;
    nearest->confidence = confidence;
    // Once an order went out its location is frozen.
    if (nearest->status == CandidateStatus::Pending) nearest->geo = geo;
    json d = candidate_json(*nearest);
    d["change"] = "updated";
    events_.push_back(make_event("candidate", tick, std::move(d)));
  }

  void set_status(int id, CandidateStatus to, std::int64_t tick) {
    for (auto& c : candidates_) {
      if (c.id != id) continue;
      if (c.status == to || !legal_status_change(c.status, to)) return;
      c.status = to;
      json d = candidate_json(c);
      d["change"] = "status";
      events_.push_back(make_event("candidate", tick, std::move(d)));
      return;
    }
  }

  void issue(int id, std::int64_t tick, std::string_view by) {
    const CandidateTarget c = *find(id);
    msg::TargetReport report;
    report.candidate_id = static_cast<std::uint16_t>(c.id);
    report.confidence_e4 = static_cast<std::uint16_t>(std::lround(c.confidence * 10000.0));
    report.geo = c.geo;
    report.label = c.label;
    for (const auto& frag : report.fragments()) outgoing_.push_back({radio::MsgType::TargetReport, frag});
    outgoing_.push_back({radio::MsgType::DispatchOrder, msg::DispatchOrder{report.candidate_id, c.geo}.encode()});
    retriever_idle_ = false;
    active_candidate_ = c.id;
    ++dispatches_;
    events_.push_back(make_event("dispatch", tick,
                                 {{"candidate_id", c.id}, {"label", c.label}, {"lat_e7", c.geo.lat_e7},
                                  {"lon_e7", c.geo.lon_e7}, {"by", by}}));
    set_status(id, CandidateStatus::Dispatched, tick);
  }

  json status_json(const msg::RetrieverStatus& s) const {
    const auto p = geo_to_local(s.fix, cfg_.origin);
    return {{"phase", to_string(static_cast<retriever::Phase>(s.phase))},
            {"lat_e7", s.fix.lat_e7},
            {"lon_e7", s.fix.lon_e7},
            {"x_m", p.x_m},
            {"y_m", p.y_m},
            {"lidar_mm", s.lidar_mm},
            {"flags", s.flags},
            {"candidate_id", s.candidate_id}};
  }

  void on_status(const msg::RetrieverStatus& s, std::int64_t tick) {
    if (s.phase > static_cast<std::uint8_t>(retriever::Phase::Fault)) {
      notice(tick, "bad retriever phase", {{"phase", s.phase}});
      return;
    }
    geo_to_local(s.fix, cfg_.origin);  // reject before touching state
    const auto phase = static_cast<retriever::Phase>(s.phase);
    const bool changed = !last_status_ || last_status_->phase != s.phase || last_status_->flags != s.flags;
    last_status_ = s;
    retriever_phase_ = phase;
    if (changed) events_.push_back(make_event("retriever", tick, status_json(s)));
    if ((s.flags & msg::status_flags::kGrasped) && s.candidate_id != 0) {
      set_status(s.candidate_id, CandidateStatus::Retrieved, tick);
    }
  }

  BaseConfig cfg_;
  std::unique_ptr<Detector> detector_;
  AlarmState alarm_;
  std::vector<CandidateTarget> candidates_;
  int next_id_ = 1;
  bool retriever_idle_ = true;
  int dispatches_ = 0;
  std::optional<int> active_candidate_;
  std::map<std::uint16_t, std::map<std::uint8_t, msg::VisualSummary>> captures_;
  std::optional<msg::GpsTelemetry> last_drone_gps_;
  std::optional<msg::ThermalSummary> last_thermal_;
  std::optional<msg::RetrieverStatus> last_status_;
  std::optional<retriever::Phase> retriever_phase_;
  std::uint16_t last_gas_raw_ = 0;
  std::vector<json> events_;
  std::vector<Outgoing> outgoing_;
};

}  // namespace pyrewatch::base
