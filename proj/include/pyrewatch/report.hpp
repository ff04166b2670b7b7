#pragma once
// JSON views of analysis results, shared by the engine and the command line.

#include <cmath>

#include "json.hpp"
#include "pyrewatch/turbidity.hpp"

namespace pyrewatch {

using nlohmann::json;

// Rounds every float in place to 1e-9 so logged values do not depend on the
// last bits of a platform's libm.
inline void round_floats(json& j) {
  if (j.is_number_float()) {
    double v = std::nearbyint(j.get<double>() * 1e9) / 1e9;
    if (v == 0.0) v = 0.0;
    j = v;
  } else if (j.is_structured()) {
    for (auto& el : j) round_floats(el);
  }
}

inline json to_json(const turbidity::MonitorReport& r) {
  json points = json::array();
  for (const auto& p : r.points) {
    json e{{"t_hours", p.t_hours}};
    if (p.ratio) {
      e["byr"] = *p.ratio;
      e["classification"] = to_string(*p.classification);
    } else {
      e["error"] = p.error.value_or("");
    }
    points.push_back(std::move(e));
  }
  json runs = json::array();
  for (const auto& run : r.runs) {
    runs.push_back({{"classification", to_string(run.classification)},
                    {"start_t", run.start_t},
                    {"end_t", run.end_t},
                    {"count", run.count}});
  }
  json out{{"sample_id", r.sample_id}, {"threshold", r.threshold}, {"points", points}, {"runs", runs}};
  out["first_turbid_t"] = r.first_turbid_t ? json(*r.first_turbid_t) : json(nullptr);
  return out;
}

inline json to_json(const std::vector<turbidity::MonitorReport>& reports, const std::string& ref_sample) {
  json samples = json::array();
  bool turbid = false;
  for (const auto& r : reports) {
    samples.push_back(to_json(r));
    turbid = turbid || r.first_turbid_t.has_value();
  }
  return {{"ref_sample", ref_sample}, {"samples", samples}, {"any_turbid", turbid}};
}

inline json to_json(const turbidity::CalibrationRecord& c) {
  return {{"ldr_mm", c.ldr_mm}, {"tuning_ohms", c.tuning_ohms}, {"source_distance_cm", c.source_distance_cm}};
}

inline json to_json(const turbidity::CalibrationReport& r) {
  json scores = json::array();
  for (const auto& s : r.scores) {
    json e = to_json(s.record);
    e["range_v"] = s.range_v;
    e["mean_sd_v"] = s.mean_sd_v;
    e["score"] = s.score;
    scores.push_back(std::move(e));
  }
  return {{"selected", to_json(r.selected)}, {"scores", scores}};
}

}  // namespace pyrewatch
