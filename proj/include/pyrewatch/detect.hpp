#pragma once
// Target identification and localization. The simulated backend reproduces
// the observed behavior of an off-the-shelf classifier/detector pair: a fixed
// confidence band, pose-dependent label confusion and spurious boxes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "pyrewatch/rng.hpp"
#include "pyrewatch/sensors.hpp"
#include "pyrewatch/world.hpp"

namespace pyrewatch {

/// Normalized image box: center and size, all in [0, 1].
struct Box {
  double cx = 0.5;
  double cy = 0.5;
  double w = 0.0;
  double h = 0.0;

  friend bool operator==(const Box&, const Box&) = default;
};

struct Detection {
  std::string label;
  double confidence = 0.0;
  std::optional<Box> box;
  std::optional<GeoFix> geo;
  std::optional<int> entity_id;  // none for false positives
};

struct ConfusionRule {
  std::string true_label;
  PoseView pose_view = PoseView::None;
  std::string confused_as;
  double prob = 0.0;
};

struct DetectorConfig {
  double conf_low = 0.60;
  double conf_high = 0.95;
  std::vector<ConfusionRule> confusion_rules;
  double fp_rate = 0.1;
  std::uint64_t seed = 0;
  // Classes the detector knows. Entities with other labels are never reported;
  // false positives draw from this set. Empty means "every label".
  std::vector<std::string> labels;

  void validate() const {
    if (!(conf_low >= 0.0 && conf_low <= conf_high && conf_high <= 1.0)) {
      throw Error(ErrorCode::Config, "detector requires 0 <= conf_low <= conf_high <= 1");
    }
    if (!(fp_rate >= 0.0 && fp_rate <= 1.0)) throw Error(ErrorCode::Config, "fp_rate must be in [0,1]");
    for (const auto& r : confusion_rules) {
      if (!(r.prob >= 0.0 && r.prob <= 1.0)) throw Error(ErrorCode::Config, "confusion prob must be in [0,1]");
    }
  }

  bool knows(const std::string& label) const {
    return labels.empty() || std::find(labels.begin(), labels.end(), label) != labels.end();
  }
};

/// Pluggable detector backend.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::vector<Detection> identify(const VisualFrame& frame, std::int64_t tick) const = 0;
  virtual std::vector<Detection> locate(const VisualFrame& frame, std::int64_t tick) const = 0;
};

namespace detail {

inline constexpr std::uint64_t kIdentifyStream = 0x1d;
inline constexpr std::uint64_t kFalsePositiveStream = 0xf9;

// Tight pixel bounding box of an entity's visible footprint, normalized and
// grown by `dilation` about its center.
inline std::optional<Box> footprint_box(const VisualFrame& frame, int entity_id, double dilation = 0.05) {
  int i0 = frame.w, j0 = frame.h, i1 = -1, j1 = -1;
  for (int j = 0; j < frame.h; ++j) {
    for (int i = 0; i < frame.w; ++i) {
      const auto& px = frame.at(i, j);
      if (px.entity_id && *px.entity_id == entity_id) {
        i0 = std::min(i0, i);
        j0 = std::min(j0, j);
        i1 = std::max(i1, i);
        j1 = std::max(j1, j);
      }
    }
  }
  if (i1 < 0) return std::nullopt;
  const double x0 = static_cast<double>(i0) / frame.w, x1 = static_cast<double>(i1 + 1) / frame.w;
  const double y0 = static_cast<double>(j0) / frame.h, y1 = static_cast<double>(j1 + 1) / frame.h;
  const double cx = (x0 + x1) / 2.0, cy = (y0 + y1) / 2.0;
  const double w = std::min((x1 - x0) * (1.0 + dilation), 2.0 * std::min(cx, 1.0 - cx));
  const double h = std::min((y1 - y0) * (1.0 + dilation), 2.0 * std::min(cy, 1.0 - cy));
  return Box{cx, cy, w, h};
}

}  // namespace detail

class SimulatedDetector final : public Detector {
 public:
  explicit SimulatedDetector(DetectorConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  const DetectorConfig& config() const noexcept { return cfg_; }

  // One labeled detection per entity present in the frame, in id order.
  std::vector<Detection> identify(const VisualFrame& frame, std::int64_t tick) const override {
    std::vector<Detection> out;
    for (const auto& tag : frame.entities) {
      if (!cfg_.knows(tag.label)) continue;
      bool present = false;
      for (const auto& px : frame.pixels) {
        if (px.entity_id && *px.entity_id == tag.id) {
          present = true;
          break;
        }
      }
      if (!present) continue;
      Rng rng(mix_seed(cfg_.seed, {static_cast<std::uint64_t>(tick), static_cast<std::uint64_t>(tag.id),
                                   detail::kIdentifyStream}));
      const double u_confuse = rng.uniform();
      const double confidence = rng.uniform(cfg_.conf_low, cfg_.conf_high);
      Detection d;
      d.label = tag.label;
      d.confidence = confidence;
      d.entity_id = tag.id;
      // Matching rules partition [0, 1): one draw picks at most one outcome.
      double cumulative = 0.0;
      for (const auto& rule : cfg_.confusion_rules) {
        if (rule.true_label != tag.label || rule.pose_view != tag.pose_view) continue;
        cumulative += rule.prob;
        if (u_confuse < cumulative) {
          d.label = rule.confused_as;
          break;
        }
      }
      out.push_back(std::move(d));
    }
    return out;
  }

  // identify() plus a box per entity, and possibly one spurious detection.
  std::vector<Detection> locate(const VisualFrame& frame, std::int64_t tick) const override {
    auto out = identify(frame, tick);
    for (auto& d : out) d.box = detail::footprint_box(frame, *d.entity_id);
    Rng rng(mix_seed(cfg_.seed, {static_cast<std::uint64_t>(tick), detail::kFalsePositiveStream}));
    if (rng.uniform() < cfg_.fp_rate) {
      Detection fp;
      fp.label = cfg_.labels.empty() ? std::string("unknown")
                                     : cfg_.labels[static_cast<std::size_t>(
                                           rng.uniform_int(0, static_cast<std::int64_t>(cfg_.labels.size()) - 1))];
      fp.confidence = rng.uniform(cfg_.conf_low, cfg_.conf_high);
      const double w = rng.uniform(0.05, 0.3);
      const double h = rng.uniform(0.05, 0.3);
      fp.box = Box{rng.uniform(w / 2.0, 1.0 - w / 2.0), rng.uniform(h / 2.0, 1.0 - h / 2.0), w, h};
      out.push_back(std::move(fp));
    }
    return out;
  }

 private:
  DetectorConfig cfg_;
};

// Ground-plane offset (east, north) in meters of a box center seen by a nadir
// pinhole camera. Image top is north.
inline LocalPoint geolocate_offset(const Box& b, std::int32_t drone_alt_cm, double fov_deg) {
  if (drone_alt_cm <= 0) throw Error(ErrorCode::DegenerateGeometry, "geolocation needs a positive altitude");
  if (!(b.cx >= 0.0 && b.cx <= 1.0 && b.cy >= 0.0 && b.cy <= 1.0)) {
    throw Error(ErrorCode::DegenerateGeometry, "box center outside the unit square");
  }
  const double alt_m = drone_alt_cm / 100.0;
  const double half = std::tan(fov_deg * std::numbers::pi / 360.0);
  return {alt_m * half * (2.0 * b.cx - 1.0), alt_m * half * (1.0 - 2.0 * b.cy), 0.0};
}

// Shifts the drone's fix by the projected offset; the result is at ground level.
inline GeoFix geolocate(const Detection& det, const GeoFix& drone_fix, std::int32_t drone_alt_cm, double fov_deg) {
  if (!det.box) throw Error(ErrorCode::DegenerateGeometry, "detection has no box");
  const LocalPoint offset = geolocate_offset(*det.box, drone_alt_cm, fov_deg);
  GeoFix ground = drone_fix;
  ground.alt_cm = 0;
  return local_to_geo(offset, ground);
}

}  // namespace pyrewatch
