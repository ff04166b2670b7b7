#pragma once
// Sensor models for the drone pack and the retriever head. Every function is a
// pure function of (snapshot, pose, seed, tick).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pyrewatch/rng.hpp"
#include "pyrewatch/world.hpp"

namespace pyrewatch {

// ---------------------------------------------------------------------------
// Gas (MQ-2 style)

struct GasReading {
  int raw = 0;  // ADC counts, 0..1023
  std::int64_t tick = 0;
};

enum class SmokeClass : std::uint8_t { Normal = 0, Elevated = 1, ThickSmoke = 2 };

inline std::string_view to_string(SmokeClass c) noexcept {
  switch (c) {
    case SmokeClass::Normal: return "Normal";
    case SmokeClass::Elevated: return "Elevated";
    case SmokeClass::ThickSmoke: return "ThickSmoke";
  }
  return "Normal";
}

inline std::optional<SmokeClass> parse_smoke_class(std::string_view s) noexcept {
  for (auto c : {SmokeClass::Normal, SmokeClass::Elevated, SmokeClass::ThickSmoke}) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

struct GasModel {
  double half_saturation = 0.8;  // density at which the ADC reads mid-scale
  int noise_amplitude = 8;       // uniform integer noise in [-a, +a]
};

struct SmokeThresholds {
  int elevated = 200;  // raw >= elevated -> Elevated
  int thick = 400;     // raw > thick -> ThickSmoke
};

// Saturating response raw = 1023 c / (c + K), rounded half-to-even, plus
// seeded noise. Noise stream is keyed by (seed, tick).
inline GasReading sample_gas(const SmokeField& field, const LocalPoint& p, std::uint64_t noise_seed,
                             std::int64_t tick = 0, const GasModel& model = {}) {
  const double c = smoke_density_at(field, p);
  const double clean = std::nearbyint(1023.0 * c / (c + model.half_saturation));
  int noise = 0;
  if (model.noise_amplitude > 0) {
    Rng rng(mix_seed(noise_seed, {static_cast<std::uint64_t>(tick), 0x6761u}));
    noise = static_cast<int>(rng.uniform_int(-model.noise_amplitude, model.noise_amplitude));
  }
  const int raw = std::clamp(static_cast<int>(clean) + noise, 0, 1023);
  return {raw, tick};
}

inline SmokeClass classify_smoke(const GasReading& r, const SmokeThresholds& t = {}) noexcept {
  if (r.raw > t.thick) return SmokeClass::ThickSmoke;
  if (r.raw >= t.elevated) return SmokeClass::Elevated;
  return SmokeClass::Normal;
}

// ---------------------------------------------------------------------------
// Cameras

/// Pinhole camera. yaw is counter-clockwise from east, pitch is positive up;
/// a nadir camera (pitch -pi/2, yaw pi/2) has image-up pointing north.
struct CameraPose {
  LocalPoint position;
  double yaw_rad = 0.0;
  double pitch_rad = 0.0;

  static CameraPose nadir(LocalPoint position) { return {position, std::numbers::pi / 2.0, -std::numbers::pi / 2.0}; }
};

namespace detail {

struct Vec3 {
  double x, y, z;
};

inline Vec3 cross(Vec3 a, Vec3 b) noexcept {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double dot(Vec3 a, Vec3 b) noexcept { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 to_vec(LocalPoint p) noexcept { return {p.x_m, p.y_m, p.z_m}; }

struct CameraBasis {
  Vec3 forward, right, up;
  double tan_half_fov;
};

inline CameraBasis camera_basis(const CameraPose& pose, double fov_deg) {
  const double cp = std::cos(pose.pitch_rad);
  const Vec3 f{cp * std::cos(pose.yaw_rad), cp * std::sin(pose.yaw_rad), std::sin(pose.pitch_rad)};
  const Vec3 r{std::sin(pose.yaw_rad), -std::cos(pose.yaw_rad), 0.0};
  return {f, r, cross(r, f), std::tan(fov_deg * std::numbers::pi / 360.0)};
}

// Unit ray through the center of pixel (i, j). Both image axes share one
// field of view (square normalized coordinates).
inline Vec3 pixel_ray(const CameraBasis& b, int i, int j, int w, int h) noexcept {
  const double su = (2.0 * (i + 0.5) / w - 1.0) * b.tan_half_fov;
  const double sv = (1.0 - 2.0 * (j + 0.5) / h) * b.tan_half_fov;
  Vec3 d{b.forward.x + su * b.right.x + sv * b.up.x, b.forward.y + su * b.right.y + sv * b.up.y,
         b.forward.z + su * b.right.z + sv * b.up.z};
  const double n = std::sqrt(dot(d, d));
  return {d.x / n, d.y / n, d.z / n};
}

// Smallest t >= 0 where origin + t*dir meets the sphere, if any.
inline std::optional<double> ray_sphere(Vec3 origin, Vec3 dir, Vec3 center, double radius) noexcept {
  const Vec3 oc{origin.x - center.x, origin.y - center.y, origin.z - center.z};
  const double b = dot(oc, dir);
  const double c = dot(oc, oc) - radius * radius;
  if (c <= 0.0) return 0.0;  // origin inside
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double t = -b - std::sqrt(disc);
  if (t < 0.0) return std::nullopt;
  return t;
}

inline void require_fov(double fov_deg) {
  if (!(fov_deg > 10.0 && fov_deg < 120.0)) {
    throw Error(ErrorCode::DegenerateGeometry, "camera field of view must be in (10, 120) degrees");
  }
}

}  // namespace detail

struct ThermalFrame {
  int w = 32;
  int h = 24;
  std::vector<std::int16_t> temps_dc;  // deci-degC, row-major, row 0 = top

  std::int16_t at(int i, int j) const { return temps_dc.at(static_cast<std::size_t>(j * w + i)); }
  std::int16_t center() const { return at(w / 2, h / 2); }
  std::int16_t max() const { return *std::max_element(temps_dc.begin(), temps_dc.end()); }
};

inline constexpr int kThermalMinDc = -400;
inline constexpr int kThermalMaxDc = 15000;

// Each heat source whose sphere the pixel ray meets adds (T - ambient) with a
// 1/(1 + d/radius) falloff in the camera-to-source distance d. Smoke does not
// attenuate thermal.
inline ThermalFrame capture_thermal(const WorldSnapshot& world, const CameraPose& pose, double fov_deg, int w = 32,
                                    int h = 24) {
  detail::require_fov(fov_deg);
  const auto basis = detail::camera_basis(pose, fov_deg);
  const auto cam = detail::to_vec(pose.position);
  ThermalFrame frame{w, h, std::vector<std::int16_t>(static_cast<std::size_t>(w * h))};
  for (int j = 0; j < h; ++j) {
    for (int i = 0; i < w; ++i) {
      const auto dir = detail::pixel_ray(basis, i, j, w, h);
      double temp = world.ambient_c;
      for (const auto& src : world.heat_sources) {
        if (!detail::ray_sphere(cam, dir, detail::to_vec(src.position), src.radius_m)) continue;
        const double d = norm(src.position - pose.position);
        temp += (src.temp_c - world.ambient_c) / (1.0 + d / src.radius_m);
      }
      const double dc = std::clamp(std::nearbyint(temp * 10.0), double{kThermalMinDc}, double{kThermalMaxDc});
      frame.temps_dc[static_cast<std::size_t>(j * w + i)] = static_cast<std::int16_t>(dc);
    }
  }
  return frame;
}

inline constexpr double kVisibilityFloor = 0.35;

struct VisualPixel {
  std::optional<int> entity_id;
  double visibility = 1.0;
};

/// Label and viewing pose of an entity appearing in a frame; stands in for
/// the image content a real detector would see.
struct EntityTag {
  int id = 0;
  std::string label;
  PoseView pose_view = PoseView::None;

  friend bool operator==(const EntityTag&, const EntityTag&) = default;
};

struct VisualFrame {
  int w = 64;
  int h = 48;
  std::vector<VisualPixel> pixels;  // row-major, row 0 = top
  std::vector<EntityTag> entities;  // tags for every id present in `pixels`

  const VisualPixel& at(int i, int j) const { return pixels.at(static_cast<std::size_t>(j * w + i)); }

  const EntityTag* tag(int id) const noexcept {
    for (const auto& t : entities) {
      if (t.id == id) return &t;
    }
    return nullptr;
  }

  static VisualFrame empty(int w = 64, int h = 48) {
    return {w, h, std::vector<VisualPixel>(static_cast<std::size_t>(w * h)), {}};
  }
};

inline bool is_physical(EntityKind k) noexcept { return k == EntityKind::Target || k == EntityKind::Obstacle; }

// Nearest Target/Obstacle sphere along each pixel ray. Identity is reported
// only when exp(-optical depth) reaches the detectability floor.
inline VisualFrame capture_visual(const WorldSnapshot& world, const CameraPose& pose, double fov_deg, int w = 64,
                                  int h = 48, double visibility_floor = kVisibilityFloor) {
  detail::require_fov(fov_deg);
  const auto basis = detail::camera_basis(pose, fov_deg);
  const auto cam = detail::to_vec(pose.position);
  VisualFrame frame = VisualFrame::empty(w, h);
  for (int j = 0; j < h; ++j) {
    for (int i = 0; i < w; ++i) {
      const auto dir = detail::pixel_ray(basis, i, j, w, h);
      const Entity* hit = nullptr;
      double best_t = std::numeric_limits<double>::infinity();
      for (const auto& e : world.entities) {
        if (!is_physical(e.kind)) continue;
        const auto t = detail::ray_sphere(cam, dir, detail::to_vec(e.position), e.radius_m);
        if (t && (*t < best_t || (*t == best_t && hit && e.id < hit->id))) {
          best_t = *t;
          hit = &e;
        }
      }
      auto& px = frame.pixels[static_cast<std::size_t>(j * w + i)];
      if (!hit) continue;
      const LocalPoint end{pose.position.x_m + dir.x * best_t, pose.position.y_m + dir.y * best_t,
                           pose.position.z_m + dir.z * best_t};
      px.visibility = std::exp(-optical_depth(world.smoke, pose.position, end));
      if (px.visibility >= visibility_floor) {
        px.entity_id = hit->id;
        if (!frame.tag(hit->id)) frame.entities.push_back({hit->id, hit->label, hit->pose_view});
      }
    }
  }
  std::sort(frame.entities.begin(), frame.entities.end(),
            [](const EntityTag& a, const EntityTag& b) { return a.id < b.id; });
  return frame;
}

// ---------------------------------------------------------------------------
// GPS

inline constexpr double kGpsSigmaM = 2.5;

// sigma is the radial (horizontal RMS) error; each axis gets sigma/sqrt(2) and
// the horizontal offset is clamped at 3 sigma.
inline GeoFix sample_gps(const LocalPoint& truth, const GeoFix& origin, std::uint64_t noise_seed,
                         std::int64_t tick = 0, double sigma_m = kGpsSigmaM) {
  LocalPoint p = truth;
  if (sigma_m > 0.0) {
    Rng rng(mix_seed(noise_seed, {static_cast<std::uint64_t>(tick), 0x677073u}));
    const double axis = sigma_m / std::numbers::sqrt2;
    double dx = rng.normal() * axis;
    double dy = rng.normal() * axis;
    const double r = std::hypot(dx, dy);
    if (r > 3.0 * sigma_m) {
      dx *= 3.0 * sigma_m / r;
      dy *= 3.0 * sigma_m / r;
    }
    p.x_m += dx;
    p.y_m += dy;
  }
  p.z_m = std::max(0.0, p.z_m);
  return local_to_geo(p, origin);
}

// ---------------------------------------------------------------------------
// Ranging (ultrasonic triad + LIDAR)

enum class RangeSensor : std::uint8_t { Left, Center, Right, Lidar };

struct RangeReading {
  RangeSensor sensor = RangeSensor::Center;
  int distance_mm = 0;
  bool max_range = false;
};

struct RangeSpec {
  int min_mm;
  int max_mm;
  double half_angle_rad;
  double mount_yaw_rad;  // relative to vehicle heading
};

inline constexpr RangeSpec range_spec(RangeSensor s) noexcept {
  constexpr double cone = 15.0 * std::numbers::pi / 180.0;
  constexpr double side = 30.0 * std::numbers::pi / 180.0;
  switch (s) {
    case RangeSensor::Left: return {20, 4000, cone, side};
    case RangeSensor::Center: return {20, 4000, cone, 0.0};
    case RangeSensor::Right: return {20, 4000, cone, -side};
    case RangeSensor::Lidar: return {1, 12000, 0.0, 0.0};
  }
  return {20, 4000, cone, 0.0};
}

/// Planar vehicle pose: position plus heading counter-clockwise from east.
struct Pose2D {
  LocalPoint position;
  double heading_rad = 0.0;
};

namespace detail {

// Distance along a planar ray from p (direction angle `a`) to a circle, if hit.
inline std::optional<double> ray_circle_2d(double px, double py, double a, double cx, double cy, double r) noexcept {
  const double dx = std::cos(a), dy = std::sin(a);
  const double ox = px - cx, oy = py - cy;
  const double b = ox * dx + oy * dy;
  const double c = ox * ox + oy * oy - r * r;
  if (c <= 0.0) return 0.0;
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double t = -b - std::sqrt(disc);
  if (t < 0.0) return std::nullopt;
  return t;
}

// Nearest point of a disc inside a planar cone: either along the bearing to
// the center (if that lies in the cone) or on one of the two boundary rays.
inline std::optional<double> cone_circle_2d(double px, double py, double axis, double half, double cx, double cy,
                                            double r) noexcept {
  const double dist = std::hypot(cx - px, cy - py);
  if (dist <= r) return 0.0;
  std::optional<double> best;
  const double bearing = std::atan2(cy - py, cx - px);
  if (std::abs(wrap_angle(bearing - axis)) <= half) best = dist - r;
  for (double edge : {axis - half, axis + half}) {
    if (auto t = ray_circle_2d(px, py, edge, cx, cy, r); t && (!best || *t < *best)) best = t;
  }
  return best;
}

}  // namespace detail

// Range from a vehicle-mounted sensor to the nearest Target/Obstacle. Entities
// listed in `ignore_ids` (e.g. a carried payload) are not seen.
inline RangeReading sample_range(const WorldSnapshot& world, const Pose2D& vehicle, RangeSensor sensor,
                                 std::span<const int> ignore_ids = {}) {
  const auto spec = range_spec(sensor);
  const double axis = vehicle.heading_rad + spec.mount_yaw_rad;
  const double px = vehicle.position.x_m, py = vehicle.position.y_m;
  std::optional<double> nearest;
  for (const auto& e : world.entities) {
    if (!is_physical(e.kind)) continue;
    if (std::find(ignore_ids.begin(), ignore_ids.end(), e.id) != ignore_ids.end()) continue;
    const auto d = spec.half_angle_rad > 0.0
                       ? detail::cone_circle_2d(px, py, axis, spec.half_angle_rad, e.position.x_m, e.position.y_m,
                                                e.radius_m)
                       : detail::ray_circle_2d(px, py, axis, e.position.x_m, e.position.y_m, e.radius_m);
    if (d && (!nearest || *d < *nearest)) nearest = d;
  }
  if (!nearest) return {sensor, spec.max_mm, true};
  const double mm = std::nearbyint(*nearest * 1000.0);
  if (mm > spec.max_mm) return {sensor, spec.max_mm, true};
  return {sensor, std::max(spec.min_mm, static_cast<int>(mm)), false};
}

}  // namespace pyrewatch
