#pragma once
// Simulated operations area: fixed-point geographic fixes, a flat local frame,
// the smoke density grid and the entities every sensor reads.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pyrewatch/error.hpp"

namespace pyrewatch {

inline constexpr double kEarthRadiusM = 6'371'000.0;
inline constexpr double kDefaultBoundsM = 10'000.0;
inline constexpr double kDefaultAmbientC = 20.0;

/// Latitude/longitude in 1e-7 degree units plus altitude above local ground.
struct GeoFix {
  std::int32_t lat_e7 = 0;
  std::int32_t lon_e7 = 0;
  std::int32_t alt_cm = 0;

  bool valid() const noexcept {
    return lat_e7 >= -900'000'000 && lat_e7 <= 900'000'000 && lon_e7 >= -1'800'000'000 &&
           lon_e7 <= 1'800'000'000 && alt_cm >= 0;
  }

  double lat_deg() const noexcept { return lat_e7 * 1e-7; }
  double lon_deg() const noexcept { return lon_e7 * 1e-7; }

  static GeoFix from_degrees(double lat, double lon, double alt_m = 0.0) {
    return GeoFix{static_cast<std::int32_t>(std::llround(lat * 1e7)),
                  static_cast<std::int32_t>(std::llround(lon * 1e7)),
                  static_cast<std::int32_t>(std::llround(alt_m * 100.0))};
  }

  friend bool operator==(const GeoFix&, const GeoFix&) = default;
};

/// Meters east/north/up of the scenario origin.
struct LocalPoint {
  double x_m = 0.0;
  double y_m = 0.0;
  double z_m = 0.0;

  friend bool operator==(const LocalPoint&, const LocalPoint&) = default;
};

inline LocalPoint operator+(LocalPoint a, LocalPoint b) noexcept {
  return {a.x_m + b.x_m, a.y_m + b.y_m, a.z_m + b.z_m};
}
inline LocalPoint operator-(LocalPoint a, LocalPoint b) noexcept {
  return {a.x_m - b.x_m, a.y_m - b.y_m, a.z_m - b.z_m};
}
inline LocalPoint operator*(LocalPoint a, double s) noexcept { return {a.x_m * s, a.y_m * s, a.z_m * s}; }

inline double norm(LocalPoint a) noexcept { return std::sqrt(a.x_m * a.x_m + a.y_m * a.y_m + a.z_m * a.z_m); }
inline double horizontal_distance(LocalPoint a, LocalPoint b) noexcept {
  return std::hypot(a.x_m - b.x_m, a.y_m - b.y_m);
}

// Maps an angle to [-pi, pi).
inline double wrap_angle(double a) noexcept {
  a = std::fmod(a + std::numbers::pi, 2.0 * std::numbers::pi);
  if (a < 0.0) a += 2.0 * std::numbers::pi;
  return a - std::numbers::pi;
}

inline void require_valid(const GeoFix& fix, std::string_view what) {
  if (!fix.valid()) {
    throw Error(ErrorCode::CoordinateDomain,
                std::string(what) + " out of range (lat_e7=" + std::to_string(fix.lat_e7) +
                    ", lon_e7=" + std::to_string(fix.lon_e7) + ", alt_cm=" + std::to_string(fix.alt_cm) + ")");
  }
}

// Equirectangular projection about `origin`. Valid for scenario extents of a
// few kilometers; rejects fixes more than one degree of latitude apart.
inline LocalPoint geo_to_local(const GeoFix& fix, const GeoFix& origin) {
  require_valid(fix, "fix");
  require_valid(origin, "origin");
  const double dlat_deg = (static_cast<std::int64_t>(fix.lat_e7) - origin.lat_e7) * 1e-7;
  const double dlon_deg = (static_cast<std::int64_t>(fix.lon_e7) - origin.lon_e7) * 1e-7;
  if (std::abs(dlat_deg) >= 1.0) {
    throw Error(ErrorCode::CoordinateDomain, "fix is more than 1 degree of latitude from origin");
  }
  constexpr double rad = std::numbers::pi / 180.0;
  const double coslat = std::cos(origin.lat_deg() * rad);
  return {dlon_deg * rad * kEarthRadiusM * coslat, dlat_deg * rad * kEarthRadiusM, fix.alt_cm / 100.0};
}

inline GeoFix local_to_geo(const LocalPoint& p, const GeoFix& origin) {
  require_valid(origin, "origin");
  if (!std::isfinite(p.x_m) || !std::isfinite(p.y_m) || !std::isfinite(p.z_m)) {
    throw Error(ErrorCode::CoordinateDomain, "local point is not finite");
  }
  constexpr double deg = 180.0 / std::numbers::pi;
  const double coslat = std::cos(origin.lat_deg() * std::numbers::pi / 180.0);
  const double dlat_deg = p.y_m / kEarthRadiusM * deg;
  if (std::abs(dlat_deg) >= 1.0 || coslat <= 0.0) {
    throw Error(ErrorCode::CoordinateDomain, "local point too far from origin");
  }
  const double dlon_deg = p.x_m / (kEarthRadiusM * coslat) * deg;
  const std::int64_t lat = origin.lat_e7 + std::llround(dlat_deg * 1e7);
  const std::int64_t lon = origin.lon_e7 + std::llround(dlon_deg * 1e7);
  const std::int64_t alt = std::llround(p.z_m * 100.0);
  GeoFix out{static_cast<std::int32_t>(std::clamp<std::int64_t>(lat, INT32_MIN, INT32_MAX)),
             static_cast<std::int32_t>(std::clamp<std::int64_t>(lon, INT32_MIN, INT32_MAX)),
             static_cast<std::int32_t>(std::clamp<std::int64_t>(alt, INT32_MIN, INT32_MAX))};
  require_valid(out, "projected fix");
  return out;
}

/// Smoke optical density per meter on a regular grid. Values live at cell
/// centers; row index grows northward, column index eastward.
class SmokeField {
 public:
  SmokeField() : SmokeField(1, 1, 1.0) {}

  SmokeField(std::size_t rows, std::size_t cols, double cell_m, double origin_x_m = 0.0, double origin_y_m = 0.0,
             double fill = 0.0)
      : rows_(rows), cols_(cols), cell_m_(cell_m), origin_x_(origin_x_m), origin_y_(origin_y_m),
        density_(rows * cols, fill) {
    if (rows == 0 || cols == 0) throw Error(ErrorCode::Config, "smoke grid must be at least 1x1");
    if (!(cell_m > 0.0)) throw Error(ErrorCode::Config, "smoke cell size must be > 0");
    if (!(fill >= 0.0)) throw Error(ErrorCode::Config, "smoke density must be >= 0");
  }

  // rows[r][c]; every row must have the same length.
  static SmokeField from_rows(const std::vector<std::vector<double>>& rows, double cell_m, double origin_x_m = 0.0,
                              double origin_y_m = 0.0) {
    if (rows.empty() || rows.front().empty()) throw Error(ErrorCode::Config, "smoke grid must be at least 1x1");
    SmokeField f(rows.size(), rows.front().size(), cell_m, origin_x_m, origin_y_m);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != f.cols_) throw Error(ErrorCode::Config, "smoke grid rows have unequal length");
      for (std::size_t c = 0; c < f.cols_; ++c) f.set(r, c, rows[r][c]);
    }
    return f;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double cell_m() const noexcept { return cell_m_; }
  double origin_x_m() const noexcept { return origin_x_; }
  double origin_y_m() const noexcept { return origin_y_; }

  double at(std::size_t r, std::size_t c) const { return density_.at(r * cols_ + c); }

  void set(std::size_t r, std::size_t c, double value) {
    if (!(value >= 0.0)) throw Error(ErrorCode::Config, "smoke density must be >= 0");
    density_.at(r * cols_ + c) = value;
  }

  bool contains(const LocalPoint& p) const noexcept {
    return p.x_m >= origin_x_ && p.x_m <= origin_x_ + cols_ * cell_m_ && p.y_m >= origin_y_ &&
           p.y_m <= origin_y_ + rows_ * cell_m_;
  }

  double max_density() const noexcept { return *std::max_element(density_.begin(), density_.end()); }

 private:
  std::size_t rows_;
  std::size_t cols_;
  double cell_m_;
  double origin_x_;
  double origin_y_;
  std::vector<double> density_;
};

// Bilinear interpolation between cell centers; constant extrapolation in the
// half-cell border; zero outside the grid.
inline double smoke_density_at(const SmokeField& field, const LocalPoint& p) {
  if (!field.contains(p)) return 0.0;
  const double gx = (p.x_m - field.origin_x_m()) / field.cell_m() - 0.5;
  const double gy = (p.y_m - field.origin_y_m()) / field.cell_m() - 0.5;
  const double max_c = static_cast<double>(field.cols() - 1);
  const double max_r = static_cast<double>(field.rows() - 1);
  const double cx = std::clamp(gx, 0.0, max_c);
  const double cy = std::clamp(gy, 0.0, max_r);
  const auto c0 = static_cast<std::size_t>(std::floor(cx));
  const auto r0 = static_cast<std::size_t>(std::floor(cy));
  const std::size_t c1 = std::min(c0 + 1, field.cols() - 1);
  const std::size_t r1 = std::min(r0 + 1, field.rows() - 1);
  const double tx = cx - static_cast<double>(c0);
  const double ty = cy - static_cast<double>(r0);
  const double bottom = field.at(r0, c0) * (1.0 - tx) + field.at(r0, c1) * tx;
  const double top = field.at(r1, c0) * (1.0 - tx) + field.at(r1, c1) * tx;
  return std::max(0.0, bottom * (1.0 - ty) + top * ty);
}

// Line integral of density along a->b using midpoint samples spaced at most a
// quarter cell apart. Sample set is symmetric, so the result is direction-free.
inline double optical_depth(const SmokeField& field, const LocalPoint& a, const LocalPoint& b) {
  const LocalPoint d = b - a;
  const double length = norm(d);
  if (length == 0.0) return 0.0;
  const double step = field.cell_m() / 4.0;
  const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(length / step)));
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    sum += smoke_density_at(field, a + d * t);
  }
  return sum * length / static_cast<double>(n);
}

struct HeatSource {
  LocalPoint position;
  double temp_c = 0.0;
  double radius_m = 1.0;
};

enum class EntityKind { Target, Obstacle, Drone, Retriever, BaseStation };
enum class PoseView { Front, Side, None };

struct Entity {
  int id = 0;
  EntityKind kind = EntityKind::Target;
  LocalPoint position;
  std::string label;
  PoseView pose_view = PoseView::None;
  // Physical extent (sphere) used for ray casting and ranging.
  double radius_m = 0.3;
  int mass_g = 500;
};

inline std::string_view to_string(EntityKind k) noexcept {
  switch (k) {
    case EntityKind::Target: return "Target";
    case EntityKind::Obstacle: return "Obstacle";
    case EntityKind::Drone: return "Drone";
    case EntityKind::Retriever: return "Retriever";
    case EntityKind::BaseStation: return "BaseStation";
  }
  return "Target";
}

inline std::string_view to_string(PoseView v) noexcept {
  switch (v) {
    case PoseView::Front: return "Front";
    case PoseView::Side: return "Side";
    case PoseView::None: return "None";
  }
  return "None";
}

inline std::optional<EntityKind> parse_entity_kind(std::string_view s) noexcept {
  for (auto k : {EntityKind::Target, EntityKind::Obstacle, EntityKind::Drone, EntityKind::Retriever,
                 EntityKind::BaseStation}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

inline std::optional<PoseView> parse_pose_view(std::string_view s) noexcept {
  for (auto v : {PoseView::Front, PoseView::Side, PoseView::None}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

/// Immutable per-tick view of the world.
struct WorldSnapshot {
  GeoFix origin;
  double bounds_m = kDefaultBoundsM;
  double ambient_c = kDefaultAmbientC;
  SmokeField smoke;
  std::vector<HeatSource> heat_sources;
  std::vector<Entity> entities;

  const Entity* find(int id) const noexcept {
    for (const auto& e : entities) {
      if (e.id == id) return &e;
    }
    return nullptr;
  }

  bool in_bounds(const LocalPoint& p) const noexcept {
    return std::abs(p.x_m) <= bounds_m && std::abs(p.y_m) <= bounds_m;
  }
};

}  // namespace pyrewatch
