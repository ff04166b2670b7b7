#pragma once
// Rescue retriever: tank motion envelope, tick-driven guidance state machine
// (GPS transit, sonar avoidance, LIDAR fine approach) and the arm's grasp
// script.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string_view>
#include <vector>

#include "pyrewatch/error.hpp"
#include "pyrewatch/sensors.hpp"
#include "pyrewatch/world.hpp"

namespace pyrewatch::retriever {

inline constexpr int kMaxLoadG = 2000;

struct TankModel {
  double drive_v = 6.8;
  int load_g = 0;
  double v_max_mps = 0.5;
  double stall_v = 5.5;
  double full_v = 6.8;
  double load_derate = 0.4;

  void validate() const {
    if (!(drive_v >= 0.0 && drive_v <= 8.4)) throw Error(ErrorCode::Config, "drive_v must be in [0, 8.4] V");
    if (load_g < 0) throw Error(ErrorCode::Config, "load_g must be >= 0");
    if (!(full_v > stall_v)) throw Error(ErrorCode::Config, "full_v must exceed stall_v");
    if (!(v_max_mps >= 0.0)) throw Error(ErrorCode::Config, "v_max_mps must be >= 0");
    if (!(load_derate >= 0.0 && load_derate <= 1.0)) throw Error(ErrorCode::Config, "load_derate must be in [0,1]");
  }
};

// Dead below the stall voltage, linear up to full speed at full_v, derated
// linearly with load.
inline double tank_speed(const TankModel& m) {
  if (m.load_g > kMaxLoadG) {
    throw Error(ErrorCode::CapacityExceeded, "load " + std::to_string(m.load_g) + " g exceeds 2000 g capacity");
  }
  if (m.drive_v < m.stall_v) return 0.0;
  const double drive = std::min(1.0, (m.drive_v - m.stall_v) / (m.full_v - m.stall_v));
  const double derate = 1.0 - m.load_derate * static_cast<double>(std::max(0, m.load_g)) / kMaxLoadG;
  return std::max(0.0, m.v_max_mps * drive * derate);
}

// ---------------------------------------------------------------------------
// Arm

struct ServoCommand {
  int channel = 0;
  int pulse_us = 1500;

  static ServoCommand make(int channel, int pulse_us) {
    if (channel < 0 || channel > 5) throw Error(ErrorCode::Config, "servo channel must be in [0, 5]");
    if (pulse_us < 500 || pulse_us > 2500) {
      throw Error(ErrorCode::Config, "servo pulse " + std::to_string(pulse_us) + " us outside [500, 2500]");
    }
    return {channel, pulse_us};
  }

  friend bool operator==(const ServoCommand&, const ServoCommand&) = default;
};

// 500 us at 0 deg, 2500 us at 180 deg.
inline int angle_to_pulse(double angle_deg) {
  return static_cast<int>(std::lround(500.0 + angle_deg / 180.0 * 2000.0));
}

struct TimedServo {
  std::int64_t tick = 0;
  ServoCommand command;
};

inline constexpr int kGraspStages = 5;
inline constexpr int kTicksPerStage = 10;
inline constexpr int kGraspTicks = kGraspStages * kTicksPerStage;

using StageAngles = std::array<std::array<double, 6>, kGraspStages>;

// open, lower, close, lift, stow; channel 5 is the gripper.
inline constexpr StageAngles kDefaultGraspAngles{{
    {90, 90, 90, 90, 90, 20},
    {90, 40, 130, 60, 90, 20},
    {90, 40, 130, 60, 90, 150},
    {90, 90, 90, 90, 90, 150},
    {90, 150, 30, 120, 90, 150},
}};

/// Validated once; every pulse is range-checked at construction.
class GraspScript {
 public:
  explicit GraspScript(const StageAngles& angles = kDefaultGraspAngles) {
    for (std::size_t s = 0; s < angles.size(); ++s) {
      for (int ch = 0; ch < 6; ++ch) {
        stages_[s][static_cast<std::size_t>(ch)] =
            ServoCommand::make(ch, angle_to_pulse(angles[s][static_cast<std::size_t>(ch)]));
      }
    }
  }

  std::vector<TimedServo> schedule(std::int64_t start_tick) const {
    std::vector<TimedServo> out;
    for (std::size_t s = 0; s < stages_.size(); ++s) {
      for (const auto& cmd : stages_[s]) {
        out.push_back({start_tick + static_cast<std::int64_t>(s) * kTicksPerStage, cmd});
      }
    }
    return out;
  }

 private:
  std::array<std::array<ServoCommand, 6>, kGraspStages> stages_{};
};

inline std::vector<TimedServo> grasp_sequence(std::int64_t start_tick) { return GraspScript{}.schedule(start_tick); }

// ---------------------------------------------------------------------------
// Guidance state machine

enum class Phase : std::uint8_t { Idle, Transit, Avoiding, FineApproach, Grasp, Return, Done, Fault };

inline std::string_view to_string(Phase p) noexcept {
  switch (p) {
    case Phase::Idle: return "Idle";
    case Phase::Transit: return "Transit";
    case Phase::Avoiding: return "Avoiding";
    case Phase::FineApproach: return "FineApproach";
    case Phase::Grasp: return "Grasp";
    case Phase::Return: return "Return";
    case Phase::Done: return "Done";
    case Phase::Fault: return "Fault";
  }
  return "Fault";
}

inline bool legal_transition(Phase from, Phase to) noexcept {
  if (from == to) return true;
  if (to == Phase::Fault) return from != Phase::Fault;
  switch (from) {
    case Phase::Idle: return to == Phase::Transit;
    case Phase::Transit: return to == Phase::Avoiding || to == Phase::FineApproach;
    case Phase::Avoiding: return to == Phase::Transit;
    case Phase::FineApproach: return to == Phase::Grasp;
    case Phase::Grasp: return to == Phase::Return;
    case Phase::Return: return to == Phase::Done;
    default: return false;
  }
}

enum class FaultReason : std::uint8_t { None, LinkDown, CapacityExceeded, GpsLost, TargetNotAcquired };

inline std::string_view to_string(FaultReason r) noexcept {
  switch (r) {
    case FaultReason::None: return "None";
    case FaultReason::LinkDown: return "LinkDown";
    case FaultReason::CapacityExceeded: return "CapacityExceeded";
    case FaultReason::GpsLost: return "GpsLost";
    case FaultReason::TargetNotAcquired: return "TargetNotAcquired";
  }
  return "None";
}

struct GuidanceConfig {
  double dt_s = 0.1;
  double heading_gain = 2.0;
  double max_turn_rps = 1.2;
  int sonar_trigger_mm = 250;
  int avoid_hold_ticks = 8;
  double fine_radius_m = 1.0;
  double home_radius_m = 1.0;
  double creep_mps = 0.05;
  int grasp_standoff_mm = 120;
  double max_position_error_mm = 5.0;
  int gps_lost_ticks = 50;
  // Weight of each GPS fix in the odometry/GPS position blend.
  double gps_blend = 0.05;
  int acquire_range_mm = 6000;
  int fine_scan_range_mm = 400;
  double scan_rate_rps = 0.3;
  double fine_scan_rate_rps = 0.05;
};

enum class FineStage : std::uint8_t { Scan, Align, Creep, FineScan, Done };

/// LIDAR fine-approach bookkeeping. Angles are unwrapped (radians).
struct FineApproachState {
  FineStage stage = FineStage::Scan;
  double swept_rad = 0.0;
  bool skipping = false;  // scan began on an object; wait until the beam leaves it
  bool in_hit = false;
  double entry_rad = 0.0;
  double aim_rad = 0.0;
  int scan_dir = -1;  // fine scan: -1 sweeping clockwise to the right edge, +1 back across
  double right_edge_rad = 0.0;
  double unwrapped_heading = 0.0;
  bool fine_scanned = false;
  // Upper bound on lateral offset between beam axis and object center.
  double alignment_mm = std::numeric_limits<double>::infinity();
  int min_range_mm = std::numeric_limits<int>::max();
};

struct RetrieverState {
  Phase phase = Phase::Idle;
  Pose2D pose;  // estimated position, compass heading
  std::optional<GeoFix> target;
  int avoid_ticks_left = 0;
  double avoid_turn_rps = 0.0;
  int gps_missing_ticks = 0;
  FaultReason fault = FaultReason::None;
  FineApproachState fine;
  std::int64_t grasp_start_tick = -1;
  bool grasped = false;
  int payload_g = 0;
  std::optional<GeoFix> home;
  std::uint16_t candidate_id = 0;
  bool estimate_ready = false;
};

struct GuidanceInputs {
  RangeReading left{RangeSensor::Left, 4000, true};
  RangeReading center{RangeSensor::Center, 4000, true};
  RangeReading right{RangeSensor::Right, 4000, true};
  RangeReading lidar{RangeSensor::Lidar, 12000, true};
  std::optional<GeoFix> own_fix;
  double heading_rad = 0.0;
  bool link_down = false;
};

struct DriveCommand {
  double forward_mps = 0.0;
  double turn_rps = 0.0;
};

struct StepResult {
  RetrieverState state;
  DriveCommand drive;
  std::vector<TimedServo> servos;  // commands issued this tick
};

inline RetrieverState fault(RetrieverState s, FaultReason why) {
  s.phase = Phase::Fault;
  s.fault = why;
  return s;
}

// Idle -> Transit toward `target`. Refuses (Fault) when the tank is over capacity.
inline RetrieverState dispatch(RetrieverState s, const GeoFix& target, std::uint16_t candidate_id,
                               const TankModel& tank) {
  if (s.phase != Phase::Idle) return s;
  s.target = target;
  s.candidate_id = candidate_id;
  if (tank.load_g + s.payload_g > kMaxLoadG) return fault(s, FaultReason::CapacityExceeded);
  s.phase = Phase::Transit;
  s.fine = {};
  return s;
}

// Adds the grasped object's mass; over capacity faults the mission.
inline RetrieverState attach_payload(RetrieverState s, int mass_g, const TankModel& tank) {
  s.payload_g += mass_g;
  if (tank.load_g + s.payload_g > kMaxLoadG) return fault(s, FaultReason::CapacityExceeded);
  return s;
}

namespace detail {

inline double clamp_turn(double rate, double limit) noexcept { return std::clamp(rate, -limit, limit); }

inline bool lidar_hit(const RangeReading& r, int within_mm) noexcept {
  return !r.max_range && r.distance_mm <= within_mm;
}

inline double effective_speed(const TankModel& tank, const RetrieverState& s) {
  TankModel loaded = tank;
  loaded.load_g = tank.load_g + s.payload_g;
  return tank_speed(loaded);
}

// Heading-following drive toward a goal: proportional turn, forward speed
// scaled by cos(heading error) and floored at zero.
inline DriveCommand steer_to(const LocalPoint& from, double heading, const LocalPoint& goal, double speed,
                             const GuidanceConfig& cfg) {
  const double bearing = std::atan2(goal.y_m - from.y_m, goal.x_m - from.x_m);
  const double err = wrap_angle(bearing - heading);
  return {speed * std::max(0.0, std::cos(err)), clamp_turn(cfg.heading_gain * err, cfg.max_turn_rps)};
}

// Turn exactly onto `aim` when reachable within one tick, else at the limit.
inline double turn_onto(double aim, double heading, double limit, double dt) noexcept {
  return clamp_turn((aim - heading) / dt, limit);
}

}  // namespace detail

// One guidance tick. The returned drive command is what the tracks execute
// for the coming dt; the estimated pose is advanced by it (dead reckoning).
inline StepResult step_guidance(RetrieverState s, const GuidanceInputs& in, const GeoFix& origin,
                                const TankModel& tank, const GuidanceConfig& cfg, std::int64_t tick) {
  StepResult out;
  const double dt = cfg.dt_s;
  const double prev_heading = s.pose.heading_rad;
  s.pose.heading_rad = in.heading_rad;
  s.fine.unwrapped_heading += wrap_angle(in.heading_rad - prev_heading);

  if (in.own_fix) {
    const LocalPoint fix = geo_to_local(*in.own_fix, origin);
    if (!s.estimate_ready) {
      s.pose.position = fix;
      s.estimate_ready = true;
    } else {
      s.pose.position.x_m += cfg.gps_blend * (fix.x_m - s.pose.position.x_m);
      s.pose.position.y_m += cfg.gps_blend * (fix.y_m - s.pose.position.y_m);
    }
    s.gps_missing_ticks = 0;
  } else {
    ++s.gps_missing_ticks;
  }

  if (in.link_down && s.phase != Phase::Done && s.phase != Phase::Fault) {
    out.state = fault(s, FaultReason::LinkDown);
    return out;
  }

  DriveCommand drive;
  switch (s.phase) {
    case Phase::Idle:
    case Phase::Done:
    case Phase::Fault:
      break;

    case Phase::Transit: {
      if (s.gps_missing_ticks >= cfg.gps_lost_ticks) {
        out.state = fault(s, FaultReason::GpsLost);
        return out;
      }
      const LocalPoint goal = geo_to_local(*s.target, origin);
      if (horizontal_distance(s.pose.position, goal) < cfg.fine_radius_m) {
        s.phase = Phase::FineApproach;
        s.fine = {};
        s.fine.unwrapped_heading = in.heading_rad;
        break;
      }
      if (!in.center.max_range && in.center.distance_mm < cfg.sonar_trigger_mm) {
        const int left = in.left.max_range ? range_spec(RangeSensor::Left).max_mm : in.left.distance_mm;
        const int right = in.right.max_range ? range_spec(RangeSensor::Right).max_mm : in.right.distance_mm;
        s.phase = Phase::Avoiding;
        s.avoid_turn_rps = left > right ? cfg.max_turn_rps : -cfg.max_turn_rps;
        s.avoid_ticks_left = cfg.avoid_hold_ticks;
        drive.turn_rps = s.avoid_turn_rps;
        break;
      }
      drive = detail::steer_to(s.pose.position, s.pose.heading_rad, goal, detail::effective_speed(tank, s), cfg);
      break;
    }

    case Phase::Avoiding: {
      drive.turn_rps = s.avoid_turn_rps;
      const bool blocked = !in.center.max_range && in.center.distance_mm < cfg.sonar_trigger_mm;
      drive.forward_mps = blocked ? 0.0 : 0.5 * detail::effective_speed(tank, s);
      if (--s.avoid_ticks_left <= 0) {
        s.avoid_ticks_left = 0;
        s.phase = Phase::Transit;
      }
      break;
    }

    case Phase::FineApproach: {
      auto& f = s.fine;
      bool hit = detail::lidar_hit(in.lidar, cfg.acquire_range_mm);
      const double heading = f.unwrapped_heading;
      switch (f.stage) {
        case FineStage::Scan: {
          const double step = cfg.scan_rate_rps * dt;
          if (f.swept_rad == 0.0 && hit) f.skipping = true;
          if (f.skipping) {
            if (!hit) f.skipping = false;
          } else if (!f.in_hit && hit) {
            f.in_hit = true;
            f.entry_rad = heading;
          } else if (f.in_hit && !hit) {
            // Beam left the object; its center lies midway between the edges.
            f.aim_rad = (f.entry_rad + heading - step) / 2.0;
            f.stage = FineStage::Align;
            drive.turn_rps = detail::turn_onto(f.aim_rad, heading, cfg.max_turn_rps, dt);
            break;
          }
          if (f.swept_rad > 2.0 * std::numbers::pi + 0.5) {
            out.state = fault(s, FaultReason::TargetNotAcquired);
            return out;
          }
          f.swept_rad += step;
          drive.turn_rps = cfg.scan_rate_rps;
          break;
        }
        case FineStage::Align: {
          if (std::abs(f.aim_rad - heading) < 1e-9) {
            f.stage = FineStage::Creep;
          } else {
            drive.turn_rps = detail::turn_onto(f.aim_rad, heading, cfg.max_turn_rps, dt);
            break;
          }
          [[fallthrough]];
        }
        case FineStage::Creep: {
          if (!hit) {
            f = {};
            f.unwrapped_heading = heading;
            drive.turn_rps = cfg.scan_rate_rps;
            f.swept_rad = cfg.scan_rate_rps * dt;
            break;
          }
          if (in.lidar.distance_mm <= cfg.grasp_standoff_mm && f.alignment_mm <= cfg.max_position_error_mm) {
            s.phase = Phase::Grasp;
            s.grasp_start_tick = tick;
            for (const auto& c : grasp_sequence(tick)) {
              if (c.tick == tick) out.servos.push_back(c);
            }
            break;
          }
          if (in.lidar.distance_mm <= cfg.fine_scan_range_mm && !f.fine_scanned) {
            f.stage = FineStage::FineScan;
            f.scan_dir = -1;
            drive.turn_rps = -cfg.fine_scan_rate_rps;
            break;
          }
          if (in.lidar.distance_mm <= cfg.grasp_standoff_mm) {
            // Close enough but alignment unproven: rescan.
            f.fine_scanned = false;
            f.stage = FineStage::FineScan;
            f.scan_dir = -1;
            drive.turn_rps = -cfg.fine_scan_rate_rps;
            break;
          }
          drive.forward_mps = cfg.creep_mps;
          break;
        }
        case FineStage::FineScan: {
          const double step = cfg.fine_scan_rate_rps * dt;
          hit = detail::lidar_hit(in.lidar, 2 * cfg.fine_scan_range_mm);
          if (hit) f.min_range_mm = std::min(f.min_range_mm, in.lidar.distance_mm);
          if (f.scan_dir < 0) {
            if (!hit) {
              f.right_edge_rad = heading + step;
              f.scan_dir = +1;
              f.in_hit = false;
            }
            drive.turn_rps = f.scan_dir * cfg.fine_scan_rate_rps;
            break;
          }
          if (hit) {
            f.in_hit = true;
            drive.turn_rps = cfg.fine_scan_rate_rps;
            break;
          }
          if (!f.in_hit) {
            drive.turn_rps = cfg.fine_scan_rate_rps;
            break;
          }
          const double left_edge = heading - step;
          const double half_width = std::max(0.0, (left_edge - f.right_edge_rad) / 2.0);
          f.aim_rad = (left_edge + f.right_edge_rad) / 2.0;
          // Nearest range is D - r for a round object of radius r whose
          // half-width subtends asin(r / D), so D = nearest / (1 - sin(half_width)).
          const double nearest_m = f.min_range_mm / 1000.0;
          const double center_m = nearest_m / std::max(1e-3, 1.0 - std::sin(std::min(half_width, 1.5)));
          f.alignment_mm = center_m * std::sin(step / 2.0) * 1000.0;
          f.min_range_mm = std::numeric_limits<int>::max();
          f.fine_scanned = true;
          f.stage = FineStage::Align;
          drive.turn_rps = detail::turn_onto(f.aim_rad, heading, cfg.max_turn_rps, dt);
          break;
        }
        case FineStage::Done:
          break;
      }
      break;
    }

    case Phase::Grasp: {
      for (const auto& c : grasp_sequence(s.grasp_start_tick)) {
        if (c.tick == tick) out.servos.push_back(c);
      }
      if (tick >= s.grasp_start_tick + kGraspTicks) {
        s.grasped = true;
        s.phase = Phase::Return;
        s.target = s.home;
      }
      break;
    }

    case Phase::Return: {
      if (!s.target) {
        s.phase = Phase::Done;
        break;
      }
      const LocalPoint goal = geo_to_local(*s.target, origin);
      if (horizontal_distance(s.pose.position, goal) < cfg.home_radius_m) {
        s.phase = Phase::Done;
        break;
      }
      drive = detail::steer_to(s.pose.position, s.pose.heading_rad, goal, detail::effective_speed(tank, s), cfg);
      break;
    }
  }

  s.pose.position.x_m += drive.forward_mps * std::cos(s.pose.heading_rad) * dt;
  s.pose.position.y_m += drive.forward_mps * std::sin(s.pose.heading_rad) * dt;
  out.state = s;
  out.drive = drive;
  return out;
}

// Applies a drive command to a true planar pose over dt (unicycle model:
// translate along the current heading, then rotate).
inline Pose2D integrate(Pose2D p, const DriveCommand& d, double dt) {
  p.position.x_m += d.forward_mps * std::cos(p.heading_rad) * dt;
  p.position.y_m += d.forward_mps * std::sin(p.heading_rad) * dt;
  p.heading_rad = wrap_angle(p.heading_rad + d.turn_rps * dt);
  return p;
}

}  // namespace pyrewatch::retriever
