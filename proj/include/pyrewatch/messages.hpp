#pragma once
// Typed payloads carried inside radio frames. All integers big-endian.
//
//   GasTelemetry     raw u16 | tick u32 | GeoFix
//   GpsTelemetry     GeoFix | tick u32 | heading_cdeg i16
//   ThermalSummary   max_dc i16 | hot_pixels u16 | tick u32
//   VisualSummary    capture u16 | part u8 | parts u8 | entity u8 | i0 j0 i1 j1 u8x4 | pixels u16 | GeoFix
//   TargetReport     fragment header u8 (index << 4 | count) | 23-byte chunk
//   DispatchOrder    candidate u16 | GeoFix
//   RetrieverStatus  phase u8 | GeoFix | lidar_mm u16 | flags u8 | candidate u16
//   Ack              acked seq u16 | acked type u8 | acked sender u8
//
// GeoFix is lat_e7 i32 | lon_e7 i32 | alt_cm i32 (12 bytes).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pyrewatch/radio.hpp"
#include "pyrewatch/world.hpp"

namespace pyrewatch::msg {

using radio::Payload;

class Writer {
 public:
  explicit Writer(Payload& p) : p_(p) {}
  void u8(std::uint8_t v) { p_.at(pos_++) = v; }
  void u16(std::uint16_t v) {
    u8(static_cast<std::uint8_t>(v >> 8));
    u8(static_cast<std::uint8_t>(v & 0xFF));
  }
  void i16(std::int16_t v) { u16(static_cast<std::uint16_t>(v)); }
  void u32(std::uint32_t v) {
    u16(static_cast<std::uint16_t>(v >> 16));
    u16(static_cast<std::uint16_t>(v & 0xFFFF));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void fix(const GeoFix& f) {
    i32(f.lat_e7);
    i32(f.lon_e7);
    i32(f.alt_cm);
  }

 private:
  Payload& p_;
  std::size_t pos_ = 0;
};

class Reader {
 public:
  explicit Reader(const Payload& p) : p_(p) {}
  std::uint8_t u8() { return p_.at(pos_++); }
  std::uint16_t u16() {
    const auto hi = u8();
    return static_cast<std::uint16_t>((hi << 8) | u8());
  }
  std::int16_t i16() { return static_cast<std::int16_t>(u16()); }
  std::uint32_t u32() {
    const std::uint32_t hi = u16();
    return (hi << 16) | u16();
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  GeoFix fix() {
    GeoFix f;
    f.lat_e7 = i32();
    f.lon_e7 = i32();
    f.alt_cm = i32();
    return f;
  }

 private:
  const Payload& p_;
  std::size_t pos_ = 0;
};

struct GasTelemetry {
  std::uint16_t raw = 0;
  std::uint32_t tick = 0;
  GeoFix fix;

  Payload encode() const {
    Payload p{};
    Writer w(p);
    w.u16(raw);
    w.u32(tick);
    w.fix(fix);
    return p;
  }
  static GasTelemetry decode(const Payload& p) {
    Reader r(p);
    GasTelemetry g;
    g.raw = r.u16();
    g.tick = r.u32();
    g.fix = r.fix();
    return g;
  }
  friend bool operator==(const GasTelemetry&, const GasTelemetry&) = default;
};

struct GpsTelemetry {
  GeoFix fix;
  std::uint32_t tick = 0;
  std::int16_t heading_cdeg = 0;

  Payload encode() const {
    Payload p{};
    Writer w(p);
    w.fix(fix);
    w.u32(tick);
    w.i16(heading_cdeg);
    return p;
  }
  static GpsTelemetry decode(const Payload& p) {
    Reader r(p);
    GpsTelemetry g;
    g.fix = r.fix();
    g.tick = r.u32();
    g.heading_cdeg = r.i16();
    return g;
  }
  friend bool operator==(const GpsTelemetry&, const GpsTelemetry&) = default;
};

struct ThermalSummary {
  std::int16_t max_dc = 0;
  std::uint16_t hot_pixels = 0;
  std::uint32_t tick = 0;

  Payload encode() const {
    Payload p{};
    Writer w(p);
    w.i16(max_dc);
    w.u16(hot_pixels);
    w.u32(tick);
    return p;
  }
  static ThermalSummary decode(const Payload& p) {
    Reader r(p);
    ThermalSummary t;
    t.max_dc = r.i16();
    t.hot_pixels = r.u16();
    t.tick = r.u32();
    return t;
  }
  friend bool operator==(const ThermalSummary&, const ThermalSummary&) = default;
};

inline constexpr std::uint8_t kNoEntity = 0xFF;

/// One entity footprint from a drone capture. A capture with no visible
/// entity is sent as a single part with parts == 0.
struct VisualSummary {
  std::uint16_t capture = 0;
  std::uint8_t part = 0;
  std::uint8_t parts = 0;
  std::uint8_t entity = kNoEntity;
  std::uint8_t i0 = 0, j0 = 0, i1 = 0, j1 = 0;  // inclusive pixel bounds
  std::uint16_t pixels = 0;
  GeoFix drone_fix;

  Payload encode() const {
    Payload p{};
    Writer w(p);
    w.u16(capture);
    w.u8(part);
    w.u8(parts);
    w.u8(entity);
    w.u8(i0);
    w.u8(j0);
    w.u8(i1);
    w.u8(j1);
    w.u16(pixels);
    w.fix(drone_fix);
    return p;
  }
  static VisualSummary decode(const Payload& p) {
    Reader r(p);
    VisualSummary v;
    v.capture = r.u16();
    v.part = r.u8();
    v.parts = r.u8();
    v.entity = r.u8();
    v.i0 = r.u8();
    v.j0 = r.u8();
    v.i1 = r.u8();
    v.j1 = r.u8();
    v.pixels = r.u16();
    v.drone_fix = r.fix();
    return v;
  }
  friend bool operator==(const VisualSummary&, const VisualSummary&) = default;
};

inline constexpr std::size_t kMaxLabelBytes = 23;

/// Target identity and location handed to the retriever. Too large for one
/// frame, so it travels as two fragments.
struct TargetReport {
  std::uint16_t candidate_id = 0;
  std::uint16_t confidence_e4 = 0;
  GeoFix geo;
  std::string label;

  std::vector<std::uint8_t> body() const {
    std::vector<std::uint8_t> b;
    b.push_back(static_cast<std::uint8_t>(candidate_id >> 8));
    b.push_back(static_cast<std::uint8_t>(candidate_id & 0xFF));
    b.push_back(static_cast<std::uint8_t>(confidence_e4 >> 8));
    b.push_back(static_cast<std::uint8_t>(confidence_e4 & 0xFF));
    for (std::int32_t v : {geo.lat_e7, geo.lon_e7, geo.alt_cm}) {
      const auto u = static_cast<std::uint32_t>(v);
      for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(u >> s));
    }
    const std::size_t n = std::min(label.size(), kMaxLabelBytes);
    b.push_back(static_cast<std::uint8_t>(n));
    b.insert(b.end(), label.begin(), label.begin() + static_cast<std::ptrdiff_t>(n));
    return b;
  }

  // Always exactly two fragments: header byte then up to 23 body bytes each.
  std::vector<Payload> fragments() const {
    const auto b = body();
    std::vector<Payload> out;
    constexpr std::size_t chunk = radio::kPayloadSize - 1;
    constexpr std::uint8_t count = 2;
    for (std::uint8_t idx = 0; idx < count; ++idx) {
      Payload p{};
      p[0] = static_cast<std::uint8_t>((idx << 4) | count);
      const std::size_t start = idx * chunk;
      for (std::size_t k = 0; k < chunk && start + k < b.size(); ++k) p[1 + k] = b[start + k];
      out.push_back(p);
    }
    return out;
  }

  static std::uint8_t fragment_index(const Payload& p) noexcept { return p[0] >> 4; }
  static std::uint8_t fragment_count(const Payload& p) noexcept { return p[0] & 0x0F; }

  static TargetReport reassemble(const Payload& first, const Payload& second) {
    if (fragment_index(first) != 0 || fragment_index(second) != 1 || fragment_count(first) != 2 ||
        fragment_count(second) != 2) {
      throw Error(ErrorCode::FrameFormat, "TargetReport fragments out of order");
    }
    std::vector<std::uint8_t> b(first.begin() + 1, first.end());
    b.insert(b.end(), second.begin() + 1, second.end());
    auto u32 = [&](std::size_t at) {
      return (static_cast<std::uint32_t>(b[at]) << 24) | (static_cast<std::uint32_t>(b[at + 1]) << 16) |
             (static_cast<std::uint32_t>(b[at + 2]) << 8) | b[at + 3];
    };
    TargetReport t;
    t.candidate_id = static_cast<std::uint16_t>((b[0] << 8) | b[1]);
    t.confidence_e4 = static_cast<std::uint16_t>((b[2] << 8) | b[3]);
    t.geo = GeoFix{static_cast<std::int32_t>(u32(4)), static_cast<std::int32_t>(u32(8)),
                   static_cast<std::int32_t>(u32(12))};
    const std::size_t n = std::min<std::size_t>(b[16], kMaxLabelBytes);
    t.label.assign(b.begin() + 17, b.begin() + 17 + static_cast<std::ptrdiff_t>(n));
    return t;
  }

  friend bool operator==(const TargetReport&, const TargetReport&) = default;
};

struct DispatchOrder {
  std::uint16_t candidate_id = 0;
  GeoFix geo;

  Payload encode() const {
    Payload p{};
    Writer w(p);
    w.u16(candidate_id);
    w.fix(geo);
    return p;
  }
  static DispatchOrder decode(const Payload& p) {
    Reader r(p);
    DispatchOrder d;
    d.candidate_id = r.u16();
    d.geo = r.fix();
    return d;
  }
  friend bool operator==(const DispatchOrder&, const DispatchOrder&) = default;
};

namespace status_flags {
inline constexpr std::uint8_t kGrasped = 0x01;
inline constexpr std::uint8_t kLinkDown = 0x02;
inline constexpr std::uint8_t kGpsLost = 0x04;
inline constexpr std::uint8_t kCapacity = 0x08;
inline constexpr std::uint8_t kNotAcquired = 0x10;
}  // namespace status_flags

struct RetrieverStatus {
  std::uint8_t phase = 0;
  GeoFix fix;
  std::uint16_t lidar_mm = 0;
  std::uint8_t flags = 0;
  std::uint16_t candidate_id = 0;

  Payload encode() const {
    Payload p{};
    Writer w(p);
    w.u8(phase);
    w.fix(fix);
    w.u16(lidar_mm);
    w.u8(flags);
    w.u16(candidate_id);
    return p;
  }
  static RetrieverStatus decode(const Payload& p) {
    Reader r(p);
    RetrieverStatus s;
    s.phase = r.u8();
    s.fix = r.fix();
    s.lidar_mm = r.u16();
    s.flags = r.u8();
    s.candidate_id = r.u16();
    return s;
  }
  friend bool operator==(const RetrieverStatus&, const RetrieverStatus&) = default;
};

}  // namespace pyrewatch::msg
