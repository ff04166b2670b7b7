#pragma once
// Fixed 32-byte radio frame codec, seeded lossy channel and stop-and-wait ARQ.
//
// Wire layout (big-endian multi-byte fields):
//   [0]      magic 0xA7
//   [1]      version 0x01
//   [2]      msg_type
//   [3..4]   seq
//   [5]      sender_id
//   [6..29]  payload (24 bytes, zero padded)
//   [30..31] CRC-16/CCITT-FALSE over bytes 0..29

#include <algorithm>
#include <array>
#include <bitset>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <cstdio>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pyrewatch/error.hpp"
#include "pyrewatch/rng.hpp"

namespace pyrewatch::radio {

inline constexpr std::size_t kFrameSize = 32;
inline constexpr std::size_t kPayloadSize = 24;
inline constexpr std::uint8_t kMagic = 0xA7;
inline constexpr std::uint8_t kVersion = 0x01;

using Frame = std::array<std::uint8_t, kFrameSize>;
using Payload = std::array<std::uint8_t, kPayloadSize>;

enum class MsgType : std::uint8_t {
  GasTelemetry = 0x01,
  GpsTelemetry = 0x02,
  ThermalSummary = 0x03,
  VisualSummary = 0x04,
  TargetReport = 0x05,
  DispatchOrder = 0x06,
  Ack = 0x07,
  RetrieverStatus = 0x08,
};

inline constexpr bool is_known_type(std::uint8_t code) noexcept { return code >= 0x01 && code <= 0x08; }

inline std::string_view to_string(MsgType t) noexcept {
  switch (t) {
    case MsgType::GasTelemetry: return "GasTelemetry";
    case MsgType::GpsTelemetry: return "GpsTelemetry";
    case MsgType::ThermalSummary: return "ThermalSummary";
    case MsgType::VisualSummary: return "VisualSummary";
    case MsgType::TargetReport: return "TargetReport";
    case MsgType::DispatchOrder: return "DispatchOrder";
    case MsgType::Ack: return "Ack";
    case MsgType::RetrieverStatus: return "RetrieverStatus";
  }
  return "Unknown";
}

// Periodic telemetry is latest-wins and goes out once; everything else is
// acknowledged and retransmitted.
inline constexpr bool is_reliable(MsgType t) noexcept {
  return t == MsgType::VisualSummary || t == MsgType::TargetReport || t == MsgType::DispatchOrder ||
         t == MsgType::RetrieverStatus;
}

inline constexpr std::uint16_t crc16_ccitt_false(std::span<const std::uint8_t> bytes) noexcept {
  std::uint16_t crc = 0xFFFF;
  for (std::uint8_t b : bytes) {
    crc ^= static_cast<std::uint16_t>(b) << 8;
    for (int i = 0; i < 8; ++i) {
      crc = (crc & 0x8000) ? static_cast<std::uint16_t>((crc << 1) ^ 0x1021) : static_cast<std::uint16_t>(crc << 1);
    }
  }
  return crc;
}

struct Message {
  MsgType type = MsgType::Ack;
  std::uint8_t sender_id = 0;
  std::uint16_t seq = 0;
  Payload payload{};

  friend bool operator==(const Message&, const Message&) = default;
};

inline Frame encode(MsgType type, std::uint8_t sender_id, std::uint16_t seq,
                    std::span<const std::uint8_t> payload = {}) {
  if (payload.size() > kPayloadSize) {
    throw Error(ErrorCode::PayloadSize,
                "payload of " + std::to_string(payload.size()) + " bytes exceeds 24; fragment it");
  }
  Frame f{};
  f[0] = kMagic;
  f[1] = kVersion;
  f[2] = static_cast<std::uint8_t>(type);
  f[3] = static_cast<std::uint8_t>(seq >> 8);
  f[4] = static_cast<std::uint8_t>(seq & 0xFF);
  f[5] = sender_id;
  std::copy(payload.begin(), payload.end(), f.begin() + 6);
  const std::uint16_t crc = crc16_ccitt_false(std::span(f).first(30));
  f[30] = static_cast<std::uint8_t>(crc >> 8);
  f[31] = static_cast<std::uint8_t>(crc & 0xFF);
  return f;
}

inline Frame encode(const Message& m) { return encode(m.type, m.sender_id, m.seq, m.payload); }

// Validation order: length, CRC, magic/version, message type.
inline Message decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != kFrameSize) {
    throw Error(ErrorCode::FrameSize, "frame must be 32 bytes, got " + std::to_string(bytes.size()));
  }
  const std::uint16_t crc = static_cast<std::uint16_t>((bytes[30] << 8) | bytes[31]);
  if (crc16_ccitt_false(bytes.first(30)) != crc) throw Error(ErrorCode::Corrupt, "CRC mismatch");
  if (bytes[0] != kMagic || bytes[1] != kVersion) throw Error(ErrorCode::FrameFormat, "bad magic or version");
  if (!is_known_type(bytes[2])) {
    char code[8];
    std::snprintf(code, sizeof code, "0x%02X", bytes[2]);
    throw Error(ErrorCode::UnknownType, std::string("unknown msg_type ") + code);
  }
  Message m;
  m.type = static_cast<MsgType>(bytes[2]);
  m.seq = static_cast<std::uint16_t>((bytes[3] << 8) | bytes[4]);
  m.sender_id = bytes[5];
  std::copy(bytes.begin() + 6, bytes.begin() + 30, m.payload.begin());
  return m;
}

// ---------------------------------------------------------------------------
// Channel

struct ChannelModel {
  double loss_prob = 0.0;
  double corrupt_prob = 0.0;
  int latency_ticks = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(loss_prob >= 0.0 && loss_prob <= 1.0)) throw Error(ErrorCode::Config, "loss_prob must be in [0,1]");
    if (!(corrupt_prob >= 0.0 && corrupt_prob <= 1.0)) throw Error(ErrorCode::Config, "corrupt_prob must be in [0,1]");
    if (latency_ticks < 0) throw Error(ErrorCode::Config, "latency_ticks must be >= 0");
  }
};

enum class Fate { Delivered, Corrupted, Lost };

struct Delivery {
  std::int64_t deliver_tick = 0;
  Frame frame{};
  Fate fate = Fate::Delivered;
};

/// One direction of a radio link. All randomness comes from the channel's own
/// seeded generator, so a channel replays identically given the same inputs.
class Channel {
 public:
  explicit Channel(ChannelModel model) : model_(model), rng_(splitmix64(model.seed)) { model_.validate(); }

  const ChannelModel& model() const noexcept { return model_; }

  // Test hook: forces the fate of the n-th transmitted frame (0-based).
  void set_script(std::function<std::optional<Fate>(std::uint64_t)> script) { script_ = std::move(script); }

  // Schedules the frame and returns what happened to it.
  Delivery transmit(const Frame& frame, std::int64_t tick) {
    const std::uint64_t index = sent_++;
    Delivery d{tick + model_.latency_ticks, frame, Fate::Delivered};
    const double u_loss = rng_.uniform();
    const double u_corrupt = rng_.uniform();
    const auto bit = static_cast<std::size_t>(rng_.uniform_int(0, kFrameSize * 8 - 1));
    std::optional<Fate> forced = script_ ? script_(index) : std::nullopt;
    if (forced) {
      d.fate = *forced;
    } else if (u_loss < model_.loss_prob) {
      d.fate = Fate::Lost;
    } else if (u_corrupt < model_.corrupt_prob) {
      d.fate = Fate::Corrupted;
    }
    if (d.fate == Fate::Lost) return d;
    if (d.fate == Fate::Corrupted) d.frame[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    in_flight_.push_back(d);
    return d;
  }

  // Frames due at or before `tick`, in transmission order.
  std::vector<Frame> poll(std::int64_t tick) {
    std::vector<Frame> out;
    auto it = std::stable_partition(in_flight_.begin(), in_flight_.end(),
                                    [tick](const Delivery& d) { return d.deliver_tick <= tick; });
    for (auto i = in_flight_.begin(); i != it; ++i) out.push_back(i->frame);
    in_flight_.erase(in_flight_.begin(), it);
    return out;
  }

  std::uint64_t frames_sent() const noexcept { return sent_; }
  std::size_t in_flight() const noexcept { return in_flight_.size(); }

 private:
  ChannelModel model_;
  Rng rng_;
  std::uint64_t sent_ = 0;
  std::deque<Delivery> in_flight_;
  std::function<std::optional<Fate>(std::uint64_t)> script_;
};

// ---------------------------------------------------------------------------
// Stop-and-wait ARQ endpoint

struct ArqConfig {
  int retry_interval_ticks = 5;
  int max_attempts = 8;
  std::size_t dedup_window = 4096;
};

struct LinkDown {
  MsgType type;
  std::uint16_t seq;
  Payload payload;
};

/// Remembers the most recent `window` sequence numbers seen from one sender.
/// Older entries are forgotten, so a wrapped sequence number is accepted again.
class SeqWindow {
 public:
  explicit SeqWindow(std::size_t window) : window_(window) {}

  // True when `seq` is new (and records it).
  bool insert(std::uint16_t seq) {
    if (seen_->test(seq)) return false;
    seen_->set(seq);
    order_.push_back(seq);
    if (order_.size() > window_) {
      seen_->reset(order_.front());
      order_.pop_front();
    }
    return true;
  }

 private:
  std::size_t window_;
  std::unique_ptr<std::bitset<65536>> seen_ = std::make_unique<std::bitset<65536>>();
  std::deque<std::uint16_t> order_;
};

struct Received {
  std::optional<Message> message;  // set when new to the application
  std::optional<Frame> ack;        // to send back on the reverse channel
  bool duplicate = false;
  std::optional<ErrorCode> error;  // decode failure (frame dropped)
  bool acked_outstanding = false;  // an Ack that completed our in-flight send
};

class Endpoint {
 public:
  explicit Endpoint(std::uint8_t sender_id, ArqConfig cfg = {}) : id_(sender_id), cfg_(cfg) {}

  std::uint8_t id() const noexcept { return id_; }

  // Queues a reliable message; returns the sequence number it was assigned.
  std::uint16_t send(MsgType type, const Payload& payload) {
    const std::uint16_t seq = next_seq_++;
    queue_.push_back(Pending{type, seq, payload, 0, 0});
    return seq;
  }

  // Best-effort frame; consumes a sequence number but is never retransmitted.
  Frame send_unreliable(MsgType type, const Payload& payload) { return encode(type, id_, next_seq_++, payload); }

  // Frames to put on the air at `tick`: first attempts and retransmissions.
  // Messages that exhausted their attempts are reported through link_downs().
  std::vector<Frame> poll(std::int64_t tick) {
    std::vector<Frame> out;
    while (!queue_.empty()) {
      auto& head = queue_.front();
      if (head.attempts == 0 || tick - head.last_attempt_tick >= cfg_.retry_interval_ticks) {
        if (head.attempts >= cfg_.max_attempts) {
          link_downs_.push_back({head.type, head.seq, head.payload});
          queue_.pop_front();
          continue;
        }
        ++head.attempts;
        ++transmissions_;
        head.last_attempt_tick = tick;
        out.push_back(encode(head.type, id_, head.seq, head.payload));
      }
      break;
    }
    return out;
  }

  Received receive(std::span<const std::uint8_t> bytes) {
    Received r;
    Message m;
    try {
      m = decode(bytes);
    } catch (const Error& e) {
      r.error = e.code();
      return r;
    }
    if (m.type == MsgType::Ack) {
      const std::uint16_t acked = static_cast<std::uint16_t>((m.payload[0] << 8) | m.payload[1]);
      if (!queue_.empty() && queue_.front().attempts > 0 && queue_.front().seq == acked) {
        queue_.pop_front();
        r.acked_outstanding = true;
      }
      return r;
    }
    if (!is_reliable(m.type)) {
      r.message = m;
      return r;
    }
    Payload ack{};
    ack[0] = static_cast<std::uint8_t>(m.seq >> 8);
    ack[1] = static_cast<std::uint8_t>(m.seq & 0xFF);
    ack[2] = static_cast<std::uint8_t>(m.type);
    ack[3] = m.sender_id;
    r.ack = encode(MsgType::Ack, id_, 0, ack);
    auto [it, inserted] = seen_.try_emplace(m.sender_id, cfg_.dedup_window);
    if (it->second.insert(m.seq)) {
      r.message = m;
    } else {
      r.duplicate = true;
    }
    return r;
  }

  std::vector<LinkDown> take_link_downs() { return std::exchange(link_downs_, {}); }

  bool idle() const noexcept { return queue_.empty(); }
  std::size_t queued() const noexcept { return queue_.size(); }
  std::uint64_t transmissions() const noexcept { return transmissions_; }

 private:
  struct Pending {
    MsgType type;
    std::uint16_t seq;
    Payload payload;
    int attempts;
    std::int64_t last_attempt_tick;
  };

  std::uint8_t id_;
  ArqConfig cfg_;
  std::uint16_t next_seq_ = 0;
  std::deque<Pending> queue_;
  std::vector<LinkDown> link_downs_;
  std::map<std::uint8_t, SeqWindow> seen_;
  std::uint64_t transmissions_ = 0;
};

}  // namespace pyrewatch::radio
