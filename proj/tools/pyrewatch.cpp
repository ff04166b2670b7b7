#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "pyrewatch/gateway.hpp"
#include "pyrewatch/messages.hpp"
#include "pyrewatch/radio.hpp"
#include "pyrewatch/report.hpp"
#include "pyrewatch/simengine.hpp"
#include "pyrewatch/turbidity.hpp"

using namespace pyrewatch;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitSignal = 2;
constexpr int kExitInternal = 3;

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::Usage:
    case ErrorCode::Config:
    case ErrorCode::Csv:
    case ErrorCode::LogParse:
      return kExitUsage;
    case ErrorCode::Internal:
      return kExitInternal;
    default:
      return kExitSignal;
  }
}

void setup_logging() {
  auto log = spdlog::stderr_color_mt("pyrewatch");
  spdlog::set_default_logger(log);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("PYREWATCH_LOG");
  const std::string level = env ? env : "warn";
  if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else if (level == "info") {
    spdlog::set_level(spdlog::level::info);
  } else {
    spdlog::set_level(spdlog::level::warn);
  }
}

std::vector<std::uint8_t> parse_hex(std::string s) {
  std::string clean;
  for (char c : s) {
    if (c == ' ' || c == ':' || c == '\n' || c == '\t') continue;
    clean.push_back(c);
  }
  if (clean.rfind("0x", 0) == 0 || clean.rfind("0X", 0) == 0) clean.erase(0, 2);
  if (clean.size() % 2 != 0) throw Error(ErrorCode::Usage, "hex string has an odd number of digits");
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i < clean.size(); i += 2) {
    const std::string byte = clean.substr(i, 2);
    if (byte.find_first_not_of("0123456789abcdefABCDEF") != std::string::npos) {
      throw Error(ErrorCode::Usage, "'" + byte + "' is not a hex byte");
    }
    out.push_back(static_cast<std::uint8_t>(std::stoul(byte, nullptr, 16)));
  }
  return out;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  for (auto b : bytes) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 0xF]);
  }
  return s;
}

json fix_json(const GeoFix& f) { return {{"lat_e7", f.lat_e7}, {"lon_e7", f.lon_e7}, {"alt_cm", f.alt_cm}}; }

json payload_fields(const radio::Message& m) {
  using radio::MsgType;
  const auto& p = m.payload;
  switch (m.type) {
    case MsgType::GasTelemetry: {
      const auto g = msg::GasTelemetry::decode(p);
      return {{"raw", g.raw}, {"tick", g.tick}, {"fix", fix_json(g.fix)}};
    }
    case MsgType::GpsTelemetry: {
      const auto g = msg::GpsTelemetry::decode(p);
      return {{"fix", fix_json(g.fix)}, {"tick", g.tick}, {"heading_cdeg", g.heading_cdeg}};
    }
    case MsgType::ThermalSummary: {
      const auto t = msg::ThermalSummary::decode(p);
      return {{"max_dc", t.max_dc}, {"hot_pixels", t.hot_pixels}, {"tick", t.tick}};
    }
    case MsgType::VisualSummary: {
      const auto v = msg::VisualSummary::decode(p);
      return {{"capture", v.capture}, {"part", v.part},         {"parts", v.parts}, {"entity", v.entity},
              {"i0", v.i0},           {"j0", v.j0},             {"i1", v.i1},       {"j1", v.j1},
              {"pixels", v.pixels},   {"drone_fix", fix_json(v.drone_fix)}};
    }
    case MsgType::TargetReport:
      return {{"fragment_index", msg::TargetReport::fragment_index(p)},
              {"fragment_count", msg::TargetReport::fragment_count(p)}};
    case MsgType::DispatchOrder: {
      const auto d = msg::DispatchOrder::decode(p);
      return {{"candidate_id", d.candidate_id}, {"geo", fix_json(d.geo)}};
    }
    case MsgType::Ack:
      return {{"acked_seq", (p[0] << 8) | p[1]}, {"acked_type", p[2]}, {"acked_sender", p[3]}};
    case MsgType::RetrieverStatus: {
      const auto s = msg::RetrieverStatus::decode(p);
      return {{"phase", s.phase <= 7 ? std::string(retriever::to_string(static_cast<retriever::Phase>(s.phase)))
                                     : std::to_string(s.phase)},
              {"fix", fix_json(s.fix)},
              {"lidar_mm", s.lidar_mm},
              {"flags", s.flags},
              {"candidate_id", s.candidate_id}};
    }
  }
  return json::object();
}

int frame_decode(const std::string& hex) {
  const auto bytes = parse_hex(hex);
  const auto m = radio::decode(bytes);
  const json out{{"msg_type", radio::to_string(m.type)},
                 {"msg_type_code", static_cast<int>(m.type)},
                 {"seq", m.seq},
                 {"sender_id", m.sender_id},
                 {"payload_hex", to_hex(m.payload)},
                 {"fields", payload_fields(m)}};
  std::cout << out.dump() << "\n";
  return kExitOk;
}

int exit_for_outcome(sim::Outcome o) { return o == sim::Outcome::TargetRetrieved ? kExitOk : kExitSignal; }

int sim_run(const std::string& scenario_path, std::optional<std::uint64_t> seed, std::optional<std::int64_t> max_ticks,
            const std::string& log_path) {
  auto sc = sim::load_scenario(scenario_path);
  if (seed) sc.seed = *seed;
  if (max_ticks) sc.max_ticks = *max_ticks;
  spdlog::info("scenario {} seed {} max_ticks {}", sc.name, sc.seed, sc.max_ticks);
  sim::Engine engine(std::move(sc));
  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path, std::ios::binary | std::ios::trunc);
    if (!log) throw Error(ErrorCode::Usage, "cannot write " + log_path);
    engine.on_log([&](const std::string& l) { log << l << '\n'; });
  }
  while (engine.step()) {
    if (engine.tick() % 1000 == 0) spdlog::debug("tick {}", engine.tick());
  }
  const auto s = engine.summary();
  std::cout << s.to_json().dump() << "\n";
  spdlog::info("outcome {} after {} ticks", sim::to_string(s.outcome), s.ticks);
  return exit_for_outcome(s.outcome);
}

void pace(double dt_ms, double speed) {
  if (speed <= 0.0) return;
  std::this_thread::sleep_for(std::chrono::microseconds(static_cast<long>(dt_ms * 1000.0 / speed)));
}

int serve(const std::string& scenario_path, std::optional<std::uint64_t> seed, std::uint16_t port, double speed,
          bool exit_on_finish, const std::string& log_path) {
  auto sc = sim::load_scenario(scenario_path);
  if (seed) sc.seed = *seed;
  const double dt_ms = sc.dt_ms;
  sim::Engine engine(std::move(sc));
  gateway::Server gw;
  const auto bound = gw.start(port);
  std::cout << json{{"listening", "127.0.0.1"}, {"port", bound}}.dump() << std::endl;
  spdlog::info("gateway on 127.0.0.1:{}", bound);
  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path, std::ios::binary | std::ios::trunc);
    if (!log) throw Error(ErrorCode::Usage, "cannot write " + log_path);
    engine.on_log([&](const std::string& l) { log << l << '\n'; });
  }
  engine.on_event([&](const std::string& l) { gw.publish(l); });
  while (!g_stop) {
    for (auto& c : gw.take_commands()) engine.submit(std::move(c));
    if (engine.finished()) {
      if (exit_on_finish) break;
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
      continue;
    }
    if (!engine.step()) {
      std::this_thread::sleep_for(std::chrono::milliseconds(10));  // paused
      continue;
    }
    pace(dt_ms, speed);
  }
  gw.wait_drained(std::chrono::seconds(5));
  gw.stop();
  const auto s = engine.summary();
  std::cout << s.to_json().dump() << "\n";
  return engine.finished() ? exit_for_outcome(s.outcome) : kExitOk;
}

int sim_replay(const std::string& log_path, bool serve_it, std::uint16_t port, double speed, bool wait_client) {
  std::ifstream in(log_path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Usage, "cannot open " + log_path);
  if (!serve_it) {
    sim::replay(in, [](std::int64_t, const std::string& l) { std::cout << l << '\n'; });
    std::cout.flush();
    return kExitOk;
  }
  // Parse everything first so a corrupt log fails before anyone connects.
  std::vector<std::pair<std::int64_t, std::string>> events;
  sim::replay(in, [&](std::int64_t t, const std::string& l) { events.emplace_back(t, l); });
  gateway::Server gw;
  const auto bound = gw.start(port);
  std::cout << json{{"listening", "127.0.0.1"}, {"port", bound}}.dump() << std::endl;
  while (wait_client && gw.client_count() == 0 && !g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(10));
  double dt_ms = 100.0;
  std::int64_t last_tick = 0;
  for (const auto& [t, line] : events) {
    if (g_stop) break;
    if (t == 0 && line.find("\"type\":\"hello\"") != std::string::npos) {
      const auto hello = json::parse(line);
      dt_ms = hello["data"].value("dt_ms", 100.0);
    }
    for (; last_tick < t && speed > 0.0; ++last_tick) pace(dt_ms, speed);
    last_tick = t;
    gw.publish(line);
  }
  gw.wait_drained(std::chrono::seconds(5));
  gw.stop();
  return kExitOk;
}

void print_monitor(const std::vector<turbidity::MonitorReport>& reports) {
  for (const auto& r : reports) {
    std::printf("sample %s (threshold %.3f)\n", r.sample_id.c_str(), r.threshold);
    std::printf("  %8s  %8s  %s\n", "t_hours", "byr", "class");
    for (const auto& p : r.points) {
      if (p.ratio) {
        std::printf("  %8.2f  %8.4f  %s\n", p.t_hours, *p.ratio, std::string(to_string(*p.classification)).c_str());
      } else {
        std::printf("  %8.2f  %8s  %s\n", p.t_hours, "-", p.error.value_or("").c_str());
      }
    }
    if (r.first_turbid_t) {
      std::printf("  first_turbid_t %g\n", *r.first_turbid_t);
    } else {
      std::printf("  first_turbid_t none\n");
    }
  }
}

void write_json(const json& j, const std::string& path) {
  if (path == "-") {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Usage, "cannot write " + path);
  out << j.dump(2) << "\n";
}

int turbidity_analyze(const std::string& csv, const std::string& ref, double threshold, const std::string& json_out) {
  const auto rows = turbidity::read_readings_file(csv);
  const auto reports = turbidity::monitor_samples(rows, ref, threshold);
  print_monitor(reports);
  const json j = to_json(reports, ref);
  if (!json_out.empty()) write_json(j, json_out);
  return j["any_turbid"].get<bool>() ? kExitSignal : kExitOk;
}

int turbidity_calibrate(const std::string& csv, std::size_t min_repeats, const std::string& json_out) {
  const auto report = turbidity::select_calibration(turbidity::read_calibration_file(csv), min_repeats);
  std::printf("%6s  %10s  %8s  %8s  %10s  %10s\n", "ldr_mm", "ohms", "dist_cm", "range_v", "mean_sd_v", "score");
  for (const auto& s : report.scores) {
    std::printf("%6d  %10.1f  %8.1f  %8.4f  %10.5f  %10.2f%s\n", s.record.ldr_mm, s.record.tuning_ohms,
                s.record.source_distance_cm, s.range_v, s.mean_sd_v, s.score,
                s.record == report.selected ? "  <- selected" : "");
  }
  if (!json_out.empty()) write_json(to_json(report), json_out);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  CLI::App app{"Search-and-rescue simulation, radio tools and water turbidity analysis"};
  app.require_subcommand(1);
  std::function<int()> action;

  auto* sim_cmd = app.add_subcommand("sim", "Run or replay a scenario");
  sim_cmd->require_subcommand(1);

  std::string scenario, log_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> max_ticks;
  auto* run_cmd = sim_cmd->add_subcommand("run", "Run a scenario to completion");
  run_cmd->add_option("--scenario", scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--seed", seed, "Override the scenario seed");
  run_cmd->add_option("--max-ticks", max_ticks, "Override the tick limit")->check(CLI::PositiveNumber);
  run_cmd->add_option("--log", log_path, "Write the NDJSON event log here");
  run_cmd->callback([&] { action = [&] { return sim_run(scenario, seed, max_ticks, log_path); }; });

  std::string replay_log;
  bool replay_serve = false, wait_client = false;
  std::uint16_t port = 8765;
  double speed = 1.0;
  auto* replay_cmd = sim_cmd->add_subcommand("replay", "Re-emit the console events of a log");
  replay_cmd->add_option("--log", replay_log, "Event log from sim run")->required()->check(CLI::ExistingFile);
  replay_cmd->add_flag("--serve", replay_serve, "Serve the events over the gateway instead of printing");
  replay_cmd->add_option("--port", port, "Gateway port (0 picks one)");
  replay_cmd->add_option("--speed", speed, "Pacing factor when serving; 0 is as fast as possible")
      ->check(CLI::NonNegativeNumber);
  replay_cmd->add_flag("--wait-client", wait_client, "Hold events until a client connects");
  replay_cmd->callback([&] { action = [&] { return sim_replay(replay_log, replay_serve, port, speed, wait_client); }; });

  bool exit_on_finish = false;
  auto* serve_cmd = app.add_subcommand("serve", "Run a scenario live behind the console gateway");
  serve_cmd->add_option("--scenario", scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  serve_cmd->add_option("--port", port, "Gateway port (0 picks one)");
  serve_cmd->add_option("--seed", seed, "Override the scenario seed");
  serve_cmd->add_option("--speed", speed, "Pacing factor; 0 is as fast as possible")->check(CLI::NonNegativeNumber);
  serve_cmd->add_option("--log", log_path, "Write the NDJSON event log here");
  serve_cmd->add_flag("--exit-on-finish", exit_on_finish, "Stop once the run has an outcome");
  serve_cmd->callback([&] { action = [&] { return serve(scenario, seed, port, speed, exit_on_finish, log_path); }; });

  auto* turb = app.add_subcommand("turbidity", "Water turbidity analysis");
  turb->require_subcommand(1);
  std::string csv, ref_sample, json_out;
  double threshold = turbidity::kDefaultThreshold;
  auto* analyze = turb->add_subcommand("analyze", "Classify a time series against a water reference");
  analyze->add_option("--csv", csv, "Readings CSV")->required()->check(CLI::ExistingFile);
  analyze->add_option("--ref-sample", ref_sample, "sample_id of the clean-water reference")->required();
  analyze->add_option("--threshold", threshold, "Turbid when the ratio exceeds this")->check(CLI::PositiveNumber);
  analyze->add_option("--json", json_out, "Also write the report as JSON ('-' for stdout)");
  analyze->callback([&] { action = [&] { return turbidity_analyze(csv, ref_sample, threshold, json_out); }; });

  std::size_t min_repeats = 3;
  auto* calibrate = turb->add_subcommand("calibrate", "Pick the best LDR setup from repeated readings");
  calibrate->add_option("--csv", csv, "Calibration CSV")->required()->check(CLI::ExistingFile);
  calibrate->add_option("--min-repeats", min_repeats, "Repeats required per sample")->check(CLI::Range(2, 1000));
  calibrate->add_option("--json", json_out, "Also write the report as JSON ('-' for stdout)");
  calibrate->callback([&] { action = [&] { return turbidity_calibrate(csv, min_repeats, json_out); }; });

  auto* frame = app.add_subcommand("frame", "Radio frame tools");
  frame->require_subcommand(1);
  std::string hex;
  auto* decode = frame->add_subcommand("decode", "Decode a 32-byte frame given as hex");
  decode->add_option("hex", hex, "Frame bytes in hex")->required();
  decode->callback([&] { action = [&] { return frame_decode(hex); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error[USAGE]: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    return action ? action() : kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error[" << e.tag() << "]: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error[INTERNAL]: " << e.what() << "\n";
    return kExitInternal;
  }
}
