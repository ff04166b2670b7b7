// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pyrewatch/basestation.hpp"
#include "pyrewatch/detect.hpp"
#include "pyrewatch/radio.hpp"
#include "pyrewatch/retriever.hpp"
#include "pyrewatch/rng.hpp"
#include "pyrewatch/sensors.hpp"
#include "pyrewatch/simengine.hpp"
#include "pyrewatch/turbidity.hpp"

using namespace pyrewatch;

namespace {

const std::string kRoot = PYREWATCH_SOURCE_DIR;

// Collects failed checks for one criterion plus a short summary.
struct Verdict {
  std::vector<std::string> failures;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

template <class F>
ErrorCode error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Internal;
}

// ---------------------------------------------------------------------------

void turbidity_pipeline(Verdict& v) {
  using namespace turbidity;
  const auto rows = read_readings_file(kRoot + "/tests/fixtures/coconut_water.csv");
  const auto reports = monitor_samples(rows, "water", 1.3);
  const auto it = std::find_if(reports.begin(), reports.end(), [](auto& r) { return r.sample_id == "coconut"; });
  v.check(it != reports.end(), "coconut series present");
  if (it == reports.end()) return;
  int flips = 0;
  std::optional<Classification> prev;
  for (const auto& p : it->points) {
    v.check(p.ratio.has_value(), "every point has a ratio");
    if (!p.ratio) continue;
    if (p.t_hours <= 25) v.check(std::abs(*p.ratio - 1.26) <= 0.01, "t<=25h ratio " + fmt("%.4f", *p.ratio));
    if (p.t_hours >= 48) v.check(std::abs(*p.ratio - 1.37) <= 0.01, "t>=48h ratio " + fmt("%.4f", *p.ratio));
    if (prev && *prev != *p.classification) ++flips;
    prev = p.classification;
  }
  v.check(flips == 1, "exactly one classification flip");
  v.check(it->first_turbid_t == 48.0, "first turbid at 48 h");
  v.note(std::to_string(it->points.size()) + " points, " + std::to_string(flips) + " flip at t=" +
         (it->first_turbid_t ? fmt("%g", *it->first_turbid_t) : "none") + " h");
}

void byr_algebra(Verdict& v) {
  using namespace turbidity;
  Rng rng(101);
  auto reading = [](double b, double y) { return SpectralReading{"s", 0, 2.5, 2.7, b, y}; };
  for (int i = 0; i < 1000; ++i) {
    const auto s = reading(rng.uniform(0.06, 5.0), rng.uniform(0.06, 5.0));
    v.check(byr(s, s) == 1.0, "byr(s,s) exactly 1");
  }
  double worst = 0;
  int gains = 0;
  while (gains < 1000) {
    const auto s = reading(rng.uniform(0.5, 3.3), rng.uniform(0.5, 3.3));
    const auto r = reading(rng.uniform(0.5, 3.3), rng.uniform(0.5, 3.3));
    const double g = rng.uniform(0.1, 1.5);
    auto gs = s, gr = r;
    for (auto* x : {&gs, &gr}) {
      x->red_v *= g;
      x->green_v *= g;
      x->blue_v *= g;
      x->yellow_v *= g;
    }
    if (gr.blue_v <= kMinDivisorV || gr.yellow_v <= kMinDivisorV || gs.yellow_v <= kMinDivisorV) continue;
    ++gains;
    const double a = byr(s, r);
    worst = std::max(worst, std::abs(byr(gs, gr) - a) / a);
  }
  v.check(worst <= 1e-12, "gain invariance");
  const auto dark = reading(0.01, 0.01);
  v.check(error_of([&] { byr(reading(1, 1), dark); }) == ErrorCode::DegenerateReference, "dark reference rejected");
  v.check(error_of([&] { byr(dark, reading(1, 1)); }) == ErrorCode::DegenerateReference, "dark sample rejected");
  v.note("worst gain error " + fmt("%.2e", worst) + " over 1000 gains");
}

void calibration(Verdict& v) {
  using namespace turbidity;
  // Synthesised batches: 5 mm spans 1.77..3.28 V tightly, 3 mm is noisy, 7 mm barely responds.
  Rng rng(202);
  const char* ids[] = {"water", "salt", "sugar", "coconut"};
  auto batch = [&](int mm, double ohms, std::vector<double> means, double sd) {
    SensorBatch b{{mm, ohms, 5.0}, {}};
    for (std::size_t k = 0; k < means.size(); ++k) {
      for (int rep = 0; rep < 5; ++rep) {
        b.readings.push_back({ids[k], 0, 2.5, 2.7, std::clamp(means[k] + sd * rng.normal(), 0.0, 5.0), 3.2});
      }
    }
    return b;
  };
  const auto rep = select_calibration({batch(3, 235, {1.50, 2.10, 2.80, 3.40}, 0.25),
                                       batch(5, 623, {1.77, 2.30, 2.85, 3.28}, 0.02),
                                       batch(7, 973, {2.40, 2.45, 2.50, 2.55}, 0.03)});
  v.check(rep.selected.ldr_mm == 5 && rep.selected.tuning_ohms == 623.0, "synthetic batches select 5 mm / 623 ohm");
  const auto fixture = select_calibration(read_calibration_file(kRoot + "/tests/fixtures/ldr_calibration.csv"));
  v.check(fixture.selected.ldr_mm == 5 && fixture.selected.tuning_ohms == 623.0, "fixture selects 5 mm / 623 ohm");
  v.note("selected " + std::to_string(rep.selected.ldr_mm) + " mm / " + fmt("%.0f", rep.selected.tuning_ohms) +
         " ohm");
}

void gas_ladder(Verdict& v) {
  v.check(classify_smoke({150, 0}) == SmokeClass::Normal, "150 Normal");
  v.check(classify_smoke({250, 0}) == SmokeClass::Elevated, "250 Elevated");
  v.check(classify_smoke({450, 0}) == SmokeClass::ThickSmoke, "450 ThickSmoke");
  int breaks = 0;
  for (int raw = 1; raw < 1024; ++raw) {
    if (classify_smoke({static_cast<std::uint16_t>(raw), 0}) <
        classify_smoke({static_cast<std::uint16_t>(raw - 1), 0})) {
      ++breaks;
    }
  }
  v.check(breaks == 0, "monotone over 0..1023");
  v.note("monotone over 1024 raw values");
}

void thermal_vs_visual(Verdict& v) {
  WorldSnapshot clear;
  clear.origin = GeoFix::from_degrees(37.0, -122.0);
  clear.smoke = SmokeField(40, 40, 1.0, -20.0, -20.0);
  Entity dog;
  dog.id = 9;
  dog.kind = EntityKind::Target;
  dog.position = {4, 0, 1};
  dog.radius_m = 0.4;
  dog.label = "dog";
  clear.entities.push_back(dog);
  clear.heat_sources.push_back({{4, 0, 1}, 37.0, 0.4});
  const CameraPose cam{{0, 0, 1}, 0, 0};
  const auto t0 = capture_thermal(clear, cam, 60, 33, 25);
  const auto v0 = capture_visual(clear, cam, 60, 33, 25);
  v.check(v0.at(16, 12).entity_id == 9, "identity visible without smoke");
  v.check(t0.at(16, 12) > t0.at(0, 0), "target warmer than background");
  for (double depth : {3.0, 5.0}) {
    auto smoky = clear;
    smoky.smoke = SmokeField(40, 40, 1.0, -20, -20, depth / 3.6);  // 3.6 m of smoke to the sphere surface
    const double od = optical_depth(smoky.smoke, cam.position, {3.6, 0, 1});
    v.check(od >= 3.0 - 1e-9, "optical depth at least 3");
    const auto t1 = capture_thermal(smoky, cam, 60, 33, 25);
    const auto v1 = capture_visual(smoky, cam, 60, 33, 25);
    v.check(t1.at(16, 12) == t0.at(16, 12), "thermal target pixel unchanged");
    v.check(t1.temps_dc == t0.temps_dc, "thermal frame unchanged");
    v.check(!v1.at(16, 12).entity_id.has_value(), "visual identity suppressed");
    v.check(v1.entities.empty(), "no identities in smoky frame");
  }
  v.note("target pixel " + fmt("%.1f", t0.at(16, 12) / 10.0) + " C with and without smoke at depth 3 and 5");
}

void tank_envelope(Verdict& v) {
  using retriever::tank_speed;
  for (int tenth = 0; tenth <= 54; ++tenth) {
    for (int g = 0; g <= 2000; g += 100) v.check(tank_speed({tenth / 10.0, g}) == 0.0, "zero below 5.5 V");
  }
  int bad = 0;
  for (double volts = 0.0; volts <= 8.4; volts += 0.05) {
    for (int g = 0; g <= 2000; g += 50) {
      const double s = tank_speed({volts, g});
      if (volts + 0.05 <= 8.4 && tank_speed({volts + 0.05, g}) < s) ++bad;
      if (g + 50 <= 2000 && tank_speed({volts, g + 50}) > s) ++bad;
    }
  }
  v.check(bad == 0, "monotone in voltage, antitone in load");
  v.check(error_of([] { tank_speed({6.8, 2001}); }) == ErrorCode::CapacityExceeded, "CapacityExceeded over 2000 g");
  v.check(error_of([] { tank_speed({6.8, 2000}); }) == ErrorCode::Internal, "2000 g accepted");
  v.note("full speed " + fmt("%.2f", tank_speed({6.8, 0})) + " m/s, 6.15 V/1000 g " +
         fmt("%.3f", tank_speed({6.15, 1000})) + " m/s");
}

void radio_link(Verdict& v) {
  using namespace radio;
  Rng rng(303);
  auto random_payload = [&] {
    Payload p{};
    for (auto& b : p) b = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    return p;
  };
  int roundtrip_bad = 0;
  for (int i = 0; i < 10'000; ++i) {
    const Message m{static_cast<MsgType>(rng.uniform_int(1, 8)), static_cast<std::uint8_t>(rng.uniform_int(0, 255)),
                    static_cast<std::uint16_t>(rng.uniform_int(0, 65535)), random_payload()};
    if (!(decode(encode(m)) == m)) ++roundtrip_bad;
  }
  v.check(roundtrip_bad == 0, "10000 frame round trips");
  const auto good = encode(MsgType::TargetReport, 2, 513, random_payload());
  int missed = 0;
  for (int bit = 0; bit < 256; ++bit) {
    auto f = good;
    f[static_cast<std::size_t>(bit / 8)] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    if (error_of([&] { decode(f); }) != ErrorCode::Corrupt) ++missed;
  }
  v.check(missed == 0, "every single-bit flip detected");
  const std::string check = "123456789";
  const auto crc = crc16_ccitt_false({reinterpret_cast<const std::uint8_t*>(check.data()), check.size()});
  v.check(crc == 0x29B1, "CRC check value");

  // 1000 reliable messages over lossy links in both directions.
  Endpoint tx(2), rx(1);
  Channel fwd({0.3, 0.0, 1, 0xa11}), rev({0.3, 0.0, 1, 0xb22});
  std::map<int, int> got;
  for (int k = 0; k < 1000; ++k) {
    Payload p{};
    p[0] = static_cast<std::uint8_t>(k >> 8);
    p[1] = static_cast<std::uint8_t>(k & 0xFF);
    tx.send(MsgType::VisualSummary, p);
  }
  for (std::int64_t t = 0; t < 1000 * 8 * 5 + 100; ++t) {
    for (const auto& f : tx.poll(t)) fwd.transmit(f, t);
    for (const auto& f : fwd.poll(t)) {
      const auto r = rx.receive(f);
      if (r.message) ++got[(r.message->payload[0] << 8) | r.message->payload[1]];
      if (r.ack) rev.transmit(*r.ack, t);
    }
    for (const auto& f : rev.poll(t)) tx.receive(f);
  }
  int once = 0, dup = 0;
  for (const auto& [k, n] : got) {
    once += n == 1;
    dup += n > 1;
  }
  const auto downs = tx.take_link_downs().size();
  v.check(dup == 0, "no duplicate delivery");
  v.check(once == 1000, "all 1000 delivered exactly once");
  char crc_hex[8];
  std::snprintf(crc_hex, sizeof crc_hex, "%04X", static_cast<unsigned>(crc));
  v.note(std::string("CRC 0x") + crc_hex + ", " + std::to_string(once) + "/1000 delivered once, " + std::to_string(dup) +
         " duplicated, " + std::to_string(downs) + " link-down, " + std::to_string(tx.transmissions()) +
         " transmissions");
}

void detector(Verdict& v) {
  auto f = VisualFrame::empty(16, 16);
  for (int j = 4; j <= 8; ++j) {
    for (int i = 4; i <= 8; ++i) f.pixels[static_cast<std::size_t>(j * 16 + i)].entity_id = 1;
  }
  f.entities.push_back({1, "dog", PoseView::Side});
  DetectorConfig cfg;
  cfg.fp_rate = 0.0;
  cfg.seed = 404;
  const SimulatedDetector det(cfg);
  double lo = 1, hi = 0, sum = 0;
  for (int t = 0; t < 10'000; ++t) {
    const double c = det.identify(f, t).at(0).confidence;
    lo = std::min(lo, c);
    hi = std::max(hi, c);
    sum += c;
  }
  const double mean = sum / 10'000;
  v.check(lo >= 0.60 && hi <= 0.95, "confidence within [0.60, 0.95]");
  v.check(mean >= 0.74 && mean <= 0.81, "mean confidence within [0.74, 0.81]");

  auto engine = f;
  engine.entities[0] = {1, "fire-engine", PoseView::Front};
  double worst = 0;
  for (double p : {0.1, 0.25, 0.5, 0.9}) {
    auto c = cfg;
    c.confusion_rules.push_back({"fire-engine", PoseView::Front, "ambulance", p});
    const SimulatedDetector d(c);
    int hits = 0;
    for (int t = 0; t < 10'000; ++t) hits += d.identify(engine, t).at(0).label == "ambulance";
    worst = std::max(worst, std::abs(hits / 10'000.0 - p));
  }
  v.check(worst <= 0.02, "confusion frequency within 0.02");

  // Geolocation against hand-worked trigonometry: 10 m altitude, 90 degree lens.
  struct Case {
    double cx, cy, fov;
    int alt_cm;
    double x, y;
  };
  const double k60 = 10.0 * std::tan(std::numbers::pi / 6);
  for (const Case c : {Case{0.5, 0.5, 90, 1000, 0, 0}, Case{1.0, 0.5, 90, 1000, 10, 0}, Case{0.5, 0.0, 90, 1000, 0, 10},
                       Case{0.75, 0.25, 90, 1000, 5, 5}, Case{0.0, 1.0, 60, 1000, -k60, -k60}}) {
    const auto off = geolocate_offset(Box{c.cx, c.cy, 0, 0}, c.alt_cm, c.fov);
    v.check(std::abs(off.x_m - c.x) <= 1e-9 && std::abs(off.y_m - c.y) <= 1e-9, "geolocate example");
  }
  v.note("confidence " + fmt("%.3f", lo) + ".." + fmt("%.3f", hi) + " mean " + fmt("%.4f", mean) +
         ", worst confusion error " + fmt("%.4f", worst));
}

void end_to_end(Verdict& v) {
  const auto sc = sim::load_scenario(kRoot + "/scenarios/single-dog.json");
  std::set<std::string> hashes;
  sim::RunSummary s;
  for (int i = 0; i < 3; ++i) {
    s = sim::run(sc, std::nullopt, false).summary;
    hashes.insert(s.log_hash);
  }
  v.check(s.outcome == sim::Outcome::TargetRetrieved, "single-dog retrieves");
  v.check(s.fine_entry_estimate_m && *s.fine_entry_estimate_m < 1.0, "FineApproach entered within 1.0 m");
  v.check(s.grasp_lateral_mm && *s.grasp_lateral_mm <= 5.0, "grasp positioning error within 5 mm");
  v.check(hashes.size() == 1, "identical log hash across 3 runs");
  const auto lossy = sim::run(sim::load_scenario(kRoot + "/scenarios/single-dog-lossy.json"), std::nullopt, false);
  v.check(lossy.summary.outcome == sim::Outcome::TargetRetrieved, "lossy single-dog retrieves");
  auto opt = [](const std::optional<double>& x, const char* f) { return x ? fmt(f, *x) : std::string("n/a"); };
  v.note(std::string(sim::to_string(s.outcome)) + " in " + std::to_string(s.ticks) + " ticks, hash " + s.log_hash +
         ", FineApproach at " + opt(s.fine_entry_estimate_m, "%.3f") + " m (true " +
         opt(s.fine_entry_to_order_m, "%.3f") + " m), grasp error " + opt(s.grasp_lateral_mm, "%.2f") +
         " mm, lossy " + std::string(sim::to_string(lossy.summary.outcome)) + " in " +
         std::to_string(lossy.summary.ticks) + " ticks");
}

void dispatch_gate(Verdict& v) {
  const auto r = sim::run(sim::load_scenario(kRoot + "/scenarios/thick-smoke.json"), std::nullopt, false);
  v.check(r.summary.dispatch_orders == 0, "no DispatchOrder under thick smoke");
  v.check(r.summary.outcome == sim::Outcome::Timeout, "outcome Timeout");

  Rng rng(505);
  base::DispatchPolicy p;
  p.min_confidence = 0.0;
  int mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<base::CandidateTarget> cs;
    const int n = static_cast<int>(rng.uniform_int(1, 12));
    for (int i = 0; i < n; ++i) {
      base::CandidateTarget c;
      c.id = i + 1;
      c.label = "dog";
      c.confidence = std::round(rng.uniform(0.1, 1.0) * 10) / 10;
      c.first_seen_tick = rng.uniform_int(0, 5);
      if (rng.bernoulli(0.2)) c.status = base::CandidateStatus::Rejected;
      cs.push_back(c);
    }
    const auto chosen = base::decide_dispatch(cs, {}, p, true);
    const double k = rng.uniform(1e-3, 10.0);
    for (auto& c : cs) c.confidence *= k;
    if (base::decide_dispatch(cs, {}, p, true) != chosen) ++mismatches;
  }
  v.check(mismatches == 0, "argmax invariant under rescaling");
  v.note(std::to_string(r.summary.candidates) + " candidate(s), " + std::to_string(r.summary.dispatch_orders) +
         " orders, " + std::string(sim::to_string(r.summary.outcome)) + "; 100 rescaled sets, " +
         std::to_string(mismatches) + " mismatches");
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<void(Verdict&)>>> criteria = {
      {"turbidity-pipeline", turbidity_pipeline},
      {"byr-algebra", byr_algebra},
      {"calibration-selection", calibration},
      {"gas-ladder", gas_ladder},
      {"thermal-vs-visual", thermal_vs_visual},
      {"tank-envelope", tank_envelope},
      {"radio", radio_link},
      {"detector-distributions", detector},
      {"end-to-end-golden", end_to_end},
      {"dispatch-gate", dispatch_gate},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Verdict v;
    try {
      fn(v);
    } catch (const std::exception& e) {
      v.failures.push_back(std::string("exception: ") + e.what());
    }
    const bool ok = v.failures.empty();
    failed += !ok;
    std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name, v.detail.c_str());
    std::set<std::string> seen;
    for (const auto& f : v.failures) {
      if (seen.insert(f).second) std::printf("     - %s\n", f.c_str());
    }
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
