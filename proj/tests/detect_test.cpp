#include <gtest/gtest.h>

#include <cmath>

#include "pyrewatch/detect.hpp"

using namespace pyrewatch;

namespace {

// Synthetic frame with entity `id` covering the pixel rectangle [i0, i1] x [j0, j1].
VisualFrame frame_with(int w, int h, int id, const std::string& label, PoseView view, int i0, int j0, int i1,
                       int j1) {
  auto f = VisualFrame::empty(w, h);
  for (int j = j0; j <= j1; ++j)
    for (int i = i0; i <= i1; ++i) f.pixels[static_cast<std::size_t>(j * w + i)].entity_id = id;
  f.entities.push_back({id, label, view});
  return f;
}

DetectorConfig quiet(std::uint64_t seed = 1) {
  DetectorConfig c;
  c.fp_rate = 0.0;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(Identify, VisibleDogInConfidenceBand) {
  const auto f = frame_with(64, 48, 3, "dog", PoseView::Side, 10, 10, 20, 20);
  const SimulatedDetector det(quiet());
  const auto out = det.identify(f, 0);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].label, "dog");
  EXPECT_GE(out[0].confidence, 0.60);
  EXPECT_LE(out[0].confidence, 0.95);
  EXPECT_FALSE(out[0].box.has_value());
}

TEST(Identify, FrontViewConfusion) {
  const auto f = frame_with(64, 48, 3, "fire-engine", PoseView::Front, 10, 10, 20, 20);
  auto cfg = quiet();
  cfg.confusion_rules.push_back({"fire-engine", PoseView::Front, "ambulance", 1.0});
  const auto out = SimulatedDetector(cfg).identify(f, 0);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].label, "ambulance");
  // Rule is pose specific.
  const auto side = frame_with(64, 48, 3, "fire-engine", PoseView::Side, 10, 10, 20, 20);
  EXPECT_EQ(SimulatedDetector(cfg).identify(side, 0)[0].label, "fire-engine");
}

TEST(Identify, OccludedFrameIsEmpty) {
  auto f = VisualFrame::empty();
  for (auto& px : f.pixels) px.visibility = 0.01;
  EXPECT_TRUE(SimulatedDetector(quiet()).identify(f, 0).empty());
}

TEST(Identify, UnknownLabelsFiltered) {
  const auto f = frame_with(64, 48, 3, "rock", PoseView::None, 10, 10, 20, 20);
  auto cfg = quiet();
  cfg.labels = {"dog", "cat"};
  EXPECT_TRUE(SimulatedDetector(cfg).identify(f, 0).empty());
}

TEST(Identify, ConfidenceDistribution) {
  const auto f = frame_with(16, 16, 1, "dog", PoseView::Side, 4, 4, 8, 8);
  const SimulatedDetector det(quiet(99));
  double lo = 1.0, hi = 0.0, sum = 0.0;
  for (int t = 0; t < 10'000; ++t) {
    const double c = det.identify(f, t).at(0).confidence;
    lo = std::min(lo, c);
    hi = std::max(hi, c);
    sum += c;
  }
  EXPECT_GE(lo, 0.60);
  EXPECT_LE(hi, 0.95);
  EXPECT_GE(sum / 10'000, 0.74);
  EXPECT_LE(sum / 10'000, 0.81);
}

TEST(Identify, ConfusionFrequencyTracksProbability) {
  const auto f = frame_with(16, 16, 1, "fire-engine", PoseView::Front, 4, 4, 8, 8);
  for (double p : {0.1, 0.35, 0.8}) {
    auto cfg = quiet(5);
    cfg.confusion_rules.push_back({"fire-engine", PoseView::Front, "ambulance", p});
    const SimulatedDetector det(cfg);
    int hits = 0;
    for (int t = 0; t < 10'000; ++t) hits += det.identify(f, t)[0].label == "ambulance";
    EXPECT_NEAR(hits / 10'000.0, p, 0.02) << p;
  }
}

TEST(Identify, MultipleRulesPartitionOneDraw) {
  const auto f = frame_with(16, 16, 1, "fire-engine", PoseView::Front, 4, 4, 8, 8);
  auto cfg = quiet(6);
  cfg.confusion_rules.push_back({"fire-engine", PoseView::Front, "ambulance", 0.3});
  cfg.confusion_rules.push_back({"fire-engine", PoseView::Front, "moving-van", 0.2});
  const SimulatedDetector det(cfg);
  int amb = 0, van = 0;
  for (int t = 0; t < 10'000; ++t) {
    const auto l = det.identify(f, t)[0].label;
    amb += l == "ambulance";
    van += l == "moving-van";
  }
  EXPECT_NEAR(amb / 10'000.0, 0.3, 0.02);
  EXPECT_NEAR(van / 10'000.0, 0.2, 0.02);
}

TEST(Identify, DeterministicForSeedAndTick) {
  const auto f = frame_with(16, 16, 1, "dog", PoseView::Side, 4, 4, 8, 8);
  auto cfg = quiet(7);
  cfg.fp_rate = 0.5;
  cfg.labels = {"dog", "cat"};
  const SimulatedDetector a(cfg), b(cfg);
  for (int t = 0; t < 50; ++t) {
    const auto x = a.locate(f, t), y = b.locate(f, t);
    ASSERT_EQ(x.size(), y.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
      ASSERT_EQ(x[k].label, y[k].label);
      ASSERT_EQ(x[k].confidence, y[k].confidence);
      ASSERT_EQ(x[k].box, y[k].box);
    }
  }
}

TEST(Locate, FootprintBoxDilatedFivePercent) {
  // Pixels 40..59 of 100 span [0.4, 0.6].
  const auto f = frame_with(100, 100, 2, "dog", PoseView::Side, 40, 40, 59, 59);
  const auto out = SimulatedDetector(quiet()).locate(f, 0);
  ASSERT_EQ(out.size(), 1u);
  ASSERT_TRUE(out[0].box.has_value());
  EXPECT_NEAR(out[0].box->cx, 0.5, 1e-12);
  EXPECT_NEAR(out[0].box->cy, 0.5, 1e-12);
  EXPECT_NEAR(out[0].box->w, 0.21, 1e-12);
  EXPECT_NEAR(out[0].box->h, 0.21, 1e-12);
}

TEST(Locate, BoxStaysInsideUnitSquare) {
  const auto f = frame_with(64, 48, 2, "dog", PoseView::Side, 0, 0, 63, 10);
  const auto b = *SimulatedDetector(quiet()).locate(f, 0)[0].box;
  EXPECT_GE(b.cx - b.w / 2, -1e-12);
  EXPECT_LE(b.cx + b.w / 2, 1 + 1e-12);
  EXPECT_GE(b.cy - b.h / 2, -1e-12);
}

TEST(Locate, NoFalsePositiveAtZeroRate) {
  EXPECT_TRUE(SimulatedDetector(quiet()).locate(VisualFrame::empty(), 0).empty());
}

TEST(Locate, ForcedFalsePositiveOnEmptyFrame) {
  auto cfg = quiet();
  cfg.fp_rate = 1.0;
  cfg.labels = {"dog", "cat", "orange"};
  const SimulatedDetector det(cfg);
  for (int t = 0; t < 100; ++t) {
    const auto out = det.locate(VisualFrame::empty(), t);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_TRUE(cfg.knows(out[0].label));
    EXPECT_FALSE(out[0].entity_id.has_value());
    const auto& b = *out[0].box;
    EXPECT_GE(b.cx - b.w / 2, 0.0);
    EXPECT_LE(b.cy + b.h / 2, 1.0);
  }
}

TEST(Config, RejectsBadValues) {
  DetectorConfig c;
  c.conf_low = 0.9;
  c.conf_high = 0.8;
  EXPECT_THROW(SimulatedDetector{c}, Error);
  c = DetectorConfig{};
  c.fp_rate = 2.0;
  EXPECT_THROW(SimulatedDetector{c}, Error);
}

// ---------------------------------------------------------------- geolocate

TEST(Geolocate, CenteredBoxIsDirectlyBelow) {
  const auto origin = GeoFix::from_degrees(37.0, -122.0, 10.0);
  Detection d;
  d.box = Box{0.5, 0.5, 0.1, 0.1};
  const auto g = geolocate(d, origin, 1000, 90.0);
  EXPECT_EQ(g.lat_e7, origin.lat_e7);
  EXPECT_EQ(g.lon_e7, origin.lon_e7);
  EXPECT_EQ(g.alt_cm, 0);
}

TEST(Geolocate, RightEdgeIsAltitudeEast) {
  const auto off = geolocate_offset(Box{1.0, 0.5, 0, 0}, 1000, 90.0);
  EXPECT_NEAR(off.x_m, 10.0, 1e-9);
  EXPECT_NEAR(off.y_m, 0.0, 1e-12);
  const auto drone = GeoFix::from_degrees(37.0, -122.0, 10.0);
  Detection d;
  d.box = Box{1.0, 0.5, 0, 0};
  const auto p = geo_to_local(geolocate(d, drone, 1000, 90.0), GeoFix{drone.lat_e7, drone.lon_e7, 0});
  EXPECT_NEAR(p.x_m, 10.0, 0.01);
}

TEST(Geolocate, TopEdgeIsAltitudeNorth) {
  const auto off = geolocate_offset(Box{0.5, 0.0, 0, 0}, 1000, 90.0);
  EXPECT_NEAR(off.x_m, 0.0, 1e-12);
  EXPECT_NEAR(off.y_m, 10.0, 1e-9);
}

TEST(Geolocate, LinearInBoxAndAltitude) {
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    const Box b{rng.uniform(), rng.uniform(), 0, 0};
    const int alt = static_cast<int>(rng.uniform_int(100, 5000));
    const double fov = rng.uniform(20.0, 110.0);
    const auto a = geolocate_offset(b, alt, fov);
    const auto twice = geolocate_offset(b, 2 * alt, fov);
    ASSERT_NEAR(twice.x_m, 2 * a.x_m, 1e-9);
    ASSERT_NEAR(twice.y_m, 2 * a.y_m, 1e-9);
    const double k = alt / 100.0 * std::tan(fov * std::numbers::pi / 360.0);
    ASSERT_NEAR(a.x_m, k * (2 * b.cx - 1), 1e-9);
    ASSERT_NEAR(a.y_m, k * (1 - 2 * b.cy), 1e-9);
  }
}

TEST(Geolocate, ZeroAltitudeIsDegenerate) {
  try {
    geolocate_offset(Box{}, 0, 60.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateGeometry);
  }
}

TEST(Geolocate, AgreesWithCameraModel) {
  // Box from a rendered nadir frame projects back near the entity's position.
  WorldSnapshot w;
  w.origin = GeoFix::from_degrees(37.0, -122.0);
  w.smoke = SmokeField(10, 10, 10.0, -50, -50);
  Entity e;
  e.id = 1;
  e.label = "dog";
  e.position = {3.0, -2.0, 0.0};
  e.radius_m = 0.4;
  w.entities.push_back(e);
  const auto frame = capture_visual(w, CameraPose::nadir({0, 0, 15}), 60);
  const auto d = SimulatedDetector(quiet()).locate(frame, 0).at(0);
  const auto off = geolocate_offset(*d.box, 1500, 60.0);
  EXPECT_NEAR(off.x_m, 3.0, 0.4);
  EXPECT_NEAR(off.y_m, -2.0, 0.4);
}
