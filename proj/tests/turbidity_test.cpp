#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "pyrewatch/rng.hpp"
#include "pyrewatch/turbidity.hpp"

using namespace pyrewatch;
using namespace pyrewatch::turbidity;

namespace {

SpectralReading reading(std::string id, double t, double blue, double yellow, double red = 2.5, double green = 2.7) {
  return {std::move(id), t, red, green, blue, yellow};
}

std::string fixture(const char* name) { return std::string(PYREWATCH_SOURCE_DIR) + "/tests/fixtures/" + name; }

// Welford's running variance; a separate route to the per-sample statistics.
struct Stats {
  double n = 0, mean = 0, m2 = 0;
  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }
  double sd() const { return std::sqrt(m2 / (n - 1)); }
};

double oracle_score(const SensorBatch& b) {
  std::map<std::string, Stats> s;
  for (const auto& r : b.readings) s[r.sample_id].add(r.blue_v);
  double lo = 1e9, hi = -1e9, sd = 0;
  for (auto& [k, v] : s) {
    lo = std::min(lo, v.mean);
    hi = std::max(hi, v.mean);
    sd += v.sd();
  }
  return (hi - lo) / (sd / static_cast<double>(s.size()) + 1e-6);
}

SensorBatch synthetic_batch(int mm, double ohms, std::vector<double> means, double sd, std::uint64_t seed) {
  Rng rng(seed);
  SensorBatch b{{mm, ohms, 5.0}, {}};
  const char* ids[] = {"water", "salt", "sugar", "coconut"};
  for (std::size_t k = 0; k < means.size(); ++k)
    for (int rep = 0; rep < 5; ++rep)
      b.readings.push_back(reading(ids[k], 0, std::clamp(means[k] + sd * rng.normal(), 0.0, 5.0), 3.2));
  return b;
}

}  // namespace

TEST(Byr, SelfReferenceIsOne) {
  const auto s = reading("w", 0, 3.1, 3.2);
  EXPECT_DOUBLE_EQ(byr(s, s), 1.0);
}

TEST(Byr, HandComputedExample) {
  const auto ref = reading("w", 0, 3.30, 3.20);
  const auto s = reading("c", 16, 2.079, 1.60);
  EXPECT_NEAR(byr(s, ref), 1.26, 1e-9);
}

TEST(Byr, GuardsDarkDivisors) {
  const auto ref = reading("w", 0, 3.30, 3.20);
  for (auto [sample, r] : {std::pair{reading("c", 0, 2.0, 0.05), ref}, std::pair{reading("c", 0, 2.0, 1.0), reading("w", 0, 0.04, 3.2)},
                           std::pair{reading("c", 0, 2.0, 1.0), reading("w", 0, 3.3, 0.0)}}) {
    try {
      byr(sample, r);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::DegenerateReference);
    }
  }
  // Sample blue may legitimately be dark.
  EXPECT_EQ(byr(reading("c", 0, 0.0, 1.0), ref), 0.0);
}

TEST(Byr, IdentityForRandomReadings) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const auto s = reading("x", 0, rng.uniform(0.06, 5.0), rng.uniform(0.06, 5.0));
    ASSERT_NEAR(byr(s, s), 1.0, 1e-15);
  }
}

TEST(Byr, InvariantUnderCommonGain) {
  Rng rng(2);
  for (int i = 0; i < 10'000; ++i) {
    const auto s = reading("s", 0, rng.uniform(0.5, 3.3), rng.uniform(0.5, 3.3));
    const auto r = reading("w", 0, rng.uniform(0.5, 3.3), rng.uniform(0.5, 3.3));
    const double g = rng.uniform(0.1 + 1e-9, 1.5);
    auto gs = s, gr = r;
    for (auto* x : {&gs, &gr}) {
      x->red_v *= g;
      x->green_v *= g;
      x->blue_v *= g;
      x->yellow_v *= g;
    }
    if (gr.blue_v <= kMinDivisorV || gr.yellow_v <= kMinDivisorV || gs.yellow_v <= kMinDivisorV) continue;
    const double a = byr(s, r), b = byr(gs, gr);
    ASSERT_LE(std::abs(a - b), 1e-12 * a);
  }
}

TEST(Classify, ReportedLevelsAndBoundary) {
  EXPECT_EQ(classify(1.26), Classification::Clear);
  EXPECT_EQ(classify(1.37), Classification::Turbid);
  EXPECT_EQ(classify(1.30), Classification::Clear);
  EXPECT_EQ(classify(std::nextafter(1.3, 2.0)), Classification::Turbid);
}

TEST(Classify, MonotoneWithOneSwitch) {
  int switches = 0;
  auto prev = classify(0.01);
  for (double r = 0.01; r < 3.0; r += 0.001) {
    const auto c = classify(r);
    ASSERT_GE(c, prev);
    switches += c != prev;
    prev = c;
  }
  EXPECT_EQ(switches, 1);
}

TEST(Monitor, CoconutSeriesTurnsTurbidAt48Hours) {
  std::vector<SpectralReading> series;
  const auto ref = reading("water", 0, 3.30, 3.20);
  const double ratios[] = {1.26, 1.27, 1.37, 1.37, 1.38, 1.38};
  const double times[] = {16, 25, 48, 64, 71, 97};
  for (int k = 0; k < 6; ++k) series.push_back(reading("c", times[k], ratios[k] * 0.5 * 3.30, 1.60));
  const auto rep = monitor(series, ref);
  ASSERT_TRUE(rep.first_turbid_t.has_value());
  EXPECT_EQ(*rep.first_turbid_t, 48.0);
  ASSERT_EQ(rep.runs.size(), 2u);
  EXPECT_EQ(rep.runs[0].classification, Classification::Clear);
  EXPECT_EQ(rep.runs[0].count, 2u);
  EXPECT_EQ(rep.runs[1].start_t, 48.0);
  EXPECT_EQ(rep.runs[1].end_t, 97.0);
}

TEST(Monitor, AllClearHasNoTransition) {
  const auto ref = reading("water", 0, 3.30, 3.20);
  const auto rep = monitor({reading("c", 1, 1.0, 1.6), reading("c", 2, 1.1, 1.6)}, ref);
  EXPECT_FALSE(rep.first_turbid_t.has_value());
}

TEST(Monitor, SingleTurbidPointAtZero) {
  const auto ref = reading("water", 0, 3.30, 3.20);
  const auto rep = monitor({reading("c", 0, 1.4 * 0.5 * 3.3, 1.6)}, ref);
  EXPECT_EQ(rep.first_turbid_t, 0.0);
}

TEST(Monitor, DegeneratePointFlaggedNotFatal) {
  const auto ref = reading("water", 0, 3.30, 3.20);
  const auto rep = monitor({reading("c", 0, 2.0, 1.6), reading("c", 1, 2.0, 0.01), reading("c", 2, 2.3, 1.6)}, ref);
  ASSERT_EQ(rep.points.size(), 3u);
  EXPECT_FALSE(rep.points[1].ratio.has_value());
  EXPECT_TRUE(rep.points[1].error.has_value());
  EXPECT_EQ(rep.first_turbid_t, 2.0);
}

TEST(Monitor, RejectsUnsortedOrEmpty) {
  const auto ref = reading("water", 0, 3.30, 3.20);
  EXPECT_THROW(monitor({}, ref), Error);
  EXPECT_THROW(monitor({reading("c", 5, 2, 1.6), reading("c", 1, 2, 1.6)}, ref), Error);
}

TEST(Fixture, CoconutSeriesMatchesReportedLevels) {
  const auto rows = read_readings_file(fixture("coconut_water.csv"));
  const auto ref = *std::find_if(rows.begin(), rows.end(), [](auto& r) { return r.sample_id == "water"; });
  std::vector<SpectralReading> series;
  for (const auto& r : rows)
    if (r.sample_id == "coconut") series.push_back(r);
  const auto rep = monitor(series, ref);
  ASSERT_EQ(rep.points.size(), 6u);
  EXPECT_NEAR(*rep.points[0].ratio, 1.26, 0.01);  // 16 h
  EXPECT_NEAR(*rep.points[3].ratio, 1.37, 0.01);  // 64 h
  EXPECT_EQ(rep.first_turbid_t, 48.0);
}

// ---------------------------------------------------------------- calibration

TEST(Calibration, PicksFiveMillimeterSensor) {
  const std::vector<SensorBatch> batches = {
      synthetic_batch(3, 235, {1.50, 2.10, 2.80, 3.40}, 0.25, 1),
      synthetic_batch(5, 623, {1.77, 2.30, 2.85, 3.28}, 0.02, 2),
      synthetic_batch(7, 973, {2.40, 2.45, 2.50, 2.55}, 0.03, 3),
  };
  const auto rep = select_calibration(batches);
  EXPECT_EQ(rep.selected.ldr_mm, 5);
  EXPECT_EQ(rep.selected.tuning_ohms, 623.0);
  ASSERT_EQ(rep.scores.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(rep.scores[k].score, oracle_score(batches[k]), 1e-9 * rep.scores[k].score);
}

TEST(Calibration, FixtureSelectsFiveMillimeter) {
  const auto rep = select_calibration(read_calibration_file(fixture("ldr_calibration.csv")));
  EXPECT_EQ(rep.selected, (CalibrationRecord{5, 623.0, 5.0}));
  EXPECT_EQ(rep.scores.size(), 3u);
}

TEST(Calibration, TieGoesToSmallerLdr) {
  auto a = synthetic_batch(7, 973, {1.0, 2.0}, 0.1, 4);
  auto b = a;
  b.record = {3, 235, 5};
  EXPECT_EQ(select_calibration({a, b}).selected.ldr_mm, 3);
}

TEST(Calibration, ZeroVarianceSensorWins) {
  SensorBatch flat{{7, 973, 3}, {}};
  for (int rep = 0; rep < 3; ++rep) {
    flat.readings.push_back(reading("a", 0, 2.0, 3.2));
    flat.readings.push_back(reading("b", 0, 2.1, 3.2));
  }
  const auto noisy = synthetic_batch(5, 623, {1.0, 3.0}, 0.01, 5);
  EXPECT_EQ(select_calibration({noisy, flat}).selected.ldr_mm, 7);
}

TEST(Calibration, TooFewRepeatsRejected) {
  auto a = synthetic_batch(3, 235, {1.0, 2.0}, 0.1, 6);
  auto b = synthetic_batch(5, 623, {1.0, 2.0}, 0.1, 7);
  b.readings.resize(b.readings.size() - 3);  // second sample now has 2 repeats
  try {
    select_calibration({a, b});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientReplicates);
  }
  EXPECT_THROW(select_calibration({a}), Error);
}

TEST(Calibration, InvariantUnderReordering) {
  std::vector<SensorBatch> batches = {
      synthetic_batch(3, 235, {1.50, 2.10, 2.80, 3.40}, 0.25, 11),
      synthetic_batch(5, 623, {1.77, 2.30, 2.85, 3.28}, 0.02, 12),
      synthetic_batch(7, 973, {2.40, 2.45, 2.50, 2.55}, 0.03, 13),
  };
  const auto base = select_calibration(batches);
  std::mt19937 gen(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::shuffle(batches.begin(), batches.end(), gen);
    for (auto& b : batches) std::shuffle(b.readings.begin(), b.readings.end(), gen);
    const auto rep = select_calibration(batches);
    ASSERT_EQ(rep.selected, base.selected);
    for (std::size_t k = 0; k < 3; ++k) ASSERT_EQ(rep.scores[k].score, base.scores[k].score);
  }
}

// ---------------------------------------------------------------- csv

TEST(Csv, ParsesExactHeader) {
  std::istringstream in("sample_id,t_hours,red_v,green_v,blue_v,yellow_v\nw,0,1,2,3,4\n");
  const auto rows = read_readings(in);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].sample_id, "w");
  EXPECT_EQ(rows[0].yellow_v, 4.0);
}

TEST(Csv, RejectsBadInput) {
  for (const char* text : {"sample_id,t,red_v,green_v,blue_v,yellow_v\n",
                           "sample_id,t_hours,red_v,green_v,blue_v,yellow_v\r\nw,0,1,2,3,4\r\n",
                           "sample_id,t_hours,red_v,green_v,blue_v,yellow_v\nw,0,1,2,3\n",
                           "sample_id,t_hours,red_v,green_v,blue_v,yellow_v\nw,0,1,2,x,4\n",
                           "sample_id,t_hours,red_v,green_v,blue_v,yellow_v\nw,0,1,2,6,4\n", ""}) {
    std::istringstream in(text);
    try {
      read_readings(in);
      ADD_FAILURE() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::Csv);
    }
  }
}
