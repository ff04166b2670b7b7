#pragma once
// Spectral water-quality analysis: blue-to-yellow response ratio, threshold
// classification, calibration selection across LDR sensors, and time-series
// monitoring.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pyrewatch/error.hpp"

namespace pyrewatch::turbidity {

inline constexpr double kDefaultThreshold = 1.3;
inline constexpr double kMinDivisorV = 0.05;

struct SpectralReading {
  std::string sample_id;
  double t_hours = 0.0;
  double red_v = 0.0;
  double green_v = 0.0;
  double blue_v = 0.0;
  double yellow_v = 0.0;

  bool valid() const noexcept {
    auto in = [](double v) { return v >= 0.0 && v <= 5.0; };
    return t_hours >= 0.0 && in(red_v) && in(green_v) && in(blue_v) && in(yellow_v);
  }
};

enum class Classification { Clear, Turbid };

inline std::string_view to_string(Classification c) noexcept { return c == Classification::Clear ? "Clear" : "Turbid"; }

struct CalibrationRecord {
  int ldr_mm = 5;
  double tuning_ohms = 623.0;
  double source_distance_cm = 5.0;

  friend bool operator==(const CalibrationRecord&, const CalibrationRecord&) = default;
};

struct BYRResult {
  double ratio = 1.0;
  Classification classification = Classification::Clear;
  double threshold = kDefaultThreshold;
};

// (sample.blue / ref.blue) / (sample.yellow / ref.yellow). A common gain on
// both readings cancels, which is what makes the ratio robust to LED aging.
inline double byr(const SpectralReading& sample, const SpectralReading& water_ref) {
  auto guard = [](double v, const char* what) {
    if (!(v > kMinDivisorV)) {
      throw Error(ErrorCode::DegenerateReference,
                  std::string(what) + " reading " + std::to_string(v) + " V is at or below the 0.05 V floor");
    }
  };
  guard(water_ref.blue_v, "reference blue");
  guard(water_ref.yellow_v, "reference yellow");
  guard(sample.yellow_v, "sample yellow");
  return (sample.blue_v / water_ref.blue_v) / (sample.yellow_v / water_ref.yellow_v);
}

// Strict: a ratio equal to the threshold is Clear.
inline Classification classify(double ratio, double threshold = kDefaultThreshold) noexcept {
  return ratio > threshold ? Classification::Turbid : Classification::Clear;
}

inline BYRResult analyze(const SpectralReading& sample, const SpectralReading& water_ref,
                         double threshold = kDefaultThreshold) {
  const double r = byr(sample, water_ref);
  return {r, classify(r, threshold), threshold};
}

// ---------------------------------------------------------------------------
// Calibration selection

/// Repeated readings from one sensor setup over several reference solutions.
struct SensorBatch {
  CalibrationRecord record;
  std::vector<SpectralReading> readings;  // grouped by sample_id
};

struct SensorScore {
  CalibrationRecord record;
  double range_v = 0.0;    // max - min of per-sample mean blue voltage
  double mean_sd_v = 0.0;  // mean within-sample standard deviation of blue
  double score = 0.0;
};

struct CalibrationReport {
  CalibrationRecord selected;
  std::vector<SensorScore> scores;  // sorted by ldr_mm
};

inline constexpr double kScoreEpsilon = 1e-6;

namespace detail {

inline SensorScore score_batch(const SensorBatch& batch, std::size_t min_repeats) {
  std::map<std::string, std::vector<double>> by_sample;
  for (const auto& r : batch.readings) by_sample[r.sample_id].push_back(r.blue_v);
  if (by_sample.size() < 2) {
    throw Error(ErrorCode::InsufficientReplicates,
                "sensor " + std::to_string(batch.record.ldr_mm) + " mm needs at least 2 sample types");
  }
  double lo = INFINITY, hi = -INFINITY, sd_sum = 0.0;
  for (auto& [id, values] : by_sample) {
    if (values.size() < min_repeats) {
      throw Error(ErrorCode::InsufficientReplicates, "sensor " + std::to_string(batch.record.ldr_mm) +
                                                         " mm, sample '" + id + "' has " +
                                                         std::to_string(values.size()) + " repeats (need " +
                                                         std::to_string(min_repeats) + ")");
    }
    // Sorting makes the sums independent of input order.
    std::sort(values.begin(), values.end());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    sd_sum += std::sqrt(ss / static_cast<double>(values.size() - 1));
    lo = std::min(lo, mean);
    hi = std::max(hi, mean);
  }
  SensorScore s;
  s.record = batch.record;
  s.range_v = hi - lo;
  s.mean_sd_v = sd_sum / static_cast<double>(by_sample.size());
  s.score = s.range_v / (s.mean_sd_v + kScoreEpsilon);
  return s;
}

}  // namespace detail

// Picks the sensor with the largest spread across samples relative to its
// repeat noise. Ties go to the smaller LDR.
inline CalibrationReport select_calibration(const std::vector<SensorBatch>& batches, std::size_t min_repeats = 3) {
  if (batches.size() < 2) throw Error(ErrorCode::InsufficientReplicates, "need at least 2 sensors to compare");
  CalibrationReport report;
  for (const auto& b : batches) report.scores.push_back(detail::score_batch(b, min_repeats));
  std::sort(report.scores.begin(), report.scores.end(), [](const SensorScore& a, const SensorScore& b) {
    if (a.record.ldr_mm != b.record.ldr_mm) return a.record.ldr_mm < b.record.ldr_mm;
    return a.record.tuning_ohms < b.record.tuning_ohms;
  });
  const SensorScore* best = &report.scores.front();
  for (const auto& s : report.scores) {
    if (s.score > best->score) best = &s;
  }
  report.selected = best->record;
  return report;
}

// ---------------------------------------------------------------------------
// Time-series monitoring

struct MonitorPoint {
  double t_hours = 0.0;
  std::optional<double> ratio;  // none when the reading was degenerate
  std::optional<Classification> classification;
  std::optional<std::string> error;
};

struct Run {
  Classification classification;
  double start_t;
  double end_t;
  std::size_t count;
};

struct MonitorReport {
  std::string sample_id;
  double threshold = kDefaultThreshold;
  std::vector<MonitorPoint> points;
  std::optional<double> first_turbid_t;
  std::vector<Run> runs;  // consecutive same-class stretches, degenerate points skipped
};

inline MonitorReport monitor(const std::vector<SpectralReading>& series, const SpectralReading& water_ref,
                             double threshold = kDefaultThreshold) {
  if (series.empty()) throw Error(ErrorCode::Csv, "monitor needs a nonempty series");
  for (std::size_t i = 1; i < series.size(); ++i) {
    if (series[i].t_hours < series[i - 1].t_hours) throw Error(ErrorCode::Csv, "series must be sorted by t_hours");
  }
  MonitorReport rep;
  rep.sample_id = series.front().sample_id;
  rep.threshold = threshold;
  for (const auto& s : series) {
    MonitorPoint p;
    p.t_hours = s.t_hours;
    try {
      const double r = byr(s, water_ref);
      p.ratio = r;
      p.classification = classify(r, threshold);
      if (*p.classification == Classification::Turbid && !rep.first_turbid_t) rep.first_turbid_t = s.t_hours;
      if (!rep.runs.empty() && rep.runs.back().classification == *p.classification) {
        rep.runs.back().end_t = s.t_hours;
        ++rep.runs.back().count;
      } else {
        rep.runs.push_back({*p.classification, s.t_hours, s.t_hours, 1});
      }
    } catch (const Error& e) {
      p.error = e.what();
    }
    rep.points.push_back(std::move(p));
  }
  return rep;
}

// Splits a mixed CSV into the water reference (earliest row of `ref_sample`)
// and one monitored series per other sample, in order of first appearance.
inline std::vector<MonitorReport> monitor_samples(const std::vector<SpectralReading>& rows,
                                                  const std::string& ref_sample,
                                                  double threshold = kDefaultThreshold) {
  const SpectralReading* ref = nullptr;
  std::vector<std::string> order;
  std::map<std::string, std::vector<SpectralReading>> series;
  for (const auto& r : rows) {
    if (r.sample_id == ref_sample) {
      if (!ref || r.t_hours < ref->t_hours) ref = &r;
      continue;
    }
    if (!series.count(r.sample_id)) order.push_back(r.sample_id);
    series[r.sample_id].push_back(r);
  }
  if (!ref) throw Error(ErrorCode::Csv, "reference sample '" + ref_sample + "' not found");
  if (order.empty()) throw Error(ErrorCode::Csv, "no samples besides the reference");
  std::vector<MonitorReport> out;
  for (const auto& id : order) {
    auto& s = series[id];
    std::stable_sort(s.begin(), s.end(),
                     [](const SpectralReading& a, const SpectralReading& b) { return a.t_hours < b.t_hours; });
    out.push_back(monitor(s, *ref, threshold));
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr std::string_view kCsvHeader = "sample_id,t_hours,red_v,green_v,blue_v,yellow_v";
inline constexpr std::string_view kCalibrationCsvHeader =
    "ldr_mm,tuning_ohms,source_distance_cm,sample_id,t_hours,red_v,green_v,blue_v,yellow_v";

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline double parse_number(const std::string& field, std::size_t line_no, std::string_view column) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(field, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != field.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::Csv,
                "line " + std::to_string(line_no) + ": column " + std::string(column) + " is not a number: '" + field + "'");
  }
  return v;
}

inline std::vector<std::vector<std::string>> read_rows(std::istream& in, std::string_view header) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::Csv, "empty CSV");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
  if (!line.empty() && line.back() == '\r') throw Error(ErrorCode::Csv, "CSV must use LF line endings");
  if (line != header) throw Error(ErrorCode::Csv, "CSV header must be exactly: " + std::string(header));
  const std::size_t columns = split_csv_line(header).size();
  std::vector<std::vector<std::string>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line.back() == '\r') throw Error(ErrorCode::Csv, "CSV must use LF line endings");
    auto fields = split_csv_line(line);
    if (fields.size() != columns) {
      throw Error(ErrorCode::Csv, "line " + std::to_string(line_no) + ": expected " + std::to_string(columns) +
                                      " fields, got " + std::to_string(fields.size()));
    }
    fields.push_back(std::to_string(line_no));
    rows.push_back(std::move(fields));
  }
  return rows;
}

inline SpectralReading reading_from(const std::vector<std::string>& f, std::size_t offset, std::size_t line_no) {
  SpectralReading r;
  r.sample_id = f[offset];
  r.t_hours = parse_number(f[offset + 1], line_no, "t_hours");
  r.red_v = parse_number(f[offset + 2], line_no, "red_v");
  r.green_v = parse_number(f[offset + 3], line_no, "green_v");
  r.blue_v = parse_number(f[offset + 4], line_no, "blue_v");
  r.yellow_v = parse_number(f[offset + 5], line_no, "yellow_v");
  if (!r.valid()) {
    throw Error(ErrorCode::Csv, "line " + std::to_string(line_no) + ": voltages must be in [0, 5] and t_hours >= 0");
  }
  return r;
}

}  // namespace detail

inline std::vector<SpectralReading> read_readings(std::istream& in) {
  std::vector<SpectralReading> out;
  for (const auto& f : detail::read_rows(in, kCsvHeader)) {
    out.push_back(detail::reading_from(f, 0, std::stoul(f.back())));
  }
  return out;
}

inline std::vector<SpectralReading> read_readings_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Csv, "cannot open " + path);
  return read_readings(in);
}

inline std::vector<SensorBatch> read_calibration(std::istream& in) {
  std::vector<SensorBatch> batches;
  for (const auto& f : detail::read_rows(in, kCalibrationCsvHeader)) {
    const std::size_t line_no = std::stoul(f.back());
    CalibrationRecord rec;
    rec.ldr_mm = static_cast<int>(detail::parse_number(f[0], line_no, "ldr_mm"));
    rec.tuning_ohms = detail::parse_number(f[1], line_no, "tuning_ohms");
    rec.source_distance_cm = detail::parse_number(f[2], line_no, "source_distance_cm");
    if (!(rec.tuning_ohms > 0.0) || !(rec.source_distance_cm > 0.0)) {
      throw Error(ErrorCode::Csv, "line " + std::to_string(line_no) + ": tuning_ohms and distance must be > 0");
    }
    auto it = std::find_if(batches.begin(), batches.end(), [&](const SensorBatch& b) { return b.record == rec; });
    if (it == batches.end()) {
      batches.push_back({rec, {}});
      it = std::prev(batches.end());
    }
    it->readings.push_back(detail::reading_from(f, 3, line_no));
  }
  return batches;
}

inline std::vector<SensorBatch> read_calibration_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Csv, "cannot open " + path);
  return read_calibration(in);
}

}  // namespace pyrewatch::turbidity
