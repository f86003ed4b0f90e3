#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "pptflow/error.hpp"
#include "pptflow/io.hpp"
#include "pptflow/tensor.hpp"

namespace pptflow {

enum class Direction { kPositiveX, kNegativeX };
enum class VehicleClass { kCar, kBus, kTruck };

inline std::string direction_name(Direction d) { return d == Direction::kPositiveX ? "positive_x" : "negative_x"; }

inline Direction parse_direction(const std::string& s) {
  if (s == "positive_x" || s == "positive" || s == "2") return Direction::kPositiveX;
  if (s == "negative_x" || s == "negative" || s == "1") return Direction::kNegativeX;
  fail(ErrorKind::kConfig, "unknown direction '" + s + "' (expected positive_x or negative_x)");
}

/// Passenger-car equivalence factors.
inline constexpr double kBusFactor = 2.0;
inline constexpr double kTruckFactor = 2.5;

// Column layout of the flow series.
enum Feature : std::size_t { kSecond, kCar, kBus, kTruck, kG, kDensity, kFlow, kVx, kVy, kAx, kAy, kOccupancy, kFeatureCount };

inline const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names{"second", "car", "bus", "truck", "G", "k",
                                              "q",      "v_x", "v_y", "a_x",   "a_y", "R_s"};
  return names;
}

inline std::size_t feature_index(const std::string& name) {
  const auto& n = feature_names();
  auto it = std::find(n.begin(), n.end(), name);
  if (it == n.end()) fail(ErrorKind::kConfig, "unknown feature '" + name + "'");
  return static_cast<std::size_t>(it - n.begin());
}

struct SegmentMeta {
  std::string segment_id;
  double frame_rate = 25.0;
  double segment_length = 0.0;
  int lanes_per_direction = 1;

  void validate() const {
    if (!(frame_rate > 0.0)) fail(ErrorKind::kDomain, "frame rate must be > 0");
    if (!(segment_length > 0.0)) fail(ErrorKind::kDomain, "segment length must be > 0");
    if (lanes_per_direction < 1) fail(ErrorKind::kDomain, "lanes per direction must be >= 1");
  }
};

struct TrackFrame {
  long frame = 0;
  double x = 0, y = 0, vx = 0, vy = 0, ax = 0, ay = 0;
};

struct VehicleTrack {
  long id = 0;
  VehicleClass cls = VehicleClass::kCar;
  Direction direction = Direction::kPositiveX;
  double length = 0.0;
  std::vector<TrackFrame> frames;
};

// ---------------------------------------------------------------------------
// Per-bin traffic quantities.

inline double equivalent_vehicles(double n_car, double n_bus, double n_truck) {
  if (n_car < 0 || n_bus < 0 || n_truck < 0) fail(ErrorKind::kDomain, "vehicle counts must be non-negative");
  return n_car + kBusFactor * n_bus + kTruckFactor * n_truck;
}

inline double traffic_density(double g, const SegmentMeta& meta) {
  if (g < 0) fail(ErrorKind::kDomain, "equivalent vehicle count must be non-negative");
  return g / (meta.lanes_per_direction * meta.segment_length);
}

struct Occupancy {
  double ratio = 0.0;
  bool overflow = false;  // raw ratio exceeded 1; `ratio` is clamped
};

inline Occupancy lane_occupancy(const std::vector<double>& lengths, const SegmentMeta& meta) {
  double total = 0.0;
  for (double l : lengths) {
    if (!(l > 0.0)) fail(ErrorKind::kDomain, "vehicle length must be > 0");
    total += l;
  }
  const double r = total / (meta.lanes_per_direction * meta.segment_length);
  if (r > 1.0) {
    warn("lane occupancy " + format_number(r) + " exceeds 1 in segment '" + meta.segment_id +
         "' (overlapping vehicle projections); clamped");
    return {1.0, true};
  }
  return {r, false};
}

/// Quantile with linear interpolation at position (n-1)q of the sorted sample.
inline double quantile_linear(std::vector<double> sorted, double q) {
  if (sorted.empty()) fail(ErrorKind::kDomain, "quantile of an empty sample");
  std::sort(sorted.begin(), sorted.end());
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Drops values outside [Q1 - 1.5 IQR, Q3 + 1.5 IQR], repeated until nothing more is removed
/// (a single pass is not idempotent). Order of survivors is preserved.
inline std::vector<double> iqr_filter(std::vector<double> values) {
  if (values.empty()) fail(ErrorKind::kDomain, "iqr_filter needs at least one value");
  while (values.size() > 1) {
    const double q1 = quantile_linear(values, 0.25), q3 = quantile_linear(values, 0.75);
    const double lo = q1 - 1.5 * (q3 - q1), hi = q3 + 1.5 * (q3 - q1);
    std::vector<double> kept;
    for (double v : values)
      if (v >= lo && v <= hi) kept.push_back(v);
    if (kept.size() == values.size()) break;
    values = std::move(kept);
  }
  return values;
}

// ---------------------------------------------------------------------------
// Time series.

struct TimeSeriesDataset {
  std::string segment_id;
  Direction direction = Direction::kPositiveX;
  Tensor values;                // [rows, 12], raw units unless `standardized`
  std::vector<bool> gap;        // kinematics carried over from a neighbouring bin
  std::vector<double> mean;     // per-feature statistics, set by standardize
  std::vector<double> std;
  bool standardized = false;

  std::size_t rows() const { return values.shape()[0]; }
};

/// Aggregates the tracks of one direction into 1-second bins spanning all tracks' frames.
inline TimeSeriesDataset build_timeseries(const std::vector<VehicleTrack>& tracks, const SegmentMeta& meta, Direction direction) {
  meta.validate();
  long first = 0, last = -1;
  bool any = false, any_dir = false;
  for (const auto& t : tracks) {
    for (const auto& f : t.frames) {
      const long bin = static_cast<long>(std::floor(static_cast<double>(f.frame) / meta.frame_rate));
      if (!any) first = last = bin;
      first = std::min(first, bin);
      last = std::max(last, bin);
      any = true;
    }
    any_dir = any_dir || (t.direction == direction && !t.frames.empty());
  }
  if (!any_dir) fail(ErrorKind::kDomain, "no tracks for direction " + direction_name(direction) + " in segment '" + meta.segment_id + "'");
  const std::size_t rows = static_cast<std::size_t>(last - first + 1);

  // bin -> vehicle -> (frame count, summed kinematics)
  struct Acc {
    const VehicleTrack* track;
    double n = 0, vx = 0, vy = 0, ax = 0, ay = 0;
  };
  std::vector<std::map<long, Acc>> bins(rows);
  for (const auto& t : tracks) {
    if (t.direction != direction) continue;
    for (const auto& f : t.frames) {
      const auto b = static_cast<std::size_t>(static_cast<long>(std::floor(static_cast<double>(f.frame) / meta.frame_rate)) - first);
      Acc& a = bins[b].try_emplace(t.id, Acc{&t}).first->second;
      a.n += 1;
      a.vx += f.vx;
      a.vy += f.vy;
      a.ax += f.ax;
      a.ay += f.ay;
    }
  }

  TimeSeriesDataset ds;
  ds.segment_id = meta.segment_id;
  ds.direction = direction;
  ds.values = Tensor(Shape{rows, kFeatureCount}, 0.0);
  ds.gap.assign(rows, false);
  auto filtered_mean = [](std::vector<double> v) {
    v = iqr_filter(std::move(v));
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = [&](Feature f) -> double& { return ds.values[r * kFeatureCount + f]; };
    row(kSecond) = static_cast<double>(first + static_cast<long>(r));
    double counts[3] = {0, 0, 0};
    std::vector<double> lengths, vx, vy, ax, ay;
    for (const auto& [id, a] : bins[r]) {
      counts[static_cast<int>(a.track->cls)] += 1;
      lengths.push_back(a.track->length);
      vx.push_back(a.vx / a.n);
      vy.push_back(a.vy / a.n);
      ax.push_back(a.ax / a.n);
      ay.push_back(a.ay / a.n);
    }
    row(kCar) = counts[0];
    row(kBus) = counts[1];
    row(kTruck) = counts[2];
    row(kG) = equivalent_vehicles(counts[0], counts[1], counts[2]);
    row(kDensity) = traffic_density(row(kG), meta);
    row(kFlow) = static_cast<double>(bins[r].size());
    row(kOccupancy) = lane_occupancy(lengths, meta).ratio;
    if (bins[r].empty()) {
      ds.gap[r] = true;
      continue;
    }
    row(kVx) = filtered_mean(vx);
    row(kVy) = filtered_mean(vy);
    row(kAx) = filtered_mean(ax);
    row(kAy) = filtered_mean(ay);
  }

  // Empty bins carry the previous kinematics forward; leading empty bins take the first observed ones.
  const Feature kin[] = {kVx, kVy, kAx, kAy};
  std::ptrdiff_t src = -1;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!ds.gap[r]) {
      if (src < 0)
        for (std::size_t back = 0; back < r; ++back)
          for (Feature f : kin) ds.values[back * kFeatureCount + f] = ds.values[r * kFeatureCount + f];
      src = static_cast<std::ptrdiff_t>(r);
    } else if (src >= 0) {
      for (Feature f : kin) ds.values[r * kFeatureCount + f] = ds.values[static_cast<std::size_t>(src) * kFeatureCount + f];
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Input files (highD-family layout).

struct Segment {
  SegmentMeta meta;
  std::vector<VehicleTrack> tracks;
};

inline VehicleClass parse_vehicle_class(std::string s, const std::string& where) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "car") return VehicleClass::kCar;
  if (s == "bus") return VehicleClass::kBus;
  if (s == "truck") return VehicleClass::kTruck;
  fail(ErrorKind::kSchema, where + ": unknown vehicle class '" + s + "'");
}

inline SegmentMeta read_recording_meta(const std::filesystem::path& path) {
  CsvTable t = CsvTable::load(path);
  if (t.rows() != 1) fail(ErrorKind::kSchema, path.string() + ": expected exactly one data row");
  SegmentMeta m;
  m.segment_id = t.text(0, t.column("id"));
  m.frame_rate = t.number(0, t.column("frameRate"));
  m.segment_length = t.number(0, t.column("segmentLength"));
  m.lanes_per_direction = static_cast<int>(t.integer(0, t.column("lanesPerDirection")));
  m.validate();
  return m;
}

/// Reads `<id>_recordingMeta.csv`, `<id>_tracksMeta.csv` and `<id>_tracks.csv` from `dir`.
inline Segment load_segment_files(const std::filesystem::path& recording_meta_path, const std::filesystem::path& meta_path,
                                  const std::filesystem::path& tracks_path) {
  Segment seg;
  seg.meta = read_recording_meta(recording_meta_path);

  CsvTable tm = CsvTable::load(meta_path);
  const std::size_t c_id = tm.column("id"), c_cls = tm.column("class"), c_dir = tm.column("drivingDirection"),
                    c_len = tm.column("length");
  std::map<long, std::size_t> index;
  for (std::size_t r = 0; r < tm.rows(); ++r) {
    VehicleTrack v;
    v.id = tm.integer(r, c_id);
    v.cls = parse_vehicle_class(tm.text(r, c_cls), meta_path.string());
    const long dir_code = tm.integer(r, c_dir);
    if (dir_code != 1 && dir_code != 2) fail(ErrorKind::kSchema, meta_path.string() + ": drivingDirection must be 1 or 2");
    v.direction = dir_code == 2 ? Direction::kPositiveX : Direction::kNegativeX;
    v.length = tm.number(r, c_len);
    if (!(v.length > 0.0)) fail(ErrorKind::kDomain, meta_path.string() + ": vehicle " + std::to_string(v.id) + " has non-positive length");
    if (!index.emplace(v.id, seg.tracks.size()).second) fail(ErrorKind::kSchema, meta_path.string() + ": duplicate id " + std::to_string(v.id));
    seg.tracks.push_back(std::move(v));
  }

  CsvTable tr = CsvTable::load(tracks_path);
  const std::size_t f_frame = tr.column("frame"), f_id = tr.column("id"), f_vx = tr.column("xVelocity"),
                    f_vy = tr.column("yVelocity"), f_ax = tr.column("xAcceleration"), f_ay = tr.column("yAcceleration");
  const bool has_xy = tr.has("x") && tr.has("y");
  for (std::size_t r = 0; r < tr.rows(); ++r) {
    const long vid = tr.integer(r, f_id);
    auto it = index.find(vid);
    if (it == index.end()) fail(ErrorKind::kSchema, tracks_path.string() + ": track id " + std::to_string(vid) + " missing from tracks meta");
    TrackFrame f;
    f.frame = tr.integer(r, f_frame);
    if (f.frame < 0) fail(ErrorKind::kSchema, tracks_path.string() + ": negative frame number");
    if (has_xy) {
      f.x = tr.number(r, tr.column("x"));
      f.y = tr.number(r, tr.column("y"));
    }
    f.vx = tr.number(r, f_vx);
    f.vy = tr.number(r, f_vy);
    f.ax = tr.number(r, f_ax);
    f.ay = tr.number(r, f_ay);
    auto& frames = seg.tracks[it->second].frames;
    if (!frames.empty() && frames.back().frame >= f.frame) {
      fail(ErrorKind::kSchema, tracks_path.string() + ": frames of vehicle " + std::to_string(vid) + " are not strictly increasing");
    }
    frames.push_back(f);
  }
  return seg;
}

inline Segment load_segment(const std::filesystem::path& dir, const std::string& id) {
  return load_segment_files(dir / (id + "_recordingMeta.csv"), dir / (id + "_tracksMeta.csv"), dir / (id + "_tracks.csv"));
}

// ---------------------------------------------------------------------------
// Standardization.

struct NormStats {
  std::vector<double> mean, std;

  void apply(Tensor& t) const {
    const std::size_t c = mean.size();
    if (t.shape().back() != c) fail(ErrorKind::kDimension, "normalization stats for " + std::to_string(c) + " features, tensor " + shape_str(t.shape()));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = (t[i] - mean[i % c]) / std[i % c];
  }

  void invert(Tensor& t) const {
    const std::size_t c = mean.size();
    if (t.shape().back() != c) fail(ErrorKind::kDimension, "normalization stats for " + std::to_string(c) + " features, tensor " + shape_str(t.shape()));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = t[i] * std[i % c] + mean[i % c];
  }
};

inline constexpr double kConstantColumnStd = 1e-12;

/// Per-column mean and population std over the first `rows` rows of values[N,C]. Columns whose
/// std falls below 1e-12 get mean 0 and std 1, so they pass through unchanged.
inline NormStats fit_norm_stats(const Tensor& values, std::size_t rows) {
  if (values.rank() != 2) fail(ErrorKind::kDimension, "fit_norm_stats expects [N,C]");
  const std::size_t n = values.shape()[0], c = values.shape()[1];
  if (rows < 1 || rows > n) fail(ErrorKind::kConfig, "standardization rows out of range");
  NormStats s{std::vector<double>(c, 0.0), std::vector<double>(c, 0.0)};
  for (std::size_t j = 0; j < c; ++j) {
    double mu = 0.0;
    for (std::size_t i = 0; i < rows; ++i) mu += values[i * c + j];
    mu /= static_cast<double>(rows);
    double var = 0.0;
    for (std::size_t i = 0; i < rows; ++i) var += (values[i * c + j] - mu) * (values[i * c + j] - mu);
    const double sd = std::sqrt(var / static_cast<double>(rows));
    if (sd < kConstantColumnStd) {
      s.mean[j] = 0.0;
      s.std[j] = 1.0;
    } else {
      s.mean[j] = mu;
      s.std[j] = sd;
    }
  }
  return s;
}

/// Z-scores the dataset with statistics from its first `train_rows` rows.
inline TimeSeriesDataset standardize(TimeSeriesDataset ds, std::size_t train_rows) {
  if (ds.standardized) fail(ErrorKind::kConfig, "dataset is already standardized");
  NormStats s = fit_norm_stats(ds.values, train_rows);
  s.apply(ds.values);
  ds.mean = std::move(s.mean);
  ds.std = std::move(s.std);
  ds.standardized = true;
  return ds;
}

inline TimeSeriesDataset destandardize(TimeSeriesDataset ds) {
  if (!ds.standardized) return ds;
  NormStats{ds.mean, ds.std}.invert(ds.values);
  ds.standardized = false;
  return ds;
}

// ---------------------------------------------------------------------------
// Windows.

struct WindowSplit {
  std::size_t lookback = 0, horizon = 0, stride = 1;
  std::size_t total_windows = 0;  // before boundary dropping
  std::vector<std::size_t> train, val, test;  // window origins (row index of first input step)

  /// Rows usable for fitting statistics: everything before the first validation window.
  std::size_t train_rows() const {
    if (!val.empty()) return val.front();
    if (train.empty()) return 0;
    return train.back() + lookback + horizon;
  }
};

/// Sliding windows of T+H rows with the given stride, split 7:2:1 by origin order. A window whose
/// rows reach into the next split's first window is dropped from the earlier split.
inline WindowSplit window_split(std::size_t series_rows, std::size_t lookback, std::size_t horizon, std::size_t stride) {
  if (horizon < 1 || lookback < horizon) fail(ErrorKind::kConfig, "window sizes need T >= H >= 1");
  if (stride < 1) fail(ErrorKind::kConfig, "window stride must be >= 1");
  const std::size_t span = lookback + horizon;
  if (series_rows < span) {
    fail(ErrorKind::kDomain, "series has " + std::to_string(series_rows) + " rows; windows need at least T+H = " + std::to_string(span));
  }
  WindowSplit s;
  s.lookback = lookback;
  s.horizon = horizon;
  s.stride = stride;
  std::vector<std::size_t> origins;
  for (std::size_t o = 0; o + span <= series_rows; o += stride) origins.push_back(o);
  const std::size_t n = origins.size();
  s.total_windows = n;
  const std::size_t n_train = n * 7 / 10, n_val = n * 2 / 10;
  s.train.assign(origins.begin(), origins.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(origins.begin() + static_cast<std::ptrdiff_t>(n_train), origins.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(origins.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), origins.end());
  auto trim = [span](std::vector<std::size_t>& earlier, const std::vector<std::size_t>& later) {
    if (later.empty()) return;
    std::erase_if(earlier, [&](std::size_t o) { return o + span > later.front(); });
  };
  trim(s.val, s.test);
  trim(s.train, s.val.empty() ? s.test : s.val);
  return s;
}

struct WindowBatch {
  Tensor inputs;   // [N,T,C]
  Tensor targets;  // [N,H,C]
  std::vector<std::size_t> origins;
};

inline WindowBatch make_windows(const Tensor& values, const std::vector<std::size_t>& origins, std::size_t lookback, std::size_t horizon) {
  if (values.rank() != 2) fail(ErrorKind::kDimension, "make_windows expects [rows, C]");
  if (origins.empty()) fail(ErrorKind::kDomain, "no windows to materialize");
  const std::size_t rows = values.shape()[0], c = values.shape()[1];
  WindowBatch b{Tensor(Shape{origins.size(), lookback, c}), Tensor(Shape{origins.size(), horizon, c}), origins};
  for (std::size_t w = 0; w < origins.size(); ++w) {
    const std::size_t o = origins[w];
    if (o + lookback + horizon > rows) fail(ErrorKind::kDomain, "window at row " + std::to_string(o) + " exceeds the series");
    std::copy_n(values.data().begin() + static_cast<std::ptrdiff_t>(o * c), lookback * c,
                b.inputs.data().begin() + static_cast<std::ptrdiff_t>(w * lookback * c));
    std::copy_n(values.data().begin() + static_cast<std::ptrdiff_t>((o + lookback) * c), horizon * c,
                b.targets.data().begin() + static_cast<std::ptrdiff_t>(w * horizon * c));
  }
  return b;
}

// ---------------------------------------------------------------------------
// Kernel density estimate.

/// Silverman's rule of thumb, 0.9 min(sd, IQR/1.34) n^(-1/5); falls back to sd or 1 when degenerate.
inline double silverman_bandwidth(const std::vector<double>& values) {
  if (values.empty()) fail(ErrorKind::kDomain, "bandwidth of an empty sample");
  const double n = static_cast<double>(values.size());
  const double mu = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - mu) * (v - mu);
  const double sd = values.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  const double iqr = (quantile_linear(values, 0.75) - quantile_linear(values, 0.25)) / 1.34;
  double spread = std::min(sd, iqr);
  if (!(spread > 0.0)) spread = sd > 0.0 ? sd : 1.0;
  return 0.9 * spread * std::pow(n, -0.2);
}

inline std::vector<double> kde_estimate(const std::vector<double>& values, const std::vector<double>& grid, double bandwidth) {
  if (values.empty()) fail(ErrorKind::kDomain, "kde_estimate needs at least one value");
  if (!(bandwidth > 0.0)) fail(ErrorKind::kConfig, "KDE bandwidth must be > 0");
  const double norm = 1.0 / (static_cast<double>(values.size()) * bandwidth * std::sqrt(2.0 * std::numbers::pi));
  std::vector<double> out(grid.size(), 0.0);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double s = 0.0;
    for (double v : values) {
      const double z = (grid[g] - v) / bandwidth;
      s += std::exp(-0.5 * z * z);
    }
    out[g] = s * norm;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output files.

inline std::string flow_csv(const TimeSeriesDataset& ds) {
  std::string out;
  const auto& names = feature_names();
  for (std::size_t j = 0; j < names.size(); ++j) out += (j ? "," : "") + names[j];
  out += '\n';
  const std::size_t c = ds.values.shape()[1];
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    for (std::size_t j = 0; j < c; ++j) {
      if (j) out += ',';
      out += format_number(ds.values[r * c + j]);
    }
    out += '\n';
  }
  return out;
}

/// Parses a flow CSV back into a raw (unstandardized) dataset.
inline TimeSeriesDataset read_flow_csv(const std::filesystem::path& path) {
  CsvTable t = CsvTable::load(path);
  const auto& names = feature_names();
  if (t.header() != names) fail(ErrorKind::kSchema, path.string() + ": header must be exactly the 12 flow features");
  if (t.rows() == 0) fail(ErrorKind::kSchema, path.string() + ": no data rows");
  TimeSeriesDataset ds;
  ds.segment_id = path.stem().string();
  ds.values = Tensor(Shape{t.rows(), kFeatureCount});
  ds.gap.assign(t.rows(), false);
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t j = 0; j < kFeatureCount; ++j) ds.values[r * kFeatureCount + j] = t.number(r, j);
  if (!ds.values.all_finite()) fail(ErrorKind::kNumeric, path.string() + ": non-finite values");
  return ds;
}

/// Sidecar metadata: segment geometry, gap rows and reference statistics over the first 70% of rows.
inline nlohmann::json flow_sidecar(const TimeSeriesDataset& ds, const SegmentMeta& meta) {
  const std::size_t ref_rows = std::max<std::size_t>(1, ds.rows() * 7 / 10);
  NormStats s = fit_norm_stats(ds.values, ref_rows);
  nlohmann::json gaps = nlohmann::json::array();
  for (std::size_t r = 0; r < ds.gap.size(); ++r)
    if (ds.gap[r]) gaps.push_back(r);
  return {
      {"segment_id", meta.segment_id},
      {"direction", direction_name(ds.direction)},
      {"frame_rate", meta.frame_rate},
      {"segment_length", meta.segment_length},
      {"lanes_per_direction", meta.lanes_per_direction},
      {"rows", ds.rows()},
      {"features", feature_names()},
      {"gap_rows", gaps},
      {"normalization", {{"rows", ref_rows}, {"mean", s.mean}, {"std", s.std}}},
  };
}

}  // namespace pptflow
