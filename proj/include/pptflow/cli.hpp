#pragma once

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pptflow/checkpoint.hpp"
#include "pptflow/error.hpp"
#include "pptflow/flow_features.hpp"
#include "pptflow/fuzzy.hpp"
#include "pptflow/io.hpp"
#include "pptflow/model.hpp"
#include "pptflow/plot.hpp"
#include "pptflow/spectral.hpp"
#include "pptflow/training.hpp"

namespace pptflow::cli {

// ---------------------------------------------------------------------------
// Generic numeric CSV tables.

struct SeriesTable {
  std::vector<std::string> names;
  Tensor values;  // [rows, C]

  std::size_t rows() const { return values.shape()[0]; }
  std::size_t cols() const { return names.size(); }

  std::optional<std::size_t> find(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) return std::nullopt;
    return static_cast<std::size_t>(it - names.begin());
  }

  std::size_t require(const std::string& name, const std::string& source) const {
    auto i = find(name);
    if (!i) fail(ErrorKind::kSchema, source + ": missing column '" + name + "'");
    return *i;
  }

  std::vector<double> column(std::size_t j) const {
    std::vector<double> out(rows());
    for (std::size_t r = 0; r < rows(); ++r) out[r] = values[r * cols() + j];
    return out;
  }
};

inline SeriesTable read_series_csv(const std::filesystem::path& path) {
  CsvTable t = CsvTable::load(path);
  if (t.rows() == 0) fail(ErrorKind::kDomain, path.string() + ": no data rows");
  SeriesTable s{t.header(), Tensor(Shape{t.rows(), t.header().size()})};
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t j = 0; j < s.cols(); ++j) s.values[r * s.cols() + j] = t.number(r, j);
  if (!s.values.all_finite()) fail(ErrorKind::kSchema, path.string() + ": non-finite values");
  return s;
}

inline std::string series_csv(const std::vector<std::string>& names, const Tensor& values) {
  std::string out;
  for (std::size_t j = 0; j < names.size(); ++j) out += (j ? "," : "") + names[j];
  out += '\n';
  const std::size_t c = names.size();
  for (std::size_t r = 0; r < values.size() / c; ++r) {
    for (std::size_t j = 0; j < c; ++j) out += (j ? "," : "") + format_number(values[r * c + j]);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// key=value run configuration.

struct RunConfig {
  PPTNetConfig model;
  TrainConfig train;
  std::size_t lookback = 0;  // 0: twice the horizon
  std::size_t stride = 1;
  std::vector<std::string> targets;  // column names; empty means all columns
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  for (std::string item; std::getline(ss, item, ',');) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size() && std::isfinite(d)) return d;
  } catch (const std::exception&) {
  }
  fail(ErrorKind::kSchema, "config key '" + key + "': '" + v + "' is not a number");
}

inline std::size_t parse_count(const std::string& key, const std::string& v) {
  const double d = parse_real(key, v);
  if (d < 0 || d != std::floor(d)) fail(ErrorKind::kSchema, "config key '" + key + "': '" + v + "' is not a non-negative integer");
  return static_cast<std::size_t>(d);
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(ErrorKind::kSchema, "config key '" + key + "': '" + v + "' is not a boolean");
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

inline const std::map<std::string, Setter>& config_schema() {
  static const std::map<std::string, Setter> schema = [] {
    std::map<std::string, Setter> m;
    auto count = [&](const char* k, auto member) { m[k] = [member](RunConfig& c, const std::string& key, const std::string& v) { member(c) = parse_count(key, v); }; };
    auto real = [&](const char* k, auto member) { m[k] = [member](RunConfig& c, const std::string& key, const std::string& v) { member(c) = parse_real(key, v); }; };
    auto flag = [&](const char* k, auto member) { m[k] = [member](RunConfig& c, const std::string& key, const std::string& v) { member(c) = parse_bool(key, v); }; };
    count("horizon", [](RunConfig& c) -> std::size_t& { return c.model.horizon; });
    count("lookback", [](RunConfig& c) -> std::size_t& { return c.lookback; });
    count("stride", [](RunConfig& c) -> std::size_t& { return c.stride; });
    count("d_model", [](RunConfig& c) -> std::size_t& { return c.model.d_model; });
    count("d_ff", [](RunConfig& c) -> std::size_t& { return c.model.d_ff; });
    count("heads", [](RunConfig& c) -> std::size_t& { return c.model.heads; });
    count("top_k", [](RunConfig& c) -> std::size_t& { return c.model.top_k; });
    count("periodic_blocks", [](RunConfig& c) -> std::size_t& { return c.model.periodic_blocks; });
    count("decoder_layers", [](RunConfig& c) -> std::size_t& { return c.model.decoder_layers; });
    count("aggregation_hidden", [](RunConfig& c) -> std::size_t& { return c.model.aggregation_hidden; });
    real("dropout", [](RunConfig& c) -> double& { return c.model.dropout; });
    flag("use_periodic_blocks", [](RunConfig& c) -> bool& { return c.model.use_periodic_blocks; });
    flag("use_decoder", [](RunConfig& c) -> bool& { return c.model.use_decoder; });
    real("lr_init", [](RunConfig& c) -> double& { return c.train.lr_init; });
    real("lr_min", [](RunConfig& c) -> double& { return c.train.lr_min; });
    real("weight_decay", [](RunConfig& c) -> double& { return c.train.weight_decay; });
    count("batch_size", [](RunConfig& c) -> std::size_t& { return c.train.batch_size; });
    count("epochs", [](RunConfig& c) -> std::size_t& { return c.train.epochs; });
    count("patience", [](RunConfig& c) -> std::size_t& { return c.train.patience; });
    real("stop_val_mse", [](RunConfig& c) -> double& { return c.train.stop_val_mse; });
    m["seed"] = [](RunConfig& c, const std::string& key, const std::string& v) { c.train.seed = parse_count(key, v); };
    m["kernel_sizes"] = [](RunConfig& c, const std::string& key, const std::string& v) {
      c.model.kernel_sizes.clear();
      for (const auto& item : split_list(v)) c.model.kernel_sizes.push_back(parse_count(key, item));
    };
    m["targets"] = [](RunConfig& c, const std::string&, const std::string& v) { c.targets = split_list(v); };
    return m;
  }();
  return schema;
}

}  // namespace detail

inline std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : detail::config_schema()) keys.push_back(k);
  return keys;
}

/// Applies `key = value` lines ('#' starts a comment) on top of `cfg`. Unknown keys are rejected.
inline void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& source) {
  std::stringstream ss(text);
  std::size_t line_no = 0;
  for (std::string line; std::getline(ss, line);) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(line_no);
    if (eq == std::string::npos) fail(ErrorKind::kSchema, where + ": expected key=value");
    const std::string key = detail::trim(line.substr(0, eq)), value = detail::trim(line.substr(eq + 1));
    const auto& schema = detail::config_schema();
    auto it = schema.find(key);
    if (it == schema.end()) fail(ErrorKind::kSchema, where + ": unknown config key '" + key + "'");
    try {
      it->second(cfg, key, value);
    } catch (const Error& e) {
      fail(ErrorKind::kSchema, where + ": " + e.what());
    }
  }
}

/// PPTFLOW_SEED overrides the seed from the config file; an explicit --seed flag overrides both.
inline void apply_seed_env(RunConfig& cfg) {
  if (const char* env = std::getenv("PPTFLOW_SEED"); env && *env) {
    try {
      cfg.train.seed = detail::parse_count("PPTFLOW_SEED", env);
    } catch (const Error& e) {
      fail(ErrorKind::kSchema, e.what());
    }
  }
}

// ---------------------------------------------------------------------------
// Commands.

struct Io {
  std::ostream& out;
  std::ostream& err;
};

inline std::filesystem::path sidecar_path(const std::filesystem::path& p) { return std::filesystem::path(p.string() + ".json"); }

struct ExtractArgs {
  std::string meta, tracks, tracks_meta, direction = "positive_x", out;
};

inline int cmd_extract(const ExtractArgs& a, Io io) {
  const Direction dir = parse_direction(a.direction);
  Segment seg = load_segment_files(a.meta, a.tracks_meta, a.tracks);
  TimeSeriesDataset ds = build_timeseries(seg.tracks, seg.meta, dir);
  const std::string csv = flow_csv(ds);
  const std::string stats = flow_sidecar(ds, seg.meta).dump(2) + "\n";
  write_file_atomic(a.out, csv);
  write_file_atomic(sidecar_path(a.out), stats);
  io.out << "wrote " << ds.rows() << " rows to " << a.out << "\n";
  return 0;
}

struct DetectArgs {
  std::string data, out;
  std::vector<std::string> columns;
  std::size_t k = 6;
  std::size_t length = 0;  // 0: the whole series
};

inline int cmd_detect_periods(const DetectArgs& a, Io io) {
  SeriesTable s = read_series_csv(a.data);
  std::vector<std::size_t> cols;
  if (a.columns.empty()) {
    for (std::size_t j = 0; j < s.cols(); ++j)
      if (s.names[j] != "second" && s.names[j] != "step") cols.push_back(j);
  } else {
    for (const auto& c : a.columns) cols.push_back(s.require(c, a.data));
  }
  if (cols.empty()) fail(ErrorKind::kSchema, a.data + ": no columns to analyse");
  const std::size_t len = a.length == 0 ? s.rows() : a.length;
  if (len > s.rows()) fail(ErrorKind::kDomain, "requested length " + std::to_string(len) + " exceeds the series (" + std::to_string(s.rows()) + " rows)");
  if (len < 4) fail(ErrorKind::kDomain, "period detection needs at least 4 rows");
  const std::size_t first = s.rows() - len;
  Tensor x(Shape{1, len, cols.size()});
  for (std::size_t t = 0; t < len; ++t)
    for (std::size_t j = 0; j < cols.size(); ++j) x[t * cols.size() + j] = s.values[(first + t) * s.cols() + cols[j]];
  // Remove per-column scale so no single feature dominates the shared spectrum.
  NormStats norm = fit_norm_stats(x.reshaped(Shape{len, cols.size()}), len);
  for (std::size_t t = 0; t < len; ++t)
    for (std::size_t j = 0; j < cols.size(); ++j) x[t * cols.size() + j] = (x[t * cols.size() + j] - norm.mean[j]) / norm.std[j];
  PeriodSet ps = topk_periods(amplitude_spectrum(x), a.k, len);
  nlohmann::json report{{"length", len}, {"requested_k", a.k}, {"reduced", ps.reduced()}, {"periods", nlohmann::json::array()}};
  for (std::size_t j : cols) report["columns"].push_back(s.names[j]);
  for (const auto& e : ps.entries) report["periods"].push_back({{"frequency", e.frequency}, {"period", e.period}, {"amplitude", e.weight}});
  const std::string text = report.dump(2) + "\n";
  if (a.out.empty()) {
    io.out << text;
  } else {
    write_file_atomic(a.out, text);
  }
  return 0;
}

struct TrainArgs {
  std::string data, config, out, log;
  std::optional<std::size_t> horizon, epochs;
  std::optional<std::uint64_t> seed;
};

inline RunConfig resolve_run_config(const std::string& config_path, std::optional<std::size_t> horizon, std::optional<std::uint64_t> seed) {
  RunConfig rc;
  rc.model.horizon = 15;
  if (!config_path.empty()) apply_config_text(rc, read_file(config_path), config_path);
  apply_seed_env(rc);
  if (seed) rc.train.seed = *seed;
  if (horizon) rc.model.horizon = *horizon;
  if (rc.model.horizon < 1) fail(ErrorKind::kSchema, "horizon must be >= 1");
  rc.model.lookback = rc.lookback == 0 ? 2 * rc.model.horizon : rc.lookback;
  return rc;
}

inline std::vector<std::size_t> resolve_targets(const std::vector<std::string>& names, const SeriesTable& s, const std::string& source) {
  std::vector<std::size_t> idx;
  for (const auto& n : names) idx.push_back(s.require(n, source));
  return idx;
}

inline int cmd_train(const TrainArgs& a, Io io) {
  RunConfig rc = resolve_run_config(a.config, a.horizon, a.seed);
  if (a.epochs) rc.train.epochs = *a.epochs;
  SeriesTable s = read_series_csv(a.data);
  rc.model.input_features = s.cols();
  rc.train.targets = resolve_targets(rc.targets, s, a.data);
  try {
    rc.model.validate();
    rc.train.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kSchema, e.what());
  }
  const std::size_t T = rc.model.lookback, H = rc.model.horizon;
  if (s.rows() < T + H) {
    fail(ErrorKind::kDomain, "series has " + std::to_string(s.rows()) + " rows but lookback + horizon = " + std::to_string(T + H));
  }
  WindowSplit split = window_split(s.rows(), T, H, rc.stride);
  NormStats norm = fit_norm_stats(s.values, split.train_rows());
  Tensor values = s.values;
  norm.apply(values);
  const WindowBatch train_set = make_windows(values, split.train, T, H);
  const WindowBatch val_set = make_windows(values, split.val, T, H);

  std::string log_text;
  TrainResult r = train(rc.model, init_params(rc.model, rc.train.seed), train_set, val_set, rc.train, [&](const EpochRecord& e) {
    log_text += e.to_json().dump() + "\n";
    io.err << e.to_json().dump() << "\n";
  });

  nlohmann::json meta{
      {"lookback", T},
      {"horizon", H},
      {"stride", rc.stride},
      {"batch_size", rc.train.batch_size},
      {"seed", rc.train.seed},
      {"targets", feature_mask(rc.train.targets, s.cols())},
      {"windows", {{"train", split.train.size()}, {"val", split.val.size()}, {"test", split.test.size()}}},
      {"train_rows", split.train_rows()},
      {"best_epoch", r.best_epoch},
      {"stop_reason", r.stop_reason},
  };
  if (!r.log.empty()) meta["val_metrics"] = r.best_val.to_json(s.names);
  Checkpoint ck{rc.model, r.best, norm, s.names, meta};
  const std::filesystem::path log_path = a.log.empty() ? std::filesystem::path(a.out + ".log.jsonl") : std::filesystem::path(a.log);
  save_checkpoint(a.out, ck);
  write_file_atomic(log_path, log_text);
  if (r.diverged()) {
    io.err << "error: training diverged (" << r.error << "); last good checkpoint: " << a.out << "\n";
    return exit_code(ErrorKind::kNumeric);
  }
  nlohmann::json summary{{"checkpoint", a.out}, {"log", log_path.string()}, {"epochs_run", r.log.size()}, {"stop_reason", r.stop_reason},
                         {"best_epoch", r.best_epoch}, {"val", r.best_val.to_json(s.names)}};
  io.out << summary.dump(2) << "\n";
  return 0;
}

/// Columns of `s` reordered to the checkpoint's feature list; any mismatch is an artifact error.
inline Tensor align_to_checkpoint(const SeriesTable& s, const Checkpoint& ck, const std::string& source) {
  if (s.cols() != ck.config.input_features || s.names != ck.features) {
    fail(ErrorKind::kArtifact, source + ": columns do not match the checkpoint features");
  }
  return s.values;
}

struct PredictArgs {
  std::string checkpoint, data, out;
  std::optional<std::size_t> origin;  // first input row; default: the last `lookback` rows
};

inline int cmd_predict(const PredictArgs& a, Io io) {
  Checkpoint ck = load_checkpoint(a.checkpoint);
  SeriesTable s = read_series_csv(a.data);
  Tensor values = align_to_checkpoint(s, ck, a.data);
  const std::size_t T = ck.config.lookback, H = ck.config.horizon, C = ck.config.input_features;
  if (s.rows() < T) fail(ErrorKind::kDomain, "need at least " + std::to_string(T) + " rows of history, got " + std::to_string(s.rows()));
  const std::size_t origin = a.origin.value_or(s.rows() - T);
  if (origin + T > s.rows()) fail(ErrorKind::kDomain, "origin " + std::to_string(origin) + " leaves fewer than lookback rows");
  ck.norm.apply(values);
  Tensor x(Shape{1, T, C});
  std::copy_n(values.data().begin() + static_cast<std::ptrdiff_t>(origin * C), T * C, x.data().begin());
  Tensor y = predict(x, ck.params, ck.config).reshaped(Shape{H, C});
  ck.norm.invert(y);
  Tensor table(Shape{H, C + 1});
  for (std::size_t h = 0; h < H; ++h) {
    table[h * (C + 1)] = static_cast<double>(h + 1);
    for (std::size_t j = 0; j < C; ++j) table[h * (C + 1) + 1 + j] = y[h * C + j];
  }
  std::vector<std::string> names{"step"};
  names.insert(names.end(), ck.features.begin(), ck.features.end());
  std::vector<std::string> flagged;
  for (const char* t : {"k", "v_x"})
    if (std::find(ck.features.begin(), ck.features.end(), t) != ck.features.end()) flagged.emplace_back(t);
  const nlohmann::json side{{"checkpoint", a.checkpoint}, {"origin", origin}, {"first_forecast_row", origin + T}, {"horizon", H},
                            {"evaluation_targets", flagged}};
  write_file_atomic(a.out, series_csv(names, table));
  write_file_atomic(sidecar_path(a.out), side.dump(2) + "\n");
  io.out << "wrote " << H << " forecast rows to " << a.out << "\n";
  return 0;
}

struct EvaluateArgs {
  std::string checkpoint, data, split = "test", pred, truth, out;
};

inline int cmd_evaluate(const EvaluateArgs& a, Io io) {
  nlohmann::json report;
  if (!a.pred.empty() || !a.truth.empty()) {
    if (a.pred.empty() || a.truth.empty()) fail(ErrorKind::kSchema, "--pred and --truth must be given together");
    SeriesTable p = read_series_csv(a.pred), t = read_series_csv(a.truth);
    if (p.names != t.names) fail(ErrorKind::kSchema, "prediction and truth columns differ");
    if (p.rows() != t.rows()) fail(ErrorKind::kSchema, "prediction and truth row counts differ");
    std::vector<double> mask(p.cols(), 1.0);
    for (std::size_t j = 0; j < p.cols(); ++j)
      if (p.names[j] == "step" || p.names[j] == "second") mask[j] = 0.0;
    Tensor pv = p.values, tv = t.values;
    report["physical"] = compute_metrics(pv, tv, mask).to_json(p.names);
    if (!a.checkpoint.empty()) {
      Checkpoint ck = load_checkpoint(a.checkpoint);
      NormStats norm;
      for (std::size_t j = 0; j < p.cols(); ++j) {
        auto it = std::find(ck.features.begin(), ck.features.end(), p.names[j]);
        norm.mean.push_back(it == ck.features.end() ? 0.0 : ck.norm.mean[static_cast<std::size_t>(it - ck.features.begin())]);
        norm.std.push_back(it == ck.features.end() ? 1.0 : ck.norm.std[static_cast<std::size_t>(it - ck.features.begin())]);
      }
      norm.apply(pv);
      norm.apply(tv);
      report["standardized"] = compute_metrics(pv, tv, mask).to_json(p.names);
    }
  } else {
    if (a.checkpoint.empty() || a.data.empty()) fail(ErrorKind::kSchema, "evaluate needs --checkpoint and --data, or --pred and --truth");
    Checkpoint ck = load_checkpoint(a.checkpoint);
    SeriesTable s = read_series_csv(a.data);
    Tensor values = align_to_checkpoint(s, ck, a.data);
    const std::size_t T = ck.config.lookback, H = ck.config.horizon;
    const std::size_t stride = ck.meta.value("stride", std::size_t{1});
    const std::size_t batch = ck.meta.value("batch_size", std::size_t{32});
    const std::vector<double> mask = ck.meta.value("targets", std::vector<double>(ck.config.input_features, 1.0));
    if (mask.size() != ck.config.input_features) fail(ErrorKind::kArtifact, a.checkpoint + ": target mask does not match the features");
    if (s.rows() < T + H) fail(ErrorKind::kDomain, "series shorter than lookback + horizon");
    WindowSplit split = window_split(s.rows(), T, H, stride);
    const std::vector<std::size_t>* origins = nullptr;
    if (a.split == "train") origins = &split.train;
    else if (a.split == "val") origins = &split.val;
    else if (a.split == "test") origins = &split.test;
    else fail(ErrorKind::kSchema, "--split must be train, val or test");
    if (origins->empty()) fail(ErrorKind::kDomain, "the " + a.split + " split has no windows");
    ck.norm.apply(values);
    WindowBatch w = make_windows(values, *origins, T, H);
    Tensor pred = predict_batched(w.inputs, ck.params, ck.config, batch);
    report["standardized"] = compute_metrics(pred, w.targets, mask).to_json(s.names);
    ck.norm.invert(pred);
    ck.norm.invert(w.targets);
    report["physical"] = compute_metrics(pred, w.targets, mask).to_json(s.names);
    report["split"] = a.split;
  }
  const std::string text = report.dump(2) + "\n";
  if (a.out.empty()) {
    io.out << text;
  } else {
    write_file_atomic(a.out, text);
  }
  return 0;
}

struct CongestionArgs {
  std::string data, out, calibrate;
  std::vector<double> density_range, speed_range;
  std::size_t grid_points = 3001;
};

inline int cmd_congestion(const CongestionArgs& a, Io io) {
  SeriesTable s = read_series_csv(a.data);
  const std::vector<double> k = s.column(s.require("k", a.data)), v = s.column(s.require("v_x", a.data));
  OutputPartition part{a.grid_points};
  part.validate();
  FuzzySystem sys;
  auto range = [](const std::vector<double>& r, const char* what) {
    if (r.size() != 2) fail(ErrorKind::kSchema, std::string("--") + what + " takes exactly two values: min,max");
    return std::pair{r[0], r[1]};
  };
  if (!a.density_range.empty() || !a.speed_range.empty()) {
    auto [k0, k1] = range(a.density_range, "density-range");
    auto [v0, v1] = range(a.speed_range, "speed-range");
    sys = {make_variable("density", k0, k1), make_variable("speed", v0, v1), part};
  } else {
    const SeriesTable cal = a.calibrate.empty() ? s : read_series_csv(a.calibrate);
    const std::string src = a.calibrate.empty() ? a.data : a.calibrate;
    sys = FuzzySystem::calibrate(cal.column(cal.require("k", src)), cal.column(cal.require("v_x", src)), part);
  }
  CongestionSeries cs = congestion_series(k, v, sys);
  std::optional<std::size_t> tcol = s.find("second");
  if (!tcol) tcol = s.find("step");
  std::string csv = "t,P,label\n";
  for (std::size_t i = 0; i < k.size(); ++i) {
    const double t = tcol ? s.values[i * s.cols() + *tcol] : static_cast<double>(i);
    csv += format_number(t) + "," + format_number(cs.probability[i]) + "," + congestion_level_name(cs.level[i]) + "\n";
  }
  write_file_atomic(a.out, csv);
  write_file_atomic(sidecar_path(a.out), sys.to_json().dump(2) + "\n");
  io.out << "wrote " << k.size() << " congestion rows to " << a.out << "\n";
  return 0;
}

struct PlotArgs {
  std::string data, forecast, out, title;
  std::vector<std::string> columns;
};

inline int cmd_plot(const PlotArgs& a, Io io) {
  const CsvTable raw = CsvTable::load(a.data);
  if (raw.rows() == 0) fail(ErrorKind::kDomain, a.data + ": empty series, nothing to plot");
  // Congestion output carries a text label column; plot only numeric columns.
  std::vector<std::string> cols = a.columns;
  if (cols.empty()) {
    for (const auto& n : raw.header())
      if (n != "second" && n != "step" && n != "t" && n != "label") cols.push_back(n);
  }
  if (cols.empty()) fail(ErrorKind::kSchema, a.data + ": no columns to plot");
  std::optional<std::size_t> xcol;
  for (const char* n : {"second", "t"})
    if (!xcol && raw.has(n)) xcol = raw.column(n);
  std::vector<PlotSeries> series;
  for (const auto& c : cols) {
    const std::size_t j = raw.column(c);
    PlotSeries ps{c, {}, {}};
    for (std::size_t r = 0; r < raw.rows(); ++r) {
      ps.x.push_back(xcol ? raw.number(r, *xcol) : static_cast<double>(r));
      ps.y.push_back(raw.number(r, j));
    }
    series.push_back(std::move(ps));
  }
  if (!a.forecast.empty()) {
    SeriesTable f = read_series_csv(a.forecast);
    const double last_x = series.front().x.back();
    const double dx = series.front().x.size() > 1 ? series.front().x.back() - series.front().x[series.front().x.size() - 2] : 1.0;
    for (const auto& c : cols) {
      const std::size_t j = f.require(c, a.forecast);
      PlotSeries ps{c + " (forecast)", {}, {}, true};
      for (std::size_t r = 0; r < f.rows(); ++r) {
        ps.x.push_back(last_x + dx * static_cast<double>(r + 1));
        ps.y.push_back(f.values[r * f.cols() + j]);
      }
      series.push_back(std::move(ps));
    }
  }
  const std::string title = a.title.empty() ? std::filesystem::path(a.data).filename().string() : a.title;
  write_file_atomic(a.out, svg_line_chart(title, xcol ? raw.header()[*xcol] : "row", cols.size() == 1 ? cols[0] : "value", series));
  io.out << "wrote " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// Entry point.

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"pptflow: traffic-flow feature extraction, periodic forecasting and fuzzy congestion scoring"};
  app.require_subcommand(1);
  Io io{out, err};

  ExtractArgs ex;
  auto* extract = app.add_subcommand("extract", "Build the per-second 12-feature flow series of one direction");
  extract->add_option("--meta", ex.meta, "recording meta CSV (frameRate, segment length, lanes)")->required();
  extract->add_option("--tracks", ex.tracks, "per-frame tracks CSV")->required();
  extract->add_option("--tracks-meta", ex.tracks_meta, "per-vehicle tracks meta CSV")->required();
  extract->add_option("--direction", ex.direction, "positive_x or negative_x")->capture_default_str();
  extract->add_option("--out", ex.out, "output flow CSV; statistics go to <out>.json")->required();

  DetectArgs dp;
  auto* detect = app.add_subcommand("detect-periods", "Report the dominant FFT periods of a series");
  detect->add_option("--data", dp.data, "numeric CSV with a header row")->required();
  detect->add_option("--columns", dp.columns, "columns to analyse (default: all but second/step)")->delimiter(',');
  detect->add_option("-k,--top-k", dp.k, "number of periods")->capture_default_str();
  detect->add_option("--length", dp.length, "analyse only the last N rows (0: all)")->capture_default_str();
  detect->add_option("--out", dp.out, "output JSON (default: stdout)");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a forecaster on a numeric CSV series");
  train_cmd->add_option("--data", tr.data, "numeric CSV series, e.g. from extract")->required();
  train_cmd->add_option("--horizon", tr.horizon, "forecast horizon H (15, 30 or 45 for flow data; default 15)");
  train_cmd->add_option("--config", tr.config, "key=value config file; keys: " + [] {
    std::string s;
    for (const auto& k : config_keys()) s += (s.empty() ? "" : ", ") + k;
    return s;
  }());
  train_cmd->add_option("--epochs", tr.epochs, "override the epoch count");
  train_cmd->add_option("--seed", tr.seed, "override the seed (beats PPTFLOW_SEED and the config file)");
  train_cmd->add_option("--out", tr.out, "checkpoint path")->required();
  train_cmd->add_option("--log", tr.log, "JSON-lines training log (default: <out>.log.jsonl)");

  PredictArgs pr;
  auto* predict_cmd = app.add_subcommand("predict", "Forecast the next H rows in physical units");
  predict_cmd->add_option("--checkpoint", pr.checkpoint, "checkpoint from train")->required();
  predict_cmd->add_option("--data", pr.data, "series CSV with the checkpoint's columns")->required();
  predict_cmd->add_option("--origin", pr.origin, "first history row (default: the last lookback rows)");
  predict_cmd->add_option("--out", pr.out, "forecast CSV; metadata goes to <out>.json")->required();

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "MAE/MSE/RMSE in standardized and physical units");
  evaluate->add_option("--checkpoint", ev.checkpoint, "checkpoint; with --data evaluates a split, with --pred/--truth supplies scaling");
  evaluate->add_option("--data", ev.data, "series CSV to cut windows from");
  evaluate->add_option("--split", ev.split, "train, val or test")->capture_default_str();
  evaluate->add_option("--pred", ev.pred, "forecast CSV");
  evaluate->add_option("--truth", ev.truth, "ground-truth CSV with the same columns");
  evaluate->add_option("--out", ev.out, "output JSON (default: stdout)");

  CongestionArgs cg;
  auto* congestion = app.add_subcommand("congestion", "Fuzzy congestion probability and label per row");
  congestion->add_option("--data", cg.data, "CSV with k and v_x columns")->required();
  congestion->add_option("--calibrate", cg.calibrate, "CSV whose k/v_x ranges calibrate the memberships (default: --data)");
  congestion->add_option("--density-range", cg.density_range, "explicit density range min,max")->delimiter(',');
  congestion->add_option("--speed-range", cg.speed_range, "explicit speed-magnitude range min,max")->delimiter(',');
  congestion->add_option("--grid-points", cg.grid_points, "defuzzification grid size (>= 1001)")->capture_default_str();
  congestion->add_option("--out", cg.out, "output CSV t,P,label; membership parameters go to <out>.json")->required();

  PlotArgs pl;
  auto* plot = app.add_subcommand("plot", "SVG line chart of CSV columns with an optional forecast overlay");
  plot->add_option("--data", pl.data, "CSV series (flow, forecast or congestion output)")->required();
  plot->add_option("--columns", pl.columns, "columns to draw (default: all numeric except the time column)")->delimiter(',');
  plot->add_option("--forecast", pl.forecast, "forecast CSV drawn dashed after the last data row");
  plot->add_option("--title", pl.title, "chart title");
  plot->add_option("--out", pl.out, "output SVG")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return exit_code(ErrorKind::kSchema);
  }

  try {
    if (extract->parsed()) return cmd_extract(ex, io);
    if (detect->parsed()) return cmd_detect_periods(dp, io);
    if (train_cmd->parsed()) return cmd_train(tr, io);
    if (predict_cmd->parsed()) return cmd_predict(pr, io);
    if (evaluate->parsed()) return cmd_evaluate(ev, io);
    if (congestion->parsed()) return cmd_congestion(cg, io);
    if (plot->parsed()) return cmd_plot(pl, io);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<const char*> argv{"pptflow"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace pptflow::cli
