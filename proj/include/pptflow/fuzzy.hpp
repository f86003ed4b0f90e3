#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "pptflow/error.hpp"

namespace pptflow {

enum class Level { kLow, kMedium, kHigh };
enum class CongestionLevel { kLow, kMedium, kHigh, kFull };

inline const char* level_name(Level l) {
  static const char* names[] = {"low", "medium", "high"};
  return names[static_cast<int>(l)];
}

inline const char* congestion_level_name(CongestionLevel l) {
  static const char* names[] = {"low", "medium", "high", "full"};
  return names[static_cast<int>(l)];
}

/// Three equally spaced Gaussian labels over [x_min, x_max] with a shared width (x_max - x_min) / 6.
struct FuzzyVariable {
  std::string name;
  double x_min = 0.0, x_max = 1.0;
  std::array<double, 3> centers{};
  double sigma = 0.0;
};

inline FuzzyVariable make_variable(std::string name, double x_min, double x_max) {
  if (!std::isfinite(x_min) || !std::isfinite(x_max) || !(x_max > x_min)) {
    fail(ErrorKind::kConfig, "fuzzy variable '" + name + "' needs x_max > x_min");
  }
  constexpr int m = 3;
  FuzzyVariable v{std::move(name), x_min, x_max, {}, (x_max - x_min) / (2.0 * m)};
  for (int i = 0; i < m; ++i) v.centers[static_cast<std::size_t>(i)] = x_min + i / double(m - 1) * (x_max - x_min);
  return v;
}

inline FuzzyVariable build_variable(std::string name, const std::vector<double>& values) {
  if (values.empty()) fail(ErrorKind::kConfig, "fuzzy variable '" + name + "' has no calibration data");
  auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return make_variable(std::move(name), *lo, *hi);
}

inline std::array<double, 3> fuzzify(double x, const FuzzyVariable& var) {
  std::array<double, 3> mu{};
  for (std::size_t i = 0; i < 3; ++i) {
    const double z = (x - var.centers[i]) / var.sigma;
    mu[i] = std::exp(-0.5 * z * z);
  }
  return mu;
}

struct Rule {
  Level density;
  Level speed;
  CongestionLevel output;
};

/// Rules R1..R9: dense, slow traffic maps to full congestion; sparse, fast traffic to low.
inline const std::array<Rule, 9>& rule_base() {
  using L = Level;
  using C = CongestionLevel;
  static const std::array<Rule, 9> rules{{
      {L::kLow, L::kLow, C::kMedium},
      {L::kLow, L::kMedium, C::kLow},
      {L::kLow, L::kHigh, C::kLow},
      {L::kMedium, L::kLow, C::kHigh},
      {L::kMedium, L::kMedium, C::kMedium},
      {L::kMedium, L::kHigh, C::kLow},
      {L::kHigh, L::kLow, C::kFull},
      {L::kHigh, L::kMedium, C::kHigh},
      {L::kHigh, L::kHigh, C::kMedium},
  }};
  return rules;
}

using Activations = std::array<double, 9>;

inline Activations activate_rules(const std::array<double, 3>& mu_density, const std::array<double, 3>& mu_speed) {
  Activations a{};
  const auto& rules = rule_base();
  for (std::size_t r = 0; r < rules.size(); ++r) {
    a[r] = std::min(mu_density[static_cast<std::size_t>(rules[r].density)], mu_speed[static_cast<std::size_t>(rules[r].speed)]);
  }
  return a;
}

/// Four triangles on [0,1] peaking at 0, 1/3, 2/3, 1, each reaching zero at its neighbours' peaks.
struct OutputPartition {
  // 3001 points put the interior peaks 1/3 and 2/3 exactly on grid nodes.
  std::size_t grid_points = 3001;

  static double membership(CongestionLevel level, double x) {
    const double peak = static_cast<int>(level) / 3.0;
    const double d = std::abs(x - peak) * 3.0;
    return d >= 1.0 ? 0.0 : 1.0 - d;
  }

  double node(std::size_t i) const { return static_cast<double>(i) / static_cast<double>(grid_points - 1); }

  void validate() const {
    if (grid_points < 1001) fail(ErrorKind::kConfig, "defuzzification grid needs at least 1001 points");
  }
};

/// Strongest activation per output label.
inline std::array<double, 4> label_strengths(const Activations& alpha) {
  std::array<double, 4> s{};
  const auto& rules = rule_base();
  for (std::size_t r = 0; r < rules.size(); ++r) {
    auto& slot = s[static_cast<std::size_t>(rules[r].output)];
    slot = std::max(slot, alpha[r]);
  }
  return s;
}

/// Pointwise max over rules of min(label membership, activation), sampled on the partition grid.
inline std::vector<double> aggregate(const Activations& alpha, const OutputPartition& part) {
  part.validate();
  const auto s = label_strengths(alpha);
  std::vector<double> mu(part.grid_points, 0.0);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double x = part.node(i);
    for (int l = 0; l < 4; ++l)
      mu[i] = std::max(mu[i], std::min(OutputPartition::membership(static_cast<CongestionLevel>(l), x), s[static_cast<std::size_t>(l)]));
  }
  return mu;
}

/// Centroid of the sampled aggregate by the trapezoidal rule.
inline double defuzzify_centroid(const std::vector<double>& mu, const OutputPartition& part) {
  if (mu.size() != part.grid_points) fail(ErrorKind::kDimension, "aggregate does not match the defuzzification grid");
  double area = 0.0, moment = 0.0;
  for (std::size_t i = 1; i < mu.size(); ++i) {
    const double x0 = part.node(i - 1), x1 = part.node(i), h = x1 - x0;
    area += 0.5 * h * (mu[i - 1] + mu[i]);
    moment += 0.5 * h * (x0 * mu[i - 1] + x1 * mu[i]);
  }
  if (!(area > 0.0)) fail(ErrorKind::kDomain, "no fuzzy rule is activated; congestion state undefined");
  return std::clamp(moment / area, 0.0, 1.0);
}

/// Label whose clipped membership covers the most area.
inline CongestionLevel dominant_level(const Activations& alpha, const OutputPartition& part) {
  const auto s = label_strengths(alpha);
  std::array<double, 4> area{};
  for (std::size_t i = 1; i < part.grid_points; ++i) {
    const double x0 = part.node(i - 1), x1 = part.node(i);
    for (int l = 0; l < 4; ++l) {
      const auto lv = static_cast<CongestionLevel>(l);
      const double a = std::min(OutputPartition::membership(lv, x0), s[static_cast<std::size_t>(l)]);
      const double b = std::min(OutputPartition::membership(lv, x1), s[static_cast<std::size_t>(l)]);
      area[static_cast<std::size_t>(l)] += 0.5 * (x1 - x0) * (a + b);
    }
  }
  return static_cast<CongestionLevel>(std::max_element(area.begin(), area.end()) - area.begin());
}

struct CongestionPoint {
  double probability = 0.0;
  CongestionLevel level = CongestionLevel::kLow;
};

/// Density/speed inference system. Speed enters as a magnitude.
struct FuzzySystem {
  FuzzyVariable density;
  FuzzyVariable speed;
  OutputPartition partition;

  static FuzzySystem calibrate(const std::vector<double>& k, const std::vector<double>& v, OutputPartition part = {}) {
    std::vector<double> speed(v.size());
    std::transform(v.begin(), v.end(), speed.begin(), [](double x) { return std::abs(x); });
    return {build_variable("density", k), build_variable("speed", speed), part};
  }

  CongestionPoint infer(double k, double v) const {
    const Activations a = activate_rules(fuzzify(k, density), fuzzify(std::abs(v), speed));
    return {defuzzify_centroid(aggregate(a, partition), partition), dominant_level(a, partition)};
  }

  nlohmann::json to_json() const {
    auto var = [](const FuzzyVariable& f) {
      return nlohmann::json{{"x_min", f.x_min}, {"x_max", f.x_max}, {"centers", f.centers}, {"sigma", f.sigma}};
    };
    return {{"density", var(density)}, {"speed", var(speed)}, {"grid_points", partition.grid_points}};
  }
};

struct CongestionSeries {
  std::vector<double> probability;
  std::vector<CongestionLevel> level;
};

inline CongestionSeries congestion_series(const std::vector<double>& k, const std::vector<double>& v, const FuzzySystem& sys) {
  if (k.size() != v.size()) {
    fail(ErrorKind::kDimension, "density and speed series differ in length (" + std::to_string(k.size()) + " vs " +
                                    std::to_string(v.size()) + ")");
  }
  CongestionSeries out;
  for (std::size_t t = 0; t < k.size(); ++t) {
    const CongestionPoint p = sys.infer(k[t], v[t]);
    out.probability.push_back(p.probability);
    out.level.push_back(p.level);
  }
  return out;
}

}  // namespace pptflow
