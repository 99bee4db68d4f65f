#pragma once

#include <cmath>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "kalpha/error.hpp"
#include "kalpha/simulation.hpp"

namespace kalpha {

namespace detail {

inline SimFamily parse_family(const std::string& s) {
  if (s == "gaussian") return SimFamily::gaussian;
  if (s == "student_t_df4" || s == "student_t") return SimFamily::student_t_df4;
  if (s == "copula") return SimFamily::copula;
  throw InputError("spec: unknown design family '" + s + "'");
}

inline DistanceKind parse_distance_kind(const std::string& s) {
  if (s == "nominal") return DistanceKind::nominal;
  if (s == "interval") return DistanceKind::interval;
  if (s == "ratio") return DistanceKind::ratio;
  throw InputError("spec: unknown distance '" + s + "'");
}

inline IntervalSpec parse_interval(const std::string& s) {
  if (s == "customary_boot") return {IntervalMethod::customary_boot, EstimatorKind::customary};
  if (s == "improved_boot") return {IntervalMethod::improved_boot, EstimatorKind::customary};
  if (s == "improved_boot_analytical") return {IntervalMethod::improved_boot, EstimatorKind::analytical};
  if (s == "jackknife") return {IntervalMethod::jackknife, EstimatorKind::analytical};
  throw InputError("spec: unknown interval method '" + s + "'");
}

template <typename T>
T field(const nlohmann::json& j, const char* key, const char* where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("spec: ") + where + "." + key + ": " + e.what());
  }
}

template <typename T>
T field_or(const nlohmann::json& j, const char* key, T fallback, const char* where) {
  if (!j.contains(key)) return fallback;
  return field<T>(j, key, where);
}

}  // namespace detail

/// Experiment spec schema:
///
///   {
///     "seed": 1, "replicates": 2000, "level": 0.95, "bootstrap_size": 2000,
///     "weighting": "pairable" | "pooled", "plugin": "variant" | "analytical",
///     "alpha": [0.3, 0.5] | {"from": 0.1, "to": 0.9, "step": 0.1},
///     "designs": [{"units": 16, "coders": 4,
///                  "family": "gaussian" | "student_t_df4" | "copula",
///                  "missing_rate": 0.0, "mu": 0.0, "sigma2_eps": 1.0,
///                  "pi": [0.5, 0.2, 0.3], "distance": "interval"}],
///     "estimators": ["customary", "analytical", ...],
///     "intervals": ["customary_boot", "improved_boot",
///                   "improved_boot_analytical", "jackknife"]
///   }
inline ExperimentSpec parse_experiment_spec(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("spec: top level must be an object");
  ExperimentSpec spec;
  spec.seed = detail::field_or<std::uint64_t>(j, "seed", 1, "spec");
  spec.replicates = detail::field<std::size_t>(j, "replicates", "spec");
  spec.level = detail::field_or<double>(j, "level", 0.95, "spec");
  spec.bootstrap_size = detail::field_or<std::size_t>(j, "bootstrap_size", 2000, "spec");
  const auto weighting = detail::field_or<std::string>(j, "weighting", "pairable", "spec");
  if (weighting == "pairable") {
    spec.weighting = Weighting::pairable;
  } else if (weighting == "pooled") {
    spec.weighting = Weighting::pooled;
  } else {
    throw InputError("spec: weighting must be 'pairable' or 'pooled'");
  }
  const auto plugin = detail::field_or<std::string>(j, "plugin", "variant", "spec");
  if (plugin == "variant") {
    spec.plugin = ThetaPlugin::variant;
  } else if (plugin == "analytical") {
    spec.plugin = ThetaPlugin::analytical;
  } else {
    throw InputError("spec: plugin must be 'variant' or 'analytical'");
  }

  if (!j.contains("alpha")) throw InputError("spec: missing 'alpha'");
  const auto& alpha = j.at("alpha");
  if (alpha.is_array()) {
    spec.alphas = detail::field<std::vector<double>>(j, "alpha", "spec");
  } else if (alpha.is_object()) {
    try {
      spec.alphas = alpha_grid(detail::field<double>(alpha, "from", "alpha"), detail::field<double>(alpha, "to", "alpha"),
                               detail::field<double>(alpha, "step", "alpha"));
    } catch (const PreconditionError& e) {
      throw InputError(std::string("spec: ") + e.what());
    }
  } else {
    throw InputError("spec: 'alpha' must be an array or {from, to, step}");
  }

  if (!j.contains("designs") || !j.at("designs").is_array() || j.at("designs").empty()) {
    throw InputError("spec: 'designs' must be a nonempty array");
  }
  for (const auto& d : j.at("designs")) {
    DesignSpec design;
    design.units = detail::field<std::size_t>(d, "units", "design");
    design.coders = detail::field<std::size_t>(d, "coders", "design");
    design.family = detail::parse_family(detail::field_or<std::string>(d, "family", "gaussian", "design"));
    design.missing_rate = detail::field_or<double>(d, "missing_rate", 0.0, "design");
    design.mu = detail::field_or<double>(d, "mu", 0.0, "design");
    design.sigma2_eps = detail::field_or<double>(d, "sigma2_eps", 1.0, "design");
    design.pi = detail::field_or<std::vector<double>>(d, "pi", design.pi, "design");
    if (d.contains("distance")) {
      design.distance = detail::parse_distance_kind(detail::field<std::string>(d, "distance", "design"));
    }
    spec.designs.push_back(std::move(design));
  }
  for (const auto& name : detail::field_or<std::vector<std::string>>(j, "estimators", {}, "spec")) {
    const auto k = parse_estimator(name);
    if (!k) throw InputError("spec: unknown estimator '" + name + "'");
    spec.estimators.push_back(*k);
  }
  for (const auto& name : detail::field_or<std::vector<std::string>>(j, "intervals", {}, "spec")) {
    spec.intervals.push_back(detail::parse_interval(name));
  }
  if (spec.estimators.empty() && spec.intervals.empty()) {
    throw InputError("spec: at least one of 'estimators' or 'intervals' is required");
  }
  return spec;
}

inline ExperimentSpec parse_experiment_spec(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("spec: ") + e.what());
  }
  return parse_experiment_spec(j);
}

inline ExperimentSpec parse_experiment_spec(const char* text) { return parse_experiment_spec(std::string(text)); }

inline constexpr const char* result_csv_header =
    "design,units,coders,family,missing_rate,alpha,method,kind,replicates,skipped,"
    "mean_estimate,bias,percent_bias,mse,coverage,mean_width";

namespace detail {

inline std::string num(std::optional<double> v) {
  if (!v || !std::isfinite(*v)) return "NA";
  std::ostringstream os;
  os << std::setprecision(10) << *v;
  return os.str();
}

inline nlohmann::json jnum(std::optional<double> v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

}  // namespace detail

/// One row per (design, alpha, method) cell; "NA" where not applicable.
inline void write_result_csv(std::ostream& out, const ExperimentResult& r) {
  out << result_csv_header << '\n';
  for (const auto& c : r.cells) {
    out << '"' << c.design << "\"," << c.units << ',' << c.coders << ',' << to_string(c.family) << ','
        << detail::num(c.missing_rate) << ',' << detail::num(c.alpha) << ',' << c.method << ',' << c.kind << ','
        << c.replicates << ',' << c.skipped << ',' << detail::num(c.mean_estimate) << ',' << detail::num(c.bias)
        << ',' << detail::num(c.percent_bias) << ',' << detail::num(c.mse) << ',' << detail::num(c.coverage) << ','
        << detail::num(c.mean_width) << '\n';
  }
}

/// {"cells": [{...same columns as the CSV...}]}, null where not applicable.
inline nlohmann::json result_to_json(const ExperimentResult& r) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : r.cells) {
    cells.push_back({{"design", c.design},
                     {"units", c.units},
                     {"coders", c.coders},
                     {"family", to_string(c.family)},
                     {"missing_rate", c.missing_rate},
                     {"alpha", c.alpha},
                     {"method", c.method},
                     {"kind", c.kind},
                     {"replicates", c.replicates},
                     {"skipped", c.skipped},
                     {"mean_estimate", detail::jnum(c.mean_estimate)},
                     {"bias", detail::jnum(c.bias)},
                     {"percent_bias", detail::jnum(c.percent_bias)},
                     {"mse", detail::jnum(c.mse)},
                     {"coverage", detail::jnum(c.coverage)},
                     {"mean_width", detail::jnum(c.mean_width)}});
  }
  return {{"cells", cells}};
}

}  // namespace kalpha
