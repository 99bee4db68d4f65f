#pragma once

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "kalpha/experiment_io.hpp"
#include "kalpha/kalpha.hpp"

namespace kalpha::cli {

enum ExitCode : int { ok = 0, usage = 1, io = 2, precondition = 3, degenerate = 4 };

struct DataOptions {
  std::string input;
  std::string distance;
  std::string missing = "NA";
  std::string delimiter = ",";
  bool no_header = false;
  bool row_names = false;
  std::size_t drop_row = 0;  // 1-based; 0 = none
  std::size_t min_scores = 2;
  std::string weighting = "pairable";
};

struct LoadedData {
  DataMatrix matrix;
  DistanceFunction distance = DistanceFunction::nominal();
  std::vector<std::string> dropped;
  Weighting weighting = Weighting::pairable;
};

inline LoadedData load(const DataOptions& o) {
  LoadedData d;
  if (o.distance == "nominal") {
    d.distance = DistanceFunction::nominal();
  } else if (o.distance == "interval") {
    d.distance = DistanceFunction::interval();
  } else if (o.distance == "ratio") {
    d.distance = DistanceFunction::ratio();
  } else {
    throw PreconditionError("unknown distance '" + o.distance + "'");
  }
  d.weighting = o.weighting == "pooled" ? Weighting::pooled : Weighting::pairable;
  CsvOptions csv;
  csv.missing_token = o.missing;
  if (o.delimiter == "\\t" || o.delimiter == "tab") {
    csv.delimiter = '\t';
  } else if (o.delimiter.size() == 1) {
    csv.delimiter = o.delimiter[0];
  } else {
    throw PreconditionError("delimiter must be a single character, \\t or tab");
  }
  csv.header = !o.no_header;
  csv.row_names = o.row_names;
  csv.mode = d.distance.kind() == DistanceKind::nominal ? ValueMode::categorical : ValueMode::numeric;
  DataMatrix m = load_csv(o.input, csv);
  if (o.drop_row > 0) {
    if (o.drop_row > m.units()) throw PreconditionError("--drop-row is past the last unit");
    d.dropped.push_back(m.unit_ids()[o.drop_row - 1] + " (requested)");
    m = drop_unit(m, o.drop_row - 1);
  }
  auto pruned = prune_units(m, o.min_scores);
  for (const auto i : pruned.dropped) d.dropped.push_back(m.unit_ids()[i]);
  d.matrix = std::move(pruned.matrix);
  return d;
}

inline nlohmann::json data_json(const LoadedData& d, const AnovaSummary& s) {
  return {{"units", d.matrix.units()},  {"scores", d.matrix.total()},
          {"balanced", s.balanced},     {"n_effective", s.n_effective},
          {"distance", d.distance.name()}, {"weighting", to_string(d.weighting)},
          {"dropped", d.dropped}};
}

inline nlohmann::json estimate_json(const AlphaEstimate& e) {
  nlohmann::json j{{"kind", to_string(e.kind)}, {"alpha", e.alpha}, {"flags", e.flags.names()}};
  j["theta"] = e.theta && std::isfinite(*e.theta) ? nlohmann::json(*e.theta) : nlohmann::json(nullptr);
  j["gamma"] = e.gamma && std::isfinite(*e.gamma) ? nlohmann::json(*e.gamma) : nlohmann::json(nullptr);
  return j;
}

inline std::string fixed(double v, int digits = 6) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

inline std::string opt_fixed(const std::optional<double>& v) {
  if (!v) return "NA";
  if (!std::isfinite(*v)) return *v > 0 ? "Inf" : "-Inf";
  return fixed(*v);
}

inline std::string join(const std::vector<std::string>& xs, const char* sep = ",") {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? sep : "") + xs[i];
  return out;
}

inline void print_data_plain(std::ostream& out, const LoadedData& d, const AnovaSummary& s) {
  out << "units: " << d.matrix.units() << "  scores: " << d.matrix.total()
      << "  balanced: " << (s.balanced ? "yes" : "no") << "  n_effective: " << fixed(s.n_effective, 4)
      << "  distance: " << d.distance.name() << "  weighting: " << to_string(d.weighting) << '\n';
  if (!d.dropped.empty()) out << "dropped units: " << join(d.dropped, ", ") << '\n';
}

inline double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

inline void add_data_options(CLI::App* cmd, DataOptions& o) {
  cmd->add_option("-i,--input", o.input, "CSV file: rows are units, columns are coders")->required();
  cmd->add_option("-d,--distance", o.distance, "Distance function")
      ->required()
      ->check(CLI::IsMember({"nominal", "interval", "ratio"}));
  cmd->add_option("--missing", o.missing, "Token marking a missing score (e.g. NA or .)");
  cmd->add_option("--delimiter", o.delimiter, "Field delimiter (one character, or tab)");
  cmd->add_flag("--no-header", o.no_header, "First line holds scores, not coder names");
  cmd->add_flag("--row-names", o.row_names, "First column holds unit identifiers");
  cmd->add_option("--drop-row", o.drop_row, "Remove this unit (1-based row) before analysis");
  cmd->add_option("--min-scores", o.min_scores, "Drop units with fewer scores than this")->check(CLI::PositiveNumber);
  cmd->add_option("--weighting", o.weighting, "Pooling of within-unit disagreement")
      ->check(CLI::IsMember({"pairable", "pooled"}));
}

/// Runs the command line; returns the process exit code.
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Krippendorff's alpha: point estimators, interval estimation and simulation studies", "kalpha"};
  app.require_subcommand(1);

  DataOptions data_opt;
  std::string format = "plain";
  std::size_t cores = default_workers();

  auto* est_cmd = app.add_subcommand("estimate", "Point estimates of alpha");
  add_data_options(est_cmd, data_opt);
  std::vector<std::string> estimators;
  std::string plugin = "variant";
  est_cmd->add_option("-e,--estimator", estimators, "Estimator (repeatable); default: all applicable except bc1")
      ->check(CLI::IsMember({"customary", "mle", "analytical", "variant", "bc1", "bc2"}));
  est_cmd->add_option("--plugin", plugin, "theta plugged into Var(gamma) for bc1/bc2")
      ->check(CLI::IsMember({"variant", "analytical"}));
  est_cmd->add_option("--format", format)->check(CLI::IsMember({"plain", "json", "csv"}));

  auto* int_cmd = app.add_subcommand("interval", "Confidence interval for alpha");
  add_data_options(int_cmd, data_opt);
  std::string method = "jackknife";
  std::string boot_estimator = "customary";
  double level = 0.95;
  std::size_t b = 2000;
  std::uint64_t seed = 1;
  std::string df = "a-1";
  int_cmd->add_option("-m,--method", method)->check(CLI::IsMember({"customary-boot", "improved-boot", "jackknife"}));
  int_cmd->add_option("-e,--estimator", boot_estimator, "Point estimator for improved-boot")
      ->check(CLI::IsMember({"customary", "analytical"}));
  int_cmd->add_option("--level", level, "Confidence level 1 - delta");
  int_cmd->add_option("--b", b, "Bootstrap sample size");
  int_cmd->add_option("--seed", seed);
  int_cmd->add_option("--df", df, "Jackknife degrees of freedom")->check(CLI::IsMember({"a-1", "hinkley"}));
  int_cmd->add_option("--format", format)->check(CLI::IsMember({"plain", "json", "csv"}));
  int_cmd->add_option("--cores", cores, "Worker threads (default: KALPHA_CORES or all cores)");

  auto* sim_cmd = app.add_subcommand("simulate", "Run a simulation experiment from a JSON spec");
  std::string spec_path, output_path;
  std::optional<std::uint64_t> sim_seed;
  std::optional<std::size_t> sim_replicates;
  sim_cmd->add_option("-s,--spec", spec_path, "Experiment spec (JSON)")->required();
  sim_cmd->add_option("-o,--output", output_path, "Write results here instead of standard output");
  sim_cmd->add_option("--format", format)->check(CLI::IsMember({"csv", "json"}));
  sim_cmd->add_option("--cores", cores);
  sim_cmd->add_option("--seed", sim_seed, "Override the spec seed");
  sim_cmd->add_option("--replicates", sim_replicates, "Override the spec replicate count");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return ok;
    }
    err << "error: " << e.what() << '\n';
    return usage;
  }
  if (cores < 1) {
    err << "error: --cores must be at least 1\n";
    return usage;
  }

  const auto start = std::chrono::steady_clock::now();
  try {
    if (est_cmd->parsed()) {
      const auto d = load(data_opt);
      const auto s = summarize(d.matrix, d.distance, d.weighting);
      const auto theta_plugin = plugin == "analytical" ? ThetaPlugin::analytical : ThetaPlugin::variant;
      const bool explicit_list = !estimators.empty();
      if (!explicit_list) {
        estimators = {"customary", "analytical"};
        if (s.balanced) estimators.insert(estimators.end(), {"mle", "variant", "bc2"});
      }
      std::vector<AlphaEstimate> results;
      std::vector<std::pair<std::string, std::string>> skipped;
      for (const auto& name : estimators) {
        try {
          results.push_back(estimate(*parse_estimator(name), s, theta_plugin));
        } catch (const PreconditionError& e) {
          if (explicit_list) throw;
          skipped.emplace_back(name, e.what());
        }
      }
      const double ms = elapsed_ms(start);
      if (format == "json") {
        nlohmann::json j{{"data", data_json(d, s)}, {"timing_ms", ms}};
        j["estimates"] = nlohmann::json::array();
        for (const auto& e : results) j["estimates"].push_back(estimate_json(e));
        j["skipped"] = nlohmann::json::array();
        for (const auto& [k, why] : skipped) j["skipped"].push_back({{"kind", k}, {"reason", why}});
        out << j.dump(2) << '\n';
      } else if (format == "csv") {
        out << "kind,alpha,theta,gamma,flags\n";
        for (const auto& e : results) {
          out << to_string(e.kind) << ',' << fixed(e.alpha) << ',' << opt_fixed(e.theta) << ','
              << opt_fixed(e.gamma) << ',' << join(e.flags.names(), ";") << '\n';
        }
        err << "time: " << fixed(ms, 1) << " ms\n";
      } else {
        print_data_plain(out, d, s);
        for (const auto& e : results) {
          out << std::left << std::setw(11) << to_string(e.kind) << " alpha = " << fixed(e.alpha);
          if (e.theta) out << "  theta = " << opt_fixed(e.theta);
          if (e.gamma) out << "  gamma = " << opt_fixed(e.gamma);
          if (e.flags.any()) out << "  [" << join(e.flags.names()) << ']';
          out << '\n';
        }
        for (const auto& [k, why] : skipped) out << std::left << std::setw(11) << k << " skipped: " << why << '\n';
        err << "time: " << fixed(ms, 1) << " ms\n";
      }
      return ok;
    }

    if (int_cmd->parsed()) {
      if (!(level > 0 && level < 1)) throw PreconditionError("--level must lie in (0, 1)");
      if (b < 1) throw PreconditionError("--b must be at least 1");
      const auto d = load(data_opt);
      const auto s = summarize(d.matrix, d.distance, d.weighting);
      ResamplingOptions ro;
      ro.workers = cores;
      ro.weighting = d.weighting;
      const double delta = 1.0 - level;
      AlphaEstimate point;
      ConfidenceInterval ci;
      if (method == "customary-boot") {
        point = alpha_customary(s);
        ci = bootstrap_customary(d.matrix, d.distance, b, delta, seed, ro);
      } else if (method == "improved-boot") {
        const auto kind = boot_estimator == "analytical" ? EstimatorKind::analytical : EstimatorKind::customary;
        point = estimate(kind, s);
        ci = bootstrap_improved(d.matrix, d.distance, kind, b, delta, seed, ro);
      } else {
        point = alpha_analytical(s);
        ci = jackknife_interval(d.matrix, d.distance, delta,
                                df == "hinkley" ? DfMode::hinkley : DfMode::fixed_a_minus_1, ro)
                 .interval;
      }
      const double ms = elapsed_ms(start);
      const auto& dg = ci.diagnostics;
      if (format == "json") {
        nlohmann::json iv{{"lower", ci.lower},
                          {"upper", ci.upper},
                          {"level", ci.level},
                          {"method", to_string(ci.method)},
                          {"df", dg.df ? nlohmann::json(*dg.df) : nlohmann::json(nullptr)},
                          {"discarded", dg.replicates_discarded},
                          {"requested", dg.replicates_requested},
                          {"v_jack", dg.v_jack ? nlohmann::json(*dg.v_jack) : nlohmann::json(nullptr)},
                          {"clamped", dg.clamped},
                          {"df_fallback", dg.df_fallback}};
        nlohmann::json j{
            {"data", data_json(d, s)}, {"estimate", estimate_json(point)}, {"interval", iv}, {"timing_ms", ms}};
        out << j.dump(2) << '\n';
      } else if (format == "csv") {
        out << "kind,alpha,method,level,lower,upper,df,discarded\n";
        out << to_string(point.kind) << ',' << fixed(point.alpha) << ',' << to_string(ci.method) << ','
            << fixed(ci.level, 4) << ',' << fixed(ci.lower) << ',' << fixed(ci.upper) << ','
            << (dg.df ? fixed(*dg.df, 4) : "NA") << ',' << dg.replicates_discarded << '\n';
        err << "time: " << fixed(ms, 1) << " ms\n";
      } else {
        print_data_plain(out, d, s);
        out << to_string(point.kind) << " alpha = " << fixed(point.alpha) << '\n';
        out << fixed(100 * ci.level, 1) << "% " << to_string(ci.method) << " interval: (" << fixed(ci.lower) << ", "
            << fixed(ci.upper) << ")\n";
        if (dg.df) out << "df: " << fixed(*dg.df, 4) << (dg.df_fallback ? " (fallback to a-1)" : "") << '\n';
        if (dg.v_jack) out << "V_jack: " << fixed(*dg.v_jack) << '\n';
        if (dg.replicates_requested) {
          out << "replicates: " << dg.replicates_requested << "  discarded: " << dg.replicates_discarded << '\n';
        }
        if (dg.clamped) out << "note: log-theta clamped for at least one subset\n";
        err << "time: " << fixed(ms, 1) << " ms\n";
      }
      return ok;
    }

    if (sim_cmd->parsed()) {
      std::ifstream in(spec_path);
      if (!in) throw InputError("cannot read '" + spec_path + "'");
      std::stringstream text;
      text << in.rdbuf();
      auto spec = parse_experiment_spec(text.str());
      if (sim_seed) spec.seed = *sim_seed;
      if (sim_replicates) spec.replicates = *sim_replicates;
      spec.workers = cores;
      const auto result = run_experiment(spec, [&](const std::string& msg) { err << msg << '\n'; });
      std::ofstream file;
      std::ostream* sink = &out;
      if (!output_path.empty()) {
        file.open(output_path);
        if (!file) throw InputError("cannot write '" + output_path + "'");
        sink = &file;
      }
      if (format == "json") {
        *sink << result_to_json(result).dump(2) << '\n';
      } else {
        write_result_csv(*sink, result);
      }
      err << "time: " << fixed(elapsed_ms(start), 1) << " ms\n";
      return ok;
    }
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return io;
  } catch (const DegenerateError& e) {
    err << "error: " << e.what() << '\n';
    return degenerate;
  } catch (const PreconditionError& e) {
    err << "error: " << e.what() << '\n';
    return precondition;
  }
  return usage;
}

}  // namespace kalpha::cli
