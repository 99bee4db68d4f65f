#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "kalpha/anova.hpp"
#include "kalpha/data.hpp"
#include "kalpha/detail/summation.hpp"
#include "kalpha/distance.hpp"
#include "kalpha/error.hpp"
#include "kalpha/estimators.hpp"
#include "kalpha/intervals.hpp"
#include "kalpha/parallel.hpp"
#include "kalpha/rng.hpp"

namespace kalpha {

enum class UnitEffectFamily { gaussian, student_t_df4 };

/// One-way random-effects model Y_ij = mu + tau_i + eps_ij, parameterized by
/// its intraclass correlation. sigma_tau^2 = alpha / (1 - alpha) * sigma_eps^2.
struct AnovaSimConfig {
  std::size_t units = 16;
  std::size_t coders = 4;
  double mu = 0.0;
  double sigma2_eps = 1.0;
  double alpha = 0.5;
  UnitEffectFamily unit_effects = UnitEffectFamily::gaussian;
  /// Each cell goes missing independently with this probability.
  double missing_rate = 0.0;

  [[nodiscard]] double sigma2_tau() const { return alpha / (1.0 - alpha) * sigma2_eps; }
};

/// Categorical scores from a Gaussian copula whose within-unit correlation
/// is compound symmetric with parameter alpha.
struct CopulaSimConfig {
  std::size_t units = 16;
  std::size_t coders = 4;
  double alpha = 0.5;
  std::vector<double> pi{0.5, 0.2, 0.3};
};

inline constexpr double max_sim_alpha = 1.0 - 1e-9;

inline void validate(const AnovaSimConfig& c) {
  if (c.units < 1 || c.coders < 1) throw PreconditionError("design needs at least one unit and one coder");
  if (!(c.alpha >= 0.0 && c.alpha <= max_sim_alpha)) throw PreconditionError("alpha must lie in [0, 1 - 1e-9]");
  if (!(c.sigma2_eps > 0.0)) throw PreconditionError("sigma2_eps must be positive");
  if (!(c.missing_rate >= 0.0 && c.missing_rate < 1.0)) throw PreconditionError("missing_rate must lie in [0, 1)");
}

inline void validate_pi(std::span<const double> pi) {
  if (pi.empty()) throw PreconditionError("category probabilities are empty");
  double total = 0;
  for (const double p : pi) {
    if (!(p > 0.0)) throw PreconditionError("category probabilities must be positive");
    total += p;
  }
  if (std::fabs(total - 1.0) > 1e-9) throw PreconditionError("category probabilities must sum to 1");
}

inline void validate(const CopulaSimConfig& c) {
  if (c.units < 1 || c.coders < 1) throw PreconditionError("design needs at least one unit and one coder");
  if (!(c.alpha >= 0.0 && c.alpha < 1.0)) throw PreconditionError("copula alpha must lie in [0, 1)");
  validate_pi(c.pi);
}

/// Draws one dataset. Student-t unit effects are rescaled by
/// sqrt(sigma_tau^2 (df - 2) / df) so their variance is exactly sigma_tau^2.
inline DataMatrix simulate_anova(const AnovaSimConfig& c, std::uint64_t seed) {
  validate(c);
  Philox engine(seed);
  const double sd_tau = std::sqrt(c.sigma2_tau());
  std::normal_distribution<double> tau_normal(0.0, sd_tau > 0.0 ? sd_tau : 1.0);
  constexpr double df = 4.0;
  std::student_t_distribution<double> tau_t(df);
  const double t_scale = std::sqrt(c.sigma2_tau() * (df - 2.0) / df);
  std::normal_distribution<double> eps(0.0, std::sqrt(c.sigma2_eps));
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::vector<std::vector<double>> rows(c.units);
  std::vector<std::vector<std::uint32_t>> cols(c.units);
  for (std::size_t i = 0; i < c.units; ++i) {
    double tau = c.unit_effects == UnitEffectFamily::gaussian ? tau_normal(engine) : t_scale * tau_t(engine);
    if (sd_tau == 0.0) tau = 0.0;
    rows[i].reserve(c.coders);
    for (std::size_t j = 0; j < c.coders; ++j) {
      const double y = c.mu + tau + eps(engine);
      if (c.missing_rate > 0.0 && unif(engine) < c.missing_rate) continue;
      rows[i].push_back(y);
      cols[i].push_back(static_cast<std::uint32_t>(j));
    }
  }
  return DataMatrix(rows, ValueMode::numeric, {}, {}, {}, cols);
}

/// Quantile function of the categorical distribution: the smallest category
/// k (1-based) whose cumulative probability reaches u.
inline std::size_t category_from_uniform(double u, std::span<const double> pi) {
  double cumulative = 0;
  for (std::size_t k = 0; k < pi.size(); ++k) {
    cumulative += pi[k];
    if (u <= cumulative) return k + 1;
  }
  return pi.size();
}

inline double standard_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

struct CopulaDraw {
  DataMatrix scores;
  /// Latent Gaussian Z in flat (unit, coder) order.
  std::vector<double> latent;
};

/// Z_ij = sqrt(alpha) W_i + sqrt(1 - alpha) e_ij gives unit-variance Z with
/// within-unit correlation alpha; Y_ij = F^-1(Phi(Z_ij) | pi).
inline CopulaDraw simulate_copula_with_latent(const CopulaSimConfig& c, std::uint64_t seed) {
  validate(c);
  Philox engine(seed);
  std::normal_distribution<double> std_normal(0.0, 1.0);
  const double shared = std::sqrt(c.alpha), own = std::sqrt(1.0 - c.alpha);
  std::vector<std::string> labels;
  for (std::size_t k = 1; k <= c.pi.size(); ++k) labels.push_back(std::to_string(k));

  CopulaDraw out;
  out.latent.reserve(c.units * c.coders);
  std::vector<std::vector<double>> rows(c.units);
  for (std::size_t i = 0; i < c.units; ++i) {
    const double w = std_normal(engine);
    for (std::size_t j = 0; j < c.coders; ++j) {
      const double z = shared * w + own * std_normal(engine);
      out.latent.push_back(z);
      rows[i].push_back(static_cast<double>(category_from_uniform(standard_normal_cdf(z), c.pi) - 1));
    }
  }
  out.scores = DataMatrix(rows, ValueMode::categorical, std::move(labels));
  return out;
}

inline DataMatrix simulate_copula_categorical(const CopulaSimConfig& c, std::uint64_t seed) {
  return simulate_copula_with_latent(c, seed).scores;
}

// ---------------------------------------------------------------------------
// Experiments

enum class SimFamily { gaussian, student_t_df4, copula };

inline const char* to_string(SimFamily f) {
  switch (f) {
    case SimFamily::gaussian: return "gaussian";
    case SimFamily::student_t_df4: return "student_t_df4";
    case SimFamily::copula: return "copula";
  }
  return "?";
}

struct DesignSpec {
  std::size_t units = 16;
  std::size_t coders = 4;
  SimFamily family = SimFamily::gaussian;
  double missing_rate = 0.0;
  double mu = 0.0;
  double sigma2_eps = 1.0;
  std::vector<double> pi{0.5, 0.2, 0.3};
  /// Defaults to interval for continuous families, nominal for copula.
  std::optional<DistanceKind> distance;

  [[nodiscard]] DistanceFunction distance_function() const {
    const auto kind = distance.value_or(family == SimFamily::copula ? DistanceKind::nominal : DistanceKind::interval);
    switch (kind) {
      case DistanceKind::nominal: return DistanceFunction::nominal();
      case DistanceKind::interval: return DistanceFunction::interval();
      case DistanceKind::ratio: return DistanceFunction::ratio();
      case DistanceKind::custom: break;
    }
    throw PreconditionError("experiments support built-in distances only");
  }

  [[nodiscard]] std::string label() const {
    std::ostringstream os;
    os << units << 'x' << coders << ' ' << to_string(family);
    if (missing_rate > 0) os << " missing=" << missing_rate;
    return os.str();
  }

  [[nodiscard]] DataMatrix simulate(double alpha, std::uint64_t seed) const {
    if (family == SimFamily::copula) return simulate_copula_categorical({units, coders, alpha, pi}, seed);
    AnovaSimConfig c;
    c.units = units;
    c.coders = coders;
    c.mu = mu;
    c.sigma2_eps = sigma2_eps;
    c.alpha = alpha;
    c.unit_effects = family == SimFamily::gaussian ? UnitEffectFamily::gaussian : UnitEffectFamily::student_t_df4;
    c.missing_rate = missing_rate;
    return simulate_anova(c, seed);
  }
};

struct IntervalSpec {
  IntervalMethod method = IntervalMethod::jackknife;
  /// Point estimator being bootstrapped; jackknife is always analytical.
  EstimatorKind estimator = EstimatorKind::analytical;

  [[nodiscard]] std::string name() const {
    std::string n = to_string(method);
    if (method == IntervalMethod::improved_boot && estimator == EstimatorKind::analytical) n += "_analytical";
    return n;
  }
};

struct ExperimentSpec {
  std::vector<double> alphas;
  std::size_t replicates = 2000;
  std::vector<DesignSpec> designs;
  std::vector<EstimatorKind> estimators;
  std::vector<IntervalSpec> intervals;
  double level = 0.95;
  std::size_t bootstrap_size = 2000;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  Weighting weighting = Weighting::pairable;
  ThetaPlugin plugin = ThetaPlugin::variant;
};

/// Evenly spaced grid from `from` to `to` inclusive, rounded to 1e-12 so
/// that 0.1 steps give 0.3 rather than 0.30000000000000004.
inline std::vector<double> alpha_grid(double from, double to, double step) {
  if (!(step > 0) || to < from) throw PreconditionError("invalid alpha grid");
  std::vector<double> out;
  const auto count = static_cast<std::size_t>(std::floor((to - from) / step + 1e-9)) + 1;
  for (std::size_t k = 0; k < count; ++k) out.push_back(std::round((from + k * step) * 1e12) / 1e12);
  return out;
}

/// One output row: a (design, alpha, method) cell.
struct CellResult {
  std::string design;
  std::size_t units = 0;
  std::size_t coders = 0;
  SimFamily family = SimFamily::gaussian;
  double missing_rate = 0;
  double alpha = 0;
  std::string method;
  /// "estimator" or "interval".
  std::string kind;
  std::size_t replicates = 0;
  std::size_t skipped = 0;
  std::optional<double> mean_estimate;
  std::optional<double> bias;
  /// Not applicable at alpha = 0.
  std::optional<double> percent_bias;
  std::optional<double> mse;
  std::optional<double> coverage;
  std::optional<double> mean_width;
};

struct ExperimentResult {
  std::vector<CellResult> cells;

  [[nodiscard]] const CellResult* find(const std::string& design, double alpha, const std::string& method) const {
    for (const auto& c : cells) {
      if (c.design == design && std::fabs(c.alpha - alpha) < 1e-9 && c.method == method) return &c;
    }
    return nullptr;
  }
};

namespace detail {

struct ReplicateOutcome {
  std::vector<std::optional<double>> estimates;
  std::vector<std::optional<std::pair<double, double>>> intervals;
};

inline ReplicateOutcome run_replicate(const ExperimentSpec& spec, const DesignSpec& design, double alpha,
                                      std::uint64_t seed) {
  ReplicateOutcome out;
  out.estimates.resize(spec.estimators.size());
  out.intervals.resize(spec.intervals.size());
  DataMatrix data;
  try {
    data = prune_units(design.simulate(alpha, seed)).matrix;
  } catch (const PreconditionError&) {
    return out;
  }
  const auto f = design.distance_function();
  const double delta = 1.0 - spec.level;
  with_kernel(data, f, KernelOptions{}, [&](const auto& kernel) {
    std::optional<AnovaSummary> summary;
    try {
      summary = kernel.summarize(spec.weighting);
    } catch (const Error&) {
      return 0;
    }
    for (std::size_t e = 0; e < spec.estimators.size(); ++e) {
      try {
        out.estimates[e] = estimate(spec.estimators[e], *summary, spec.plugin).alpha;
      } catch (const Error&) {
      }
    }
    for (std::size_t k = 0; k < spec.intervals.size(); ++k) {
      const auto& iv = spec.intervals[k];
      const auto sub = derive_seed(seed, {0xB007u, k});
      try {
        ConfidenceInterval ci;
        switch (iv.method) {
          case IntervalMethod::customary_boot:
            ci = bootstrap_customary(kernel, spec.bootstrap_size, delta, sub, 1, spec.weighting);
            break;
          case IntervalMethod::improved_boot:
            ci = bootstrap_improved(kernel, iv.estimator, spec.bootstrap_size, delta, sub, 1, spec.weighting);
            break;
          case IntervalMethod::jackknife:
            ci = jackknife_interval(kernel, delta, DfMode::fixed_a_minus_1, 1, spec.weighting).interval;
            break;
        }
        out.intervals[k] = std::pair{ci.lower, ci.upper};
      } catch (const Error&) {
      }
    }
    return 0;
  });
  return out;
}

}  // namespace detail

/// Simulates `replicates` datasets per (design, alpha) cell and aggregates
/// bias, percent bias, MSE, coverage and mean width for every requested
/// estimator and interval method. Replicate r of cell c uses the seed
/// derived from (seed, c, r), so results do not depend on `workers`.
/// Failed or incompatible evaluations are counted as skipped.
inline ExperimentResult run_experiment(const ExperimentSpec& spec,
                                       const std::function<void(const std::string&)>& progress = {}) {
  if (spec.replicates < 1) throw PreconditionError("replicates must be at least 1");
  if (spec.alphas.empty()) throw PreconditionError("alpha grid is empty");
  if (spec.designs.empty()) throw PreconditionError("no designs");
  if (spec.estimators.empty() && spec.intervals.empty()) throw PreconditionError("no estimators or intervals");
  if (!(spec.level > 0 && spec.level < 1)) throw PreconditionError("level must lie in (0, 1)");
  for (const double a : spec.alphas) {
    if (!(a >= 0 && a < 1)) throw PreconditionError("alpha grid values must lie in [0, 1)");
  }

  ExperimentResult result;
  for (std::size_t d = 0; d < spec.designs.size(); ++d) {
    const auto& design = spec.designs[d];
    for (std::size_t g = 0; g < spec.alphas.size(); ++g) {
      const double alpha = spec.alphas[g];
      const std::uint64_t cell = d * spec.alphas.size() + g;
      std::vector<detail::ReplicateOutcome> outcomes(spec.replicates);
      parallel_for(spec.replicates, spec.workers, [&](std::size_t r) {
        outcomes[r] = detail::run_replicate(spec, design, alpha, derive_seed(spec.seed, {cell, r}));
      });

      auto base = [&](std::string method, std::string kind) {
        CellResult c;
        c.design = design.label();
        c.units = design.units;
        c.coders = design.coders;
        c.family = design.family;
        c.missing_rate = design.missing_rate;
        c.alpha = alpha;
        c.method = std::move(method);
        c.kind = std::move(kind);
        return c;
      };

      for (std::size_t e = 0; e < spec.estimators.size(); ++e) {
        auto c = base(to_string(spec.estimators[e]), "estimator");
        detail::CompensatedSum sum, sq;
        for (const auto& o : outcomes) {
          if (!o.estimates[e]) continue;
          ++c.replicates;
          sum += *o.estimates[e];
          sq += (*o.estimates[e] - alpha) * (*o.estimates[e] - alpha);
        }
        c.skipped = spec.replicates - c.replicates;
        if (c.replicates > 0) {
          const double n = static_cast<double>(c.replicates);
          c.mean_estimate = static_cast<double>(sum.value() / n);
          c.bias = *c.mean_estimate - alpha;
          if (alpha != 0.0) c.percent_bias = 100.0 * *c.bias / alpha;
          c.mse = static_cast<double>(sq.value() / n);
        }
        result.cells.push_back(std::move(c));
      }
      for (std::size_t k = 0; k < spec.intervals.size(); ++k) {
        auto c = base(spec.intervals[k].name(), "interval");
        detail::CompensatedSum width;
        std::size_t covered = 0;
        for (const auto& o : outcomes) {
          if (!o.intervals[k]) continue;
          ++c.replicates;
          const auto [lo, hi] = *o.intervals[k];
          covered += (lo <= alpha && alpha <= hi) ? 1 : 0;
          width += hi - lo;
        }
        c.skipped = spec.replicates - c.replicates;
        if (c.replicates > 0) {
          const double n = static_cast<double>(c.replicates);
          c.coverage = static_cast<double>(covered) / n;
          c.mean_width = static_cast<double>(width.value() / n);
        }
        result.cells.push_back(std::move(c));
      }
      if (progress) {
        std::ostringstream os;
        os << design.label() << " alpha=" << alpha << " done (" << spec.replicates << " replicates)";
        progress(os.str());
      }
    }
  }
  return result;
}

}  // namespace kalpha
