#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "kalpha/anova.hpp"
#include "kalpha/error.hpp"

namespace kalpha {

enum class EstimatorKind { customary, mle, analytical, variant, bc1, bc2 };

inline const char* to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::customary: return "customary";
    case EstimatorKind::mle: return "mle";
    case EstimatorKind::analytical: return "analytical";
    case EstimatorKind::variant: return "variant";
    case EstimatorKind::bc1: return "bc1";
    case EstimatorKind::bc2: return "bc2";
  }
  return "?";
}

inline std::optional<EstimatorKind> parse_estimator(const std::string& name) {
  for (auto k : {EstimatorKind::customary, EstimatorKind::mle, EstimatorKind::analytical, EstimatorKind::variant,
                 EstimatorKind::bc1, EstimatorKind::bc2}) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

enum class EstimateFlag : std::uint8_t {
  boundary_mle = 1,
  clamped = 2,
  small_sample_pathology = 4,
  unstable = 8,
};

class EstimateFlags {
 public:
  void set(EstimateFlag f) noexcept { bits_ |= static_cast<std::uint8_t>(f); }
  [[nodiscard]] bool has(EstimateFlag f) const noexcept { return bits_ & static_cast<std::uint8_t>(f); }
  [[nodiscard]] bool any() const noexcept { return bits_ != 0; }

  [[nodiscard]] std::vector<std::string> names() const {
    std::vector<std::string> out;
    if (has(EstimateFlag::boundary_mle)) out.emplace_back("boundary_mle");
    if (has(EstimateFlag::clamped)) out.emplace_back("clamped");
    if (has(EstimateFlag::small_sample_pathology)) out.emplace_back("small_sample_pathology");
    if (has(EstimateFlag::unstable)) out.emplace_back("unstable");
    return out;
  }

 private:
  std::uint8_t bits_ = 0;
};

struct AlphaEstimate {
  EstimatorKind kind = EstimatorKind::customary;
  double alpha = 0;
  /// Variance-ratio statistic target n*gamma + 1; +infinity when MSE = 0.
  std::optional<double> theta;
  std::optional<double> gamma;
  EstimateFlags flags;
};

/// Which theta is plugged into the variance of the unbiased gamma.
enum class ThetaPlugin { variant, analytical };

namespace detail {

inline void require_variation(const AnovaSummary& s) {
  if (!(s.mst > 0)) throw DegenerateError("agreement undefined: no variation in data");
}

inline void require_balanced(const AnovaSummary& s, const char* what) {
  if (!s.balanced) {
    throw PreconditionError(std::string(what) + " is defined for balanced designs only");
  }
}

}  // namespace detail

/// Krippendorff's estimator, 1 - MSE / MST_c.
inline AlphaEstimate alpha_customary(const AnovaSummary& s) {
  detail::require_variation(s);
  AlphaEstimate e;
  e.kind = EstimatorKind::customary;
  e.alpha = 1.0 - s.mse / s.mst;
  return e;
}

/// Closed-form maximum likelihood estimator for balanced designs. When the
/// implied unit-effect variance is negative the MLE sits on the boundary and
/// 0 is returned with `boundary_mle`.
inline AlphaEstimate alpha_mle(const AnovaSummary& s) {
  if (!s.balanced) throw PreconditionError("MLE not in closed form for unbalanced designs");
  detail::require_variation(s);
  if (!(s.mse > 0)) throw PreconditionError("MLE requires MSE > 0");
  const double shrunk = (1.0 - 1.0 / static_cast<double>(s.units)) * s.msa;
  const double n = s.n_effective;
  AlphaEstimate e;
  e.kind = EstimatorKind::mle;
  if (shrunk < s.mse) {
    e.alpha = 0.0;
    e.gamma = 0.0;
    e.flags.set(EstimateFlag::boundary_mle);
    return e;
  }
  e.alpha = (shrunk - s.mse) / (shrunk + (n - 1.0) * s.mse);
  e.gamma = (shrunk - s.mse) / (n * s.mse);
  return e;
}

/// Method-of-moments ("analytical") estimator
/// (MSA - MSE) / (MSA + (n_eff - 1) MSE), with theta = MSA / MSE.
inline AlphaEstimate alpha_analytical(const AnovaSummary& s) {
  if (s.units < 2) throw PreconditionError("analytical estimator requires at least 2 units");
  AlphaEstimate e;
  e.kind = EstimatorKind::analytical;
  const double n = s.n_effective;
  if (!(s.mse > 0)) {
    if (s.msa > 0) {
      e.alpha = 1.0;
      e.theta = std::numeric_limits<double>::infinity();
      e.gamma = std::numeric_limits<double>::infinity();
      e.flags.set(EstimateFlag::clamped);
      return e;
    }
    throw DegenerateError("agreement undefined: no variation in data");
  }
  const double denominator = s.msa + (n - 1.0) * s.mse;
  if (denominator == 0.0) throw DegenerateError("agreement undefined: zero denominator");
  e.alpha = (s.msa - s.mse) / denominator;
  e.theta = s.msa / s.mse;
  e.gamma = (*e.theta - 1.0) / n;
  return e;
}

/// Unbiased estimator of the variance ratio sigma_tau^2 / sigma_eps^2
/// (balanced designs). May be negative.
inline double gamma_unbiased(const AnovaSummary& s) {
  detail::require_balanced(s, "unbiased gamma");
  const double n = s.n_effective;
  const double a = static_cast<double>(s.units);
  const double excess = static_cast<double>(s.total) - a - 2.0;
  if (excess <= 0) throw PreconditionError("small_sample_pathology: N - a - 2 must be positive");
  if (!(s.sse > 0)) throw PreconditionError("unbiased gamma requires SSE > 0");
  return (excess * s.ssa / s.sse - (a - 1.0)) / (n * (a - 1.0));
}

/// gamma / (1 + gamma) with the unbiased gamma; theta = n gamma + 1.
inline AlphaEstimate alpha_variant(const AnovaSummary& s) {
  const double g = gamma_unbiased(s);
  if (g == -1.0) throw DegenerateError("variant estimator undefined at gamma = -1");
  AlphaEstimate e;
  e.kind = EstimatorKind::variant;
  e.gamma = g;
  e.theta = s.n_effective * g + 1.0;
  e.alpha = g / (1.0 + g);
  return e;
}

/// Variance of the unbiased gamma at variance-ratio target `theta` for a
/// balanced a x n design.
inline double var_gamma(double theta, std::size_t a, std::size_t n) {
  const double ad = static_cast<double>(a), nd = static_cast<double>(n);
  const double big_n = ad * nd;
  const double d2 = big_n - ad - 2.0, d4 = big_n - ad - 4.0;
  if (d4 <= 0) throw PreconditionError("small_sample_pathology: N - a - 4 must be positive");
  if (a < 2) throw PreconditionError("variance of gamma requires at least 2 units");
  return d2 / (nd * nd * (ad - 1.0)) * ((ad + 1.0) / d4 - (ad - 1.0) / d2) * theta * theta;
}

namespace detail {

inline double plugin_variance(const AnovaSummary& s, double gamma, ThetaPlugin plugin) {
  double theta = s.n_effective * gamma + 1.0;
  if (plugin == ThetaPlugin::analytical) {
    if (!(s.mse > 0)) throw PreconditionError("analytical theta requires MSE > 0");
    theta = s.msa / s.mse;
  }
  return var_gamma(theta, s.units, static_cast<std::size_t>(s.n_effective));
}

}  // namespace detail

/// First bias-corrected estimator (log scale correction). Flagged
/// `unstable` when gamma < 0.1, where the dilation factor blows up.
inline AlphaEstimate alpha_bc1(const AnovaSummary& s, ThetaPlugin plugin = ThetaPlugin::variant) {
  const double g = gamma_unbiased(s);
  if (g <= 0) throw PreconditionError("bc1 undefined for nonpositive gamma");
  const double v = detail::plugin_variance(s, g, plugin);
  AlphaEstimate e;
  e.kind = EstimatorKind::bc1;
  e.gamma = g;
  e.theta = s.n_effective * g + 1.0;
  const double base = g / (1.0 + g);
  e.alpha = base * std::exp(0.5 * (1.0 / (g * g) - 1.0 / ((g + 1.0) * (g + 1.0))) * v);
  if (g < 0.1) e.flags.set(EstimateFlag::unstable);
  return e;
}

/// Second bias-corrected estimator: contracts 1 - alpha by
/// exp(-V / (2 (gamma + 1)^2)), so it never falls below the variant.
inline AlphaEstimate alpha_bc2(const AnovaSummary& s, ThetaPlugin plugin = ThetaPlugin::variant) {
  const double g = gamma_unbiased(s);
  if (!(g > -1.0)) throw PreconditionError("bc2 requires gamma > -1");
  const double v = detail::plugin_variance(s, g, plugin);
  AlphaEstimate e;
  e.kind = EstimatorKind::bc2;
  e.gamma = g;
  e.theta = s.n_effective * g + 1.0;
  const double base = g / (1.0 + g);
  e.alpha = 1.0 - (1.0 - base) * std::exp(-v / (2.0 * (g + 1.0) * (g + 1.0)));
  return e;
}

inline AlphaEstimate estimate(EstimatorKind kind, const AnovaSummary& s, ThetaPlugin plugin = ThetaPlugin::variant) {
  switch (kind) {
    case EstimatorKind::customary: return alpha_customary(s);
    case EstimatorKind::mle: return alpha_mle(s);
    case EstimatorKind::analytical: return alpha_analytical(s);
    case EstimatorKind::variant: return alpha_variant(s);
    case EstimatorKind::bc1: return alpha_bc1(s, plugin);
    case EstimatorKind::bc2: return alpha_bc2(s, plugin);
  }
  throw PreconditionError("unknown estimator");
}

}  // namespace kalpha
