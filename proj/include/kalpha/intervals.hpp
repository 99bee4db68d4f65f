#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "kalpha/anova.hpp"
#include "kalpha/data.hpp"
#include "kalpha/detail/summation.hpp"
#include "kalpha/distance.hpp"
#include "kalpha/error.hpp"
#include "kalpha/estimators.hpp"
#include "kalpha/parallel.hpp"
#include "kalpha/rng.hpp"

namespace kalpha {

enum class IntervalMethod { customary_boot, improved_boot, jackknife };

inline const char* to_string(IntervalMethod m) {
  switch (m) {
    case IntervalMethod::customary_boot: return "customary_boot";
    case IntervalMethod::improved_boot: return "improved_boot";
    case IntervalMethod::jackknife: return "jackknife";
  }
  return "?";
}

enum class DfMode { fixed_a_minus_1, hinkley };

struct IntervalDiagnostics {
  std::size_t replicates_requested = 0;
  std::size_t replicates_discarded = 0;
  std::optional<double> df;
  std::optional<double> v_jack;
  /// log-theta was clamped for the full sample or a leave-one-out subset.
  bool clamped = false;
  /// Hinkley degrees of freedom were unusable and a - 1 was used instead.
  bool df_fallback = false;
};

struct ConfidenceInterval {
  double lower = 0;
  double upper = 0;
  double level = 0.95;
  IntervalMethod method = IntervalMethod::jackknife;
  IntervalDiagnostics diagnostics;

  [[nodiscard]] bool contains(double x) const noexcept { return lower <= x && x <= upper; }
  [[nodiscard]] double width() const noexcept { return upper - lower; }
};

struct JackknifeState {
  double eta_hat = 0;
  std::vector<double> leave_one_out;
  std::vector<double> pseudovalues;
  double s2 = 0;
  double v_jack = 0;
  double nu = 0;
};

struct ResamplingOptions {
  std::size_t workers = 1;
  Weighting weighting = Weighting::pairable;
  KernelOptions kernel;
};

/// theta is clamped to this range before taking logs.
inline constexpr double theta_floor = 1e-12;
inline constexpr double theta_ceiling = 1e12;

/// Sample quantile with linear interpolation between order statistics
/// (h = (n - 1) p). `sorted` must be ascending and nonempty.
inline double percentile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw PreconditionError("percentile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Maps eta = log(theta) to alpha = (theta - 1) / (theta + n - 1).
inline double alpha_from_eta(double eta, double n_effective) {
  if (eta > 0) {
    const double r = std::exp(-eta);
    return (1.0 - r) / (1.0 + (n_effective - 1.0) * r);
  }
  const double t = std::exp(eta);
  return (t - 1.0) / (t + n_effective - 1.0);
}

inline void check_delta(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw PreconditionError("delta must lie in (0, 1)");
}

struct BootstrapSample {
  std::vector<double> replicates;
  std::size_t discarded = 0;
};

enum class BootstrapScheme { customary, improved };

namespace detail {

// Multiplicities of one row resample drawn from `engine`.
template <typename Engine>
void draw_rows(Engine& engine, std::vector<std::uint32_t>& times) {
  std::fill(times.begin(), times.end(), 0u);
  std::uniform_int_distribution<std::size_t> pick(0, times.size() - 1);
  for (std::size_t r = 0; r < times.size(); ++r) ++times[pick(engine)];
}

}  // namespace detail

/// Draws b row resamples, replicate k from Philox stream (seed, k), and
/// evaluates the statistic on each.
///
/// customary: 1 - MSE*_k / MST_c with MST_c of the original data.
/// improved:  the chosen estimator recomputed in full on every resample;
///            resamples with no variation are discarded and redrawn from the
///            same stream. More than 10 b discards in total is an error.
template <typename Kernel>
BootstrapSample bootstrap_sample(const Kernel& kernel, BootstrapScheme scheme, EstimatorKind estimator,
                                 std::size_t b, std::uint64_t seed, std::size_t workers = 1,
                                 Weighting weighting = Weighting::pairable) {
  if (b < 1) throw PreconditionError("bootstrap size must be at least 1");
  if (estimator != EstimatorKind::customary && estimator != EstimatorKind::analytical) {
    throw PreconditionError("bootstrap supports the customary and analytical estimators");
  }
  const std::size_t a = kernel.units();
  if (a < 2) throw PreconditionError("bootstrap requires at least 2 units");
  const AnovaSummary original = kernel.summarize(weighting);
  if (!(original.mst > 0)) throw DegenerateError("agreement undefined: no variation in data");

  const std::size_t budget = 10 * b;
  BootstrapSample out;
  out.replicates.assign(b, 0.0);
  std::vector<std::size_t> discards(b, 0);

  parallel_for(b, workers, [&](std::size_t k) {
    Philox engine(seed, k);
    std::vector<std::uint32_t> times(a);
    for (;;) {
      detail::draw_rows(engine, times);
      std::optional<AnovaSummary> s;
      try {
        s = kernel.summarize(times, weighting);
      } catch (const PreconditionError&) {
        s.reset();
      }
      if (s) {
        if (scheme == BootstrapScheme::customary) {
          out.replicates[k] = 1.0 - s->mse / original.mst;
          return;
        }
        if (s->mst > 0) {
          if (estimator == EstimatorKind::customary) {
            out.replicates[k] = 1.0 - s->mse / s->mst;
            return;
          }
          try {
            out.replicates[k] = alpha_analytical(*s).alpha;
            return;
          } catch (const DegenerateError&) {
          }
        }
      }
      if (++discards[k] > budget) throw DegenerateError("bootstrap retry budget exhausted");
    }
  });

  for (const auto d : discards) out.discarded += d;
  if (out.discarded > budget) throw DegenerateError("bootstrap retry budget exhausted");
  return out;
}

/// Percentile interval of a bootstrap sample, clipped to the range of the
/// statistic (alpha <= 1; analytical alpha >= -1 / (n_eff - 1)).
inline ConfidenceInterval percentile_interval(BootstrapSample sample, double delta, IntervalMethod method,
                                              std::optional<double> lower_bound = std::nullopt) {
  check_delta(delta);
  auto& r = sample.replicates;
  std::sort(r.begin(), r.end());
  ConfidenceInterval ci;
  ci.method = method;
  ci.level = 1.0 - delta;
  ci.lower = std::min(percentile(r, delta / 2.0), 1.0);
  ci.upper = std::min(percentile(r, 1.0 - delta / 2.0), 1.0);
  if (lower_bound) {
    ci.lower = std::max(ci.lower, *lower_bound);
    ci.upper = std::max(ci.upper, *lower_bound);
  }
  ci.diagnostics.replicates_requested = r.size();
  ci.diagnostics.replicates_discarded = sample.discarded;
  return ci;
}

template <typename Kernel>
ConfidenceInterval bootstrap_customary(const Kernel& kernel, std::size_t b, double delta, std::uint64_t seed,
                                       std::size_t workers = 1, Weighting weighting = Weighting::pairable) {
  check_delta(delta);
  return percentile_interval(
      bootstrap_sample(kernel, BootstrapScheme::customary, EstimatorKind::customary, b, seed, workers, weighting),
      delta, IntervalMethod::customary_boot);
}

template <typename Kernel>
ConfidenceInterval bootstrap_improved(const Kernel& kernel, EstimatorKind estimator, std::size_t b, double delta,
                                      std::uint64_t seed, std::size_t workers = 1,
                                      Weighting weighting = Weighting::pairable) {
  check_delta(delta);
  std::optional<double> floor;
  if (estimator == EstimatorKind::analytical) {
    const double n = kernel.summarize(weighting).n_effective;
    if (n > 1.0) floor = -1.0 / (n - 1.0);
  }
  return percentile_interval(
      bootstrap_sample(kernel, BootstrapScheme::improved, estimator, b, seed, workers, weighting), delta,
      IntervalMethod::improved_boot, floor);
}

/// Customary bootstrap: rows resampled with replacement, MST_c held fixed.
inline ConfidenceInterval bootstrap_customary(const DataMatrix& m, const DistanceFunction& f, std::size_t b,
                                              double delta, std::uint64_t seed, const ResamplingOptions& opt = {}) {
  return with_kernel(m, f, opt.kernel, [&](const auto& kernel) {
    return bootstrap_customary(kernel, b, delta, seed, opt.workers, opt.weighting);
  });
}

/// Improved bootstrap: MSE and MST_c both recomputed on every resample.
inline ConfidenceInterval bootstrap_improved(const DataMatrix& m, const DistanceFunction& f,
                                             EstimatorKind estimator, std::size_t b, double delta,
                                             std::uint64_t seed, const ResamplingOptions& opt = {}) {
  return with_kernel(m, f, opt.kernel, [&](const auto& kernel) {
    return bootstrap_improved(kernel, estimator, b, delta, seed, opt.workers, opt.weighting);
  });
}

struct DfEstimate {
  double nu = 0;
  bool fallback = false;
};

/// Double-jackknife degrees of freedom 2 V_jack^2 / K, with K built from the
/// fourth central moment of the pseudovalues. Falls back to a - 1 when K <= 0.
inline DfEstimate hinkley_df(const JackknifeState& state) {
  const std::size_t a = state.pseudovalues.size();
  if (a < 4) throw PreconditionError("Hinkley degrees of freedom require a >= 4");
  const double ad = static_cast<double>(a);
  detail::CompensatedSum sum;
  for (const double p : state.pseudovalues) sum += p;
  const long double mean = sum.value() / ad;
  detail::CompensatedSum fourth;
  for (const double p : state.pseudovalues) {
    const long double d = p - mean;
    fourth += d * d * d * d;
  }
  const double v = state.v_jack;
  const double k = static_cast<double>(fourth.value()) / (ad * (ad - 1.0) * (ad - 2.0) * (ad - 2.0)) -
                   ad * v * v / ((ad - 2.0) * (ad - 2.0));
  if (!(k > 0)) return {ad - 1.0, true};
  return {2.0 * v * v / k, false};
}

struct JackknifeResult {
  ConfidenceInterval interval;
  JackknifeState state;
};

namespace detail {

// log(MSA / MSE) with theta clamped to [theta_floor, theta_ceiling].
inline double clamped_log_theta(const AnovaSummary& s, bool& clamped) {
  if (!(s.mse > 0)) {
    if (s.msa > 0) {
      clamped = true;
      return std::log(theta_ceiling);
    }
    throw DegenerateError("agreement undefined: no variation in data");
  }
  double theta = s.msa / s.mse;
  if (theta < theta_floor) {
    theta = theta_floor;
    clamped = true;
  } else if (theta > theta_ceiling) {
    theta = theta_ceiling;
    clamped = true;
  }
  return std::log(theta);
}

}  // namespace detail

/// Pseudovalues a*eta - (a - 1)*eta_{-i} of eta = log theta, their sample
/// variance S^2 and V_jack = S^2 / a.
inline JackknifeState jackknife_state(double eta_hat, std::vector<double> leave_one_out) {
  const std::size_t a = leave_one_out.size();
  if (a < 2) throw PreconditionError("jackknife requires at least 2 leave-one-out values");
  const double ad = static_cast<double>(a);
  JackknifeState st;
  st.eta_hat = eta_hat;
  st.leave_one_out = std::move(leave_one_out);
  st.pseudovalues.resize(a);
  detail::CompensatedSum sum;
  for (std::size_t i = 0; i < a; ++i) {
    st.pseudovalues[i] = ad * eta_hat - (ad - 1.0) * st.leave_one_out[i];
    sum += st.pseudovalues[i];
  }
  const long double mean = sum.value() / ad;
  detail::CompensatedSum ss;
  for (const double p : st.pseudovalues) ss += (p - mean) * (p - mean);
  st.s2 = static_cast<double>(ss.value() / (ad - 1.0));
  st.v_jack = st.s2 / ad;
  st.nu = ad - 1.0;
  return st;
}

/// Jackknife t-interval for log theta of the analytical estimator, mapped
/// back to the alpha scale with the full-sample n_effective.
template <typename Kernel>
JackknifeResult jackknife_interval(const Kernel& kernel, double delta, DfMode df_mode = DfMode::fixed_a_minus_1,
                                   std::size_t workers = 1, Weighting weighting = Weighting::pairable) {
  check_delta(delta);
  const std::size_t a = kernel.units();
  if (a < 3) throw PreconditionError("jackknife requires a >= 3");
  const AnovaSummary full = kernel.summarize(weighting);
  bool clamped = false;
  const double eta = detail::clamped_log_theta(full, clamped);

  std::vector<double> loo(a);
  std::vector<char> loo_clamped(a, 0);
  parallel_for(a, workers, [&](std::size_t i) {
    std::vector<std::uint32_t> times(a, 1);
    times[i] = 0;
    bool c = false;
    loo[i] = detail::clamped_log_theta(kernel.summarize(times, weighting), c);
    loo_clamped[i] = c;
  });
  for (const char c : loo_clamped) clamped = clamped || c;

  JackknifeResult result;
  result.state = jackknife_state(eta, std::move(loo));
  auto& st = result.state;
  auto& ci = result.interval;
  ci.method = IntervalMethod::jackknife;
  ci.level = 1.0 - delta;
  ci.diagnostics.clamped = clamped;
  if (df_mode == DfMode::hinkley) {
    const auto df = hinkley_df(st);
    st.nu = std::max(1.0, df.nu);
    ci.diagnostics.df_fallback = df.fallback;
  }
  ci.diagnostics.df = st.nu;
  ci.diagnostics.v_jack = st.v_jack;

  const boost::math::students_t_distribution<double> t(st.nu);
  const double half = boost::math::quantile(t, 1.0 - delta / 2.0) * std::sqrt(st.v_jack);
  ci.lower = alpha_from_eta(eta - half, full.n_effective);
  ci.upper = alpha_from_eta(eta + half, full.n_effective);
  return result;
}

inline JackknifeResult jackknife_interval(const DataMatrix& m, const DistanceFunction& f, double delta,
                                          DfMode df_mode = DfMode::fixed_a_minus_1,
                                          const ResamplingOptions& opt = {}) {
  return with_kernel(m, f, opt.kernel, [&](const auto& kernel) {
    return jackknife_interval(kernel, delta, df_mode, opt.workers, opt.weighting);
  });
}

}  // namespace kalpha
