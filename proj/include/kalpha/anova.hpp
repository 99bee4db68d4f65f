#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kalpha/data.hpp"
#include "kalpha/detail/summation.hpp"
#include "kalpha/distance.hpp"
#include "kalpha/error.hpp"

namespace kalpha {

/// How within-unit disagreement is pooled across units of unequal size.
///
/// `pairable` is Krippendorff's coincidence weighting: each unit's sample
/// variance counts in proportion to its n_i, MSE = sum n_i s_i^2 / N. It is
/// what reproduces published Krippendorff's alpha values on unbalanced data.
/// `pooled` is the textbook one-way ANOVA error term, SSE / (N - a).
/// Both agree exactly on balanced designs.
enum class Weighting { pairable, pooled };

inline const char* to_string(Weighting w) { return w == Weighting::pairable ? "pairable" : "pooled"; }

struct AnovaSummary {
  double sse = 0;
  double ssa = 0;
  double sst = 0;  ///< corrected total, SST_c
  double mse = 0;
  double msa = 0;
  double mst = 0;  ///< MST_c
  std::size_t total = 0;  ///< N
  std::size_t units = 0;  ///< a
  /// n for balanced designs; N/a (pairable) or n* (pooled) otherwise.
  double n_effective = 0;
  bool balanced = true;
  Weighting weighting = Weighting::pairable;

  /// Every score identical under d^2: agreement is undefined.
  [[nodiscard]] bool degenerate() const noexcept { return sst == 0.0; }
};

/// (N - sum n_i^2 / N) / (a - 1). Exactly n for balanced counts; 0 when no
/// unit has a second score to pair with.
inline double n_star(std::span<const std::size_t> counts) {
  const std::size_t a = counts.size();
  if (a < 2) throw PreconditionError("n* requires at least 2 units");
  bool balanced = true;
  long double total = 0, squares = 0;
  for (const auto n : counts) {
    balanced = balanced && n == counts[0];
    total += static_cast<long double>(n);
    squares += static_cast<long double>(n) * static_cast<long double>(n);
  }
  if (total <= static_cast<long double>(a)) return 0.0;
  if (balanced) return static_cast<double>(counts[0]);
  return static_cast<double>((total - squares / total) / static_cast<long double>(a - 1));
}

inline double n_star(const DataMatrix& m) {
  const auto c = m.counts();
  return n_star(std::span<const std::size_t>(c));
}

namespace detail {

// Per-call accumulation shared by both kernels.
struct SumsInput {
  std::size_t units = 0;
  std::size_t total = 0;
  long double count_squares = 0;
  bool balanced = true;
  std::size_t common_count = 0;
  bool has_singleton = false;
  long double pooled_sse = 0;
  long double pairable_mse_numerator = 0;  // sum n_i s_i^2
  long double sst = 0;
  bool has_classical_ssa = false;
  long double classical_ssa = 0;
};

inline AnovaSummary finish(const SumsInput& in, Weighting w) {
  const std::size_t a = in.units, n = in.total;
  if (a < 2) throw PreconditionError("at least 2 units are required");
  if (n <= a) throw PreconditionError("total score count must exceed the unit count (N > a)");

  AnovaSummary s;
  s.units = a;
  s.total = n;
  s.balanced = in.balanced;
  s.weighting = w;
  s.sst = static_cast<double>(in.sst);
  const auto df_error = static_cast<long double>(n - a);
  if (w == Weighting::pooled) {
    s.sse = static_cast<double>(in.pooled_sse);
    s.mse = static_cast<double>(in.pooled_sse / df_error);
    s.ssa = static_cast<double>(in.has_classical_ssa ? in.classical_ssa : in.sst - in.pooled_sse);
    s.n_effective = in.balanced ? static_cast<double>(in.common_count)
                                : static_cast<double>((n - in.count_squares / n) / static_cast<long double>(a - 1));
  } else {
    if (in.has_singleton) {
      throw PreconditionError("pairable weighting needs at least 2 scores in every unit; prune first");
    }
    const long double mse = in.pairable_mse_numerator / static_cast<long double>(n);
    s.mse = static_cast<double>(mse);
    s.sse = static_cast<double>(mse * df_error);
    s.ssa = static_cast<double>(in.sst - mse * df_error);
    s.n_effective = in.balanced ? static_cast<double>(in.common_count)
                                : static_cast<double>(static_cast<long double>(n) / static_cast<long double>(a));
  }
  s.mst = static_cast<double>(in.sst / static_cast<long double>(n - 1));
  s.msa = s.ssa / static_cast<double>(a - 1);
  if (s.sse < 0) s.sse = 0;
  if (s.mse < 0) s.mse = 0;
  return s;
}

inline void add_unit(SumsInput& in, std::size_t n_i, std::uint32_t times) {
  if (times == 0) return;
  if (in.units == 0) in.common_count = n_i;
  in.balanced = in.balanced && n_i == in.common_count;
  in.units += times;
  in.total += times * n_i;
  in.count_squares += static_cast<long double>(times) * n_i * n_i;
  in.has_singleton = in.has_singleton || n_i < 2;
}

}  // namespace detail

/// Unit-level moments for squared Euclidean distance. Summaries of any
/// reweighting of the units (bootstrap multiplicities, leave-one-out masks)
/// cost O(a).
class MomentKernel {
 public:
  explicit MomentKernel(const DataMatrix& m) {
    if (m.mode() != ValueMode::numeric) throw PreconditionError("classical sums require numeric scores");
    const std::size_t a = m.units();
    counts_.resize(a);
    means_.resize(a);
    within_.resize(a);
    for (std::size_t i = 0; i < a; ++i) {
      const auto row = m.row(i);
      counts_[i] = row.size();
      detail::CompensatedSum sum;
      for (const double y : row) sum += y;
      const long double mean = row.empty() ? 0.0L : sum.value() / static_cast<long double>(row.size());
      detail::CompensatedSum ss;
      for (const double y : row) ss += (y - mean) * (y - mean);
      means_[i] = mean;
      within_[i] = ss.value();
    }
  }

  [[nodiscard]] std::size_t units() const noexcept { return counts_.size(); }
  [[nodiscard]] std::span<const std::size_t> counts() const noexcept { return counts_; }

  [[nodiscard]] AnovaSummary summarize(std::span<const std::uint32_t> times, Weighting w) const {
    check(times);
    detail::SumsInput in;
    detail::CompensatedSum grand, pooled, pairable;
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      if (times[i] == 0) continue;
      detail::add_unit(in, counts_[i], times[i]);
      grand += static_cast<long double>(times[i]) * counts_[i] * means_[i];
      pooled += times[i] * within_[i];
      if (counts_[i] > 1) pairable += times[i] * within_[i] * counts_[i] / (counts_[i] - 1);
    }
    if (in.total == 0) throw PreconditionError("no scores");
    const long double grand_mean = grand.value() / static_cast<long double>(in.total);
    detail::CompensatedSum between;
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      if (times[i] == 0) continue;
      const long double d = means_[i] - grand_mean;
      between += static_cast<long double>(times[i]) * counts_[i] * d * d;
    }
    in.pooled_sse = pooled.value();
    in.pairable_mse_numerator = pairable.value();
    in.classical_ssa = between.value();
    in.has_classical_ssa = true;
    in.sst = in.pooled_sse + in.classical_ssa;
    return detail::finish(in, w);
  }

  [[nodiscard]] AnovaSummary summarize(Weighting w) const {
    const std::vector<std::uint32_t> ones(units(), 1);
    return summarize(ones, w);
  }

 private:
  void check(std::span<const std::uint32_t> times) const {
    if (times.size() != counts_.size()) throw PreconditionError("multiplicity vector has wrong length");
  }

  std::vector<std::size_t> counts_;
  std::vector<long double> means_;
  std::vector<long double> within_;
};

/// Unit-by-unit block sums C[i][k] = sum_{j,l} d^2(Y_ij, Y_kl) for an
/// arbitrary distance. Built once from the lookup table (or by direct
/// evaluation when the table would be too large); reweighted summaries then
/// cost O(a^2) instead of O(N^2).
class BlockKernel {
 public:
  BlockKernel(const DataMatrix& m, const DistanceTable& table) {
    if (table.size() != m.total()) throw PreconditionError("distance table does not match the matrix");
    build(m, [&](std::size_t p, std::size_t q) { return table(p, q); });
  }

  /// Streams d^2 directly; same summation order as the table path, so the
  /// two constructions agree bit for bit.
  BlockKernel(const DataMatrix& m, const DistanceFunction& f) {
    build(m, [&](std::size_t p, std::size_t q) { return p <= q ? f.between(m, p, q) : f.between(m, q, p); });
  }

  [[nodiscard]] std::size_t units() const noexcept { return counts_.size(); }
  [[nodiscard]] std::span<const std::size_t> counts() const noexcept { return counts_; }
  [[nodiscard]] double block(std::size_t i, std::size_t k) const { return blocks_[i * counts_.size() + k]; }

  [[nodiscard]] AnovaSummary summarize(std::span<const std::uint32_t> times, Weighting w) const {
    const std::size_t a = counts_.size();
    if (times.size() != a) throw PreconditionError("multiplicity vector has wrong length");
    detail::SumsInput in;
    detail::CompensatedSum pooled, pairable, pairs;
    for (std::size_t i = 0; i < a; ++i) {
      if (times[i] == 0) continue;
      detail::add_unit(in, counts_[i], times[i]);
      const long double within = blocks_[i * a + i];
      pooled += times[i] * within / (2.0L * counts_[i]);
      if (counts_[i] > 1) pairable += times[i] * within / (2.0L * (counts_[i] - 1));
      for (std::size_t k = 0; k < a; ++k) {
        if (times[k] == 0) continue;
        pairs += static_cast<long double>(times[i]) * times[k] * blocks_[i * a + k];
      }
    }
    if (in.total == 0) throw PreconditionError("no scores");
    in.pooled_sse = pooled.value();
    in.pairable_mse_numerator = pairable.value();
    in.sst = pairs.value() / (2.0L * static_cast<long double>(in.total));
    return detail::finish(in, w);
  }

  [[nodiscard]] AnovaSummary summarize(Weighting w) const {
    const std::vector<std::uint32_t> ones(units(), 1);
    return summarize(ones, w);
  }

 private:
  template <typename Lookup>
  void build(const DataMatrix& m, Lookup&& d2) {
    const std::size_t a = m.units();
    counts_ = m.counts();
    blocks_.assign(a * a, 0.0);
    for (std::size_t i = 0; i < a; ++i) {
      for (std::size_t k = i; k < a; ++k) {
        detail::CompensatedSum sum;
        for (std::size_t j = 0; j < counts_[i]; ++j) {
          for (std::size_t l = 0; l < counts_[k]; ++l) sum += d2(m.offset(i) + j, m.offset(k) + l);
        }
        blocks_[i * a + k] = blocks_[k * a + i] = static_cast<double>(sum.value());
      }
    }
  }

  std::vector<std::size_t> counts_;
  std::vector<double> blocks_;
};

/// Mean-based sums: SSE over unit means, SSA over the grand mean.
inline AnovaSummary classical_sums(const DataMatrix& m, Weighting w = Weighting::pairable) {
  return MomentKernel(m).summarize(w);
}

/// Pairwise-distance sums using a precomputed table:
/// SSE_i = (2 n_i)^-1 sum_{j,l} d^2, SST_c = (2N)^-1 sum over all pairs,
/// SSA = SST_c - SSE.
inline AnovaSummary nonparametric_sums(const DataMatrix& m, const DistanceTable& t,
                                       Weighting w = Weighting::pairable) {
  return BlockKernel(m, t).summarize(w);
}

/// Same as above, evaluating d^2 directly instead of through a table.
inline AnovaSummary nonparametric_sums(const DataMatrix& m, const DistanceFunction& f,
                                       Weighting w = Weighting::pairable) {
  return BlockKernel(m, f).summarize(w);
}

struct KernelOptions {
  std::size_t max_table_scores = DistanceTable::default_max_scores;
  /// Use moment sums for squared Euclidean distance on numeric data.
  bool moments_for_interval = true;
};

/// Calls fn(kernel) with the cheapest exact kernel for (m, f): moments for
/// squared Euclidean distance, otherwise block sums from a lookup table, or
/// from direct evaluation once N exceeds the table cap.
template <typename Fn>
decltype(auto) with_kernel(const DataMatrix& m, const DistanceFunction& f, const KernelOptions& opt, Fn&& fn) {
  if (opt.moments_for_interval && f.squared_euclidean() && m.mode() == ValueMode::numeric) {
    return fn(MomentKernel(m));
  }
  if (m.total() <= opt.max_table_scores) {
    return fn(BlockKernel(m, build_distance_table(m, f, opt.max_table_scores)));
  }
  return fn(BlockKernel(m, f));
}

/// Sums of squares for (m, f) through the fastest exact route.
inline AnovaSummary summarize(const DataMatrix& m, const DistanceFunction& f, Weighting w = Weighting::pairable,
                              const KernelOptions& opt = {}) {
  return with_kernel(m, f, opt, [&](const auto& kernel) { return kernel.summarize(w); });
}

}  // namespace kalpha
