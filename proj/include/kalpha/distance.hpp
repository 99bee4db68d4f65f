#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "kalpha/data.hpp"
#include "kalpha/error.hpp"

namespace kalpha {

enum class DistanceKind { nominal, interval, ratio, custom };

inline const char* to_string(DistanceKind k) {
  switch (k) {
    case DistanceKind::nominal: return "nominal";
    case DistanceKind::interval: return "interval";
    case DistanceKind::ratio: return "ratio";
    case DistanceKind::custom: return "custom";
  }
  return "?";
}

/// Squared discrepancy d^2(x, y) between two scores: nonnegative, symmetric,
/// zero on the diagonal.
class DistanceFunction {
 public:
  using Custom = std::function<double(const ScoreValue&, const ScoreValue&)>;

  static DistanceFunction nominal() { return DistanceFunction(DistanceKind::nominal); }
  static DistanceFunction interval() { return DistanceFunction(DistanceKind::interval); }
  static DistanceFunction ratio() { return DistanceFunction(DistanceKind::ratio); }

  /// Wraps a user function without validation; see register_distance().
  static DistanceFunction custom(std::string name, Custom fn) {
    DistanceFunction f(DistanceKind::custom);
    f.name_ = std::move(name);
    f.custom_ = std::make_shared<const Custom>(std::move(fn));
    return f;
  }

  [[nodiscard]] DistanceKind kind() const noexcept { return kind_; }
  [[nodiscard]] const std::string& name() const noexcept { return name_; }

  /// True when the function is squared Euclidean distance, so mean-based
  /// (moment) sums of squares apply.
  [[nodiscard]] bool squared_euclidean() const noexcept { return kind_ == DistanceKind::interval; }

  double operator()(const ScoreValue& x, const ScoreValue& y) const {
    if (kind_ == DistanceKind::custom) return (*custom_)(x, y);
    if (kind_ == DistanceKind::nominal) return x == y ? 0.0 : 1.0;
    const double* xv = std::get_if<double>(&x);
    const double* yv = std::get_if<double>(&y);
    if (!xv || !yv) {
      throw PreconditionError(std::string(to_string(kind_)) + " distance requires numeric scores");
    }
    return numeric(*xv, *yv);
  }

  /// Fast path on raw stored values for the built-in kinds.
  [[nodiscard]] double numeric(double x, double y) const {
    switch (kind_) {
      case DistanceKind::nominal: return x == y ? 0.0 : 1.0;
      case DistanceKind::interval: return (x - y) * (x - y);
      case DistanceKind::ratio: {
        if (x == y) return 0.0;
        if (x + y == 0.0) throw PreconditionError("ratio distance undefined when x + y = 0");
        const double r = (x - y) / (x + y);
        return r * r;
      }
      case DistanceKind::custom: return (*custom_)(x, y);
    }
    return 0.0;
  }

  /// d^2 between two stored scores of a matrix, by flat index.
  [[nodiscard]] double between(const DataMatrix& m, std::size_t p, std::size_t q) const {
    if (kind_ == DistanceKind::custom) return (*custom_)(m.at(p), m.at(q));
    if (kind_ != DistanceKind::nominal && m.mode() == ValueMode::categorical) {
      throw PreconditionError(std::string(to_string(kind_)) + " distance requires numeric scores");
    }
    return numeric(m.flat()[p], m.flat()[q]);
  }

 private:
  explicit DistanceFunction(DistanceKind kind) : kind_(kind), name_(to_string(kind)) {}

  DistanceKind kind_;
  std::string name_;
  std::shared_ptr<const Custom> custom_;
};

inline double distance(const DistanceFunction& f, const ScoreValue& x, const ScoreValue& y) { return f(x, y); }

/// Validates a user distance on observed score pairs of `sample` (every
/// diagonal, and up to `max_pairs` off-diagonal pairs on a fixed stride),
/// then returns it. Throws PreconditionError on a negative, asymmetric,
/// non-finite or nonzero-diagonal value.
inline DistanceFunction register_distance(std::string name, DistanceFunction::Custom fn, const DataMatrix& sample,
                                          std::size_t max_pairs = 4096) {
  auto f = DistanceFunction::custom(std::move(name), std::move(fn));
  const std::size_t n = sample.total();
  for (std::size_t p = 0; p < n; ++p) {
    const double d = f(sample.at(p), sample.at(p));
    if (d != 0.0) throw PreconditionError("distance '" + f.name() + "' is nonzero on the diagonal");
  }
  if (n < 2) return f;
  const std::size_t pairs = n * (n - 1) / 2;
  const std::size_t stride = std::max<std::size_t>(1, pairs / max_pairs);
  std::size_t k = 0;
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = p + 1; q < n; ++q, ++k) {
      if (k % stride != 0) continue;
      const double pq = f(sample.at(p), sample.at(q));
      const double qp = f(sample.at(q), sample.at(p));
      if (!std::isfinite(pq) || pq < 0.0) {
        throw PreconditionError("distance '" + f.name() + "' returned a negative or non-finite value");
      }
      if (pq != qp) throw PreconditionError("distance '" + f.name() + "' is not symmetric");
    }
  }
  return f;
}

/// Dense N x N table of d^2 over every observed score, indexed by the
/// matrix's flat (unit, slot) enumeration.
class DistanceTable {
 public:
  static constexpr std::size_t default_max_scores = 10000;

  [[nodiscard]] std::size_t size() const noexcept { return n_; }
  [[nodiscard]] double operator()(std::size_t p, std::size_t q) const noexcept { return entries_[p * n_ + q]; }
  /// Flat index of slot j of unit i.
  [[nodiscard]] std::size_t index(std::size_t unit, std::size_t slot) const { return offsets_[unit] + slot; }

  friend DistanceTable build_distance_table(const DataMatrix&, const DistanceFunction&, std::size_t);

 private:
  std::size_t n_ = 0;
  std::vector<double> entries_;
  std::vector<std::size_t> offsets_;
};

inline DistanceTable build_distance_table(const DataMatrix& m, const DistanceFunction& f,
                                          std::size_t max_scores = DistanceTable::default_max_scores) {
  if (m.empty()) throw PreconditionError("no units");
  const std::size_t n = m.total();
  if (n > max_scores) {
    throw PreconditionError("distance table would hold " + std::to_string(n) + "^2 entries; cap is " +
                            std::to_string(max_scores) + " scores");
  }
  DistanceTable t;
  t.n_ = n;
  t.entries_.assign(n * n, 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    t.entries_[p * n + p] = f.between(m, p, p);
    for (std::size_t q = p + 1; q < n; ++q) {
      const double d = f.between(m, p, q);
      t.entries_[p * n + q] = d;
      t.entries_[q * n + p] = d;
    }
  }
  t.offsets_.resize(m.units());
  for (std::size_t i = 0; i < m.units(); ++i) t.offsets_[i] = m.offset(i);
  return t;
}

}  // namespace kalpha
