#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "kalpha/kalpha.hpp"

namespace {

using namespace kalpha;

DataMatrix krippendorff(bool drop_six = false) {
  CsvOptions o;
  o.mode = ValueMode::categorical;
  auto m = load_csv(std::string(KALPHA_FIXTURES) + "/krippendorff_nominal.csv", o);
  if (drop_six) m = drop_unit(m, 5);
  return prune_units(m).matrix;
}

DataMatrix gaussian(std::size_t a, std::size_t n, double alpha, std::uint64_t seed) {
  AnovaSimConfig c;
  c.units = a;
  c.coders = n;
  c.alpha = alpha;
  return simulate_anova(c, seed);
}

TEST(Percentile, LinearInterpolation) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  EXPECT_EQ(percentile(x, 0.0), 1.0);
  EXPECT_EQ(percentile(x, 1.0), 5.0);
  EXPECT_DOUBLE_EQ(percentile(x, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(percentile(x, 0.1), 1.4);
  EXPECT_THROW(percentile(std::vector<double>{}, 0.5), PreconditionError);
}

TEST(Transform, EtaZeroIsAlphaZero) {
  for (const double n : {1.5, 2.0, 4.0, 37.0}) EXPECT_EQ(alpha_from_eta(0.0, n), 0.0);
  EXPECT_NEAR(alpha_from_eta(std::log(8.0), 2.0), 7.0 / 9.0, 1e-15);
  EXPECT_LT(alpha_from_eta(20.0, 4.0), 1.0);
  EXPECT_GT(alpha_from_eta(-20.0, 4.0), -1.0 / 3.0);
}

TEST(CustomaryBoot, KrippendorffData) {
  const auto ci = bootstrap_customary(krippendorff(), DistanceFunction::nominal(), 2000, 0.05, 1);
  EXPECT_NEAR(ci.lower, 0.459, 0.05);
  EXPECT_NEAR(ci.upper, 1.000, 0.05);
  EXPECT_EQ(ci.method, IntervalMethod::customary_boot);
  EXPECT_EQ(ci.diagnostics.replicates_requested, 2000u);
}

TEST(CustomaryBoot, PerfectAgreement) {
  const DataMatrix m({{1, 1}, {2, 2}, {3, 3}});
  const auto ci = bootstrap_customary(m, DistanceFunction::interval(), 200, 0.05, 5);
  EXPECT_EQ(ci.lower, 1.0);
  EXPECT_EQ(ci.upper, 1.0);
}

TEST(CustomaryBoot, ZeroReplicatesIsAnError) {
  EXPECT_THROW(bootstrap_customary(krippendorff(), DistanceFunction::nominal(), 0, 0.05, 1), PreconditionError);
}

TEST(ImprovedBoot, PerfectAgreement) {
  const DataMatrix m({{1, 1}, {2, 2}, {3, 3}});
  for (const auto kind : {EstimatorKind::customary, EstimatorKind::analytical}) {
    const auto ci = bootstrap_improved(m, DistanceFunction::interval(), kind, 300, 0.05, 5);
    EXPECT_EQ(ci.lower, 1.0);
    EXPECT_EQ(ci.upper, 1.0);
    // 3 of 27 equally likely resamples repeat one unit and have no variation.
    EXPECT_GT(ci.diagnostics.replicates_discarded, 0u);
  }
}

// Resampling loop written out directly: explicit resampled matrices and
// brute-force means, same Philox stream per replicate.
std::vector<double> oracle_improved(const DataMatrix& m, std::size_t b, std::uint64_t seed) {
  std::vector<double> out;
  const std::size_t a = m.units();
  for (std::size_t k = 0; k < b; ++k) {
    Philox engine(seed, k);
    std::uniform_int_distribution<std::size_t> pick(0, a - 1);
    for (;;) {
      std::vector<std::uint32_t> times(a, 0);
      for (std::size_t r = 0; r < a; ++r) ++times[pick(engine)];
      std::vector<std::size_t> rows;
      for (std::size_t i = 0; i < a; ++i) rows.insert(rows.end(), times[i], i);
      double grand = 0, sse = 0, sst = 0;
      std::size_t n = 0;
      for (auto i : rows) {
        for (double y : m.row(i)) grand += y;
        n += m.count(i);
      }
      grand /= static_cast<double>(n);
      for (auto i : rows) {
        double mean = 0;
        for (double y : m.row(i)) mean += y;
        mean /= static_cast<double>(m.count(i));
        for (double y : m.row(i)) {
          sse += (y - mean) * (y - mean);
          sst += (y - grand) * (y - grand);
        }
      }
      if (sst > 0) {
        out.push_back(1.0 - (sse / static_cast<double>(n - a)) / (sst / static_cast<double>(n - 1)));
        break;
      }
    }
  }
  return out;
}

TEST(ImprovedBoot, MatchesOracleReplicateForReplicate) {
  const auto m = gaussian(16, 4, 0.6, 314);
  const std::size_t b = 400;
  const auto oracle = oracle_improved(m, b, 2718);
  const auto sample =
      bootstrap_sample(MomentKernel(m), BootstrapScheme::improved, EstimatorKind::customary, b, 2718, 3);
  ASSERT_EQ(sample.replicates.size(), oracle.size());
  for (std::size_t k = 0; k < b; ++k) EXPECT_NEAR(sample.replicates[k], oracle[k], 1e-12) << "replicate " << k;

  auto sorted = oracle;
  std::sort(sorted.begin(), sorted.end());
  const auto ci = bootstrap_improved(m, DistanceFunction::interval(), EstimatorKind::customary, b, 0.1, 2718);
  EXPECT_NEAR(ci.lower, percentile(sorted, 0.05), 1e-12);
  EXPECT_NEAR(ci.upper, std::min(1.0, percentile(sorted, 0.95)), 1e-12);
}

TEST(Bootstrap, ReproducibleAcrossSeedsAndWorkers) {
  const auto m = krippendorff();
  ResamplingOptions one, many;
  many.workers = 7;
  const auto a = bootstrap_improved(m, DistanceFunction::nominal(), EstimatorKind::analytical, 500, 0.05, 42, one);
  const auto b = bootstrap_improved(m, DistanceFunction::nominal(), EstimatorKind::analytical, 500, 0.05, 42, many);
  EXPECT_EQ(a.lower, b.lower);
  EXPECT_EQ(a.upper, b.upper);
  EXPECT_EQ(a.diagnostics.replicates_discarded, b.diagnostics.replicates_discarded);
  const auto c = bootstrap_customary(m, DistanceFunction::nominal(), 500, 0.05, 42, one);
  const auto d = bootstrap_customary(m, DistanceFunction::nominal(), 500, 0.05, 42, many);
  EXPECT_EQ(c.lower, d.lower);
  EXPECT_EQ(c.upper, d.upper);
  const auto e = bootstrap_customary(m, DistanceFunction::nominal(), 500, 0.05, 43, one);
  EXPECT_TRUE(e.lower != c.lower || e.upper != c.upper);
}

TEST(Bootstrap, TableAndStreamingKernelsAgree) {
  const auto m = krippendorff();
  ResamplingOptions streaming;
  streaming.kernel.max_table_scores = 1;
  const auto a = bootstrap_customary(m, DistanceFunction::nominal(), 300, 0.05, 8);
  const auto b = bootstrap_customary(m, DistanceFunction::nominal(), 300, 0.05, 8, streaming);
  EXPECT_EQ(a.lower, b.lower);
  EXPECT_EQ(a.upper, b.upper);
}

TEST(Levels, IntervalsAreNested) {
  const auto m = gaussian(12, 5, 0.5, 77);
  const double deltas[] = {0.01, 0.05, 0.1, 0.3};
  for (std::size_t i = 0; i + 1 < std::size(deltas); ++i) {
    const auto wide_j = jackknife_interval(m, DistanceFunction::interval(), deltas[i]).interval;
    const auto narrow_j = jackknife_interval(m, DistanceFunction::interval(), deltas[i + 1]).interval;
    EXPECT_LE(wide_j.lower, narrow_j.lower);
    EXPECT_GE(wide_j.upper, narrow_j.upper);
    const auto wide_b = bootstrap_customary(m, DistanceFunction::interval(), 999, deltas[i], 4);
    const auto narrow_b = bootstrap_customary(m, DistanceFunction::interval(), 999, deltas[i + 1], 4);
    EXPECT_LE(wide_b.lower, narrow_b.lower);
    EXPECT_GE(wide_b.upper, narrow_b.upper);
  }
}

TEST(Jackknife, PseudovalueArithmetic) {
  const auto st = jackknife_state(1.0, {0.9, 1.0, 1.1});
  ASSERT_EQ(st.pseudovalues.size(), 3u);
  EXPECT_NEAR(st.pseudovalues[0], 1.2, 1e-15);
  EXPECT_NEAR(st.pseudovalues[1], 1.0, 1e-15);
  EXPECT_NEAR(st.pseudovalues[2], 0.8, 1e-15);
  EXPECT_NEAR(st.s2, 0.04, 1e-15);
  EXPECT_NEAR(st.v_jack, 0.04 / 3.0, 1e-15);
  EXPECT_EQ(st.nu, 2.0);
}

TEST(Jackknife, KrippendorffData) {
  const auto r = jackknife_interval(krippendorff(), DistanceFunction::nominal(), 0.05);
  EXPECT_NEAR(r.interval.lower, 0.228, 0.005);
  EXPECT_NEAR(r.interval.upper, 0.951, 0.005);
  EXPECT_EQ(*r.interval.diagnostics.df, 10.0);
  const auto s = jackknife_interval(krippendorff(true), DistanceFunction::nominal(), 0.05);
  EXPECT_NEAR(s.interval.lower, 0.370, 0.005);
  EXPECT_NEAR(s.interval.upper, 0.981, 0.005);
}

TEST(Jackknife, DeterministicAndWorkerIndependent) {
  const auto m = gaussian(20, 3, 0.4, 9);
  ResamplingOptions many;
  many.workers = 5;
  const auto a = jackknife_interval(m, DistanceFunction::interval(), 0.05);
  const auto b = jackknife_interval(m, DistanceFunction::interval(), 0.05, DfMode::fixed_a_minus_1, many);
  EXPECT_EQ(a.interval.lower, b.interval.lower);
  EXPECT_EQ(a.interval.upper, b.interval.upper);
}

TEST(Jackknife, EndpointsInsideAlphaRange) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto m = gaussian(6, 3, 0.1 * static_cast<double>(seed % 10), seed);
    const auto r = jackknife_interval(m, DistanceFunction::interval(), 0.05);
    EXPECT_LE(r.interval.lower, r.interval.upper);
    EXPECT_GT(r.interval.lower, -0.5);
    EXPECT_LT(r.interval.upper, 1.0);
  }
}

TEST(Jackknife, ZeroErrorVarianceIsClamped) {
  const DataMatrix m({{1, 1}, {2, 2}, {3, 3}, {4, 5}});
  const auto r = jackknife_interval(m, DistanceFunction::interval(), 0.05);
  EXPECT_TRUE(r.interval.diagnostics.clamped);
  EXPECT_LE(r.interval.lower, r.interval.upper);
}

TEST(Jackknife, NeedsThreeUnits) {
  EXPECT_THROW(jackknife_interval(DataMatrix({{1, 2}, {3, 5}}), DistanceFunction::interval(), 0.05),
               PreconditionError);
}

TEST(Hinkley, HandEvaluation) {
  JackknifeState st;
  st.pseudovalues = {1.2, 1.0, 0.8, 1.0};
  st.s2 = 0.08 / 3.0;
  st.v_jack = st.s2 / 4.0;
  // sum (p - 1)^4 = 0.0032; K = 0.0032 / 48 - 4 V^2 / 4 = 2.2222e-5; nu = 2 V^2 / K.
  const auto df = hinkley_df(st);
  EXPECT_FALSE(df.fallback);
  EXPECT_NEAR(df.nu, 4.0, 1e-9);
}

TEST(Hinkley, EqualPseudovaluesFallBack) {
  JackknifeState st;
  st.pseudovalues = {0.7, 0.7, 0.7, 0.7, 0.7};
  const auto df = hinkley_df(st);
  EXPECT_TRUE(df.fallback);
  EXPECT_EQ(df.nu, 4.0);
}

TEST(Hinkley, UsedOnlyOnRequest) {
  const auto m = gaussian(10, 4, 0.5, 12);
  const auto fixed = jackknife_interval(m, DistanceFunction::interval(), 0.05);
  EXPECT_EQ(*fixed.interval.diagnostics.df, 9.0);
  const auto h = jackknife_interval(m, DistanceFunction::interval(), 0.05, DfMode::hinkley);
  EXPECT_TRUE(h.interval.diagnostics.df.has_value());
  EXPECT_EQ(fixed.state.v_jack, h.state.v_jack);
}

TEST(Statistical, CustomaryBootstrapUndercovers) {
  const double alpha = 0.7;
  int covered = 0;
  const int datasets = 2000;
  for (int r = 0; r < datasets; ++r) {
    const auto m = gaussian(16, 4, alpha, derive_seed(55, {static_cast<std::uint64_t>(r)}));
    const auto ci = bootstrap_customary(MomentKernel(m), 1000, 0.05, derive_seed(56, {static_cast<std::uint64_t>(r)}));
    covered += ci.contains(alpha);
  }
  const double coverage = static_cast<double>(covered) / datasets;
  EXPECT_LT(coverage, 0.90) << "coverage " << coverage;
}

}  // namespace
