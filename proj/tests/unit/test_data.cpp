#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "kalpha/data.hpp"
#include "kalpha/rng.hpp"

namespace {

using namespace kalpha;

const std::string kripp = std::string(KALPHA_FIXTURES) + "/krippendorff_nominal.csv";

CsvOptions categorical() {
  CsvOptions o;
  o.mode = ValueMode::categorical;
  return o;
}

TEST(Csv, KrippendorffFixtureCounts) {
  const auto m = load_csv(kripp, categorical());
  EXPECT_EQ(m.units(), 12u);
  EXPECT_EQ(m.total(), 41u);
  EXPECT_EQ(m.count(11), 1u);
  EXPECT_EQ(m.coder_labels(), (std::vector<std::string>{"c1", "c2", "c3", "c4"}));
  EXPECT_FALSE(m.balanced());
}

TEST(Csv, DotMissingToken) {
  auto opt = categorical();
  opt.missing_token = ".";
  const auto dots = load_csv(std::string(KALPHA_FIXTURES) + "/krippendorff_nominal_dots.csv", opt);
  const auto na = load_csv(kripp, categorical());
  ASSERT_EQ(dots.total(), na.total());
  EXPECT_TRUE(std::equal(dots.flat().begin(), dots.flat().end(), na.flat().begin()));
}

TEST(Csv, EmptyInputHasNoUnits) {
  std::istringstream in("");
  try {
    parse_csv(in);
    FAIL() << "expected an error";
  } catch (const InputError& e) {
    EXPECT_STREQ(e.what(), "no units");
  }
  std::istringstream header_only("c1,c2\n");
  EXPECT_THROW(parse_csv(header_only), InputError);
}

TEST(Csv, SingleRowWithoutHeader) {
  std::istringstream in("1,1,1\n");
  CsvOptions o;
  o.header = false;
  const auto m = parse_csv(in, o);
  EXPECT_EQ(m.units(), 1u);
  EXPECT_EQ(m.total(), 3u);
}

TEST(Csv, RaggedRowIsAnError) {
  std::istringstream in("a,b\n1,2\n3\n");
  EXPECT_THROW(parse_csv(in), InputError);
}

TEST(Csv, NonNumericCellIsAnError) {
  std::istringstream in("a,b\n1,x\n");
  EXPECT_THROW(parse_csv(in), InputError);
}

TEST(Csv, RowNamesSemicolonAndLabels) {
  std::istringstream in("id;r1;r2\nimg1;low;high\nimg2;NA;low\n");
  auto o = categorical();
  o.delimiter = ';';
  o.row_names = true;
  const auto m = parse_csv(in, o);
  EXPECT_EQ(m.unit_ids(), (std::vector<std::string>{"img1", "img2"}));
  EXPECT_EQ(m.labels(), (std::vector<std::string>{"low", "high"}));
  EXPECT_EQ(m.count(1), 1u);
  EXPECT_EQ(m.row_coders(1)[0], 1u);
  EXPECT_EQ(m.format(m.offset(1)), "low");
}

TEST(Csv, RoundTripRandomMatrices) {
  Philox g(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t a = 1 + g() % 9, cols = 1 + g() % 6;
    std::ostringstream text;
    for (std::size_t c = 0; c < cols; ++c) text << (c ? "," : "") << "c" << c + 1;
    text << '\n';
    for (std::size_t i = 0; i < a; ++i) {
      for (std::size_t c = 0; c < cols; ++c) {
        text << (c ? "," : "");
        if (g() % 4 == 0) {
          text << "NA";
        } else {
          text << static_cast<double>(g() % 2001) / 8.0 - 100.0;
        }
      }
      text << '\n';
    }
    std::istringstream in(text.str());
    const auto m = parse_csv(in);
    std::ostringstream out;
    write_csv(out, m);
    EXPECT_EQ(out.str(), text.str());
    std::istringstream again(out.str());
    const auto back = parse_csv(again);
    ASSERT_EQ(back.total(), m.total());
    EXPECT_EQ(back.counts(), m.counts());
    EXPECT_TRUE(std::equal(back.flat().begin(), back.flat().end(), m.flat().begin()));
  }
}

TEST(Prune, DropsSingletonUnit) {
  const auto r = prune_units(load_csv(kripp, categorical()));
  EXPECT_EQ(r.matrix.units(), 11u);
  EXPECT_EQ(r.matrix.total(), 40u);
  EXPECT_EQ(r.dropped, (std::vector<std::size_t>{11}));
  EXPECT_EQ(r.matrix.labels().size(), 5u);
}

TEST(Prune, BalancedIsIdentity) {
  const DataMatrix m({{1, 2, 3}, {4, 5, 6}});
  const auto r = prune_units(m);
  EXPECT_TRUE(r.dropped.empty());
  EXPECT_EQ(r.matrix.counts(), m.counts());
}

TEST(Prune, AllSingletonsIsAnError) {
  const DataMatrix m({{1}, {2}, {3}});
  try {
    prune_units(m);
    FAIL() << "expected an error";
  } catch (const PreconditionError& e) {
    EXPECT_STREQ(e.what(), "no units");
  }
}

TEST(Matrix, DropUnitKeepsIds) {
  const DataMatrix m({{1, 2}, {3, 4}, {5, 6}});
  const auto d = drop_unit(m, 1);
  EXPECT_EQ(d.unit_ids(), (std::vector<std::string>{"1", "3"}));
  EXPECT_EQ(d.row(1)[0], 5.0);
  EXPECT_THROW(drop_unit(m, 3), PreconditionError);
}

TEST(Matrix, CategoricalRejectsBadCodes) {
  EXPECT_THROW(DataMatrix({{0.5}}, ValueMode::categorical), PreconditionError);
  EXPECT_THROW(DataMatrix({{2}}, ValueMode::categorical, {"a", "b"}), PreconditionError);
}

}  // namespace
