#include <gtest/gtest.h>

#include <sstream>

#include "hqs/error.hpp"
#include "hqs/error_report.hpp"
#include "test_support.hpp"

using namespace hqs;
using namespace hqs::harness;

TEST(ErrorReport, FixturePercentages) {
  const auto recs = read_error_records(hqs::testing::data_dir() / "error_annotations.jsonl");
  ASSERT_EQ(recs.size(), 1772u);
  const auto r = aggregate_errors(recs);
  EXPECT_EQ(r.total, 1772u);
  EXPECT_EQ(r.count(ErrorCategory::kSemantic), 251u);
  EXPECT_EQ(r.count(ErrorCategory::kModalityPlane), 364u);
  EXPECT_EQ(r.count(ErrorCategory::kSpecification), 292u);
  EXPECT_EQ(r.count(ErrorCategory::kBoundaryLoss), 363u);
  EXPECT_EQ(r.count(ErrorCategory::kMiscellaneous), 502u);
  EXPECT_EQ(r.percent_x100[0], 1416);
  EXPECT_EQ(r.percent_x100[1], 2054);
  EXPECT_EQ(r.percent_x100[2], 1648);
  EXPECT_EQ(r.percent_x100[3], 2049);
  EXPECT_EQ(r.percent_x100[4], 2833);
  EXPECT_NE(r.table().find("28.33"), std::string::npos);
  EXPECT_DOUBLE_EQ(r.to_json().at("categories").at("SEMANTIC").at("percent").get<double>(), 14.16);
}

TEST(ErrorReport, RoundsHalfUp) {
  // 1/8 = 12.5%, 1/16 = 6.25%, 1/32 = 3.125% -> 3.13
  std::vector<ErrorRecord> recs(32);
  recs[0].category = ErrorCategory::kSemantic;
  for (int i = 1; i < 32; ++i) recs[static_cast<std::size_t>(i)].category = ErrorCategory::kMiscellaneous;
  const auto r = aggregate_errors(recs);
  EXPECT_EQ(r.percent_x100[0], 313);
  EXPECT_EQ(r.percent_x100[4], 9688);  // 96.875
}

TEST(ErrorReport, RecordRoundTrip) {
  ErrorRecord e{"q1", "left lung", "right lung", ErrorCategory::kSpecification, "side"};
  const auto back = ErrorRecord::from_json(e.to_json());
  EXPECT_EQ(back.qa_id, "q1");
  EXPECT_EQ(back.category, ErrorCategory::kSpecification);
  EXPECT_EQ(back.note, "side");
  for (auto c : all_error_categories()) EXPECT_EQ(parse_error_category(to_string(c)), c);
  EXPECT_THROW(parse_error_category("semantic"), Error);
}

TEST(ErrorReport, MalformedInput) {
  std::istringstream bad_cat(
      "{\"qa_id\":\"a\",\"gold\":\"x\",\"predicted\":\"y\",\"category\":\"SEMANTIC\"}\n\n"
      "{\"qa_id\":\"b\",\"gold\":\"x\",\"predicted\":\"y\",\"category\":\"TYPO\"}\n");
  try {
    read_error_records(bad_cat, "ann.jsonl");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  std::istringstream bad_json("{\"qa_id\":\"a\",\n");
  EXPECT_THROW(read_error_records(bad_json), ParseError);
  std::istringstream empty("\n\n");
  EXPECT_TRUE(read_error_records(empty).empty());
  EXPECT_THROW(aggregate_errors({}), Error);
  EXPECT_THROW(read_error_records(std::filesystem::path("/no/such.jsonl")), IoError);
}
