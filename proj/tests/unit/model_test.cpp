#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "fixtures.hpp"
#include "marketpulse/codec.hpp"
#include "marketpulse/error.hpp"
#include "marketpulse/model.hpp"

namespace marketpulse {
namespace {

using testing::make_snapshot;

bool has_violation(const std::vector<std::string>& v, const std::string& what) {
  return std::find(v.begin(), v.end(), what) != v.end();
}

TEST(AppIdTest, RejectsEmptyAndWhitespace) {
  EXPECT_THROW(AppId(""), Error);
  EXPECT_THROW(AppId("com.example app"), Error);
  EXPECT_THROW(AppId("com.example\tapp"), Error);
  EXPECT_EQ(AppId("com.example.app").str(), "com.example.app");
}

TEST(DownloadLadderTest, ContiguousAndStartsAtZero) {
  const auto& ladder = download_ladder();
  ASSERT_FALSE(ladder.empty());
  EXPECT_EQ(ladder.front().lo, 0);
  for (std::size_t i = 1; i < ladder.size(); ++i) EXPECT_EQ(ladder[i].lo, ladder[i - 1].hi);
  EXPECT_TRUE((DownloadBucket{500, 1000}).on_ladder());
  EXPECT_TRUE((DownloadBucket{1000, 5000}).on_ladder());
  EXPECT_FALSE((DownloadBucket{1000, 2000}).on_ladder());
  EXPECT_EQ(bucket_for_count(750'000), (DownloadBucket{500'000, 1'000'000}));
}

TEST(ValidateSnapshotTest, ConsistentFreeAppIsOk) {
  auto s = make_snapshot("com.a", 3);
  s.price_cents = 0;
  s.free = true;
  EXPECT_TRUE(validate_snapshot(s).empty());
}

TEST(ValidateSnapshotTest, RatingOutOfRange) {
  auto s = make_snapshot("com.a", 3);
  s.rating_avg = 5.7;
  EXPECT_TRUE(has_violation(validate_snapshot(s), "rating_avg out of [0,5]"));
}

TEST(ValidateSnapshotTest, LastUpdatedInFuture) {
  auto s = make_snapshot("com.a", 3);
  s.last_updated = day_of(s.fetch_time) + std::chrono::days{1};
  EXPECT_TRUE(has_violation(validate_snapshot(s), "last_updated in future"));
  s.last_updated = day_of(s.fetch_time);
  EXPECT_TRUE(validate_snapshot(s).empty());
}

TEST(ValidateSnapshotTest, ReportsEveryViolation) {
  auto s = make_snapshot("com.a", 3);
  s.rating_avg = -1;
  s.price_cents = 199;  // still flagged free
  s.downloads = {10, 10};
  s.size_bytes = -4;
  const auto v = validate_snapshot(s);
  EXPECT_EQ(v.size(), 4u);
}

TEST(ValidateSnapshotTest, RandomValidSnapshotsSatisfyInvariants) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 500; ++i) {
    auto s = testing::random_snapshot(rng, "com.r" + std::to_string(i), i % 40);
    if (!validate_snapshot(s).empty()) continue;
    EXPECT_EQ(s.free, s.price_cents == 0);
    EXPECT_GE(s.rating_avg, 0.0);
    EXPECT_LE(s.rating_avg, 5.0);
    EXPECT_LE(s.last_updated, day_of(s.fetch_time));
    EXPECT_TRUE(s.downloads.on_ladder());
  }
}

TEST(CodecTest, RoundTripRandomRecords) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 300; ++i) {
    const auto s = testing::random_snapshot(rng, "com.rt" + std::to_string(i), i);
    EXPECT_EQ(decode_snapshot_line(encode_line(s)), s);

    ReviewRecord r{AppId("com.rt" + std::to_string(i)), "r" + std::to_string(rng()), "u1", testing::day_n(i),
                   static_cast<int>(rng() % 5 + 1), "t\n\"x\"", "body"};
    EXPECT_EQ(decode_review_line(encode_line(r)), r);

    TopKObservation o{kAllListTypes[rng() % 5], testing::at_day(i, 3), {}};
    for (int k = 0, n = static_cast<int>(rng() % 30); k < n; ++k) o.ranking.emplace_back("com.k" + std::to_string(k));
    EXPECT_EQ(decode_topk_line(encode_line(o)), o);
  }
}

TEST(CodecTest, SnapshotLineHasExactFieldSet) {
  const auto j = nlohmann::json::parse(encode_line(make_snapshot("com.a", 1)));
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  std::sort(keys.begin(), keys.end());
  std::vector<std::string> expected{"app",         "category",   "developer",  "downloads_hi", "downloads_lo",
                                    "fetch_time",  "free",       "last_updated", "permissions", "price_cents",
                                    "rating_avg",  "rating_count", "size_bytes", "title",       "version"};
  std::sort(expected.begin(), expected.end());
  EXPECT_EQ(keys, expected);
}

TEST(CodecTest, RejectsUnknownMissingAndBadFields) {
  auto j = to_json(make_snapshot("com.a", 1));
  j["extra"] = 1;
  EXPECT_THROW(snapshot_from_json(j), Error);
  j.erase("extra");
  j.erase("price_cents");
  EXPECT_THROW(snapshot_from_json(j), Error);

  auto r = to_json(ReviewRecord{AppId("com.a"), "r1", "u", testing::day_n(0), 5, "", ""});
  r["rating"] = 6;
  try {
    review_from_json(r);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("rating out of range"), std::string::npos);
  }
  auto p = to_json(make_snapshot("com.a", 1));
  p["permissions"] = {"x", "x"};
  EXPECT_THROW(snapshot_from_json(p), Error);
}

// Compact encoder lines take a hand-rolled path; anything else goes through
// the general parser. Both must agree.
TEST(CodecTest, CompactAndGeneralDecodersAgree) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 300; ++i) {
    auto s = testing::random_snapshot(rng, "com.dec" + std::to_string(i), i);
    if (i % 3 == 0) s.title = "plain title " + std::to_string(i);
    if (i % 7 == 0) s.rating_avg = 1e-7 * i;
    const auto compact = encode_line(s);
    const auto pretty = to_json(s).dump(2);
    EXPECT_EQ(decode_snapshot_line(compact), s);
    EXPECT_EQ(decode_snapshot_line(pretty), snapshot_from_json(nlohmann::json::parse(pretty)));
    EXPECT_EQ(decode_snapshot_line(pretty), s);
  }
}

TEST(CodecTest, CompactLookalikesStillFailProperly) {
  const auto good = encode_line(make_snapshot("com.a", 1));
  auto expect_parse_error = [](const std::string& line, const std::string& needle) {
    try {
      decode_snapshot_line(line);
      ADD_FAILURE() << "accepted: " << line;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::ParseError) << line;
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  auto replace = [&](const std::string& from, const std::string& to) {
    auto line = good;
    line.replace(line.find(from), from.size(), to);
    return line;
  };
  expect_parse_error(replace("\"price_cents\":0", "\"price_cents\":0.5"), "price_cents");
  expect_parse_error(replace("\"price_cents\":0", "\"price_cents\":00"), "invalid JSON");
  expect_parse_error(replace("\"android.permission.CAMERA\"", "\"android.permission.INTERNET\""), "duplicate permission");
  expect_parse_error(replace("\"free\":true", "\"free\":1"), "free");
  expect_parse_error(replace("\"app\":\"com.a\"", "\"app\":\"com a\""), "app");
  expect_parse_error(good + "x", "invalid JSON");
  expect_parse_error(replace("}", ",\"extra\":1}"), "unknown field");
}

TEST(CodecTest, ManifestRoundTripAndOrdering) {
  DatasetManifest m{"dataset.2012", "USD", parse_date("2012-04-01"), parse_date("2012-11-30"), "daily"};
  EXPECT_EQ(manifest_from_json(to_json(m)), m);
  auto bad = to_json(m);
  bad["observation_end"] = "2012-01-01";
  EXPECT_THROW(manifest_from_json(bad), Error);
}

TEST(DateTest, ParseAndFormat) {
  EXPECT_EQ(format_date(parse_date("2012-02-29")), "2012-02-29");
  EXPECT_THROW(parse_date("2013-02-29"), Error);
  EXPECT_THROW(parse_date("2013-2-9"), Error);
  EXPECT_EQ(day_of(timestamp_from_epoch(-1)), date_from_days(-1));
}

TEST(TopKValidationTest, DuplicatesAndLength) {
  TopKObservation o{ListType::Free, testing::at_day(0, 1), {AppId("a"), AppId("b"), AppId("a")}};
  EXPECT_FALSE(validate_topk(o).empty());
  o.ranking.pop_back();
  EXPECT_TRUE(validate_topk(o).empty());
  o.fetch_time += std::chrono::seconds{5};
  EXPECT_FALSE(validate_topk(o).empty());
}

}  // namespace
}  // namespace marketpulse
