#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "marketpulse/anomaly.hpp"
#include "marketpulse/error.hpp"

namespace marketpulse {
namespace {

using testing::day_n;

ReviewTimeline daily(const std::vector<int>& positive, const std::vector<int>& negative = {}) {
  ReviewTimeline t{AppId("com.a"), {}};
  for (std::size_t i = 0; i < positive.size(); ++i) {
    const int neg = i < negative.size() ? negative[i] : 0;
    if (positive[i] || neg) t.days.push_back({day_n(static_cast<int>(i)), positive[i], neg, 0});
  }
  return t;
}

TEST(ReviewSpikeTest, FlatBaselineWithOneBurst) {
  std::vector<int> counts(40, 10);
  counts[35] = 200;
  const auto spikes = detect_review_spikes(daily(counts));
  ASSERT_EQ(spikes.size(), 1u);
  EXPECT_EQ(spikes[0].day, day_n(35));
  EXPECT_EQ(spikes[0].polarity, Polarity::Positive);
  EXPECT_EQ(spikes[0].count, 200);
  EXPECT_EQ(spikes[0].baseline, 10.0);
  EXPECT_EQ(spikes[0].threshold, 20.0);
  EXPECT_EQ(spikes[0].score, 20.0);
}

TEST(ReviewSpikeTest, AllZeroAndEmpty) {
  EXPECT_TRUE(detect_review_spikes(daily(std::vector<int>(30, 0))).empty());
  EXPECT_TRUE(detect_review_spikes(ReviewTimeline{}).empty());
}

TEST(ReviewSpikeTest, SustainedLowVolumeWithBurstsOfBothPolarities) {
  std::mt19937_64 rng(6);
  std::vector<int> pos(120), neg(120);
  for (int i = 0; i < 120; ++i) {
    pos[i] = 20 + static_cast<int>(rng() % 29);  // always under 50
    neg[i] = static_cast<int>(rng() % 5);
  }
  for (int d : {40, 41, 42, 90}) pos[d] = 210 + d;
  neg[70] = 250;
  const auto spikes = detect_review_spikes(daily(pos, neg));
  std::vector<std::pair<int, Polarity>> got;
  for (const auto& s : spikes) got.emplace_back(static_cast<int>(days_between(day_n(0), s.day)), s.polarity);
  EXPECT_EQ(got, (std::vector<std::pair<int, Polarity>>{{40, Polarity::Positive},
                                                        {41, Polarity::Positive},
                                                        {42, Polarity::Positive},
                                                        {70, Polarity::Negative},
                                                        {90, Polarity::Positive}}));
}

TEST(ReviewSpikeTest, RaisingAFlaggedDayKeepsItFlaggedProperty) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> counts(60);
    for (auto& c : counts) c = static_cast<int>(rng() % 15);
    const auto day = 30 + static_cast<int>(rng() % 30);
    counts[day] = 20 + static_cast<int>(rng() % 100);
    const auto before = detect_review_spikes(daily(counts));
    const bool flagged = std::any_of(before.begin(), before.end(), [&](auto& s) { return s.day == day_n(day); });
    if (!flagged) continue;
    counts[day] += 1 + static_cast<int>(rng() % 500);
    const auto after = detect_review_spikes(daily(counts));
    EXPECT_TRUE(std::any_of(after.begin(), after.end(), [&](auto& s) { return s.day == day_n(day); }));
  }
}

TEST(ReviewSpikeTest, EarlyDaysAreNotJudged) {
  std::vector<int> counts(20, 30);
  counts[3] = 300;
  EXPECT_TRUE(detect_review_spikes(daily(counts)).empty());
  const auto eager = detect_review_spikes(daily(counts), {30, 5, 20, 0});
  ASSERT_FALSE(eager.empty());
  EXPECT_EQ(eager[0].day, day_n(0));  // nothing before it, so baseline 0
  EXPECT_EQ(eager[0].baseline, 0.0);
}

TEST(ReviewSpikeTest, BadParameters) {
  EXPECT_THROW(detect_review_spikes(daily({1}), {0, 5, 20, 7}), Error);
}

ChangeEvent perm_event(int day, std::set<std::string> added, std::set<std::string> removed) {
  const auto kind = added.size() > removed.size()   ? AttributeKind::PermissionsUp
                    : added.size() < removed.size() ? AttributeKind::PermissionsDown
                                                    : AttributeKind::PermissionsChanged;
  return {AppId("com.a"), day_n(day), kind, PermissionChange{std::move(added), std::move(removed)}};
}

ChangeEvent version_event(int day) {
  return {AppId("com.a"), day_n(day), AttributeKind::VersionUp, TextChange{"1", "2"}};
}

DangerousPermissionPolicy policy() {
  std::istringstream in("# comment\nSEND_SMS\n\n  READ_CONTACTS  # trailing\n");
  return DangerousPermissionPolicy::parse(in);
}

TEST(PermissionFlagTest, PolicyFileParsing) {
  EXPECT_EQ(policy().dangerous, (std::set<std::string>{"READ_CONTACTS", "SEND_SMS"}));
  const auto shipped = DangerousPermissionPolicy::load(MARKETPULSE_DATA_DIR "/dangerous_permissions.txt");
  EXPECT_TRUE(shipped.is_dangerous("android.permission.SEND_SMS"));
  EXPECT_FALSE(shipped.is_dangerous("android.permission.INTERNET"));
  EXPECT_THROW(DangerousPermissionPolicy::load("/nonexistent/policy.txt"), Error);
}

TEST(PermissionFlagTest, RemoveThenReAddOneDayLater) {
  AppTimeline t{AppId("com.a"), {}, {}, {}};
  t.events = {version_event(3), perm_event(3, {}, {"SEND_SMS", "READ_CONTACTS"}), version_event(4),
              perm_event(4, {"SEND_SMS", "READ_CONTACTS"}, {})};
  const auto flags = permission_flags(t, policy());
  ASSERT_EQ(flags.size(), 2u);
  EXPECT_EQ(flags[0].kind, PermissionFlagKind::DangerousAdded);
  EXPECT_EQ(flags[1], (PermissionFlag{AppId("com.a"), day_n(4), PermissionFlagKind::ChurnWithinWindow,
                                      {"READ_CONTACTS", "SEND_SMS"}}));
}

TEST(PermissionFlagTest, ChurnOutsideWindowIsNotFlagged) {
  AppTimeline t{AppId("com.a"), {}, {}, {}};
  t.events = {version_event(1), perm_event(1, {}, {"X"}), version_event(20), perm_event(20, {"X"}, {})};
  EXPECT_TRUE(permission_flags(t, {}, {7, false}).empty());
  EXPECT_EQ(permission_flags(t, {}, {30, false}).size(), 1u);
}

TEST(PermissionFlagTest, ChangeWithoutVersionChange) {
  AppTimeline t{AppId("com.a"), {}, {}, {}};
  t.events = {perm_event(5, {"C", "D"}, {"B"})};
  const auto flags = permission_flags(t, policy());
  ASSERT_EQ(flags.size(), 1u);
  EXPECT_EQ(flags[0].kind, PermissionFlagKind::ChangeWithoutVersionChange);
  EXPECT_EQ(flags[0].detail, (std::set<std::string>{"B", "C", "D"}));
}

TEST(PermissionFlagTest, NoPermissionEventsAndEmptyPolicy) {
  AppTimeline t{AppId("com.a"), {version_event(1)}, {}, {}};
  EXPECT_TRUE(permission_flags(t, policy()).empty());
  try {
    permission_flags(t, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError);
  }
  EXPECT_NO_THROW(permission_flags(t, {}, {7, false}));
}

TEST(PermissionFlagTest, PureFunctionOfTimelineProperty) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    AppTimeline t{AppId("com.a"), {}, {}, {}};
    for (int d = 0; d < 40; ++d) {
      if (rng() % 3 == 0) t.events.push_back(version_event(d));
      if (rng() % 3 == 0) t.events.push_back(perm_event(d, {"p" + std::to_string(rng() % 4)}, {"SEND_SMS"}));
    }
    const auto a = permission_flags(t, policy());
    const auto b = permission_flags(t, policy());
    EXPECT_EQ(a, b);
    for (const auto& f : a) EXPECT_FALSE(f.detail.empty());
  }
}

TEST(DecouplingTest, Rates) {
  AppTimeline coupled{AppId("com.a"), {version_event(1), perm_event(1, {"X"}, {})}, {}, {}};
  AppTimeline loose{AppId("com.b"), {perm_event(2, {"X"}, {}), perm_event(3, {}, {"X"})}, {}, {}};
  EXPECT_EQ(*permission_version_decoupling_rate(std::span(&coupled, 1)), 0.0);
  EXPECT_EQ(*permission_version_decoupling_rate(std::span(&loose, 1)), 1.0);
  const std::vector both{coupled, loose};
  EXPECT_DOUBLE_EQ(*permission_version_decoupling_rate(both), 2.0 / 3.0);
  AppTimeline none{AppId("com.c"), {version_event(1)}, {}, {}};
  EXPECT_FALSE(permission_version_decoupling_rate(std::span(&none, 1)));
}

TEST(ScamScanTest, TitleSimilarity) {
  EXPECT_EQ(title_similarity("Flashlight", "FLASHLIGHT"), 1.0);
  EXPECT_EQ(title_similarity("abcd", "bcde"), 1.0 / 3.0);  // {abc,bcd} vs {bcd,cde}
  EXPECT_EQ(title_similarity("ab", "AB"), 1.0);
  EXPECT_EQ(title_similarity("ab", "abc"), 0.0);
}

AppSnapshot listing(const std::string& app, const std::string& dev, const std::string& title, std::int64_t price) {
  auto s = testing::make_snapshot(app, 1);
  s.developer = dev;
  s.title = title;
  s.price_cents = price;
  s.free = price == 0;
  return s;
}

TEST(ScamScanTest, NearIdenticalPaidTitlesFormOneCluster) {
  std::vector<AppSnapshot> snaps;
  for (int i = 0; i < 10; ++i) {
    snaps.push_back(listing("com.scam.a" + std::to_string(i), "scammer",
                            "Super HD Flashlight Pro Wallpaper Edition " + std::to_string(i), 199));
  }
  for (int i = 0; i < 10; ++i) {
    snaps.push_back(listing("com.honest.a" + std::to_string(i), "honest", "Unrelated title number " + std::string(i + 1, 'x') + std::to_string(i * 7919), 0));
  }
  const auto clusters = scam_pattern_scan(snaps);
  ASSERT_EQ(clusters.size(), 1u);
  EXPECT_EQ(clusters[0].developer, "scammer");
  EXPECT_EQ(clusters[0].apps.size(), 10u);
  EXPECT_TRUE(std::is_sorted(clusters[0].apps.begin(), clusters[0].apps.end()));
}

TEST(ScamScanTest, DissimilarOrFewOrOffBandApps) {
  std::vector<AppSnapshot> dissimilar;
  const char* titles[] = {"Chess Master", "Weather Now", "Recipe Box", "Sudoku Daily", "Bank Helper",
                          "Photo Frame", "Run Tracker", "Piano Keys", "Star Map", "Budget Book"};
  for (int i = 0; i < 10; ++i) dissimilar.push_back(listing("com.d" + std::to_string(i), "dev", titles[i], 199));
  EXPECT_TRUE(scam_pattern_scan(dissimilar).empty());

  std::vector<AppSnapshot> two{listing("com.t1", "dev", "Same Title Here", 199), listing("com.t2", "dev", "Same Title Here", 199)};
  EXPECT_TRUE(scam_pattern_scan(two).empty());

  std::vector<AppSnapshot> pricey;
  for (int i = 0; i < 6; ++i) pricey.push_back(listing("com.p" + std::to_string(i), "dev", "Same Title Here", 999));
  EXPECT_TRUE(scam_pattern_scan(pricey).empty());
  EXPECT_EQ(scam_pattern_scan(pricey, {5, 100, 999, 0.8}).size(), 1u);
}

TEST(ExternalFlagsTest, SelectionRule) {
  std::istringstream csv("app,flag_count\ncom.a,3\ncom.b,2\r\ncom.c,5\n\n");
  const auto flags = parse_flags_csv(csv);
  ASSERT_EQ(flags.size(), 3u);
  const std::map<std::string, std::size_t> reviews{{"com.a", 12}, {"com.b", 40}, {"com.c", 4}};
  const auto joined = join_external_flags(flags, [&](const AppId& app) { return reviews.at(app.str()); });
  ASSERT_EQ(joined.size(), 3u);
  EXPECT_TRUE(joined[0].selected);
  EXPECT_FALSE(joined[1].selected);
  EXPECT_FALSE(joined[2].selected);
  EXPECT_EQ(joined[0].review_count, 12u);
}

TEST(ExternalFlagsTest, MalformedLinesNameTheLine) {
  for (const auto& [text, line] : std::vector<std::pair<std::string, std::string>>{
           {"app,flag_count\ncom.a,3\ncom.b\n", "line 3"},
           {"com.a,x\n", "line 1"},
           {"com.a,-1\n", "line 1"},
           {"com.a,1,2\n", "line 1"},
           {"\ncom.a,1\n bad id,2\n", "line 3"}}) {
    std::istringstream in(text);
    try {
      parse_flags_csv(in);
      ADD_FAILURE() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::ParseError);
      EXPECT_NE(std::string(e.what()).find(line), std::string::npos) << e.what();
    }
  }
}

}  // namespace
}  // namespace marketpulse
