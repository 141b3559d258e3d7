#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "marketpulse/error.hpp"
#include "marketpulse/metrics.hpp"

namespace marketpulse {
namespace {

using testing::day_n;

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::InvalidInput;
}

TEST(StalenessTest, WindowBoundaries) {
  const Date ref = day_n(400);
  EXPECT_EQ(classify_staleness(ref - std::chrono::days{364}, ref).state, Staleness::Active);
  EXPECT_EQ(classify_staleness(ref - std::chrono::days{365}, ref).state, Staleness::Active);
  EXPECT_EQ(classify_staleness(ref - std::chrono::days{366}, ref).state, Staleness::Stale);
  EXPECT_EQ(classify_staleness(ref - std::chrono::days{31}, ref, 30).state, Staleness::Stale);
  EXPECT_EQ(code_of([&] { classify_staleness(ref + std::chrono::days{1}, ref); }), ErrorCode::InvalidInput);
}

TEST(PopularityTest, LowerBoundRule) {
  EXPECT_EQ(classify_popularity({500, 1000}), PopularityClass::Unpopular);
  EXPECT_EQ(classify_popularity({1000, 5000}), PopularityClass::Popular);
  EXPECT_EQ(classify_popularity({50000, 100000}), PopularityClass::Popular);
  EXPECT_EQ(classify_popularity({100000, 500000}), PopularityClass::MostPopular);
  EXPECT_EQ(classify_popularity({0, 1}), PopularityClass::Unpopular);
}

TEST(UpdateStatsTest, AverageInterval) {
  AppTimeline t{AppId("com.a"), {}, {day_n(0), day_n(10), day_n(20)}, {}};
  const auto s = update_stats(t);
  EXPECT_EQ(s.update_count, 3u);
  ASSERT_TRUE(s.aui_days);
  EXPECT_DOUBLE_EQ(*s.aui_days, 10.0);

  const auto windowed = update_stats(t, day_n(5), day_n(20));
  EXPECT_EQ(windowed.update_count, 2u);
  EXPECT_DOUBLE_EQ(*windowed.aui_days, 10.0);

  t.update_days = {day_n(3)};
  EXPECT_EQ(update_stats(t).update_count, 1u);
  EXPECT_FALSE(update_stats(t).aui_days);
}

TEST(BandwidthTest, NinetyOneUpdatesOfOnePointEightMiB) {
  const std::int64_t size = 1887437;  // ~1.8 MiB
  const auto b = update_bandwidth(size, {1'000'000, 5'000'000}, 91);
  EXPECT_NEAR(static_cast<double>(b.per_user_bytes) / (1 << 20), 163.8, 0.05);
  EXPECT_NEAR(static_cast<double>(b.per_update_fleet_lo) / std::pow(2.0, 40), 1.716, 0.001);
  EXPECT_EQ(b.per_update_fleet_hi, size * 5'000'000);
  EXPECT_EQ(b.total_fleet_hi, size * 5'000'000 * 91);

  const auto zero = update_bandwidth(0, {1000, 5000}, 12);
  EXPECT_EQ(zero.per_user_bytes, 0);
  EXPECT_EQ(zero.total_fleet_lo, 0);
  EXPECT_EQ(zero.total_fleet_hi, 0);
}

TEST(PriceTest, CcdfExamples) {
  const std::vector<std::int64_t> counts{0, 0, 1, 2, 5};
  const auto ccdf = price_change_ccdf(counts);
  ASSERT_EQ(ccdf.size(), 6u);
  EXPECT_DOUBLE_EQ(ccdf[0].y, std::sqrt(3.0));
  EXPECT_DOUBLE_EQ(ccdf[1].y, std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(ccdf.back().y, 0.0);
  EXPECT_EQ(ccdf.back().x, 5);

  const std::vector<std::int64_t> zeros{0, 0, 0};
  const auto flat = price_change_ccdf(zeros);
  ASSERT_EQ(flat.size(), 1u);
  EXPECT_EQ(flat[0].y, 0.0);
  EXPECT_TRUE(price_change_ccdf({}).empty());
}

TEST(PriceTest, CoefficientOfVariation) {
  const std::vector<double> pair{1.0, 3.0};
  EXPECT_DOUBLE_EQ(*price_dispersion_cov(pair), 0.5);
  const std::vector<double> constant{2.99, 2.99, 2.99};
  EXPECT_NEAR(*price_dispersion_cov(constant), 0.0, 1e-15);
  const std::vector<double> free{0.0, 0.0};
  EXPECT_FALSE(price_dispersion_cov(free));
  EXPECT_FALSE(price_dispersion_cov({}));
  const std::vector<double> mixed{0.0, 1.0, 3.0};  // the free app is dropped
  EXPECT_DOUBLE_EQ(*price_dispersion_cov(mixed), 0.5);
}

TEST(PriceTest, Median) {
  EXPECT_FALSE(median({}));
  EXPECT_DOUBLE_EQ(*median({3, 1, 2}), 2.0);
  EXPECT_DOUBLE_EQ(*median({4, 1, 2, 3}), 2.5);
}

TEST(DecompositionTest, ConstantSeries) {
  const std::vector<double> x(21, 4.5);
  const auto d = seasonal_trend_decompose(x, 7);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_NEAR(d.seasonal[i], 0.0, 1e-12);
    if (d.trend[i]) {
      EXPECT_NEAR(*d.trend[i], 4.5, 1e-12);
      EXPECT_NEAR(*d.remainder[i], 0.0, 1e-12);
    }
  }
  EXPECT_FALSE(d.trend.front());
  EXPECT_FALSE(d.trend.back());
}

class PeriodicSignalTest : public ::testing::TestWithParam<int> {};

TEST_P(PeriodicSignalTest, LinearPlusPeriodicLeavesNoRemainder) {
  const int p = GetParam();
  std::vector<double> pattern(p);
  std::mt19937_64 rng(static_cast<std::uint64_t>(p));
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  double mean = 0.0;
  for (auto& v : pattern) mean += (v = u(rng));
  mean /= p;
  for (auto& v : pattern) v -= mean;

  std::vector<double> x;
  for (int i = 0; i < 6 * p + 3; ++i) x.push_back(10.0 + 0.37 * i + pattern[i % p]);
  const auto d = seasonal_trend_decompose(x, p);

  double phase_sum = 0.0;
  for (int j = 0; j < p; ++j) phase_sum += d.seasonal[j];
  EXPECT_NEAR(phase_sum, 0.0, 1e-9);
  std::size_t defined = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_NEAR(d.seasonal[i], pattern[i % p], 1e-9);
    if (!d.remainder[i]) continue;
    ++defined;
    EXPECT_LT(std::abs(*d.remainder[i]), 1e-9);
    EXPECT_NEAR(*d.trend[i] + d.seasonal[i] + *d.remainder[i], x[i], 1e-9);
  }
  EXPECT_EQ(defined, x.size() - 2 * static_cast<std::size_t>(p / 2));
}

INSTANTIATE_TEST_SUITE_P(Periods, PeriodicSignalTest, ::testing::Values(2, 3, 7, 12));

TEST(DecompositionTest, Errors) {
  const std::vector<double> x(13, 1.0);
  EXPECT_EQ(code_of([&] { seasonal_trend_decompose(x, 7); }), ErrorCode::InsufficientData);
  EXPECT_EQ(code_of([&] { seasonal_trend_decompose(x, 1); }), ErrorCode::InvalidInput);
}

TEST(PowerLawTest, HandComputedMle) {
  const std::vector<double> s{1, 1, 1, 2, 3};
  const auto fit = fit_power_law(s, 1.0);
  EXPECT_NEAR(fit.alpha, 1.0 + 5.0 / (std::log(2.0) + std::log(3.0)), 1e-12);
  EXPECT_NEAR(fit.alpha, 3.791, 1e-3);
  EXPECT_EQ(fit.n_tail, 5u);
  EXPECT_GE(fit.ks_distance, 0.0);
  EXPECT_LE(fit.ks_distance, 1.0);
}

TEST(PowerLawTest, Errors) {
  const std::vector<double> same{4, 4, 4};
  EXPECT_EQ(code_of([&] { fit_power_law(same, 4.0); }), ErrorCode::DegenerateTail);
  EXPECT_EQ(code_of([&] { fit_power_law(same, 5.0); }), ErrorCode::InsufficientData);
  EXPECT_EQ(code_of([&] { fit_power_law(same, 0.0); }), ErrorCode::InvalidInput);
  const std::vector<double> bad{1, -2};
  EXPECT_EQ(code_of([&] { fit_power_law(bad, 1.0); }), ErrorCode::InvalidInput);
}

std::vector<double> pareto_samples(double alpha, double x_min, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
    out.push_back(x_min * std::pow(u, -1.0 / (alpha - 1.0)));
  }
  return out;
}

TEST(PowerLawTest, RecoversAlphaFromInverseCdfSamples) {
  const auto s = pareto_samples(2.5, 1.0, 100'000, 17);
  const auto fit = fit_power_law(s, 1.0);
  EXPECT_GE(fit.alpha, 2.45);
  EXPECT_LE(fit.alpha, 2.55);
  EXPECT_LT(fit.ks_distance, 0.01);
}

TEST(PowerLawTest, ScanFindsTheTailStart) {
  // Uniform noise below 5, a clean power law above it.
  auto s = pareto_samples(2.2, 5.0, 4000, 3);
  std::mt19937_64 rng(4);
  for (int i = 0; i < 4000; ++i) s.push_back(1.0 + 4.0 * std::uniform_real_distribution<double>()(rng));
  const auto fit = fit_power_law_scan(s, 100);
  EXPECT_GE(fit.x_min, 4.5);  // never settles inside the uniform noise
  EXPECT_NEAR(fit.alpha, 2.2, 0.15);
  EXPECT_GE(fit.n_tail, 100u);
}

TEST(SlopeTest, ThroughOrigin) {
  const std::vector<XY> line{{2, 1}, {4, 2}, {10, 5}};
  EXPECT_DOUBLE_EQ(*downloads_ratings_slope(line), 0.5);
  const std::vector<XY> zeros{{0, 1}, {0, 2}};
  EXPECT_FALSE(downloads_ratings_slope(zeros));
  const std::vector<XY> one{{1, 1}};
  EXPECT_EQ(code_of([&] { downloads_ratings_slope(one); }), ErrorCode::InvalidInput);
}

TEST(YuleTest, ContingencyExamples) {
  EXPECT_EQ(*yule_q({9, 0, 0, 1}), 1.0);
  EXPECT_EQ(*yule_q({0, 3, 2, 0}), -1.0);
  EXPECT_DOUBLE_EQ(*yule_q({3, 1, 1, 3}), 0.8);
  EXPECT_FALSE(yule_q({0, 0, 5, 0}));
}

std::set<DayApp> random_universe(std::mt19937_64& rng, std::size_t n) {
  std::set<DayApp> u;
  while (u.size() < n) u.insert({day_n(static_cast<int>(rng() % 30)), AppId("com.x" + std::to_string(rng() % 40))});
  return u;
}

TEST(YuleTest, SymmetricAndBoundedProperty) {
  std::mt19937_64 rng(11);
  const auto universe = random_universe(rng, 200);
  const std::vector<DayApp> items(universe.begin(), universe.end());
  int defined = 0;
  for (int trial = 0; trial < 10'000; ++trial) {
    AttributeEventSet a{AttributeKind::PriceUp, {}}, b{AttributeKind::VersionUp, {}};
    const auto pa = rng() % 100, pb = rng() % 100;
    for (const auto& x : items) {
      if (rng() % 100 < pa) a.members.insert(x);
      if (rng() % 100 < pb) b.members.insert(x);
    }
    const auto ab = yule_association(a, b, universe);
    const auto ba = yule_association(b, a, universe);
    ASSERT_EQ(ab.has_value(), ba.has_value());
    if (!ab) continue;
    ++defined;
    EXPECT_EQ(*ab, *ba);
    EXPECT_GE(*ab, -1.0);
    EXPECT_LE(*ab, 1.0);
  }
  EXPECT_GT(defined, 9000);
}

TEST(YuleTest, BruteForceAgreesWithMergeCount) {
  std::mt19937_64 rng(12);
  const auto universe = random_universe(rng, 80);
  for (int trial = 0; trial < 200; ++trial) {
    AttributeEventSet a, b;
    Contingency t;
    for (const auto& x : universe) {
      const bool in_a = rng() % 3 == 0, in_b = rng() % 2 == 0;
      if (in_a) a.members.insert(x);
      if (in_b) b.members.insert(x);
      (in_a ? (in_b ? t.both : t.only_a) : (in_b ? t.only_b : t.neither))++;
    }
    EXPECT_EQ(yule_association(a, b, universe), yule_q(t));
  }
}

TEST(YuleTest, OutsideUniverseRejected) {
  std::set<DayApp> universe{{day_n(0), AppId("com.a")}};
  AttributeEventSet a{AttributeKind::PriceUp, {{day_n(1), AppId("com.a")}}};
  EXPECT_EQ(code_of([&] { yule_association(a, a, universe); }), ErrorCode::InvalidInput);
}

ChangeEvent event(const char* app, int day, AttributeKind kind) {
  ChangeDetail detail = IntChange{0, 1};
  if (kind == AttributeKind::VersionUp || kind == AttributeKind::CategoryChange) detail = TextChange{"a", "b"};
  if (kind == AttributeKind::DownloadsUp) detail = BucketChange{{1, 5}, {5, 10}};
  if (is_permission_kind(kind)) detail = PermissionChange{{"X"}, {}};
  return {AppId(app), day_n(day), kind, detail};
}

TEST(AssociationMatrixTest, ExclusivePriceDirectionsAndSelfAssociation) {
  std::vector<AppTimeline> timelines(2);
  timelines[0].app = AppId("com.a");
  timelines[0].events = {event("com.a", 1, AttributeKind::PriceUp), event("com.a", 2, AttributeKind::PriceDown),
                         event("com.a", 2, AttributeKind::VersionUp), event("com.a", 3, AttributeKind::VersionUp)};
  timelines[1].app = AppId("com.b");
  timelines[1].events = {event("com.b", 1, AttributeKind::PriceDown), event("com.b", 1, AttributeKind::VersionUp),
                         event("com.b", 4, AttributeKind::DownloadsUp), event("com.b", 5, AttributeKind::PriceUp)};
  const auto m = association_matrix(timelines);
  EXPECT_EQ(m.universe_size, 6u);

  const auto idx = [&](AttributeKind k) {
    return static_cast<std::size_t>(std::find(m.kinds.begin(), m.kinds.end(), k) - m.kinds.begin());
  };
  const auto up = idx(AttributeKind::PriceUp), down = idx(AttributeKind::PriceDown), ver = idx(AttributeKind::VersionUp);
  EXPECT_EQ(m.set_sizes[up], 2u);
  EXPECT_EQ(m.q[up][down], -1.0);
  EXPECT_EQ(m.q[down][up], -1.0);
  EXPECT_EQ(m.q[up][up], 1.0);
  EXPECT_EQ(m.q[down][ver], 1.0);  // every price drop came with a version change
  EXPECT_FALSE(m.q[idx(AttributeKind::CategoryChange)][up]);

  // With neutral observed days in the universe the table only grows its d cell.
  timelines[0].observed_days = {day_n(1), day_n(2), day_n(3), day_n(9)};
  const auto all = association_matrix(timelines, AssociationUniverse::AllObserved);
  EXPECT_EQ(all.universe_size, 7u);
  EXPECT_EQ(all.q[up][down], -1.0);
}

}  // namespace
}  // namespace marketpulse
