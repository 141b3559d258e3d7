#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "fixtures.hpp"
#include "marketpulse/error.hpp"
#include "marketpulse/store.hpp"

namespace marketpulse {
namespace {

using testing::at_day;
using testing::make_snapshot;
using testing::TempDir;

std::vector<AppSnapshot> random_population(std::mt19937_64& rng, int apps, int days) {
  std::vector<AppSnapshot> out;
  for (int a = 0; a < apps; ++a) {
    for (int d = 0; d < days; ++d) {
      if (rng() % 4 == 0) continue;
      auto s = testing::random_snapshot(rng, "com.app" + std::to_string(a), d);
      if (validate_snapshot(s).empty()) out.push_back(std::move(s));
    }
  }
  return out;
}

TEST(SnapStoreTest, SameLineTwiceIsDeduplicated) {
  TempDir tmp;
  SnapStore store(tmp.path());
  std::stringstream in;
  const auto line = encode_line(make_snapshot("com.a", 1));
  in << line << '\n' << line << '\n';
  const auto report = store.ingest_lines(RecordKind::Snapshot, in);
  EXPECT_EQ(report.snapshots.accepted, 1u);
  EXPECT_EQ(report.snapshots.deduplicated, 1u);
  EXPECT_EQ(store.snapshot_count(), 1u);
}

TEST(SnapStoreTest, ReviewRatingSixRejectedWithLineNumber) {
  TempDir tmp;
  SnapStore store(tmp.path());
  std::stringstream in;
  in << R"({"app":"com.a","review_id":"r1","reviewer_id":"u","date":"2012-04-02","rating":5,"title":"","text":""})"
     << "\n"
     << R"({"app":"com.a","review_id":"r2","reviewer_id":"u","date":"2012-04-02","rating":6,"title":"","text":""})"
     << "\nnot json\n";
  const auto report = store.ingest_lines(RecordKind::Review, in);
  EXPECT_EQ(report.reviews.accepted, 1u);
  EXPECT_EQ(report.reviews.rejected, 2u);
  ASSERT_EQ(report.rejections.size(), 2u);
  EXPECT_EQ(report.rejections[0].line, 2u);
  EXPECT_EQ(report.rejections[0].reason, "rating out of range");
  EXPECT_EQ(report.rejections[1].line, 3u);
}

TEST(SnapStoreTest, InvalidSnapshotRejectedWithViolation) {
  TempDir tmp;
  SnapStore store(tmp.path());
  auto s = make_snapshot("com.a", 1);
  s.rating_avg = 6;
  const auto report = store.ingest(std::vector{s});
  EXPECT_EQ(report.snapshots.rejected, 1u);
  EXPECT_EQ(report.rejections.at(0).reason, "rating_avg out of [0,5]");
}

TEST(SnapStoreTest, ChangedPayloadAtSameFetchTimeIsConflict) {
  TempDir tmp;
  SnapStore store(tmp.path());
  auto s = make_snapshot("com.a", 1);
  store.ingest(std::vector{s});
  s.price_cents = 99;
  s.free = false;
  const auto report = store.ingest(std::vector{s});
  EXPECT_EQ(report.snapshots.conflicts, 1u);
  EXPECT_EQ(report.snapshots.accepted, 0u);
  EXPECT_EQ(store.query_app_series(s.app).snapshots.at(0).price_cents, 0);
}

TEST(SnapStoreTest, WindowQueries) {
  TempDir tmp;
  SnapStore store(tmp.path());
  store.ingest(std::vector{make_snapshot("com.a", 1), make_snapshot("com.a", 2), make_snapshot("com.a", 3)});
  EXPECT_EQ(store.query_app_series(AppId("com.a"), {at_day(2), at_day(4)}).size(), 2u);
  EXPECT_TRUE(store.query_app_series(AppId("com.unknown")).empty());
  try {
    store.query_app_series(AppId("com.a"), {at_day(4), at_day(2)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidWindow);
  }
  EXPECT_THROW(store.query_list_series(ListType::Free, {at_day(4), at_day(2)}), Error);
}

TEST(SnapStoreTest, ListSeriesWindowAndEmptyStore) {
  TempDir tmp;
  SnapStore store(tmp.path());
  EXPECT_TRUE(store.query_list_series(ListType::Paid).empty());
  std::vector<TopKObservation> obs;
  for (int h = 0; h < 10; ++h) obs.push_back({ListType::Paid, at_day(0, h), {AppId("a"), AppId("b")}});
  store.ingest(obs);
  EXPECT_EQ(store.query_list_series(ListType::Paid, {at_day(0, 2), at_day(0, 6) - std::chrono::seconds{1}}).size(), 4u);
  EXPECT_EQ(store.query_list_series(ListType::Paid, {at_day(0, 2), at_day(0, 6)}).size(), 5u);
  EXPECT_TRUE(store.query_list_series(ListType::Free).empty());
}

TEST(SnapStoreTest, DoubleIngestIsIdempotentProperty) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    const auto population = random_population(rng, 12, 15);
    TempDir once_dir, twice_dir;
    SnapStore once(once_dir.path()), twice(twice_dir.path());
    once.ingest(population);
    twice.ingest(population);
    const auto again = twice.ingest(population);
    EXPECT_EQ(again.snapshots.accepted, 0u);
    EXPECT_EQ(again.snapshots.deduplicated, population.size());
    ASSERT_EQ(once.apps(), twice.apps());
    for (const auto& app : once.apps()) {
      EXPECT_EQ(once.query_app_series(app).snapshots, twice.query_app_series(app).snapshots);
    }
  }
}

TEST(SnapStoreTest, SplitWindowEqualsFullWindowProperty) {
  std::mt19937_64 rng(99);
  const auto population = random_population(rng, 10, 30);
  TempDir tmp;
  SnapStore store(tmp.path());
  store.ingest(population);
  for (int trial = 0; trial < 50; ++trial) {
    const int a = static_cast<int>(rng() % 30), b = a + static_cast<int>(rng() % (31 - a));
    const auto start = at_day(a), end = at_day(b, 23);
    const auto split = start + std::chrono::seconds{static_cast<std::int64_t>(rng() % (epoch_seconds(end) - epoch_seconds(start) + 1))};
    for (const auto& app : store.apps()) {
      auto full = store.query_app_series(app, {start, end}).snapshots;
      auto left = store.query_app_series(app, {start, split}).snapshots;
      auto right = store.query_app_series(app, {split + std::chrono::seconds{1}, end}).snapshots;
      left.insert(left.end(), right.begin(), right.end());
      EXPECT_EQ(full, left);
    }
  }
}

TEST(SnapStoreTest, ShuffledIngestYieldsStrictlyIncreasingSeries) {
  std::mt19937_64 rng(5);
  auto population = random_population(rng, 8, 40);
  std::shuffle(population.begin(), population.end(), rng);
  std::vector<TopKObservation> obs;
  for (int h = 0; h < 60; ++h) obs.push_back({ListType::Gross, at_day(0, h), {AppId("x" + std::to_string(h))}});
  std::shuffle(obs.begin(), obs.end(), rng);

  TempDir tmp;
  SnapStore store(tmp.path());
  // Small batches exercise the commit path repeatedly.
  std::stringstream lines;
  for (const auto& s : population) lines << encode_line(s) << '\n';
  store.ingest_lines(RecordKind::Snapshot, lines, 7);
  store.ingest(obs);

  for (const auto& app : store.apps()) {
    const auto series = store.query_app_series(app);
    for (std::size_t i = 1; i < series.size(); ++i) {
      EXPECT_LT(series.snapshots[i - 1].fetch_time, series.snapshots[i].fetch_time);
    }
  }
  const auto list = store.query_list_series(ListType::Gross);
  ASSERT_EQ(list.size(), 60u);
  for (std::size_t i = 1; i < list.size(); ++i) {
    EXPECT_LT(list.observations()[i - 1].fetch_time, list.observations()[i].fetch_time);
  }
}

TEST(SnapStoreTest, ReopenRebuildsIndexAndDropsTornTail) {
  TempDir tmp;
  {
    SnapStore store(tmp.path());
    store.ingest(std::vector{make_snapshot("com.a", 1), make_snapshot("com.b", 2)});
    store.ingest(std::vector{ReviewRecord{AppId("com.a"), "r1", "u", testing::day_n(1), 4, "", ""}});
    store.put_manifest({"m", "EUR", testing::day_n(0), testing::day_n(9), "daily"});
  }
  {
    std::ofstream out(tmp.path() / "snapshots.jsonl", std::ios::app);
    out << R"({"app":"com.c","fetch_ti)";
  }
  SnapStore store(tmp.path());
  EXPECT_EQ(store.snapshot_count(), 2u);
  EXPECT_EQ(store.review_count(AppId("com.a")), 1u);
  ASSERT_TRUE(store.manifest().has_value());
  EXPECT_EQ(store.manifest()->currency, "EUR");
  EXPECT_EQ(store.latest_snapshot(AppId("com.b"))->fetch_time, at_day(2, 12));
  // Appending after recovery must still produce well-formed lines.
  store.ingest(std::vector{make_snapshot("com.c", 3)});
  SnapStore reopened(tmp.path());
  EXPECT_EQ(reopened.snapshot_count(), 3u);
}

TEST(SnapStoreTest, ManifestConflictKeepsExisting) {
  TempDir tmp;
  SnapStore store(tmp.path());
  DatasetManifest m{"a", "USD", testing::day_n(0), testing::day_n(3), "daily"};
  EXPECT_EQ(store.put_manifest(m), "written");
  EXPECT_EQ(store.put_manifest(m), "unchanged");
  m.name = "b";
  EXPECT_EQ(store.put_manifest(m), "conflict");
  EXPECT_EQ(store.manifest()->name, "a");
}

TEST(SnapStoreTest, ConcurrentReadersSeeCommittedPrefix) {
  TempDir tmp;
  SnapStore store(tmp.path());
  std::vector<AppSnapshot> batch;
  for (int d = 0; d < 400; ++d) batch.push_back(make_snapshot("com.a", d));
  std::atomic<bool> done{false};
  std::atomic<int> bad{0};
  std::thread reader([&] {
    std::size_t last = 0;
    while (!done) {
      const auto series = store.query_app_series(AppId("com.a"));
      if (series.size() < last) ++bad;
      for (std::size_t i = 0; i < series.size(); ++i) {
        if (series.snapshots[i].fetch_time != at_day(static_cast<int>(i), 12)) ++bad;
      }
      last = series.size();
    }
  });
  std::stringstream lines;
  for (const auto& s : batch) lines << encode_line(s) << '\n';
  store.ingest_lines(RecordKind::Snapshot, lines, 16);
  done = true;
  reader.join();
  EXPECT_EQ(bad.load(), 0);
  EXPECT_EQ(store.snapshot_count(), 400u);
}

TEST(SnapStoreTest, IngestDatasetReadsAllLogs) {
  TempDir data, st;
  {
    std::ofstream(data.path() / "snapshots.jsonl") << encode_line(make_snapshot("com.a", 1)) << '\n';
    std::ofstream(data.path() / "topk.jsonl")
        << encode_line(TopKObservation{ListType::Free, at_day(1), {AppId("com.a")}}) << '\n';
    std::ofstream(data.path() / "manifest.json")
        << to_json(DatasetManifest{"d", "USD", testing::day_n(0), testing::day_n(2), "daily"}).dump();
  }
  SnapStore store(st.path());
  const auto report = store.ingest_dataset(data.path());
  EXPECT_EQ(report.snapshots.accepted, 1u);
  EXPECT_EQ(report.topk.accepted, 1u);
  EXPECT_EQ(report.manifest_status, "written");
  EXPECT_THROW(store.ingest_dataset(data.path() / "nope"), Error);
}

}  // namespace
}  // namespace marketpulse
