#pragma once

#include <iosfwd>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "marketpulse/model.hpp"
#include "marketpulse/series.hpp"

namespace marketpulse {

struct IntChange {
  std::int64_t old_value = 0;
  std::int64_t new_value = 0;
  friend bool operator==(const IntChange&, const IntChange&) = default;
};
struct TextChange {
  std::string old_value;
  std::string new_value;
  friend bool operator==(const TextChange&, const TextChange&) = default;
};
struct DateChange {
  Date old_value{};
  Date new_value{};
  friend bool operator==(const DateChange&, const DateChange&) = default;
};
struct BucketChange {
  DownloadBucket old_value;
  DownloadBucket new_value;
  friend bool operator==(const BucketChange&, const BucketChange&) = default;
};
struct PermissionChange {
  std::set<std::string> added;
  std::set<std::string> removed;
  friend bool operator==(const PermissionChange&, const PermissionChange&) = default;
};

using ChangeDetail = std::variant<IntChange, TextChange, DateChange, BucketChange, PermissionChange>;

struct ChangeEvent {
  AppId app;
  Date day{};
  AttributeKind kind = AttributeKind::Updated;
  ChangeDetail detail;

  /// CSV renderings. Permission events put the removed names in `old` and
  /// the added names in `new`, '|'-separated.
  std::string old_text() const;
  std::string new_text() const;

  friend bool operator==(const ChangeEvent&, const ChangeEvent&) = default;
};

/// The snapshot fields the timeline tracks.
struct TrackedFields {
  std::int64_t price_cents = 0;
  DownloadBucket downloads;
  std::int64_t rating_count = 0;
  std::string version;
  std::set<std::string> permissions;
  std::string category;
  Date last_updated{};

  static TrackedFields of(const AppSnapshot& s);
  friend bool operator==(const TrackedFields&, const TrackedFields&) = default;
};

void apply_event(TrackedFields& fields, const ChangeEvent& event);
/// Replays `events` over the tracked fields of `first`.
TrackedFields fold_events(const AppSnapshot& first, std::span<const ChangeEvent> events);

struct AppTimeline {
  AppId app;
  std::vector<ChangeEvent> events;  // sorted by day
  std::vector<Date> update_days;    // distinct new last_updated values, sorted
  std::vector<Date> observed_days;  // days with at least one snapshot

  std::size_t update_count() const noexcept { return update_days.size(); }
};

/// One event per changed tracked attribute, dated by next.fetch_time.
/// Throws Error(InvalidPair) for different apps or non-increasing fetch times.
std::vector<ChangeEvent> diff_snapshots(const AppSnapshot& prev, const AppSnapshot& next);

/// Collapses each UTC day to its last snapshot, then diffs the chain
/// [first snapshot, end of day 1, end of day 2, ...]. Each <day, app> thus
/// carries at most one event per attribute.
AppTimeline build_app_timeline(const AppSeries& series);

struct ReviewPolarity {
  int positive_min = 4;
  int negative_max = 2;
};

struct ReviewDay {
  Date day{};
  int positive = 0;
  int negative = 0;
  int neutral = 0;
  friend bool operator==(const ReviewDay&, const ReviewDay&) = default;
};

/// Per-day review counts; days without reviews are omitted (implicit zero).
struct ReviewTimeline {
  AppId app;
  std::vector<ReviewDay> days;
};

/// Throws Error(InvalidInput) for mixed apps or a polarity with
/// negative_max >= positive_min.
ReviewTimeline build_review_timeline(std::span<const ReviewRecord> reviews, ReviewPolarity polarity = {});

/// CSV with header app,day,kind,old,new.
void write_timeline_csv(std::ostream& out, std::span<const AppTimeline> timelines);

}  // namespace marketpulse
