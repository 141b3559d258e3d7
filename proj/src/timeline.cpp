#include "marketpulse/timeline.hpp"

#include <algorithm>
#include <map>
#include <ostream>

#include "marketpulse/csv.hpp"
#include "marketpulse/error.hpp"

namespace marketpulse {

namespace {

std::string join_names(const std::set<std::string>& names) {
  std::string out;
  for (const auto& n : names) {
    if (!out.empty()) out += '|';
    out += n;
  }
  return out;
}

std::string bucket_text(const DownloadBucket& b) { return std::to_string(b.lo) + "-" + std::to_string(b.hi); }

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

std::string ChangeEvent::old_text() const {
  return std::visit(overloaded{[](const IntChange& c) { return std::to_string(c.old_value); },
                               [](const TextChange& c) { return c.old_value; },
                               [](const DateChange& c) { return format_date(c.old_value); },
                               [](const BucketChange& c) { return bucket_text(c.old_value); },
                               [](const PermissionChange& c) { return join_names(c.removed); }},
                    detail);
}

std::string ChangeEvent::new_text() const {
  return std::visit(overloaded{[](const IntChange& c) { return std::to_string(c.new_value); },
                               [](const TextChange& c) { return c.new_value; },
                               [](const DateChange& c) { return format_date(c.new_value); },
                               [](const BucketChange& c) { return bucket_text(c.new_value); },
                               [](const PermissionChange& c) { return join_names(c.added); }},
                    detail);
}

TrackedFields TrackedFields::of(const AppSnapshot& s) {
  return {s.price_cents, s.downloads, s.rating_count, s.version, s.permissions, s.category, s.last_updated};
}

void apply_event(TrackedFields& f, const ChangeEvent& e) {
  switch (e.kind) {
    case AttributeKind::PriceUp:
    case AttributeKind::PriceDown: f.price_cents = std::get<IntChange>(e.detail).new_value; break;
    case AttributeKind::DownloadsUp:
    case AttributeKind::DownloadsDown: f.downloads = std::get<BucketChange>(e.detail).new_value; break;
    case AttributeKind::ReviewCountUp:
    case AttributeKind::ReviewCountDown: f.rating_count = std::get<IntChange>(e.detail).new_value; break;
    case AttributeKind::VersionUp: f.version = std::get<TextChange>(e.detail).new_value; break;
    case AttributeKind::CategoryChange: f.category = std::get<TextChange>(e.detail).new_value; break;
    case AttributeKind::Updated: f.last_updated = std::get<DateChange>(e.detail).new_value; break;
    case AttributeKind::PermissionsUp:
    case AttributeKind::PermissionsDown:
    case AttributeKind::PermissionsChanged: {
      const auto& c = std::get<PermissionChange>(e.detail);
      for (const auto& p : c.removed) f.permissions.erase(p);
      f.permissions.insert(c.added.begin(), c.added.end());
      break;
    }
  }
}

TrackedFields fold_events(const AppSnapshot& first, std::span<const ChangeEvent> events) {
  auto fields = TrackedFields::of(first);
  for (const auto& e : events) apply_event(fields, e);
  return fields;
}

std::vector<ChangeEvent> diff_snapshots(const AppSnapshot& prev, const AppSnapshot& next) {
  if (prev.app != next.app) throw Error(ErrorCode::InvalidPair, "snapshots of different apps");
  if (!(prev.fetch_time < next.fetch_time)) throw Error(ErrorCode::InvalidPair, "prev.fetch_time must precede next");

  const Date day = day_of(next.fetch_time);
  std::vector<ChangeEvent> out;
  auto emit = [&](AttributeKind kind, ChangeDetail detail) { out.push_back({next.app, day, kind, std::move(detail)}); };

  if (prev.price_cents != next.price_cents) {
    emit(next.price_cents > prev.price_cents ? AttributeKind::PriceUp : AttributeKind::PriceDown,
         IntChange{prev.price_cents, next.price_cents});
  }
  if (prev.downloads != next.downloads) {
    emit(next.downloads.lo > prev.downloads.lo || (next.downloads.lo == prev.downloads.lo && next.downloads.hi > prev.downloads.hi)
             ? AttributeKind::DownloadsUp
             : AttributeKind::DownloadsDown,
         BucketChange{prev.downloads, next.downloads});
  }
  if (prev.rating_count != next.rating_count) {
    emit(next.rating_count > prev.rating_count ? AttributeKind::ReviewCountUp : AttributeKind::ReviewCountDown,
         IntChange{prev.rating_count, next.rating_count});
  }
  if (prev.version != next.version) emit(AttributeKind::VersionUp, TextChange{prev.version, next.version});
  if (prev.permissions != next.permissions) {
    PermissionChange change;
    std::set_difference(next.permissions.begin(), next.permissions.end(), prev.permissions.begin(),
                        prev.permissions.end(), std::inserter(change.added, change.added.end()));
    std::set_difference(prev.permissions.begin(), prev.permissions.end(), next.permissions.begin(),
                        next.permissions.end(), std::inserter(change.removed, change.removed.end()));
    const auto kind = next.permissions.size() > prev.permissions.size()   ? AttributeKind::PermissionsUp
                      : next.permissions.size() < prev.permissions.size() ? AttributeKind::PermissionsDown
                                                                           : AttributeKind::PermissionsChanged;
    emit(kind, std::move(change));
  }
  if (prev.category != next.category) emit(AttributeKind::CategoryChange, TextChange{prev.category, next.category});
  if (prev.last_updated != next.last_updated) {
    emit(AttributeKind::Updated, DateChange{prev.last_updated, next.last_updated});
  }
  return out;
}

AppTimeline build_app_timeline(const AppSeries& series) {
  AppTimeline timeline{series.app, {}, {}, {}};
  const auto& snaps = series.snapshots;
  if (snaps.empty()) return timeline;

  std::vector<const AppSnapshot*> chain{&snaps.front()};
  for (std::size_t i = 0; i < snaps.size(); ++i) {
    const Date day = day_of(snaps[i].fetch_time);
    if (timeline.observed_days.empty() || timeline.observed_days.back() != day) timeline.observed_days.push_back(day);
    const bool last_of_day = i + 1 == snaps.size() || day_of(snaps[i + 1].fetch_time) != day;
    if (last_of_day && &snaps[i] != chain.back()) chain.push_back(&snaps[i]);
  }

  std::set<Date> updates;
  for (std::size_t i = 1; i < chain.size(); ++i) {
    for (auto& e : diff_snapshots(*chain[i - 1], *chain[i])) {
      if (e.kind == AttributeKind::Updated) updates.insert(std::get<DateChange>(e.detail).new_value);
      timeline.events.push_back(std::move(e));
    }
  }
  timeline.update_days.assign(updates.begin(), updates.end());
  return timeline;
}

ReviewTimeline build_review_timeline(std::span<const ReviewRecord> reviews, ReviewPolarity polarity) {
  if (polarity.negative_max >= polarity.positive_min) {
    throw Error(ErrorCode::InvalidInput, "negative_max must be below positive_min");
  }
  ReviewTimeline timeline;
  if (reviews.empty()) return timeline;
  timeline.app = reviews.front().app;
  std::map<Date, ReviewDay> days;
  for (const auto& r : reviews) {
    if (r.app != timeline.app) throw Error(ErrorCode::InvalidInput, "reviews of more than one app");
    auto& d = days[r.date];
    d.day = r.date;
    if (r.rating >= polarity.positive_min) {
      ++d.positive;
    } else if (r.rating <= polarity.negative_max) {
      ++d.negative;
    } else {
      ++d.neutral;
    }
  }
  timeline.days.reserve(days.size());
  for (auto& [day, counts] : days) timeline.days.push_back(counts);
  return timeline;
}

void write_timeline_csv(std::ostream& out, std::span<const AppTimeline> timelines) {
  csv::row(out, {"app", "day", "kind", "old", "new"});
  for (const auto& t : timelines) {
    for (const auto& e : t.events) {
      csv::row(out, {e.app.str(), format_date(e.day), to_string(e.kind), e.old_text(), e.new_text()});
    }
  }
}

}  // namespace marketpulse
