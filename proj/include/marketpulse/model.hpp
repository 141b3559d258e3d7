#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "marketpulse/time.hpp"

namespace marketpulse {

/// Package-name style application identifier ("com.example.app").
/// Construction rejects empty strings and any whitespace.
class AppId {
 public:
  AppId() = default;
  explicit AppId(std::string value);

  static bool is_valid(std::string_view value) noexcept;

  const std::string& str() const noexcept { return value_; }
  bool empty() const noexcept { return value_.empty(); }

  friend auto operator<=>(const AppId&, const AppId&) = default;
  friend bool operator==(const AppId&, const AppId&) = default;

 private:
  std::string value_;
};

/// Install-count range as published by the market. Comparisons and
/// classifications always use the lower bound.
struct DownloadBucket {
  std::int64_t lo = 0;
  std::int64_t hi = 1;

  bool well_formed() const noexcept { return lo >= 0 && hi > lo; }
  bool on_ladder() const noexcept;
  double midpoint() const noexcept { return 0.5 * (static_cast<double>(lo) + static_cast<double>(hi)); }

  friend auto operator<=>(const DownloadBucket&, const DownloadBucket&) = default;
  friend bool operator==(const DownloadBucket&, const DownloadBucket&) = default;
};

/// The market's fixed bucket ladder: 0-1, 1-5, 5-10, 10-50, ..., 1B-5B.
const std::vector<DownloadBucket>& download_ladder();
/// The ladder bucket whose lower bound is `lo`, if any.
std::optional<DownloadBucket> ladder_bucket(std::int64_t lo);
/// The ladder bucket containing an exact install count.
DownloadBucket bucket_for_count(std::int64_t installs);

struct AppSnapshot {
  AppId app;
  Timestamp fetch_time{};
  std::string title;
  std::string developer;
  std::string category;
  std::int64_t price_cents = 0;
  bool free = true;
  DownloadBucket downloads;
  double rating_avg = 0.0;
  std::int64_t rating_count = 0;
  std::string version;
  Date last_updated{};
  std::int64_t size_bytes = 0;
  std::set<std::string> permissions;

  friend bool operator==(const AppSnapshot&, const AppSnapshot&) = default;
};

struct ReviewRecord {
  AppId app;
  std::string review_id;
  std::string reviewer_id;
  Date date{};
  int rating = 0;
  std::string title;
  std::string text;

  friend bool operator==(const ReviewRecord&, const ReviewRecord&) = default;
};

enum class ListType { Free, Paid, Gross, NewFree, NewPaid };

inline constexpr std::array<ListType, 5> kAllListTypes = {ListType::Free, ListType::Paid, ListType::Gross,
                                                          ListType::NewFree, ListType::NewPaid};

std::string_view to_string(ListType type) noexcept;
/// Accepts the canonical names ("Free", "NewPaid", ...) case-insensitively.
std::optional<ListType> parse_list_type(std::string_view text) noexcept;

/// Twenty pages of 24 entries.
inline constexpr std::size_t kMaxRankingLength = 480;

struct TopKObservation {
  ListType list_type = ListType::Free;
  Timestamp fetch_time{};
  std::vector<AppId> ranking;  // rank 1 first

  friend bool operator==(const TopKObservation&, const TopKObservation&) = default;
};

enum class PopularityClass { Unpopular, Popular, MostPopular };

std::string_view to_string(PopularityClass cls) noexcept;

/// Direction-typed attribute changes. The first eight are the attributes of
/// the association analysis; the remaining kinds exist so that every tracked
/// field change is representable as an event.
enum class AttributeKind {
  DownloadsUp,
  PriceDown,
  PriceUp,
  ReviewCountUp,
  VersionUp,
  PermissionsDown,
  PermissionsUp,
  CategoryChange,
  DownloadsDown,
  ReviewCountDown,
  PermissionsChanged,
  Updated,
};

inline constexpr std::array<AttributeKind, 8> kAssociationKinds = {
    AttributeKind::DownloadsUp,   AttributeKind::PriceDown,       AttributeKind::PriceUp,
    AttributeKind::ReviewCountUp, AttributeKind::VersionUp,       AttributeKind::PermissionsDown,
    AttributeKind::PermissionsUp, AttributeKind::CategoryChange};

std::string_view to_string(AttributeKind kind) noexcept;
/// Short label used in association tables ("D+", "P-", ...).
std::string_view short_label(AttributeKind kind) noexcept;
std::optional<AttributeKind> parse_attribute_kind(std::string_view text) noexcept;
bool is_permission_kind(AttributeKind kind) noexcept;

/// Empty when the snapshot satisfies every field invariant; otherwise one
/// message per violated invariant.
std::vector<std::string> validate_snapshot(const AppSnapshot& snapshot);

/// Same idea for reviews and top-k observations.
std::vector<std::string> validate_review(const ReviewRecord& review);
std::vector<std::string> validate_topk(const TopKObservation& observation);

/// A <day, app> tuple, the unit of the attribute-change analysis.
struct DayApp {
  Date day{};
  AppId app;

  friend auto operator<=>(const DayApp&, const DayApp&) = default;
  friend bool operator==(const DayApp&, const DayApp&) = default;
};

}  // namespace marketpulse

template <>
struct std::hash<marketpulse::AppId> {
  std::size_t operator()(const marketpulse::AppId& id) const noexcept { return std::hash<std::string>{}(id.str()); }
};
