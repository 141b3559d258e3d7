#include "marketpulse/model.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

#include "marketpulse/error.hpp"

namespace marketpulse {

AppId::AppId(std::string value) : value_(std::move(value)) {
  if (!is_valid(value_)) throw Error(ErrorCode::InvalidInput, "invalid app id '" + value_ + "'");
}

bool AppId::is_valid(std::string_view value) noexcept {
  if (value.empty()) return false;
  return std::none_of(value.begin(), value.end(), [](unsigned char c) { return std::isspace(c) || c < 0x20; });
}

const std::vector<DownloadBucket>& download_ladder() {
  static const std::vector<DownloadBucket> ladder = [] {
    std::vector<DownloadBucket> out{{0, 1}};
    std::int64_t base = 1;
    while (base < 5'000'000'000LL) {
      out.push_back({base, base * 5});
      out.push_back({base * 5, base * 10});
      base *= 10;
      if (base == 1'000'000'000LL) {
        out.push_back({base, base * 5});
        break;
      }
    }
    return out;
  }();
  return ladder;
}

bool DownloadBucket::on_ladder() const noexcept {
  const auto& ladder = download_ladder();
  return std::find(ladder.begin(), ladder.end(), *this) != ladder.end();
}

std::optional<DownloadBucket> ladder_bucket(std::int64_t lo) {
  for (const auto& b : download_ladder()) {
    if (b.lo == lo) return b;
  }
  return std::nullopt;
}

DownloadBucket bucket_for_count(std::int64_t installs) {
  const auto& ladder = download_ladder();
  if (installs <= 0) return ladder.front();
  for (const auto& b : ladder) {
    if (installs >= b.lo && installs < b.hi) return b;
  }
  return ladder.back();
}

std::string_view to_string(ListType type) noexcept {
  switch (type) {
    case ListType::Free: return "Free";
    case ListType::Paid: return "Paid";
    case ListType::Gross: return "Gross";
    case ListType::NewFree: return "NewFree";
    case ListType::NewPaid: return "NewPaid";
  }
  return "Free";
}

std::optional<ListType> parse_list_type(std::string_view text) noexcept {
  auto lower = [](std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
  };
  const std::string needle = lower(text);
  for (ListType t : kAllListTypes) {
    if (lower(to_string(t)) == needle) return t;
  }
  return std::nullopt;
}

std::string_view to_string(PopularityClass cls) noexcept {
  switch (cls) {
    case PopularityClass::Unpopular: return "Unpopular";
    case PopularityClass::Popular: return "Popular";
    case PopularityClass::MostPopular: return "MostPopular";
  }
  return "Unpopular";
}

std::string_view to_string(AttributeKind kind) noexcept {
  switch (kind) {
    case AttributeKind::DownloadsUp: return "DownloadsUp";
    case AttributeKind::PriceDown: return "PriceDown";
    case AttributeKind::PriceUp: return "PriceUp";
    case AttributeKind::ReviewCountUp: return "ReviewCountUp";
    case AttributeKind::VersionUp: return "VersionUp";
    case AttributeKind::PermissionsDown: return "PermissionsDown";
    case AttributeKind::PermissionsUp: return "PermissionsUp";
    case AttributeKind::CategoryChange: return "CategoryChange";
    case AttributeKind::DownloadsDown: return "DownloadsDown";
    case AttributeKind::ReviewCountDown: return "ReviewCountDown";
    case AttributeKind::PermissionsChanged: return "PermissionsChanged";
    case AttributeKind::Updated: return "Updated";
  }
  return "Updated";
}

std::string_view short_label(AttributeKind kind) noexcept {
  switch (kind) {
    case AttributeKind::DownloadsUp: return "D+";
    case AttributeKind::PriceDown: return "P-";
    case AttributeKind::PriceUp: return "P+";
    case AttributeKind::ReviewCountUp: return "RC+";
    case AttributeKind::VersionUp: return "SV+";
    case AttributeKind::PermissionsDown: return "TP-";
    case AttributeKind::PermissionsUp: return "TP+";
    case AttributeKind::CategoryChange: return "CAT";
    case AttributeKind::DownloadsDown: return "D-";
    case AttributeKind::ReviewCountDown: return "RC-";
    case AttributeKind::PermissionsChanged: return "TP~";
    case AttributeKind::Updated: return "UPD";
  }
  return "?";
}

std::optional<AttributeKind> parse_attribute_kind(std::string_view text) noexcept {
  for (int i = 0; i <= static_cast<int>(AttributeKind::Updated); ++i) {
    const auto kind = static_cast<AttributeKind>(i);
    if (to_string(kind) == text) return kind;
  }
  return std::nullopt;
}

bool is_permission_kind(AttributeKind kind) noexcept {
  return kind == AttributeKind::PermissionsUp || kind == AttributeKind::PermissionsDown ||
         kind == AttributeKind::PermissionsChanged;
}

std::vector<std::string> validate_snapshot(const AppSnapshot& s) {
  std::vector<std::string> violations;
  if (!AppId::is_valid(s.app.str())) violations.emplace_back("app id empty or contains whitespace");
  if (s.price_cents < 0) violations.emplace_back("price_cents negative");
  if (s.free != (s.price_cents == 0)) violations.emplace_back("free flag inconsistent with price_cents");
  if (!s.downloads.well_formed()) {
    violations.emplace_back("downloads bucket malformed (need 0 <= lo < hi)");
  } else if (!s.downloads.on_ladder()) {
    violations.emplace_back("downloads bucket not on the market ladder");
  }
  if (!(s.rating_avg >= 0.0 && s.rating_avg <= 5.0)) violations.emplace_back("rating_avg out of [0,5]");
  if (s.rating_count < 0) violations.emplace_back("rating_count negative");
  if (s.size_bytes < 0) violations.emplace_back("size_bytes negative");
  if (s.last_updated > day_of(s.fetch_time)) violations.emplace_back("last_updated in future");
  for (const auto& p : s.permissions) {
    if (p.empty()) {
      violations.emplace_back("empty permission name");
      break;
    }
  }
  return violations;
}

std::vector<std::string> validate_review(const ReviewRecord& r) {
  std::vector<std::string> violations;
  if (!AppId::is_valid(r.app.str())) violations.emplace_back("app id empty or contains whitespace");
  if (r.review_id.empty()) violations.emplace_back("review_id empty");
  if (r.rating < 1 || r.rating > 5) violations.emplace_back("rating out of range");
  return violations;
}

std::vector<std::string> validate_topk(const TopKObservation& o) {
  std::vector<std::string> violations;
  if (epoch_seconds(o.fetch_time) % kSecondsPerHour != 0) violations.emplace_back("fetch_time not aligned to the hour");
  if (o.ranking.size() > kMaxRankingLength) violations.emplace_back("ranking longer than 480");
  std::unordered_set<std::string> seen;
  for (const auto& id : o.ranking) {
    if (!AppId::is_valid(id.str())) {
      violations.emplace_back("invalid app id in ranking");
      break;
    }
    if (!seen.insert(id.str()).second) {
      violations.emplace_back("duplicate app id in ranking: " + id.str());
      break;
    }
  }
  return violations;
}

}  // namespace marketpulse
