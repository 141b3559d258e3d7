#pragma once

#include <optional>
#include <unordered_map>
#include <vector>

#include "marketpulse/model.hpp"

namespace marketpulse {

/// Closed interval [start, end] of fetch times.
struct TimeWindow {
  Timestamp start = Timestamp::min();
  Timestamp end = Timestamp::max();

  static TimeWindow all() { return {}; }
  /// Throws Error(InvalidWindow) when end < start.
  void check() const;
  bool contains(Timestamp t) const noexcept { return t >= start && t <= end; }
};

/// Snapshots of one app, strictly increasing in fetch_time.
struct AppSeries {
  AppId app;
  std::vector<AppSnapshot> snapshots;

  bool empty() const noexcept { return snapshots.empty(); }
  std::size_t size() const noexcept { return snapshots.size(); }
};

/// Observations of one ranked list, strictly increasing in fetch_time.
/// Rank lookups are 1-based; 0 means "absent".
class RankedListSeries {
 public:
  RankedListSeries() = default;
  RankedListSeries(ListType type, std::vector<TopKObservation> observations);

  ListType list_type() const noexcept { return type_; }
  const std::vector<TopKObservation>& observations() const noexcept { return observations_; }
  std::size_t size() const noexcept { return observations_.size(); }
  bool empty() const noexcept { return observations_.empty(); }

  /// Rank of `app` in observation n, or 0 if it is not listed.
  std::size_t rank(std::size_t n, const AppId& app) const;

 private:
  ListType type_ = ListType::Free;
  std::vector<TopKObservation> observations_;
  std::vector<std::unordered_map<AppId, std::size_t>> ranks_;
};

}  // namespace marketpulse
