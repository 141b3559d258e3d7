#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "marketpulse/series.hpp"

namespace marketpulse {

// Ranks are 1-based throughout; smaller is better.

struct LifecycleSummary {
  AppId app;
  std::size_t debut = 0;
  std::size_t hrs2peak = 0;  // observations from debut through first peak, debut = 1
  std::size_t peak = 0;
  std::size_t tothrs = 0;    // observations present
  std::size_t exit = 0;
  std::size_t rankdyn = 0;   // distinct ranks held
  Timestamp first_seen{};
  Timestamp last_seen{};

  friend bool operator==(const LifecycleSummary&, const LifecycleSummary&) = default;
};

enum class LifecycleMode {
  WholeSpan,  // one summary per app; exits and re-entries do not reset DEBUT
  Episode,    // one summary per contiguous run of presence
};

/// Apps (or episodes) already present in the first observation are censored
/// and left out. Output is ordered by first appearance, then debut rank.
/// Throws Error(InsufficientData) for fewer than two observations.
std::vector<LifecycleSummary> lifecycle_summaries(const RankedListSeries& series,
                                                  LifecycleMode mode = LifecycleMode::WholeSpan);

struct SimilarityResult {
  double m = 1.0;
  double n_raw = 0.0;
  double n_max = 0.0;

  /// Lists of unequal length can push M slightly outside [0, 1].
  bool in_unit_range() const noexcept { return m >= 0.0 && m <= 1.0; }
};

/// Inverse rank measure between consecutive rankings. Items only in `prev`
/// are treated as sitting at |next|+1 in `next` and vice versa.
/// Throws Error(InvalidInput) for an empty ranking or duplicate entries.
SimilarityResult inverse_rank_measure(std::span<const AppId> prev, std::span<const AppId> next);
SimilarityResult inverse_rank_measure(const TopKObservation& prev, const TopKObservation& next);

struct SimilarityPoint {
  Timestamp fetch_time{};  // of the later observation
  SimilarityResult result;
};

/// M over every consecutive pair of observations.
std::vector<SimilarityPoint> similarity_series(const RankedListSeries& series);

/// A window of each observation: ranks [first, last] or the last `count`
/// entries. Sliced lists are re-ranked from 1 before comparison.
struct RankSlice {
  enum class Kind { Range, Tail };
  Kind kind = Kind::Range;
  std::size_t first = 1;
  std::size_t last = kMaxRankingLength;
  std::size_t count = 0;

  static RankSlice range(std::size_t first, std::size_t last) { return {Kind::Range, first, last, 0}; }
  static RankSlice top(std::size_t k) { return range(1, k); }
  static RankSlice tail(std::size_t n) { return {Kind::Tail, 0, 0, n}; }

  /// Accepts "all", "topN", "lastN", "A-B" and "A..B". Throws Error(InvalidInput).
  static RankSlice parse(std::string_view text);
  std::string label() const;

  /// Throws Error(InvalidInput) for an empty slice definition.
  void check() const;
  std::vector<AppId> apply(const std::vector<AppId>& ranking) const;
};

struct OverlapStats {
  double o_mean = 0.0;
  std::size_t o_min = 0;
  double m_mean = 0.0;
  std::optional<double> m_sd;  // sample sd; absent with a single pair
  std::size_t o_first_last = 0;
  std::size_t item_count = 0;
  std::size_t pairs = 0;
};

/// Throws Error(InsufficientData) for fewer than two observations and
/// Error(InvalidInput) if the slice is empty or selects nothing from some
/// observation.
OverlapStats overlap_stats(const RankedListSeries& series, const RankSlice& slice);

/// Entry r-1 holds the number of distinct apps ever seen at rank r.
std::vector<std::size_t> rank_occupancy(const RankedListSeries& series);

enum class LifetimeMode {
  TimeAtRank,    // observations the app spent at exactly that rank
  ListLifetime,  // observations the app spent anywhere on the list
};

struct RankLifetime {
  std::size_t rank = 0;
  std::vector<std::pair<AppId, std::size_t>> per_app;  // ordered by first arrival at the rank
  std::optional<double> mean() const;
};

/// Ranks past every observation's length yield an empty distribution.
std::vector<RankLifetime> lifetime_at_rank(const RankedListSeries& series, std::span<const std::size_t> ranks,
                                           LifetimeMode mode = LifetimeMode::TimeAtRank);

void write_lifecycle_csv(std::ostream& out, std::span<const LifecycleSummary> summaries);

/// Binned counts for the six lifecycle metrics:
/// metric,bin_lo,bin_hi,count with half-open bins [lo, hi).
void write_lifecycle_histograms(std::ostream& out, std::span<const LifecycleSummary> summaries,
                                std::size_t bin_width = 10);

}  // namespace marketpulse
