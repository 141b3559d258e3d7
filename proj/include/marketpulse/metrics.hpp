#pragma once

#include <array>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "marketpulse/model.hpp"
#include "marketpulse/timeline.hpp"

namespace marketpulse {

// ---------------------------------------------------------------------------
// Staleness and popularity

enum class Staleness { Active, Stale };

struct StalenessVerdict {
  Staleness state = Staleness::Active;
  int window_days = 365;
  Date reference{};
};

std::string_view to_string(Staleness s) noexcept;

/// Stale iff (reference - last_updated) > window_days; a gap equal to the
/// window is still Active. Throws Error(InvalidInput) if last_updated is
/// after the reference date.
StalenessVerdict classify_staleness(Date last_updated, Date reference, int window_days = 365);

/// Lower-bound rule with half-open classes: [0, 1e3) Unpopular,
/// [1e3, 1e5) Popular, [1e5, inf) MostPopular.
PopularityClass classify_popularity(const DownloadBucket& bucket) noexcept;

// ---------------------------------------------------------------------------
// Update cadence and bandwidth

struct UpdateStats {
  std::size_t update_count = 0;
  std::optional<double> aui_days;  // absent below two updates
};

/// Counts update days inside [first, last] (inclusive) and the average gap
/// between consecutive ones.
UpdateStats update_stats(const AppTimeline& timeline, Date first = Date::min(), Date last = Date::max());

struct BandwidthEstimate {
  std::int64_t per_user_bytes = 0;          // size * updates
  std::int64_t per_update_fleet_lo = 0;     // size * downloads.lo
  std::int64_t per_update_fleet_hi = 0;     // size * downloads.hi
  std::int64_t total_fleet_lo = 0;          // per-update range * updates
  std::int64_t total_fleet_hi = 0;
};

BandwidthEstimate update_bandwidth(std::int64_t size_bytes, const DownloadBucket& downloads, std::int64_t update_count);

// ---------------------------------------------------------------------------
// Prices

struct CcdfPoint {
  std::int64_t x = 0;
  double y = 0.0;  // sqrt(#apps with count > x)
};

/// Square-root CCDF of per-app price-change counts over x = 0..max(count).
std::vector<CcdfPoint> price_change_ccdf(std::span<const std::int64_t> per_app_change_counts);

/// Population standard deviation over mean of the positive prices. Free
/// (zero) prices are dropped first; empty after that means undefined.
std::optional<double> price_dispersion_cov(std::span<const double> prices);

std::optional<double> median(std::vector<double> values);

struct Decomposition {
  std::vector<double> observed;
  std::vector<std::optional<double>> trend;      // gaps at the edges
  std::vector<double> seasonal;                  // zero-sum over one period
  std::vector<std::optional<double>> remainder;  // defined where trend is
  int period = 0;
};

/// Classical additive decomposition: centred moving-average trend (2xP for
/// even P), per-phase means of the detrended series normalised to sum to
/// zero, remainder = observed - trend - seasonal.
/// Throws Error(InvalidInput) for period < 2 and Error(InsufficientData)
/// when the series is shorter than two periods.
Decomposition seasonal_trend_decompose(std::span<const double> series, int period);

// ---------------------------------------------------------------------------
// Power laws and scaling

struct PowerLawFit {
  double alpha = 0.0;
  double x_min = 1.0;
  std::size_t n_tail = 0;
  double ks_distance = 0.0;
};

/// Continuous maximum-likelihood fit over the samples >= x_min:
/// alpha = 1 + n / sum(ln(x / x_min)), with the Kolmogorov-Smirnov distance
/// between the empirical tail and the fitted CDF.
/// Throws InvalidInput (x_min <= 0), InsufficientData (< 2 tail samples) or
/// DegenerateTail (every tail sample equals x_min).
PowerLawFit fit_power_law(std::span<const double> samples, double x_min = 1.0);

/// Slow path: scans every distinct sample value as x_min and keeps the fit
/// with the smallest KS distance among those with at least `min_tail`
/// samples.
PowerLawFit fit_power_law_scan(std::span<const double> samples, std::size_t min_tail = 50);

struct XY {
  double x = 0.0;
  double y = 0.0;
};

/// Least-squares slope through the origin, sum(xy) / sum(x^2); undefined if
/// every x is zero. Throws Error(InvalidInput) for fewer than two points.
std::optional<double> downloads_ratings_slope(std::span<const XY> points);

// ---------------------------------------------------------------------------
// Attribute association

struct AttributeEventSet {
  AttributeKind kind = AttributeKind::PriceUp;
  std::set<DayApp> members;
};

struct Contingency {
  std::size_t both = 0;       // |A and B|
  std::size_t only_a = 0;     // |A and not B|
  std::size_t only_b = 0;     // |not A and B|
  std::size_t neither = 0;    // |not A and not B|
};

/// (ad - bc) / (ad + bc); undefined when the denominator is zero.
std::optional<double> yule_q(const Contingency& table) noexcept;

/// Builds the contingency over `universe` and returns Yule's Q. Throws
/// Error(InvalidInput) if either set has members outside the universe.
std::optional<double> yule_association(const AttributeEventSet& a, const AttributeEventSet& b,
                                       const std::set<DayApp>& universe);

enum class AssociationUniverse {
  AnyChange,    // <day, app> tuples with at least one change event
  AllObserved,  // every <day, app> with a snapshot (neutral days included)
};

struct AssociationMatrix {
  std::array<AttributeKind, kAssociationKinds.size()> kinds = kAssociationKinds;
  std::array<std::array<std::optional<double>, kAssociationKinds.size()>, kAssociationKinds.size()> q{};
  std::array<std::size_t, kAssociationKinds.size()> set_sizes{};
  std::size_t universe_size = 0;
};

std::set<DayApp> association_universe(std::span<const AppTimeline> timelines, AssociationUniverse mode);
AttributeEventSet attribute_event_set(std::span<const AppTimeline> timelines, AttributeKind kind);

AssociationMatrix association_matrix(std::span<const AppTimeline> timelines,
                                     AssociationUniverse mode = AssociationUniverse::AnyChange);

}  // namespace marketpulse
