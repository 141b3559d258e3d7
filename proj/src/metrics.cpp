#include "marketpulse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <numeric>

#include "marketpulse/error.hpp"

namespace marketpulse {

std::string_view to_string(Staleness s) noexcept { return s == Staleness::Stale ? "Stale" : "Active"; }

StalenessVerdict classify_staleness(Date last_updated, Date reference, int window_days) {
  if (last_updated > reference) throw Error(ErrorCode::InvalidInput, "last_updated after reference date");
  if (window_days < 0) throw Error(ErrorCode::InvalidInput, "negative staleness window");
  const auto gap = days_between(last_updated, reference);
  return {gap > window_days ? Staleness::Stale : Staleness::Active, window_days, reference};
}

PopularityClass classify_popularity(const DownloadBucket& bucket) noexcept {
  if (bucket.lo < 1'000) return PopularityClass::Unpopular;
  if (bucket.lo < 100'000) return PopularityClass::Popular;
  return PopularityClass::MostPopular;
}

UpdateStats update_stats(const AppTimeline& timeline, Date first, Date last) {
  std::vector<Date> days;
  std::copy_if(timeline.update_days.begin(), timeline.update_days.end(), std::back_inserter(days),
               [&](Date d) { return d >= first && d <= last; });
  UpdateStats stats{days.size(), std::nullopt};
  if (days.size() >= 2) {
    stats.aui_days = static_cast<double>(days_between(days.front(), days.back())) / static_cast<double>(days.size() - 1);
  }
  return stats;
}

BandwidthEstimate update_bandwidth(std::int64_t size_bytes, const DownloadBucket& downloads, std::int64_t update_count) {
  if (size_bytes < 0 || update_count < 0) throw Error(ErrorCode::InvalidInput, "negative size or update count");
  BandwidthEstimate b;
  b.per_user_bytes = size_bytes * update_count;
  b.per_update_fleet_lo = size_bytes * downloads.lo;
  b.per_update_fleet_hi = size_bytes * downloads.hi;
  b.total_fleet_lo = b.per_update_fleet_lo * update_count;
  b.total_fleet_hi = b.per_update_fleet_hi * update_count;
  return b;
}

std::vector<CcdfPoint> price_change_ccdf(std::span<const std::int64_t> counts) {
  if (counts.empty()) return {};
  if (std::any_of(counts.begin(), counts.end(), [](auto c) { return c < 0; })) {
    throw Error(ErrorCode::InvalidInput, "negative price-change count");
  }
  std::vector<std::int64_t> sorted(counts.begin(), counts.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<CcdfPoint> out;
  for (std::int64_t x = 0; x <= sorted.back(); ++x) {
    const auto exceed = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), x);
    out.push_back({x, std::sqrt(static_cast<double>(exceed))});
  }
  return out;
}

std::optional<double> price_dispersion_cov(std::span<const double> prices) {
  std::vector<double> paid;
  for (double p : prices) {
    if (!std::isfinite(p) || p < 0) throw Error(ErrorCode::InvalidInput, "prices must be finite and non-negative");
    if (p > 0) paid.push_back(p);
  }
  if (paid.empty()) return std::nullopt;
  const double n = static_cast<double>(paid.size());
  const double mean = std::accumulate(paid.begin(), paid.end(), 0.0) / n;
  double ss = 0.0;
  for (double p : paid) ss += (p - mean) * (p - mean);
  return std::sqrt(ss / n) / mean;
}

std::optional<double> median(std::vector<double> values) {
  if (values.empty()) return std::nullopt;
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

Decomposition seasonal_trend_decompose(std::span<const double> series, int period) {
  if (period < 2) throw Error(ErrorCode::InvalidInput, "period must be at least 2");
  const auto n = series.size();
  const auto p = static_cast<std::size_t>(period);
  if (n < 2 * p) throw Error(ErrorCode::InsufficientData, "series shorter than two periods");

  Decomposition out;
  out.period = period;
  out.observed.assign(series.begin(), series.end());
  out.trend.assign(n, std::nullopt);
  out.remainder.assign(n, std::nullopt);

  const std::size_t half = p / 2;
  for (std::size_t i = half; i + half < n; ++i) {
    double sum = 0.0;
    if (p % 2 == 1) {
      for (std::size_t k = i - half; k <= i + half; ++k) sum += series[k];
    } else {
      sum = 0.5 * (series[i - half] + series[i + half]);
      for (std::size_t k = i - half + 1; k < i + half; ++k) sum += series[k];
    }
    out.trend[i] = sum / static_cast<double>(p);
  }

  std::vector<double> phase_sum(p, 0.0);
  std::vector<std::size_t> phase_n(p, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!out.trend[i]) continue;
    phase_sum[i % p] += series[i] - *out.trend[i];
    ++phase_n[i % p];
  }
  std::vector<double> phase(p);
  for (std::size_t j = 0; j < p; ++j) phase[j] = phase_sum[j] / static_cast<double>(phase_n[j]);
  const double centre = std::accumulate(phase.begin(), phase.end(), 0.0) / static_cast<double>(p);
  for (auto& s : phase) s -= centre;

  out.seasonal.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.seasonal[i] = phase[i % p];
    if (out.trend[i]) out.remainder[i] = series[i] - *out.trend[i] - out.seasonal[i];
  }
  return out;
}

namespace {

double ks_distance(const std::vector<double>& tail, double alpha, double x_min) {
  const double n = static_cast<double>(tail.size());
  double d = 0.0;
  for (std::size_t i = 0; i < tail.size();) {
    std::size_t j = i;
    while (j < tail.size() && tail[j] == tail[i]) ++j;
    const double model = 1.0 - std::pow(tail[i] / x_min, 1.0 - alpha);
    d = std::max({d, std::abs(static_cast<double>(i) / n - model), std::abs(static_cast<double>(j) / n - model)});
    i = j;
  }
  return d;
}

}  // namespace

PowerLawFit fit_power_law(std::span<const double> samples, double x_min) {
  if (!(x_min > 0.0) || !std::isfinite(x_min)) throw Error(ErrorCode::InvalidInput, "x_min must be positive");
  std::vector<double> tail;
  for (double x : samples) {
    if (!(x > 0.0)) throw Error(ErrorCode::InvalidInput, "power-law samples must be positive");
    if (x >= x_min) tail.push_back(x);
  }
  if (tail.size() < 2) throw Error(ErrorCode::InsufficientData, "fewer than two samples at or above x_min");
  std::sort(tail.begin(), tail.end());
  double log_sum = 0.0;
  for (double x : tail) log_sum += std::log(x / x_min);
  if (!(log_sum > 0.0)) throw Error(ErrorCode::DegenerateTail, "every tail sample equals x_min");

  PowerLawFit fit;
  fit.x_min = x_min;
  fit.n_tail = tail.size();
  fit.alpha = 1.0 + static_cast<double>(tail.size()) / log_sum;
  fit.ks_distance = ks_distance(tail, fit.alpha, x_min);
  return fit;
}

PowerLawFit fit_power_law_scan(std::span<const double> samples, std::size_t min_tail) {
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  if (!sorted.empty() && !(sorted.front() > 0.0)) throw Error(ErrorCode::InvalidInput, "power-law samples must be positive");
  const std::size_t n = sorted.size();
  min_tail = std::max<std::size_t>(min_tail, 2);

  // suffix sums of ln(x) let every candidate's MLE be O(1)
  std::vector<double> suffix_log(n + 1, 0.0);
  for (std::size_t i = n; i-- > 0;) suffix_log[i] = suffix_log[i + 1] + std::log(sorted[i]);

  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i + min_tail <= n; ++i) {
    if (i == 0 || sorted[i] != sorted[i - 1]) starts.push_back(i);
  }
  // cap the KS work on large inputs by thinning candidates evenly
  constexpr std::size_t kMaxCandidates = 400;
  if (starts.size() > kMaxCandidates) {
    std::vector<std::size_t> thinned;
    for (std::size_t k = 0; k < kMaxCandidates; ++k) thinned.push_back(starts[k * starts.size() / kMaxCandidates]);
    starts.swap(thinned);
  }

  std::optional<PowerLawFit> best;
  std::vector<double> tail;
  for (std::size_t i : starts) {
    const double x_min = sorted[i];
    const std::size_t m = n - i;
    const double log_sum = suffix_log[i] - static_cast<double>(m) * std::log(x_min);
    if (!(log_sum > 0.0)) continue;
    PowerLawFit fit;
    fit.x_min = x_min;
    fit.n_tail = m;
    fit.alpha = 1.0 + static_cast<double>(m) / log_sum;
    tail.assign(sorted.begin() + static_cast<std::ptrdiff_t>(i), sorted.end());
    fit.ks_distance = ks_distance(tail, fit.alpha, x_min);
    if (!best || fit.ks_distance < best->ks_distance) best = fit;
  }
  if (!best) throw Error(ErrorCode::InsufficientData, "no x_min leaves enough tail samples");
  return *best;
}

std::optional<double> downloads_ratings_slope(std::span<const XY> points) {
  if (points.size() < 2) throw Error(ErrorCode::InvalidInput, "need at least two points");
  double sxy = 0.0, sxx = 0.0;
  for (const auto& p : points) {
    sxy += p.x * p.y;
    sxx += p.x * p.x;
  }
  if (sxx == 0.0) return std::nullopt;
  return sxy / sxx;
}

std::optional<double> yule_q(const Contingency& t) noexcept {
  const double ad = static_cast<double>(t.both) * static_cast<double>(t.neither);
  const double bc = static_cast<double>(t.only_a) * static_cast<double>(t.only_b);
  if (ad + bc == 0.0) return std::nullopt;
  return (ad - bc) / (ad + bc);
}

namespace {

Contingency contingency(const std::set<DayApp>& a, const std::set<DayApp>& b, std::size_t universe_size) {
  std::size_t both = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++both;
      ++ia;
      ++ib;
    }
  }
  return {both, a.size() - both, b.size() - both, universe_size - (a.size() + b.size() - both)};
}

}  // namespace

std::optional<double> yule_association(const AttributeEventSet& a, const AttributeEventSet& b,
                                       const std::set<DayApp>& universe) {
  for (const auto* set : {&a.members, &b.members}) {
    if (!std::includes(universe.begin(), universe.end(), set->begin(), set->end())) {
      throw Error(ErrorCode::InvalidInput, "event set is not a subset of the universe");
    }
  }
  return yule_q(contingency(a.members, b.members, universe.size()));
}

std::set<DayApp> association_universe(std::span<const AppTimeline> timelines, AssociationUniverse mode) {
  std::set<DayApp> universe;
  for (const auto& t : timelines) {
    if (mode == AssociationUniverse::AllObserved) {
      for (Date d : t.observed_days) universe.insert({d, t.app});
    }
    for (const auto& e : t.events) universe.insert({e.day, e.app});
  }
  return universe;
}

AttributeEventSet attribute_event_set(std::span<const AppTimeline> timelines, AttributeKind kind) {
  AttributeEventSet set{kind, {}};
  for (const auto& t : timelines) {
    for (const auto& e : t.events) {
      if (e.kind == kind) set.members.insert({e.day, e.app});
    }
  }
  return set;
}

AssociationMatrix association_matrix(std::span<const AppTimeline> timelines, AssociationUniverse mode) {
  AssociationMatrix m;
  const auto universe = association_universe(timelines, mode);
  m.universe_size = universe.size();
  std::vector<AttributeEventSet> sets;
  for (auto kind : m.kinds) sets.push_back(attribute_event_set(timelines, kind));
  for (std::size_t i = 0; i < sets.size(); ++i) {
    m.set_sizes[i] = sets[i].members.size();
    for (std::size_t j = i; j < sets.size(); ++j) {
      m.q[i][j] = m.q[j][i] = yule_q(contingency(sets[i].members, sets[j].members, universe.size()));
    }
  }
  return m;
}

}  // namespace marketpulse
