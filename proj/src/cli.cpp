#include "marketpulse/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "marketpulse/anomaly.hpp"
#include "marketpulse/harvester.hpp"
#include "marketpulse/metrics.hpp"
#include "marketpulse/simgen.hpp"
#include "marketpulse/store.hpp"
#include "marketpulse/timeline.hpp"
#include "marketpulse/topk.hpp"

#ifndef MARKETPULSE_DATA_DIR
#define MARKETPULSE_DATA_DIR "data"
#endif

namespace marketpulse::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::IoError:
    case ErrorCode::CrawlFailed: return kExitIo;
    default: return kExitValidation;
  }
}

namespace {

// ---------------------------------------------------------------------------
// Plumbing

std::string iso_time(Timestamp t) {
  const auto day = day_of(t);
  const auto secs = (t - start_of(day)).count();
  std::ostringstream out;
  out << format_date(day) << 'T' << std::setfill('0') << std::setw(2) << secs / 3600 << ':' << std::setw(2)
      << (secs / 60) % 60 << ':' << std::setw(2) << secs % 60 << 'Z';
  return out.str();
}

ojson opt(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

/// Writes to `path`, or to `fallback` when the path is empty.
template <class F>
void emit(const std::string& path, std::ostream& fallback, F&& write) {
  if (path.empty()) {
    write(fallback);
    fallback.flush();
    return;
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(ErrorCode::IoError, "cannot write " + path);
  write(file);
  file.flush();
  if (!file) throw Error(ErrorCode::IoError, "write failed for " + path);
}

void emit_json(const std::string& path, std::ostream& fallback, const ojson& j) {
  emit(path, fallback, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
}

std::string resolve_store(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("MARKETPULSE_STORE"); env && *env) return env;
  throw Error(ErrorCode::InvalidInput, "no store given: pass --store or set MARKETPULSE_STORE");
}

/// Opens an existing store for queries.
std::unique_ptr<SnapStore> open_store(const std::string& flag) {
  const auto path = resolve_store(flag);
  if (!fs::is_directory(path)) throw Error(ErrorCode::IoError, "store not found: " + path);
  return std::make_unique<SnapStore>(path);
}

struct Corpus {
  std::vector<AppSeries> series;
  std::vector<AppTimeline> timelines;
  std::vector<AppSnapshot> latest;
  Date first_day{};
  Date last_day{};
};

Corpus load_corpus(const SnapStore& store) {
  Corpus c;
  const auto apps = store.apps();
  c.series.reserve(apps.size());
  bool any = false;
  for (const auto& app : apps) {
    auto s = store.query_app_series(app);
    if (s.empty()) continue;
    const Date first = day_of(s.snapshots.front().fetch_time), last = day_of(s.snapshots.back().fetch_time);
    c.first_day = any ? std::min(c.first_day, first) : first;
    c.last_day = any ? std::max(c.last_day, last) : last;
    any = true;
    c.timelines.push_back(build_app_timeline(s));
    c.latest.push_back(s.snapshots.back());
    c.series.push_back(std::move(s));
  }
  if (!any) throw Error(ErrorCode::InsufficientData, "the store holds no snapshots");
  return c;
}

Date reference_day(const std::string& flag, const SnapStore& store, const Corpus& c) {
  if (!flag.empty()) return parse_date(flag);
  if (const auto m = store.manifest()) return m->observation_end;
  return c.last_day;
}

// ---------------------------------------------------------------------------
// Metrics

struct MetricsOptions {
  std::string report;
  std::string store;
  std::string out;
  int window_days = 365;
  std::string reference;
  std::optional<double> xmin;
  int period = 7;
  std::string universe = "any";
  double bin_width = 7.0;
};

const std::array<PopularityClass, 3> kClasses{PopularityClass::Unpopular, PopularityClass::Popular,
                                              PopularityClass::MostPopular};

ojson staleness_report(const MetricsOptions& o, const SnapStore& store, const Corpus& c) {
  const Date ref = reference_day(o.reference, store, c);
  std::array<std::size_t, 3> apps{}, stale{};
  for (const auto& s : c.latest) {
    const auto cls = static_cast<std::size_t>(classify_popularity(s.downloads));
    ++apps[cls];
    if (classify_staleness(s.last_updated, ref, o.window_days).state == Staleness::Stale) ++stale[cls];
  }
  const auto n = c.latest.size();
  const auto n_stale = stale[0] + stale[1] + stale[2];
  ojson by_class = ojson::object();
  for (auto cls : kClasses) {
    const auto i = static_cast<std::size_t>(cls);
    by_class[std::string(to_string(cls))] = {
        {"apps", apps[i]}, {"stale", stale[i]}, {"stale_share", apps[i] ? opt(double(stale[i]) / double(apps[i])) : ojson(nullptr)}};
  }
  return {{"report", "staleness"},
          {"reference", format_date(ref)},
          {"window_days", o.window_days},
          {"apps", n},
          {"stale", n_stale},
          {"active", n - n_stale},
          {"stale_share", double(n_stale) / double(n)},
          {"active_share", double(n - n_stale) / double(n)},
          {"by_class", by_class}};
}

ojson popularity_report(const Corpus& c) {
  std::array<std::size_t, 3> counts{};
  std::map<std::int64_t, std::pair<std::int64_t, std::size_t>> buckets;
  std::vector<XY> points;
  for (const auto& s : c.latest) {
    ++counts[static_cast<std::size_t>(classify_popularity(s.downloads))];
    auto& b = buckets[s.downloads.lo];
    b.first = s.downloads.hi;
    ++b.second;
    points.push_back({s.downloads.midpoint(), static_cast<double>(s.rating_count)});
  }
  const double n = static_cast<double>(c.latest.size());
  ojson classes = ojson::array();
  for (auto cls : kClasses) {
    const auto k = counts[static_cast<std::size_t>(cls)];
    classes.push_back({{"class", to_string(cls)}, {"apps", k}, {"share", double(k) / n}});
  }
  ojson hist = ojson::array();
  for (const auto& [lo, b] : buckets) hist.push_back({{"lo", lo}, {"hi", b.first}, {"apps", b.second}});
  ojson slope = nullptr;
  if (points.size() >= 2) slope = opt(downloads_ratings_slope(points));
  return {{"report", "popularity"},
          {"apps", c.latest.size()},
          {"classes", classes},
          {"downloads_histogram", hist},
          {"ratings_per_download_slope", slope}};
}

ojson updates_report(const MetricsOptions& o, const SnapStore& store, const Corpus& c) {
  const Date ref = reference_day(o.reference, store, c);
  std::array<std::size_t, 3> apps{}, updated{};
  std::vector<double> auis;
  std::size_t total_updates = 0;
  double per_user = 0, fleet_lo = 0, fleet_hi = 0;
  for (std::size_t i = 0; i < c.timelines.size(); ++i) {
    const auto stats = update_stats(c.timelines[i], c.first_day, ref);
    const auto& s = c.latest[i];
    const auto cls = static_cast<std::size_t>(classify_popularity(s.downloads));
    ++apps[cls];
    if (stats.update_count > 0) ++updated[cls];
    total_updates += stats.update_count;
    if (stats.aui_days) auis.push_back(*stats.aui_days);
    const auto bw = update_bandwidth(s.size_bytes, s.downloads, static_cast<std::int64_t>(stats.update_count));
    per_user += static_cast<double>(bw.per_user_bytes);
    fleet_lo += static_cast<double>(bw.total_fleet_lo);
    fleet_hi += static_cast<double>(bw.total_fleet_hi);
  }
  const double n = static_cast<double>(c.timelines.size());
  const auto n_updated = updated[0] + updated[1] + updated[2];
  ojson by_class = ojson::object();
  for (auto cls : kClasses) {
    const auto i = static_cast<std::size_t>(cls);
    by_class[std::string(to_string(cls))] = {{"apps", apps[i]},
                                             {"updated", updated[i]},
                                             {"updated_share", apps[i] ? opt(double(updated[i]) / double(apps[i])) : ojson(nullptr)}};
  }
  std::map<std::int64_t, std::size_t> bins;
  for (double a : auis) ++bins[static_cast<std::int64_t>(std::floor(a / o.bin_width))];
  ojson hist = ojson::array();
  for (const auto& [b, k] : bins) {
    hist.push_back({{"bin_lo", double(b) * o.bin_width}, {"bin_hi", double(b + 1) * o.bin_width}, {"count", k}});
  }
  std::optional<double> mean_aui;
  if (!auis.empty()) mean_aui = std::accumulate(auis.begin(), auis.end(), 0.0) / double(auis.size());
  return {{"report", "updates"},
          {"window", {{"first", format_date(c.first_day)}, {"last", format_date(ref)}}},
          {"apps", c.timelines.size()},
          {"updated_apps", n_updated},
          {"updated_share", double(n_updated) / n},
          {"total_updates", total_updates},
          {"aui_days", {{"apps", auis.size()}, {"mean", opt(mean_aui)}, {"median", opt(median(auis))}}},
          {"aui_histogram", hist},
          {"bandwidth_bytes", {{"per_user_total", per_user}, {"fleet_lo", fleet_lo}, {"fleet_hi", fleet_hi}}},
          {"by_class", by_class}};
}

ojson price_report(const MetricsOptions& o, const SnapStore& store, const Corpus& c) {
  const Date ref = reference_day(o.reference, store, c);
  std::vector<std::int64_t> change_counts;
  std::vector<double> latest_prices, active_prices, per_app_cov;
  std::size_t ever_paid = 0, changers = 0;
  // daily mean price of paid apps, from each app's last snapshot of the day
  const auto n_days = static_cast<std::size_t>(days_between(c.first_day, c.last_day) + 1);
  std::vector<double> day_sum(n_days, 0.0);
  std::vector<std::size_t> day_n(n_days, 0);

  for (std::size_t i = 0; i < c.series.size(); ++i) {
    const auto& snaps = c.series[i].snapshots;
    const bool paid_ever = std::any_of(snaps.begin(), snaps.end(), [](const AppSnapshot& s) { return s.price_cents > 0; });
    const auto& last = c.latest[i];
    if (last.price_cents > 0) {
      latest_prices.push_back(static_cast<double>(last.price_cents));
      if (classify_staleness(last.last_updated, ref, o.window_days).state == Staleness::Active) {
        active_prices.push_back(static_cast<double>(last.price_cents));
      }
    }
    if (!paid_ever) continue;
    ++ever_paid;
    std::int64_t changes = 0;
    for (const auto& e : c.timelines[i].events) {
      if (e.kind == AttributeKind::PriceDown || e.kind == AttributeKind::PriceUp) ++changes;
    }
    change_counts.push_back(changes);
    if (changes > 0) ++changers;
    std::vector<double> prices;
    for (const auto& s : snaps) prices.push_back(static_cast<double>(s.price_cents));
    if (const auto cov = price_dispersion_cov(prices)) per_app_cov.push_back(*cov);
    for (std::size_t k = 0; k < snaps.size(); ++k) {
      const Date d = day_of(snaps[k].fetch_time);
      if (k + 1 < snaps.size() && day_of(snaps[k + 1].fetch_time) == d) continue;
      if (snaps[k].price_cents <= 0) continue;
      const auto idx = static_cast<std::size_t>(days_between(c.first_day, d));
      day_sum[idx] += static_cast<double>(snaps[k].price_cents);
      ++day_n[idx];
    }
  }

  ojson ccdf = ojson::array();
  for (const auto& p : price_change_ccdf(change_counts)) ccdf.push_back({{"x", p.x}, {"y", p.y}});
  std::optional<double> mean_cov;
  if (!per_app_cov.empty()) mean_cov = std::accumulate(per_app_cov.begin(), per_app_cov.end(), 0.0) / double(per_app_cov.size());

  ojson decomposition = nullptr;
  std::string note;
  std::vector<double> daily;
  for (std::size_t d = 0; d < n_days; ++d) {
    if (day_n[d] == 0) {
      note = "no paid prices on " + format_date(c.first_day + std::chrono::days{static_cast<int>(d)});
      break;
    }
    daily.push_back(day_sum[d] / double(day_n[d]));
  }
  if (note.empty()) {
    try {
      const auto dec = seasonal_trend_decompose(daily, o.period);
      ojson rows = ojson::array();
      for (std::size_t d = 0; d < daily.size(); ++d) {
        rows.push_back({{"day", format_date(c.first_day + std::chrono::days{static_cast<int>(d)})},
                        {"observed", dec.observed[d]},
                        {"trend", opt(dec.trend[d])},
                        {"seasonal", dec.seasonal[d]},
                        {"remainder", opt(dec.remainder[d])}});
      }
      decomposition = {{"series", "mean_paid_price_cents_by_day"}, {"period", dec.period}, {"rows", rows}};
    } catch (const Error& e) {
      note = e.what();
    }
  }

  ojson j = {{"report", "price"},
             {"reference", format_date(ref)},
             {"apps", c.series.size()},
             {"paid_apps", latest_prices.size()},
             {"ever_paid_apps", ever_paid},
             {"price_changers", changers},
             {"price_changer_share", ever_paid ? opt(double(changers) / double(ever_paid)) : ojson(nullptr)},
             {"ccdf_sqrt", ccdf},
             {"cov", {{"cross_section", opt(price_dispersion_cov(latest_prices))}, {"mean_per_app", opt(mean_cov)}}},
             {"median_price_cents", {{"all", opt(median(latest_prices))}, {"active", opt(median(active_prices))}}},
             {"decomposition", decomposition}};
  if (!note.empty()) j["decomposition_note"] = note;
  return j;
}

ojson association_report(const MetricsOptions& o, const Corpus& c) {
  const auto mode = o.universe == "observed" ? AssociationUniverse::AllObserved : AssociationUniverse::AnyChange;
  const auto m = association_matrix(c.timelines, mode);
  ojson labels = ojson::array(), sizes = ojson::array(), rows = ojson::array();
  for (std::size_t i = 0; i < m.kinds.size(); ++i) {
    labels.push_back(short_label(m.kinds[i]));
    sizes.push_back(m.set_sizes[i]);
    ojson row = ojson::array();
    for (std::size_t k = 0; k < m.kinds.size(); ++k) row.push_back(opt(m.q[i][k]));
    rows.push_back(row);
  }
  return {{"report", "association"},
          {"universe", mode == AssociationUniverse::AllObserved ? "AllObserved" : "AnyChange"},
          {"universe_size", m.universe_size},
          {"kinds", labels},
          {"set_sizes", sizes},
          {"q", rows}};
}

ojson powerlaw_report(const MetricsOptions& o, const Corpus& c) {
  std::map<std::string, double> per_dev;
  for (const auto& s : c.latest) per_dev[s.developer] += 1.0;
  std::vector<double> counts;
  for (const auto& [dev, n] : per_dev) counts.push_back(n);
  const auto fit = o.xmin ? fit_power_law(counts, *o.xmin) : fit_power_law_scan(counts);
  return {{"report", "powerlaw"},
          {"sample", "developer_app_counts"},
          {"developers", counts.size()},
          {"x_min_mode", o.xmin ? "fixed" : "ks_scan"},
          {"alpha", fit.alpha},
          {"x_min", fit.x_min},
          {"n_tail", fit.n_tail},
          {"ks_distance", fit.ks_distance}};
}

void run_metrics(const MetricsOptions& o, std::ostream& out) {
  const auto store = open_store(o.store);
  const auto corpus = load_corpus(*store);
  ojson j;
  if (o.report == "staleness") j = staleness_report(o, *store, corpus);
  else if (o.report == "popularity") j = popularity_report(corpus);
  else if (o.report == "updates") j = updates_report(o, *store, corpus);
  else if (o.report == "price") j = price_report(o, *store, corpus);
  else if (o.report == "association") j = association_report(o, corpus);
  else j = powerlaw_report(o, corpus);
  emit_json(o.out, out, j);
}

// ---------------------------------------------------------------------------
// Top-k

struct TopkOptions {
  std::string report;
  std::string store;
  std::string out;
  std::string list;
  std::string slice = "all";
  std::string ranks = "1,50,100,200,400";
  std::string mode;
  std::string histograms;
  std::size_t bin_width = 10;
};

std::vector<std::size_t> parse_ranks(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != item.size() || v == 0) throw Error(ErrorCode::InvalidInput, "bad rank '" + item + "' in --ranks");
    out.push_back(v);
  }
  if (out.empty()) throw Error(ErrorCode::InvalidInput, "--ranks is empty");
  return out;
}

void run_topk(const TopkOptions& o, std::ostream& out) {
  const auto type = parse_list_type(o.list);
  if (!type) throw Error(ErrorCode::InvalidInput, "unknown list type '" + o.list + "'");
  const auto store = open_store(o.store);
  const auto series = store->query_list_series(*type);

  if (o.report == "lifecycle") {
    LifecycleMode mode = LifecycleMode::WholeSpan;
    if (o.mode == "episode") mode = LifecycleMode::Episode;
    else if (!o.mode.empty() && o.mode != "whole") throw Error(ErrorCode::InvalidInput, "lifecycle --mode is whole or episode");
    const auto rows = lifecycle_summaries(series, mode);
    emit(o.out, out, [&](std::ostream& os) { write_lifecycle_csv(os, rows); });
    if (!o.histograms.empty()) {
      emit(o.histograms, out, [&](std::ostream& os) { write_lifecycle_histograms(os, rows, o.bin_width); });
    }
  } else if (o.report == "similarity") {
    const auto slice = RankSlice::parse(o.slice);
    if (series.size() < 2) throw Error(ErrorCode::InsufficientData, "similarity needs at least two observations");
    emit(o.out, out, [&](std::ostream& os) {
      os << "fetch_time,m,n_raw,n_max\n";
      const auto& obs = series.observations();
      for (std::size_t i = 1; i < obs.size(); ++i) {
        const auto a = slice.apply(obs[i - 1].ranking), b = slice.apply(obs[i].ranking);
        const auto r = inverse_rank_measure(a, b);
        os << iso_time(obs[i].fetch_time) << ',' << ojson(r.m).dump() << ',' << ojson(r.n_raw).dump() << ','
           << ojson(r.n_max).dump() << '\n';
      }
    });
  } else if (o.report == "overlap") {
    const auto slice = RankSlice::parse(o.slice);
    const auto s = overlap_stats(series, slice);
    emit_json(o.out, out,
              {{"report", "overlap"},
               {"list", to_string(*type)},
               {"slice", slice.label()},
               {"pairs", s.pairs},
               {"o_mean", s.o_mean},
               {"o_min", s.o_min},
               {"m_mean", s.m_mean},
               {"m_sd", opt(s.m_sd)},
               {"o_first_last", s.o_first_last},
               {"item_count", s.item_count}});
  } else if (o.report == "occupancy") {
    const auto occ = rank_occupancy(series);
    emit(o.out, out, [&](std::ostream& os) {
      os << "rank,distinct_apps\n";
      for (std::size_t r = 0; r < occ.size(); ++r) os << r + 1 << ',' << occ[r] << '\n';
    });
  } else {
    LifetimeMode mode = LifetimeMode::TimeAtRank;
    if (o.mode == "list-lifetime") mode = LifetimeMode::ListLifetime;
    else if (!o.mode.empty() && o.mode != "time-at-rank") {
      throw Error(ErrorCode::InvalidInput, "lifetime --mode is time-at-rank or list-lifetime");
    }
    const auto ranks = parse_ranks(o.ranks);
    const auto lifetimes = lifetime_at_rank(series, ranks, mode);
    emit(o.out, out, [&](std::ostream& os) {
      os << "rank,apps,mean_observations\n";
      for (const auto& l : lifetimes) {
        const auto m = l.mean();
        os << l.rank << ',' << l.per_app.size() << ',' << (m ? ojson(*m).dump() : std::string()) << '\n';
      }
    });
  }
}

// ---------------------------------------------------------------------------
// Anomaly

struct AnomalyOptions {
  std::string report;
  std::string store;
  std::string out;
  std::string policy;
  std::string flags;
  double mad_k = 5.0;
  double min_abs = 20.0;
  int window_days = 30;
  int min_history_days = 7;
  int churn_window = 7;
  std::size_t min_cluster = 5;
  double title_similarity = 0.8;
  int min_flags = 3;
  std::size_t min_reviews = 10;
};

DangerousPermissionPolicy load_policy(const std::string& flag) {
  const fs::path path = flag.empty() ? fs::path(MARKETPULSE_DATA_DIR) / "dangerous_permissions.txt" : fs::path(flag);
  if (flag.empty() && !fs::exists(path)) throw Error(ErrorCode::ConfigError, "no --policy given and no default policy at " + path.string());
  return DangerousPermissionPolicy::load(path);
}

ojson spike_json(const SpikeEvent& e) {
  return {{"day", format_date(e.day)}, {"polarity", to_string(e.polarity)}, {"count", e.count},
          {"baseline", e.baseline},    {"threshold", e.threshold},          {"score", e.score}};
}

ojson reviews_report(const AnomalyOptions& o, const SnapStore& store) {
  SpikeParams params{o.window_days, o.mad_k, o.min_abs, o.min_history_days};
  ojson apps = ojson::array();
  std::size_t total = 0, scanned = 0;
  for (const auto& app : store.reviewed_apps()) {
    const auto reviews = store.query_reviews(app);
    if (reviews.empty()) continue;
    ++scanned;
    const auto spikes = detect_review_spikes(build_review_timeline(reviews), params);
    if (spikes.empty()) continue;
    ojson list = ojson::array();
    for (const auto& e : spikes) list.push_back(spike_json(e));
    total += spikes.size();
    apps.push_back({{"app", app.str()}, {"spikes", list}});
  }
  return {{"report", "reviews"},
          {"params", {{"window_days", o.window_days}, {"mad_k", o.mad_k}, {"min_abs", o.min_abs}, {"min_history_days", o.min_history_days}}},
          {"apps_scanned", scanned},
          {"apps_flagged", apps.size()},
          {"spikes", total},
          {"apps", apps}};
}

ojson permissions_report(const AnomalyOptions& o, const SnapStore& store) {
  const auto policy = load_policy(o.policy);
  const auto corpus = load_corpus(store);
  std::map<std::string, std::size_t> by_kind;
  std::map<AppId, std::size_t> flagged;
  ojson apps = ojson::array();
  for (const auto& t : corpus.timelines) {
    const auto flags = permission_flags(t, policy, {o.churn_window, true});
    if (flags.empty()) continue;
    ojson list = ojson::array();
    for (const auto& f : flags) {
      ++by_kind[std::string(to_string(f.kind))];
      list.push_back({{"day", format_date(f.day)}, {"kind", to_string(f.kind)}, {"permissions", f.detail}});
    }
    flagged[t.app] = flags.size();
    apps.push_back({{"app", t.app.str()}, {"flags", list}});
  }
  ojson kinds = ojson::object();
  for (auto k : {PermissionFlagKind::DangerousAdded, PermissionFlagKind::ChurnWithinWindow, PermissionFlagKind::ChangeWithoutVersionChange}) {
    kinds[std::string(to_string(k))] = by_kind[std::string(to_string(k))];
  }
  ojson j = {{"report", "permissions"},
             {"policy_size", policy.dangerous.size()},
             {"churn_window_days", o.churn_window},
             {"apps_scanned", corpus.timelines.size()},
             {"apps_flagged", flagged.size()},
             {"flags_by_kind", kinds},
             {"apps", apps}};

  if (!o.flags.empty()) {
    std::ifstream in(o.flags);
    if (!in) throw Error(ErrorCode::IoError, "cannot read flags file " + o.flags);
    const auto external = parse_flags_csv(in);
    const auto joined = join_external_flags(external, store, {o.min_flags, o.min_reviews});
    std::size_t cells[2][2] = {{0, 0}, {0, 0}};
    ojson rows = ojson::array();
    for (const auto& f : joined) {
      const auto it = flagged.find(f.app);
      const std::size_t n_flags = it == flagged.end() ? 0 : it->second;
      ++cells[f.selected ? 0 : 1][n_flags > 0 ? 0 : 1];
      rows.push_back({{"app", f.app.str()},
                      {"flag_count", f.flag_count},
                      {"review_count", f.review_count},
                      {"scan_selected", f.selected},
                      {"permission_flags", n_flags}});
    }
    j["external_flags"] = {{"rule", {{"min_flags", o.min_flags}, {"min_reviews", o.min_reviews}}},
                           {"apps", rows},
                           {"cross_tab",
                            {{"selected_with_permission_flags", cells[0][0]},
                             {"selected_without_permission_flags", cells[0][1]},
                             {"unselected_with_permission_flags", cells[1][0]},
                             {"unselected_without_permission_flags", cells[1][1]}}}};
  }
  return j;
}

ojson scam_report(const AnomalyOptions& o, const SnapStore& store) {
  std::vector<AppSnapshot> latest;
  for (const auto& app : store.apps()) {
    if (auto s = store.latest_snapshot(app)) latest.push_back(std::move(*s));
  }
  ScamParams params;
  params.min_cluster = o.min_cluster;
  params.title_similarity = o.title_similarity;
  const auto clusters = scam_pattern_scan(latest, params);
  ojson list = ojson::array();
  for (const auto& c : clusters) {
    ojson ids = ojson::array();
    for (const auto& id : c.apps) ids.push_back(id.str());
    list.push_back({{"developer", c.developer}, {"size", c.apps.size()}, {"apps", ids}});
  }
  return {{"report", "scam"},
          {"params",
           {{"min_cluster", params.min_cluster},
            {"price_lo_cents", params.price_lo_cents},
            {"price_hi_cents", params.price_hi_cents},
            {"title_similarity", params.title_similarity}}},
          {"apps_scanned", latest.size()},
          {"clusters", list}};
}

ojson decoupling_report(const SnapStore& store) {
  const auto corpus = load_corpus(store);
  std::size_t events = 0;
  for (const auto& t : corpus.timelines) {
    std::set<Date> days;
    for (const auto& e : t.events) {
      if (is_permission_kind(e.kind)) days.insert(e.day);
    }
    events += days.size();
  }
  return {{"report", "decoupling"},
          {"apps", corpus.timelines.size()},
          {"permission_events", events},
          {"rate", opt(permission_version_decoupling_rate(corpus.timelines))}};
}

void run_anomaly(const AnomalyOptions& o, std::ostream& out) {
  const auto store = open_store(o.store);
  ojson j;
  if (o.report == "reviews") j = reviews_report(o, *store);
  else if (o.report == "permissions") j = permissions_report(o, *store);
  else if (o.report == "scam") j = scam_report(o, *store);
  else j = decoupling_report(*store);
  emit_json(o.out, out, j);
}

// ---------------------------------------------------------------------------
// Data movement

struct SimulateOptions {
  std::string script;
  std::string out;
  std::string mock_market;
  std::size_t seeds = 5;
};

void run_simulate(const SimulateOptions& o, std::ostream& out) {
  const auto script = simgen::MarketScript::load(o.script);
  const auto data = simgen::generate(script);
  simgen::write_dataset(data, o.out);
  ojson summary = {{"out", o.out},
                   {"apps", data.truth.apps.size()},
                   {"snapshots", data.snapshots.size()},
                   {"reviews", data.reviews.size()},
                   {"topk_observations", data.topk.size()},
                   {"permission_events", data.truth.permission_event_count()}};
  if (!o.mock_market.empty()) {
    const auto latest = data.latest();
    const auto market = simgen::render_mock_market(latest, {o.seeds, 2, true, script.seed});
    simgen::write_mock_market(market, o.mock_market);
    summary["mock_market"] = {{"dir", o.mock_market}, {"pages", market.pages.size()}, {"seeds", market.seeds.size()}};
  }
  emit_json("", out, summary);
}

struct IngestOptions {
  std::string data;
  std::string store;
  std::size_t batch_size = 4096;
  bool strict = false;
};

int run_ingest(const IngestOptions& o, std::ostream& out) {
  if (!fs::is_directory(o.data)) throw Error(ErrorCode::IoError, "data directory not found: " + o.data);
  SnapStore store(resolve_store(o.store));
  const auto report = store.ingest_dataset(o.data);
  out << report.to_json().dump(2) << '\n';
  const bool rejected = report.snapshots.rejected + report.reviews.rejected + report.topk.rejected > 0;
  return o.strict && rejected ? kExitValidation : kExitOk;
}

struct CrawlOptions {
  std::string seeds;
  std::string market;
  std::size_t workers = 1;
  std::size_t ban_threshold = 50;
  int delay_ms = 100;
  std::string out;
};

std::vector<AppId> read_seeds(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read seeds file " + path);
  std::vector<AppId> seeds;
  std::string line;
  while (std::getline(in, line)) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    const auto e = line.find_last_not_of(" \t\r");
    seeds.emplace_back(line.substr(b, e - b + 1));
  }
  return seeds;
}

void run_crawl(const CrawlOptions& o, std::ostream& out) {
  const auto seeds = read_seeds(o.seeds);
  CrawlConfig config{o.workers, o.ban_threshold, o.delay_ms, std::nullopt};
  CrawlReport report;
  if (fs::is_directory(o.market)) {
    auto market = InMemoryMarket::load_dir(o.market);
    report = crawl(seeds, market, config);
  } else {
    auto market = TcpMarketClient::from_address(o.market);
    report = crawl(seeds, market, config);
  }
  const std::vector<std::vector<AppSnapshot>> batches{report.snapshots};
  const auto merged = merge_parsed(batches);
  fs::create_directories(o.out);
  emit((fs::path(o.out) / "snapshots.jsonl").string(), out, [&](std::ostream& os) {
    for (const auto& s : merged.snapshots) os << encode_line(s) << '\n';
  });
  auto j = report.to_json();
  j["rejected_records"] = merged.rejected.size();
  emit_json((fs::path(o.out) / "crawl_report.json").string(), out, j);
  emit_json("", out, j);
}

struct ServeOptions {
  std::string dir;
  std::uint16_t port = 0;
  int seconds = 0;
};

void run_serve(const ServeOptions& o, std::ostream& out) {
  auto backend = std::make_shared<InMemoryMarket>(InMemoryMarket::load_dir(o.dir));
  const auto pages = backend->pages().size();
  TcpMarketServer server(backend, o.port);
  out << "serving " << pages << " pages on 127.0.0.1:" << server.port() << std::endl;
  if (o.seconds > 0) {
    std::this_thread::sleep_for(std::chrono::seconds{o.seconds});
    server.stop();
  } else {
    server.wait();
  }
}

struct TimelineOptions {
  std::string store;
  std::string app;
  std::string out;
};

void run_timeline(const TimelineOptions& o, std::ostream& out) {
  const auto store = open_store(o.store);
  std::vector<AppTimeline> timelines;
  if (!o.app.empty()) {
    const auto series = store->query_app_series(AppId(o.app));
    if (series.empty()) throw Error(ErrorCode::InvalidInput, "unknown app " + o.app);
    timelines.push_back(build_app_timeline(series));
  } else {
    for (const auto& app : store->apps()) timelines.push_back(build_app_timeline(store->query_app_series(app)));
  }
  emit(o.out, out, [&](std::ostream& os) { write_timeline_csv(os, timelines); });
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"marketpulse: app-market snapshot analytics", args.empty() ? "marketpulse" : args[0]};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  SimulateOptions sim_o;
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset with ground truth");
  sim->add_option("--script", sim_o.script, "MarketScript JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", sim_o.out, "Output dataset directory")->required();
  sim->add_option("--mock-market", sim_o.mock_market, "Also write a crawlable mock market here");
  sim->add_option("--seeds", sim_o.seeds, "Number of crawl seeds for the mock market")->check(CLI::PositiveNumber);

  IngestOptions ing_o;
  auto* ing = app.add_subcommand("ingest", "Ingest a dataset directory into a store");
  ing->add_option("--data", ing_o.data, "Dataset directory (snapshots/reviews/topk JSONL)")->required();
  ing->add_option("--store", ing_o.store, "Store directory (default $MARKETPULSE_STORE)");
  ing->add_option("--batch-size", ing_o.batch_size, "Records per commit")->check(CLI::PositiveNumber);
  ing->add_flag("--strict", ing_o.strict, "Exit 1 if any record is rejected");

  CrawlOptions cr_o;
  auto* cr = app.add_subcommand("crawl", "Discover apps breadth-first through similar-app links");
  cr->add_option("--seeds", cr_o.seeds, "File with one seed app id per line")->required();
  cr->add_option("--market", cr_o.market, "host:port of a market server, or a mock-market directory")->required();
  cr->add_option("--workers", cr_o.workers, "Concurrent workers")->check(CLI::PositiveNumber);
  cr->add_option("--ban-threshold", cr_o.ban_threshold, "Consecutive 404s before a worker stops")->check(CLI::PositiveNumber);
  cr->add_option("--delay-ms", cr_o.delay_ms, "Politeness delay between fetches per worker")->check(CLI::NonNegativeNumber);
  cr->add_option("--out", cr_o.out, "Output directory")->required();

  ServeOptions sv_o;
  auto* sv = app.add_subcommand("serve-market", "Serve a mock-market directory over loopback TCP (test fixture)");
  sv->add_option("--dir", sv_o.dir, "Mock-market directory with pages/")->required();
  sv->add_option("--port", sv_o.port, "Port (0 picks a free one)");
  sv->add_option("--seconds", sv_o.seconds, "Stop after this many seconds (0 = until killed)")->check(CLI::NonNegativeNumber);

  TimelineOptions tl_o;
  auto* tl = app.add_subcommand("timeline", "Change-event CSV for one app or all apps");
  tl->add_option("--store", tl_o.store, "Store directory (default $MARKETPULSE_STORE)");
  tl->add_option("--app", tl_o.app, "App id (all apps when omitted)");
  tl->add_option("--out", tl_o.out, "Output file (default stdout)");

  MetricsOptions me_o;
  auto* me = app.add_subcommand("metrics", "Market-level reports");
  me->add_option("report", me_o.report, "staleness|popularity|updates|price|association|powerlaw")
      ->required()
      ->check(CLI::IsMember({"staleness", "popularity", "updates", "price", "association", "powerlaw"}));
  me->add_option("--store", me_o.store, "Store directory (default $MARKETPULSE_STORE)");
  me->add_option("--out", me_o.out, "Output file (default stdout)");
  me->add_option("--window-days", me_o.window_days, "Staleness window")->check(CLI::PositiveNumber);
  me->add_option("--reference", me_o.reference, "Reference date YYYY-MM-DD (default: observation end)");
  me->add_option("--xmin", me_o.xmin, "Fixed x_min for powerlaw (default: KS scan)");
  me->add_option("--period", me_o.period, "Seasonal period in days for the price decomposition");
  me->add_option("--universe", me_o.universe, "Association universe: any|observed")->check(CLI::IsMember({"any", "observed"}));
  me->add_option("--bin-width", me_o.bin_width, "AUI histogram bin width in days")->check(CLI::PositiveNumber);

  TopkOptions tk_o;
  auto* tk = app.add_subcommand("topk", "Ranked-list dynamics");
  tk->add_option("report", tk_o.report, "lifecycle|similarity|overlap|occupancy|lifetime")
      ->required()
      ->check(CLI::IsMember({"lifecycle", "similarity", "overlap", "occupancy", "lifetime"}));
  tk->add_option("--store", tk_o.store, "Store directory (default $MARKETPULSE_STORE)");
  tk->add_option("--list", tk_o.list, "Free|Paid|Gross|NewFree|NewPaid")->required();
  tk->add_option("--slice", tk_o.slice, "all|topN|lastN|A..B");
  tk->add_option("--ranks", tk_o.ranks, "Comma-separated ranks for lifetime");
  tk->add_option("--mode", tk_o.mode, "lifecycle: whole|episode; lifetime: time-at-rank|list-lifetime");
  tk->add_option("--histograms", tk_o.histograms, "lifecycle: also write binned histograms here");
  tk->add_option("--bin-width", tk_o.bin_width, "lifecycle histogram bin width")->check(CLI::PositiveNumber);
  tk->add_option("--out", tk_o.out, "Output file (default stdout)");

  AnomalyOptions an_o;
  auto* an = app.add_subcommand("anomaly", "Fraud and malware indicators");
  an->add_option("report", an_o.report, "reviews|permissions|scam|decoupling")
      ->required()
      ->check(CLI::IsMember({"reviews", "permissions", "scam", "decoupling"}));
  an->add_option("--store", an_o.store, "Store directory (default $MARKETPULSE_STORE)");
  an->add_option("--out", an_o.out, "Output file (default stdout)");
  an->add_option("--policy", an_o.policy, "Dangerous-permission policy file");
  an->add_option("--flags", an_o.flags, "External flags CSV (app,flag_count)");
  an->add_option("--mad-k", an_o.mad_k, "Spike threshold MAD multiplier")->check(CLI::NonNegativeNumber);
  an->add_option("--min-abs", an_o.min_abs, "Spike threshold absolute floor")->check(CLI::NonNegativeNumber);
  an->add_option("--window-days", an_o.window_days, "Spike trailing window")->check(CLI::PositiveNumber);
  an->add_option("--min-history-days", an_o.min_history_days, "Days before spikes are judged")->check(CLI::NonNegativeNumber);
  an->add_option("--churn-window", an_o.churn_window, "Permission churn window in days")->check(CLI::NonNegativeNumber);
  an->add_option("--min-cluster", an_o.min_cluster, "Scam cluster minimum size")->check(CLI::PositiveNumber);
  an->add_option("--title-similarity", an_o.title_similarity, "Scam title similarity threshold")->check(CLI::Range(0.0, 1.0));
  an->add_option("--min-flags", an_o.min_flags, "External flag selection: minimum flags");
  an->add_option("--min-reviews", an_o.min_reviews, "External flag selection: minimum reviews");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  if (argv.empty()) argv.push_back("marketpulse");
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitValidation;
  }

  try {
    if (*sim) run_simulate(sim_o, out);
    else if (*ing) return run_ingest(ing_o, out);
    else if (*cr) run_crawl(cr_o, out);
    else if (*sv) run_serve(sv_o, out);
    else if (*tl) run_timeline(tl_o, out);
    else if (*me) run_metrics(me_o, out);
    else if (*tk) run_topk(tk_o, out);
    else if (*an) run_anomaly(an_o, out);
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace marketpulse::cli
