#include "marketpulse/topk.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

#include "marketpulse/csv.hpp"
#include "marketpulse/error.hpp"

namespace marketpulse {

namespace {

struct Life {
  std::size_t first_idx = 0;
  std::size_t last_idx = 0;
  LifecycleSummary summary;
  std::size_t peak_idx = 0;
  std::vector<std::size_t> ranks;
};

LifecycleSummary finish(Life& life) {
  auto& s = life.summary;
  s.hrs2peak = life.peak_idx - life.first_idx + 1;
  std::sort(life.ranks.begin(), life.ranks.end());
  s.rankdyn = static_cast<std::size_t>(std::unique(life.ranks.begin(), life.ranks.end()) - life.ranks.begin());
  return s;
}

}  // namespace

std::vector<LifecycleSummary> lifecycle_summaries(const RankedListSeries& series, LifecycleMode mode) {
  if (series.size() < 2) throw Error(ErrorCode::InsufficientData, "lifecycle needs at least two observations");
  const auto& obs = series.observations();

  std::unordered_map<AppId, Life> open;
  std::vector<Life> done;
  auto close = [&](Life& life) {
    if (life.first_idx != 0) done.push_back(std::move(life));
  };

  for (std::size_t idx = 0; idx < obs.size(); ++idx) {
    const auto& ranking = obs[idx].ranking;
    for (std::size_t pos = 0; pos < ranking.size(); ++pos) {
      const std::size_t rank = pos + 1;
      auto [it, fresh] = open.try_emplace(ranking[pos]);
      Life& life = it->second;
      if (!fresh && mode == LifecycleMode::Episode && life.last_idx + 1 < idx) {
        close(life);
        life = Life{};
        fresh = true;
      }
      auto& s = life.summary;
      if (fresh) {
        life.first_idx = idx;
        life.peak_idx = idx;
        s.app = ranking[pos];
        s.debut = s.peak = rank;
        s.first_seen = obs[idx].fetch_time;
      }
      if (rank < s.peak) {
        s.peak = rank;
        life.peak_idx = idx;
      }
      life.last_idx = idx;
      ++s.tothrs;
      s.exit = rank;
      s.last_seen = obs[idx].fetch_time;
      life.ranks.push_back(rank);
    }
  }
  for (auto& [app, life] : open) close(life);

  std::sort(done.begin(), done.end(), [](const Life& a, const Life& b) {
    return std::tie(a.first_idx, a.summary.debut) < std::tie(b.first_idx, b.summary.debut);
  });
  std::vector<LifecycleSummary> out;
  out.reserve(done.size());
  for (auto& life : done) out.push_back(finish(life));
  return out;
}

SimilarityResult inverse_rank_measure(std::span<const AppId> prev, std::span<const AppId> next) {
  if (prev.empty() || next.empty()) throw Error(ErrorCode::InvalidInput, "empty ranking");
  std::unordered_map<AppId, std::size_t> next_rank;
  next_rank.reserve(next.size());
  for (std::size_t i = 0; i < next.size(); ++i) {
    if (!next_rank.emplace(next[i], i + 1).second) throw Error(ErrorCode::InvalidInput, "duplicate app in ranking");
  }
  std::unordered_set<AppId> in_prev;
  in_prev.reserve(prev.size());

  const double beyond_next = 1.0 / static_cast<double>(next.size() + 1);
  const double beyond_prev = 1.0 / static_cast<double>(prev.size() + 1);

  // N and Nmax are summed in the same term order so that disjoint lists
  // cancel exactly.
  double n = 0.0, n_max = 0.0;
  for (std::size_t i = 0; i < prev.size(); ++i) {
    if (!in_prev.insert(prev[i]).second) throw Error(ErrorCode::InvalidInput, "duplicate app in ranking");
    const double inv = 1.0 / static_cast<double>(i + 1);
    const auto hit = next_rank.find(prev[i]);
    n += std::abs(inv - (hit == next_rank.end() ? beyond_next : 1.0 / static_cast<double>(hit->second)));
    n_max += std::abs(inv - beyond_next);
  }
  for (std::size_t i = 0; i < next.size(); ++i) {
    const double inv = 1.0 / static_cast<double>(i + 1);
    if (!in_prev.count(next[i])) n += std::abs(inv - beyond_prev);
    n_max += std::abs(inv - beyond_prev);
  }
  return {1.0 - n / n_max, n, n_max};
}

SimilarityResult inverse_rank_measure(const TopKObservation& prev, const TopKObservation& next) {
  return inverse_rank_measure(prev.ranking, next.ranking);
}

std::vector<SimilarityPoint> similarity_series(const RankedListSeries& series) {
  std::vector<SimilarityPoint> out;
  const auto& obs = series.observations();
  for (std::size_t i = 1; i < obs.size(); ++i) {
    out.push_back({obs[i].fetch_time, inverse_rank_measure(obs[i - 1], obs[i])});
  }
  return out;
}

namespace {

std::optional<std::size_t> parse_count(std::string_view text) {
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
  return value;
}

}  // namespace

RankSlice RankSlice::parse(std::string_view text) {
  std::optional<RankSlice> slice;
  if (text == "all") {
    slice = range(1, kMaxRankingLength);
  } else if (text.starts_with("top")) {
    if (auto k = parse_count(text.substr(3))) slice = top(*k);
  } else if (text.starts_with("last")) {
    if (auto k = parse_count(text.substr(4))) slice = tail(*k);
  } else if (const auto dots = text.find(".."); dots != std::string_view::npos) {
    const auto a = parse_count(text.substr(0, dots));
    const auto b = parse_count(text.substr(dots + 2));
    if (a && b) slice = range(*a, *b);
  } else if (const auto dash = text.find('-'); dash != std::string_view::npos) {
    const auto a = parse_count(text.substr(0, dash));
    const auto b = parse_count(text.substr(dash + 1));
    if (a && b) slice = range(*a, *b);
  }
  if (!slice) throw Error(ErrorCode::InvalidInput, "bad rank slice '" + std::string(text) + "'");
  slice->check();
  return *slice;
}

std::string RankSlice::label() const {
  if (kind == Kind::Tail) return "last" + std::to_string(count);
  if (first == 1) return last == kMaxRankingLength ? "all" : "top" + std::to_string(last);
  return std::to_string(first) + "-" + std::to_string(last);
}

void RankSlice::check() const {
  const bool empty = kind == Kind::Tail ? count == 0 : (first == 0 || last < first);
  if (empty) throw Error(ErrorCode::InvalidInput, "empty rank slice");
}

std::vector<AppId> RankSlice::apply(const std::vector<AppId>& ranking) const {
  if (kind == Kind::Tail) {
    const auto n = std::min(count, ranking.size());
    return {ranking.end() - static_cast<std::ptrdiff_t>(n), ranking.end()};
  }
  if (first > ranking.size()) return {};
  const auto end = std::min(last, ranking.size());
  return {ranking.begin() + static_cast<std::ptrdiff_t>(first - 1), ranking.begin() + static_cast<std::ptrdiff_t>(end)};
}

OverlapStats overlap_stats(const RankedListSeries& series, const RankSlice& slice) {
  slice.check();
  if (series.size() < 2) throw Error(ErrorCode::InsufficientData, "overlap needs at least two observations");

  std::vector<std::vector<AppId>> sliced;
  std::unordered_set<AppId> items;
  for (const auto& obs : series.observations()) {
    sliced.push_back(slice.apply(obs.ranking));
    if (sliced.back().empty()) throw Error(ErrorCode::InvalidInput, "slice " + slice.label() + " selects no entries");
    items.insert(sliced.back().begin(), sliced.back().end());
  }

  auto overlap = [](const std::vector<AppId>& a, const std::vector<AppId>& b) {
    const std::unordered_set<AppId> in_a(a.begin(), a.end());
    return static_cast<std::size_t>(std::count_if(b.begin(), b.end(), [&](const AppId& x) { return in_a.count(x) > 0; }));
  };

  OverlapStats stats;
  stats.pairs = sliced.size() - 1;
  stats.item_count = items.size();
  stats.o_first_last = overlap(sliced.front(), sliced.back());
  stats.o_min = std::numeric_limits<std::size_t>::max();
  std::vector<double> ms;
  double o_sum = 0.0;
  for (std::size_t i = 1; i < sliced.size(); ++i) {
    const auto o = overlap(sliced[i - 1], sliced[i]);
    o_sum += static_cast<double>(o);
    stats.o_min = std::min(stats.o_min, o);
    ms.push_back(inverse_rank_measure(sliced[i - 1], sliced[i]).m);
  }
  const double pairs = static_cast<double>(stats.pairs);
  stats.o_mean = o_sum / pairs;
  double m_sum = 0.0;
  for (double m : ms) m_sum += m;
  stats.m_mean = m_sum / pairs;
  if (ms.size() >= 2) {
    double ss = 0.0;
    for (double m : ms) ss += (m - stats.m_mean) * (m - stats.m_mean);
    stats.m_sd = std::sqrt(ss / (pairs - 1.0));
  }
  return stats;
}

std::vector<std::size_t> rank_occupancy(const RankedListSeries& series) {
  std::vector<std::unordered_set<AppId>> seen;
  for (const auto& obs : series.observations()) {
    if (obs.ranking.size() > seen.size()) seen.resize(obs.ranking.size());
    for (std::size_t i = 0; i < obs.ranking.size(); ++i) seen[i].insert(obs.ranking[i]);
  }
  std::vector<std::size_t> out;
  out.reserve(seen.size());
  for (const auto& s : seen) out.push_back(s.size());
  return out;
}

std::optional<double> RankLifetime::mean() const {
  if (per_app.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto& [app, hours] : per_app) sum += static_cast<double>(hours);
  return sum / static_cast<double>(per_app.size());
}

std::vector<RankLifetime> lifetime_at_rank(const RankedListSeries& series, std::span<const std::size_t> ranks,
                                           LifetimeMode mode) {
  std::unordered_map<AppId, std::size_t> presence;
  if (mode == LifetimeMode::ListLifetime) {
    for (const auto& obs : series.observations()) {
      for (const auto& app : obs.ranking) ++presence[app];
    }
  }
  std::vector<RankLifetime> out;
  for (std::size_t r : ranks) {
    RankLifetime lt{r, {}};
    std::unordered_map<AppId, std::size_t> slot;
    for (const auto& obs : series.observations()) {
      if (r == 0 || r > obs.ranking.size()) continue;
      const auto& app = obs.ranking[r - 1];
      const auto [it, fresh] = slot.try_emplace(app, lt.per_app.size());
      if (fresh) lt.per_app.emplace_back(app, 0);
      ++lt.per_app[it->second].second;
    }
    if (mode == LifetimeMode::ListLifetime) {
      for (auto& [app, hours] : lt.per_app) hours = presence.at(app);
    }
    out.push_back(std::move(lt));
  }
  return out;
}

void write_lifecycle_csv(std::ostream& out, std::span<const LifecycleSummary> summaries) {
  csv::row(out, {"app", "debut", "hrs2peak", "peak", "tothrs", "exit", "rankdyn", "first_seen", "last_seen"});
  for (const auto& s : summaries) {
    csv::row(out, {s.app.str(), std::to_string(s.debut), std::to_string(s.hrs2peak), std::to_string(s.peak),
                   std::to_string(s.tothrs), std::to_string(s.exit), std::to_string(s.rankdyn),
                   std::to_string(epoch_seconds(s.first_seen)), std::to_string(epoch_seconds(s.last_seen))});
  }
}

void write_lifecycle_histograms(std::ostream& out, std::span<const LifecycleSummary> summaries, std::size_t bin_width) {
  if (bin_width == 0) throw Error(ErrorCode::InvalidInput, "bin width must be positive");
  using Field = std::size_t LifecycleSummary::*;
  const std::pair<const char*, Field> metrics[] = {
      {"DEBUT", &LifecycleSummary::debut}, {"EXIT", &LifecycleSummary::exit},
      {"PEAK", &LifecycleSummary::peak},   {"HRS2PEAK", &LifecycleSummary::hrs2peak},
      {"TOTHRS", &LifecycleSummary::tothrs}, {"RANKDYN", &LifecycleSummary::rankdyn},
  };
  csv::row(out, {"metric", "bin_lo", "bin_hi", "count"});
  for (const auto& [name, field] : metrics) {
    std::vector<std::size_t> bins;
    for (const auto& s : summaries) {
      const auto b = s.*field / bin_width;
      if (b >= bins.size()) bins.resize(b + 1, 0);
      ++bins[b];
    }
    for (std::size_t b = 0; b < bins.size(); ++b) {
      csv::row(out, {name, std::to_string(b * bin_width), std::to_string((b + 1) * bin_width), std::to_string(bins[b])});
    }
  }
}

}  // namespace marketpulse
