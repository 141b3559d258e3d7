#include "marketpulse/anomaly.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "marketpulse/error.hpp"
#include "marketpulse/metrics.hpp"
#include "marketpulse/store.hpp"

namespace marketpulse {

std::string_view to_string(Polarity p) noexcept { return p == Polarity::Positive ? "positive" : "negative"; }

std::string_view to_string(PermissionFlagKind k) noexcept {
  switch (k) {
    case PermissionFlagKind::DangerousAdded: return "DangerousAdded";
    case PermissionFlagKind::ChurnWithinWindow: return "ChurnWithinWindow";
    case PermissionFlagKind::ChangeWithoutVersionChange: return "ChangeWithoutVersionChange";
  }
  return "?";
}

std::vector<SpikeEvent> detect_review_spikes(const ReviewTimeline& timeline, const SpikeParams& params) {
  if (params.window_days < 1 || params.mad_k < 0 || params.min_abs < 0 || params.min_history_days < 0) {
    throw Error(ErrorCode::InvalidInput, "spike parameters must be non-negative with a window of at least one day");
  }
  std::vector<SpikeEvent> out;
  if (timeline.days.empty()) return out;

  const Date first = timeline.days.front().day;
  const auto span = static_cast<std::size_t>(days_between(first, timeline.days.back().day)) + 1;
  std::vector<int> dense[2] = {std::vector<int>(span, 0), std::vector<int>(span, 0)};
  for (const auto& d : timeline.days) {
    const auto i = static_cast<std::size_t>(days_between(first, d.day));
    dense[0][i] = d.positive;
    dense[1][i] = d.negative;
  }

  const auto window = static_cast<std::size_t>(params.window_days);
  std::vector<double> trailing, deviations;
  for (auto i = static_cast<std::size_t>(params.min_history_days); i < span; ++i) {
    for (int p = 0; p < 2; ++p) {
      const int count = dense[p][i];
      if (count <= 0) continue;
      trailing.assign(dense[p].begin() + static_cast<std::ptrdiff_t>(i - std::min(i, window)),
                      dense[p].begin() + static_cast<std::ptrdiff_t>(i));
      const double base = median(trailing).value_or(0.0);
      deviations.clear();
      for (double x : trailing) deviations.push_back(std::abs(x - base));
      const double mad = median(deviations).value_or(0.0);
      const double threshold = std::max(params.min_abs, base + params.mad_k * mad);
      if (count <= threshold) continue;
      out.push_back({timeline.app, first + std::chrono::days{static_cast<int>(i)},
                     p == 0 ? Polarity::Positive : Polarity::Negative, count, base, threshold,
                     count / std::max(base, 1.0)});
    }
  }
  return out;
}

DangerousPermissionPolicy DangerousPermissionPolicy::parse(std::istream& in) {
  DangerousPermissionPolicy policy;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    policy.dangerous.insert(line.substr(b, e - b + 1));
  }
  return policy;
}

DangerousPermissionPolicy DangerousPermissionPolicy::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read policy file " + path.string());
  return parse(in);
}

std::vector<PermissionFlag> permission_flags(const AppTimeline& timeline, const DangerousPermissionPolicy& policy,
                                             const PermissionFlagOptions& options) {
  if (options.classify_dangerous && policy.empty()) {
    throw Error(ErrorCode::ConfigError, "dangerous-permission policy is empty");
  }
  std::set<Date> version_days;
  for (const auto& e : timeline.events) {
    if (e.kind == AttributeKind::VersionUp) version_days.insert(e.day);
  }

  std::map<std::string, Date> last_added, last_removed;
  auto recent = [&](const std::map<std::string, Date>& seen, const std::string& name, Date day) {
    const auto it = seen.find(name);
    return it != seen.end() && days_between(it->second, day) <= options.churn_window_days;
  };

  std::vector<PermissionFlag> out;
  for (const auto& e : timeline.events) {
    if (!is_permission_kind(e.kind)) continue;
    const auto& change = std::get<PermissionChange>(e.detail);

    if (options.classify_dangerous) {
      PermissionFlag flag{timeline.app, e.day, PermissionFlagKind::DangerousAdded, {}};
      for (const auto& p : change.added) {
        if (policy.is_dangerous(p)) flag.detail.insert(p);
      }
      if (!flag.detail.empty()) out.push_back(std::move(flag));
    }

    PermissionFlag churn{timeline.app, e.day, PermissionFlagKind::ChurnWithinWindow, {}};
    for (const auto& p : change.added) {
      if (recent(last_removed, p, e.day)) churn.detail.insert(p);
    }
    for (const auto& p : change.removed) {
      if (recent(last_added, p, e.day)) churn.detail.insert(p);
    }
    if (!churn.detail.empty()) out.push_back(std::move(churn));
    for (const auto& p : change.added) last_added[p] = e.day;
    for (const auto& p : change.removed) last_removed[p] = e.day;

    if (!version_days.count(e.day)) {
      PermissionFlag flag{timeline.app, e.day, PermissionFlagKind::ChangeWithoutVersionChange, change.added};
      flag.detail.insert(change.removed.begin(), change.removed.end());
      out.push_back(std::move(flag));
    }
  }
  return out;
}

std::optional<double> permission_version_decoupling_rate(std::span<const AppTimeline> timelines) {
  std::size_t events = 0, decoupled = 0;
  for (const auto& t : timelines) {
    std::set<Date> version_days;
    for (const auto& e : t.events) {
      if (e.kind == AttributeKind::VersionUp) version_days.insert(e.day);
    }
    for (const auto& e : t.events) {
      if (!is_permission_kind(e.kind)) continue;
      ++events;
      if (!version_days.count(e.day)) ++decoupled;
    }
  }
  if (events == 0) return std::nullopt;
  return static_cast<double>(decoupled) / static_cast<double>(events);
}

namespace {

std::vector<std::uint32_t> trigrams(std::string_view text) {
  std::vector<std::uint32_t> out;
  if (text.size() < 3) return out;
  auto lower = [](char c) { return static_cast<std::uint32_t>(static_cast<unsigned char>(std::tolower(static_cast<unsigned char>(c)))); };
  for (std::size_t i = 0; i + 3 <= text.size(); ++i) {
    out.push_back(lower(text[i]) << 16 | lower(text[i + 1]) << 8 | lower(text[i + 2]));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double jaccard(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
  std::size_t common = 0;
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end() && ib != b.end();) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++common;
      ++ia;
      ++ib;
    }
  }
  const auto uni = a.size() + b.size() - common;
  return uni == 0 ? 1.0 : static_cast<double>(common) / static_cast<double>(uni);
}

bool iequal(std::string_view a, std::string_view b) {
  return std::equal(a.begin(), a.end(), b.begin(), b.end(), [](char x, char y) {
    return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
  });
}

}  // namespace

double title_similarity(std::string_view a, std::string_view b) {
  if (a.size() < 3 || b.size() < 3) return iequal(a, b) ? 1.0 : 0.0;
  return jaccard(trigrams(a), trigrams(b));
}

std::vector<ScamCluster> scam_pattern_scan(std::span<const AppSnapshot> latest, const ScamParams& params) {
  std::map<std::string, std::vector<const AppSnapshot*>> by_developer;
  for (const auto& s : latest) {
    if (s.free || s.price_cents < params.price_lo_cents || s.price_cents > params.price_hi_cents) continue;
    by_developer[s.developer].push_back(&s);
  }

  std::vector<ScamCluster> out;
  for (auto& [developer, apps] : by_developer) {
    if (apps.size() < params.min_cluster) continue;
    std::sort(apps.begin(), apps.end(), [](auto* a, auto* b) { return a->app < b->app; });
    std::vector<std::vector<std::uint32_t>> grams;
    for (const auto* s : apps) grams.push_back(trigrams(s->title));

    std::vector<std::size_t> parent(apps.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (std::size_t i = 0; i < apps.size(); ++i) {
      for (std::size_t j = i + 1; j < apps.size(); ++j) {
        if (find(i) == find(j)) continue;
        const bool short_title = apps[i]->title.size() < 3 || apps[j]->title.size() < 3;
        const double sim = short_title ? title_similarity(apps[i]->title, apps[j]->title) : jaccard(grams[i], grams[j]);
        if (sim >= params.title_similarity) parent[find(j)] = find(i);
      }
    }
    std::map<std::size_t, std::vector<AppId>> components;
    for (std::size_t i = 0; i < apps.size(); ++i) components[find(i)].push_back(apps[i]->app);
    for (auto& [root, members] : components) {
      if (members.size() >= params.min_cluster) out.push_back({developer, std::move(members)});
    }
  }
  return out;
}

std::vector<ExternalFlag> parse_flags_csv(std::istream& in) {
  std::vector<ExternalFlag> out;
  std::string line;
  std::size_t line_no = 0;
  bool seen_content = false;
  auto trim = [](std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\"");
    if (b == std::string_view::npos) return std::string_view{};
    return s.substr(b, s.find_last_not_of(" \t\r\"") - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const bool first = !seen_content;
    seen_content = true;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected two fields");
    }
    const auto app = trim(std::string_view(line).substr(0, comma));
    const auto count = trim(std::string_view(line).substr(comma + 1));
    if (first && app == "app" && count == "flag_count") continue;
    if (!AppId::is_valid(app)) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": invalid app id");
    }
    int value = 0;
    const auto [ptr, ec] = std::from_chars(count.data(), count.data() + count.size(), value);
    if (ec != std::errc{} || ptr != count.data() + count.size() || value < 0 || count.empty()) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": flag_count must be a non-negative integer");
    }
    out.push_back({AppId(std::string(app)), value});
  }
  return out;
}

std::vector<FlaggedApp> join_external_flags(std::span<const ExternalFlag> flags,
                                            const std::function<std::size_t(const AppId&)>& review_count,
                                            const FlagSelection& rule) {
  // Repeated rows for one app keep the highest count.
  std::map<AppId, int> merged;
  for (const auto& f : flags) {
    auto [it, fresh] = merged.try_emplace(f.app, f.flag_count);
    if (!fresh) it->second = std::max(it->second, f.flag_count);
  }
  std::vector<FlaggedApp> out;
  for (const auto& [app, count] : merged) {
    const auto reviews = review_count(app);
    out.push_back({app, count, reviews, count >= rule.min_flags && reviews >= rule.min_reviews});
  }
  return out;
}

std::vector<FlaggedApp> join_external_flags(std::span<const ExternalFlag> flags, const SnapStore& store,
                                            const FlagSelection& rule) {
  return join_external_flags(flags, [&](const AppId& app) { return store.review_count(app); }, rule);
}

}  // namespace marketpulse
