#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "marketpulse/timeline.hpp"

namespace marketpulse {

class SnapStore;

// ---------------------------------------------------------------------------
// Review spikes

enum class Polarity { Positive, Negative };
std::string_view to_string(Polarity p) noexcept;

struct SpikeParams {
  int window_days = 30;
  double mad_k = 5.0;
  double min_abs = 20.0;
  int min_history_days = 7;  // earlier days have too little history to judge
};

struct SpikeEvent {
  AppId app;
  Date day{};
  Polarity polarity = Polarity::Positive;
  int count = 0;
  double baseline = 0.0;   // median of the trailing window
  double threshold = 0.0;  // max(min_abs, baseline + mad_k * MAD)
  double score = 0.0;      // count / max(baseline, 1)
};

/// Treats the span from the first to the last review day as a dense daily
/// series (missing days are zero) and checks each day of each polarity
/// against the `window_days` days before it. A day is flagged when its
/// count is positive and exceeds the threshold; the first
/// `min_history_days` days of the series are never flagged. Output is ordered by day,
/// positive before negative.
std::vector<SpikeEvent> detect_review_spikes(const ReviewTimeline& timeline, const SpikeParams& params = {});

// ---------------------------------------------------------------------------
// Permission timelines

struct DangerousPermissionPolicy {
  std::set<std::string> dangerous;

  /// One permission name per line; blank lines and '#' comments ignored.
  static DangerousPermissionPolicy parse(std::istream& in);
  /// Throws Error(IoError) if the file cannot be read.
  static DangerousPermissionPolicy load(const std::filesystem::path& path);

  bool empty() const noexcept { return dangerous.empty(); }
  bool is_dangerous(const std::string& permission) const { return dangerous.count(permission) > 0; }
};

enum class PermissionFlagKind { DangerousAdded, ChurnWithinWindow, ChangeWithoutVersionChange };
std::string_view to_string(PermissionFlagKind k) noexcept;

struct PermissionFlag {
  AppId app;
  Date day{};
  PermissionFlagKind kind = PermissionFlagKind::DangerousAdded;
  std::set<std::string> detail;  // permission names involved, never empty

  friend bool operator==(const PermissionFlag&, const PermissionFlag&) = default;
};

struct PermissionFlagOptions {
  int churn_window_days = 7;
  bool classify_dangerous = true;
};

/// Flags, per permission event day:
///  - DangerousAdded: a policy-listed permission was granted;
///  - ChurnWithinWindow: a permission came back (or went away again) within
///    churn_window_days of the opposite change;
///  - ChangeWithoutVersionChange: the permission set changed on a day with
///    no version change.
/// Throws Error(ConfigError) if dangerous classification is requested with
/// an empty policy.
std::vector<PermissionFlag> permission_flags(const AppTimeline& timeline, const DangerousPermissionPolicy& policy,
                                             const PermissionFlagOptions& options = {});

/// Share of permission-change events whose <day, app> has no version
/// change; undefined when there are no permission events.
std::optional<double> permission_version_decoupling_rate(std::span<const AppTimeline> timelines);

// ---------------------------------------------------------------------------
// Scam clusters

struct ScamParams {
  std::size_t min_cluster = 5;
  std::int64_t price_lo_cents = 100;
  std::int64_t price_hi_cents = 299;
  double title_similarity = 0.8;
};

struct ScamCluster {
  std::string developer;
  std::vector<AppId> apps;  // sorted
};

/// Jaccard similarity of lowercase character trigram sets. Titles shorter
/// than three characters compare by equality.
double title_similarity(std::string_view a, std::string_view b);

/// Groups each developer's paid apps priced inside the band into connected
/// components of the "similar title" graph and keeps components with at
/// least min_cluster apps. Expects the latest snapshot per app.
std::vector<ScamCluster> scam_pattern_scan(std::span<const AppSnapshot> latest, const ScamParams& params = {});

// ---------------------------------------------------------------------------
// External malware flags

struct ExternalFlag {
  AppId app;
  int flag_count = 0;
};

/// Reads `app,flag_count` rows (the header line is optional). Throws
/// Error(ParseError) naming the offending line number.
std::vector<ExternalFlag> parse_flags_csv(std::istream& in);

struct FlagSelection {
  int min_flags = 3;
  std::size_t min_reviews = 10;
};

struct FlaggedApp {
  AppId app;
  int flag_count = 0;
  std::size_t review_count = 0;
  bool selected = false;
};

std::vector<FlaggedApp> join_external_flags(std::span<const ExternalFlag> flags,
                                            const std::function<std::size_t(const AppId&)>& review_count,
                                            const FlagSelection& rule = {});
std::vector<FlaggedApp> join_external_flags(std::span<const ExternalFlag> flags, const SnapStore& store,
                                            const FlagSelection& rule = {});

}  // namespace marketpulse
