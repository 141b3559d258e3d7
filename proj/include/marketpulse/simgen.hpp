#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "marketpulse/anomaly.hpp"
#include "marketpulse/codec.hpp"
#include "marketpulse/model.hpp"

namespace marketpulse::simgen {

// ---------------------------------------------------------------------------
// Keyed randomness
//
// Every entity draws from its own generator, seeded from (script seed, key),
// so adding apps or lists leaves the streams of existing ones untouched.

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t derive_seed(std::uint64_t seed, std::string_view key) noexcept;
std::mt19937_64 keyed_rng(std::uint64_t seed, std::string_view key);

/// Inverse-CDF sample of a continuous power law p(x) ~ x^-alpha, x >= x_min.
double sample_power_law(std::mt19937_64& rng, double alpha, double x_min = 1.0);
std::vector<double> sample_power_law(std::uint64_t seed, std::size_t n, double alpha, double x_min = 1.0);

/// Discrete power law P(k) ~ k^-alpha on 1..k_max, sampled by inverse
/// transform over the normalised cumulative table.
class DiscretePowerLaw {
 public:
  DiscretePowerLaw(double alpha, std::int64_t k_max);
  std::int64_t operator()(std::mt19937_64& rng) const;

 private:
  std::vector<double> cdf_;
};

// ---------------------------------------------------------------------------
// Script

struct ClassValues {
  double unpopular = 0.0;
  double popular = 0.0;
  double most_popular = 0.0;

  double of(PopularityClass c) const noexcept;
};

struct TopKListConfig {
  ListType type = ListType::Free;
  std::size_t length = 480;
  /// Per-step replacement probability, interpolated linearly from rank 1
  /// to the last rank; adjacent swaps happen at the same rate.
  double churn_top = 0.01;
  double churn_bottom = 0.2;
};

struct FraudCampaign {
  AppId app;
  Polarity polarity = Polarity::Positive;
  int start_day = 0;  // offset from the observation start
  int duration = 1;
  int daily_volume = 200;
  double baseline_daily = 10.0;  // organic reviews/day for the target app
};

struct ScamDeveloper {
  std::string developer;
  std::size_t n_clones = 10;
  std::int64_t price_cents = 199;
};

struct PriceChangeModel {
  double fraction = 0.05;  // share of paid apps that change price
  double mean_changes = 1.5;
  std::vector<double> magnitudes{0.5, 0.75, 1.5, 2.0};
  /// Price drops land on update days (with a version change).
  bool drops_with_update = false;
};

struct ScriptedChange {
  int day = 1;  // offset from the observation start; must be >= 1
  AttributeKind kind = AttributeKind::VersionUp;
};

/// An app with a fixed, fully scripted history: no organic changes.
struct ScriptedApp {
  AppId app;
  std::string developer = "scripted";
  std::int64_t price_cents = 0;
  DownloadBucket downloads{1000, 5000};
  std::vector<ScriptedChange> changes;
};

struct MarketScript {
  std::string name = "synthetic";
  std::uint64_t seed = 1;
  std::size_t n_developers = 100;
  double dev_app_alpha = 2.5;
  std::int64_t dev_app_max = 1000;

  Date start = date_from_days(15371);  // 2012-02-01
  int days = 30;
  int snapshot_cadence_hours = 24;

  int topk_cadence_hours = 24;
  std::vector<TopKListConfig> topk_lists;

  std::vector<FraudCampaign> fraud_campaigns;
  std::vector<ScamDeveloper> scam_developers;

  double decoupling_rate = 0.05;
  double permission_events_per_app = 0.3;  // Poisson mean per active app

  ClassValues popularity_mix{0.752, 0.241, 0.007};
  double stale_fraction = 0.76;
  double paid_fraction = 0.25;
  ClassValues update_gap_days{60.0, 30.0, 14.0};
  PriceChangeModel price_change;
  ClassValues review_rate{0.05, 0.5, 3.0};  // organic reviews/day
  double ratings_per_download = 1.0 / 300.0;

  std::vector<ScriptedApp> scripted_apps;

  /// Throws Error(ConfigError) naming the offending field.
  void validate() const;
  Date end() const { return start + std::chrono::days{days - 1}; }

  static MarketScript from_json(const nlohmann::json& j);
  static MarketScript load(const std::filesystem::path& path);
  nlohmann::ordered_json to_json() const;
};

// ---------------------------------------------------------------------------
// Output

struct SpikeLabel {
  Date day{};
  Polarity polarity = Polarity::Positive;
  friend auto operator<=>(const SpikeLabel&, const SpikeLabel&) = default;
};

struct PermissionEventLabel {
  Date day{};
  bool coupled = true;  // same-day version change
};

struct AppTruth {
  AppId app;
  std::string developer;
  PopularityClass popularity = PopularityClass::Unpopular;
  bool stale = false;
  bool paid = false;
  std::vector<Date> update_days;           // inside the observation
  std::vector<Date> price_change_days;
  std::vector<PermissionEventLabel> permission_events;
  std::vector<std::pair<Date, AttributeKind>> scripted_changes;
  std::vector<SpikeLabel> spike_days;
  std::optional<std::string> scam_cluster;  // developer of the clone cluster
};

struct GroundTruth {
  Date reference{};  // last observation day; staleness reference
  std::vector<std::int64_t> developer_app_counts;
  std::vector<AppTruth> apps;  // sorted by app id

  const AppTruth* find(const AppId& app) const;
  std::array<double, 3> class_shares() const;
  double stale_share() const;
  std::size_t permission_event_count() const;
  std::optional<double> decoupling_rate() const;
  nlohmann::ordered_json to_json() const;
};

struct Dataset {
  std::vector<AppSnapshot> snapshots;  // sorted by (fetch_time, app)
  std::vector<ReviewRecord> reviews;   // sorted by (date, app, review_id)
  std::vector<TopKObservation> topk;   // sorted by (fetch_time, list type)
  DatasetManifest manifest;
  GroundTruth truth;

  /// Latest snapshot per app, sorted by app id.
  std::vector<AppSnapshot> latest() const;
};

/// Deterministic for a fixed script. Throws Error(ConfigError) for an
/// invalid script.
Dataset generate(const MarketScript& script);

/// Writes snapshots.jsonl, reviews.jsonl, topk.jsonl, manifest.json and
/// ground_truth.json. Throws Error(IoError).
void write_dataset(const Dataset& data, const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Mock market

struct MockMarketOptions {
  std::size_t n_seeds = 5;
  std::size_t extra_links = 2;  // random similar links per app on top of the tree
  bool connected = true;        // every app reachable from the first seed
  std::uint64_t seed = 7;
};

struct MockMarket {
  std::map<AppId, std::string> pages;
  std::map<AppId, std::vector<AppId>> similar;
  std::vector<AppId> seeds;
};

/// One page per snapshot (one snapshot per app expected). Throws
/// Error(InvalidInput) for an empty set.
MockMarket render_mock_market(std::span<const AppSnapshot> snapshots, const MockMarketOptions& options = {});

/// pages/<app>.html plus seeds.txt (one app per line).
void write_mock_market(const MockMarket& market, const std::filesystem::path& dir);

}  // namespace marketpulse::simgen
