#include "marketpulse/simgen.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <tuple>
#include <cmath>
#include <fstream>
#include <numeric>

#include "marketpulse/error.hpp"
#include "marketpulse/harvester.hpp"
#include "marketpulse/store.hpp"

namespace marketpulse::simgen {

using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Randomness

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view key) noexcept {
  return splitmix64(splitmix64(seed) ^ fnv1a64(key));
}

std::mt19937_64 keyed_rng(std::uint64_t seed, std::string_view key) { return std::mt19937_64(derive_seed(seed, key)); }

namespace {

double uniform01(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

template <class T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& items) {
  return items[std::uniform_int_distribution<std::size_t>(0, items.size() - 1)(rng)];
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

}  // namespace

double sample_power_law(std::mt19937_64& rng, double alpha, double x_min) {
  // 1 - u lies in (0, 1], so the power is finite
  const double u = 1.0 - uniform01(rng);
  return x_min * std::pow(u, -1.0 / (alpha - 1.0));
}

std::vector<double> sample_power_law(std::uint64_t seed, std::size_t n, double alpha, double x_min) {
  if (!(alpha > 1.0) || !(x_min > 0.0)) throw Error(ErrorCode::ConfigError, "power law needs alpha > 1 and x_min > 0");
  auto rng = keyed_rng(seed, "power-law");
  std::vector<double> out(n);
  for (auto& x : out) x = sample_power_law(rng, alpha, x_min);
  return out;
}

DiscretePowerLaw::DiscretePowerLaw(double alpha, std::int64_t k_max) {
  if (!(alpha > 1.0) || k_max < 1) throw Error(ErrorCode::ConfigError, "discrete power law needs alpha > 1 and k_max >= 1");
  cdf_.resize(static_cast<std::size_t>(k_max));
  double total = 0.0;
  for (std::int64_t k = 1; k <= k_max; ++k) {
    total += std::pow(static_cast<double>(k), -alpha);
    cdf_[static_cast<std::size_t>(k - 1)] = total;
  }
  for (auto& c : cdf_) c /= total;
  cdf_.back() = 1.0;
}

std::int64_t DiscretePowerLaw::operator()(std::mt19937_64& rng) const {
  const double u = uniform01(rng);
  return static_cast<std::int64_t>(std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin()) + 1;
}

// ---------------------------------------------------------------------------
// Script

double ClassValues::of(PopularityClass c) const noexcept {
  switch (c) {
    case PopularityClass::Unpopular: return unpopular;
    case PopularityClass::Popular: return popular;
    case PopularityClass::MostPopular: return most_popular;
  }
  return 0.0;
}

namespace {

[[noreturn]] void config_error(const std::string& message) { throw Error(ErrorCode::ConfigError, message); }

void check_rate(double v, const std::string& field) {
  if (!(v >= 0.0 && v <= 1.0)) config_error(field + " must lie in [0,1]");
}

// Attribute families: a day carries at most one change per family.
int family_of(AttributeKind k) {
  switch (k) {
    case AttributeKind::PriceDown:
    case AttributeKind::PriceUp: return 0;
    case AttributeKind::DownloadsUp:
    case AttributeKind::DownloadsDown: return 1;
    case AttributeKind::ReviewCountUp:
    case AttributeKind::ReviewCountDown: return 2;
    case AttributeKind::VersionUp: return 3;
    case AttributeKind::PermissionsUp:
    case AttributeKind::PermissionsDown:
    case AttributeKind::PermissionsChanged: return 4;
    case AttributeKind::CategoryChange: return 5;
    case AttributeKind::Updated: return 6;
  }
  return 7;
}

std::optional<Polarity> parse_polarity(std::string_view s) {
  if (s == "positive") return Polarity::Positive;
  if (s == "negative") return Polarity::Negative;
  return std::nullopt;
}

}  // namespace

void MarketScript::validate() const {
  if (n_developers == 0 && scripted_apps.empty() && scam_developers.empty()) config_error("the script generates no apps");
  if (!(dev_app_alpha > 1.0)) config_error("dev_app_alpha must be > 1");
  if (dev_app_max < 1) config_error("dev_app_max must be >= 1");
  if (days < 1) config_error("observation.days must be >= 1");
  if (snapshot_cadence_hours < 1) config_error("snapshot_cadence_hours must be >= 1");
  if (topk_cadence_hours < 1) config_error("topk.cadence_hours must be >= 1");
  for (const auto& l : topk_lists) {
    if (l.length == 0 || l.length > kMaxRankingLength) config_error("topk list length must be in 1..480");
    check_rate(l.churn_top, "topk churn_top");
    check_rate(l.churn_bottom, "topk churn_bottom");
  }
  const double mix = popularity_mix.unpopular + popularity_mix.popular + popularity_mix.most_popular;
  check_rate(popularity_mix.unpopular, "popularity_mix.unpopular");
  check_rate(popularity_mix.popular, "popularity_mix.popular");
  check_rate(popularity_mix.most_popular, "popularity_mix.most_popular");
  if (std::abs(mix - 1.0) > 1e-6) config_error("popularity_mix proportions must sum to 1");
  check_rate(stale_fraction, "stale_fraction");
  check_rate(paid_fraction, "paid_fraction");
  check_rate(decoupling_rate, "decoupling_rate");
  check_rate(price_change.fraction, "price_change.fraction");
  if (!(permission_events_per_app >= 0.0)) config_error("permission_events_per_app must be >= 0");
  if (!(price_change.mean_changes >= 0.0)) config_error("price_change.mean_changes must be >= 0");
  for (double m : price_change.magnitudes) {
    if (!(m > 0.0) || m == 1.0) config_error("price_change.magnitudes must be positive and != 1");
  }
  if (price_change.fraction > 0.0 && price_change.magnitudes.empty()) config_error("price_change.magnitudes is empty");
  for (auto c : {PopularityClass::Unpopular, PopularityClass::Popular, PopularityClass::MostPopular}) {
    if (!(update_gap_days.of(c) > 0.0)) config_error("update_gap_days must be > 0");
    if (!(review_rate.of(c) >= 0.0)) config_error("review_rate must be >= 0");
  }
  if (!(ratings_per_download >= 0.0)) config_error("ratings_per_download must be >= 0");

  std::set<AppId> special;
  for (const auto& s : scripted_apps) {
    if (!special.insert(s.app).second) config_error("duplicate scripted app " + s.app.str());
    if (s.price_cents < 0 || !s.downloads.on_ladder()) config_error("scripted app " + s.app.str() + ": bad price or downloads");
    std::set<std::pair<int, int>> per_day;
    for (const auto& c : s.changes) {
      if (c.day < 1 || c.day >= days) config_error("scripted app " + s.app.str() + ": change day outside 1..days-1");
      if (!per_day.insert({c.day, family_of(c.kind)}).second) {
        config_error("scripted app " + s.app.str() + ": two changes to one attribute on day " + std::to_string(c.day));
      }
    }
  }
  for (const auto& d : scam_developers) {
    if (d.developer.empty() || d.n_clones == 0 || d.price_cents <= 0) config_error("scam developer needs a name, clones and a price");
  }
  for (const auto& c : fraud_campaigns) {
    if (c.start_day < 0 || c.duration < 1 || c.start_day + c.duration > days) config_error("fraud campaign for " + c.app.str() + " outside the observation");
    if (c.daily_volume < 1 || !(c.baseline_daily >= 0.0)) config_error("fraud campaign for " + c.app.str() + ": bad volume");
  }
}

namespace {

ClassValues class_values(const json& j, const ClassValues& fallback) {
  ClassValues v = fallback;
  for (const auto& [key, value] : j.items()) {
    if (key == "unpopular") v.unpopular = value.get<double>();
    else if (key == "popular") v.popular = value.get<double>();
    else if (key == "most_popular") v.most_popular = value.get<double>();
    else config_error("unknown class key " + key);
  }
  return v;
}

ordered_json class_json(const ClassValues& v) {
  return {{"unpopular", v.unpopular}, {"popular", v.popular}, {"most_popular", v.most_popular}};
}

AttributeKind kind_from(const json& j) {
  const auto kind = parse_attribute_kind(j.get<std::string>());
  if (!kind) config_error("unknown change kind " + j.get<std::string>());
  return *kind;
}

}  // namespace

MarketScript MarketScript::from_json(const json& j) {
  MarketScript s;
  try {
    if (!j.is_object()) config_error("script must be a JSON object");
    for (const auto& [key, v] : j.items()) {
      if (key == "name") s.name = v.get<std::string>();
      else if (key == "seed") s.seed = v.get<std::uint64_t>();
      else if (key == "n_developers") s.n_developers = v.get<std::size_t>();
      else if (key == "dev_app_alpha") s.dev_app_alpha = v.get<double>();
      else if (key == "dev_app_max") s.dev_app_max = v.get<std::int64_t>();
      else if (key == "observation") {
        for (const auto& [k, x] : v.items()) {
          if (k == "start") s.start = parse_date(x.get<std::string>());
          else if (k == "days") s.days = x.get<int>();
          else config_error("unknown observation key " + k);
        }
      } else if (key == "snapshot_cadence_hours") s.snapshot_cadence_hours = v.get<int>();
      else if (key == "topk") {
        for (const auto& [k, x] : v.items()) {
          if (k == "cadence_hours") s.topk_cadence_hours = x.get<int>();
          else if (k == "lists") {
            for (const auto& l : x) {
              TopKListConfig c;
              const auto type = parse_list_type(l.at("type").get<std::string>());
              if (!type) config_error("unknown list type " + l.at("type").get<std::string>());
              c.type = *type;
              c.length = l.value("length", c.length);
              c.churn_top = l.value("churn_top", c.churn_top);
              c.churn_bottom = l.value("churn_bottom", c.churn_bottom);
              s.topk_lists.push_back(c);
            }
          } else config_error("unknown topk key " + k);
        }
      } else if (key == "fraud_campaigns") {
        for (const auto& c : v) {
          FraudCampaign f;
          f.app = AppId(c.at("app").get<std::string>());
          const auto pol = parse_polarity(c.value("polarity", std::string("positive")));
          if (!pol) config_error("polarity must be positive or negative");
          f.polarity = *pol;
          f.start_day = c.at("start_day").get<int>();
          f.duration = c.value("duration", f.duration);
          f.daily_volume = c.value("daily_volume", f.daily_volume);
          f.baseline_daily = c.value("baseline_daily", f.baseline_daily);
          s.fraud_campaigns.push_back(f);
        }
      } else if (key == "scam_developers") {
        for (const auto& c : v) {
          s.scam_developers.push_back({c.at("developer").get<std::string>(), c.value("n_clones", std::size_t{10}),
                                       c.value("price_cents", std::int64_t{199})});
        }
      } else if (key == "decoupling_rate") s.decoupling_rate = v.get<double>();
      else if (key == "permission_events_per_app") s.permission_events_per_app = v.get<double>();
      else if (key == "popularity_mix") s.popularity_mix = class_values(v, s.popularity_mix);
      else if (key == "stale_fraction") s.stale_fraction = v.get<double>();
      else if (key == "paid_fraction") s.paid_fraction = v.get<double>();
      else if (key == "update_gap_days") s.update_gap_days = class_values(v, s.update_gap_days);
      else if (key == "review_rate") s.review_rate = class_values(v, s.review_rate);
      else if (key == "ratings_per_download") s.ratings_per_download = v.get<double>();
      else if (key == "price_change") {
        for (const auto& [k, x] : v.items()) {
          if (k == "fraction") s.price_change.fraction = x.get<double>();
          else if (k == "mean_changes") s.price_change.mean_changes = x.get<double>();
          else if (k == "magnitudes") s.price_change.magnitudes = x.get<std::vector<double>>();
          else if (k == "drops_with_update") s.price_change.drops_with_update = x.get<bool>();
          else config_error("unknown price_change key " + k);
        }
      } else if (key == "scripted_apps") {
        for (const auto& a : v) {
          ScriptedApp app;
          app.app = AppId(a.at("app").get<std::string>());
          app.developer = a.value("developer", app.developer);
          app.price_cents = a.value("price_cents", app.price_cents);
          if (a.contains("downloads_lo")) {
            const auto b = ladder_bucket(a.at("downloads_lo").get<std::int64_t>());
            if (!b) config_error("downloads_lo not on the ladder");
            app.downloads = *b;
          }
          for (const auto& c : a.value("changes", json::array())) {
            app.changes.push_back({c.at("day").get<int>(), kind_from(c.at("kind"))});
          }
          s.scripted_apps.push_back(std::move(app));
        }
      } else {
        config_error("unknown script key " + key);
      }
    }
  } catch (const json::exception& e) {
    config_error(std::string("bad script value: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    config_error(e.what());
  }
  s.validate();
  return s;
}

MarketScript MarketScript::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read script " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    config_error(path.string() + ": " + e.what());
  }
  return from_json(j);
}

ordered_json MarketScript::to_json() const {
  ordered_json j;
  j["name"] = name;
  j["seed"] = seed;
  j["n_developers"] = n_developers;
  j["dev_app_alpha"] = dev_app_alpha;
  j["dev_app_max"] = dev_app_max;
  j["observation"] = {{"start", format_date(start)}, {"days", days}};
  j["snapshot_cadence_hours"] = snapshot_cadence_hours;
  auto lists = ordered_json::array();
  for (const auto& l : topk_lists) {
    lists.push_back({{"type", to_string(l.type)}, {"length", l.length}, {"churn_top", l.churn_top}, {"churn_bottom", l.churn_bottom}});
  }
  j["topk"] = {{"cadence_hours", topk_cadence_hours}, {"lists", lists}};
  auto campaigns = ordered_json::array();
  for (const auto& c : fraud_campaigns) {
    campaigns.push_back({{"app", c.app.str()}, {"polarity", to_string(c.polarity)}, {"start_day", c.start_day},
                         {"duration", c.duration}, {"daily_volume", c.daily_volume}, {"baseline_daily", c.baseline_daily}});
  }
  j["fraud_campaigns"] = campaigns;
  auto scams = ordered_json::array();
  for (const auto& d : scam_developers) {
    scams.push_back({{"developer", d.developer}, {"n_clones", d.n_clones}, {"price_cents", d.price_cents}});
  }
  j["scam_developers"] = scams;
  j["decoupling_rate"] = decoupling_rate;
  j["permission_events_per_app"] = permission_events_per_app;
  j["popularity_mix"] = class_json(popularity_mix);
  j["stale_fraction"] = stale_fraction;
  j["paid_fraction"] = paid_fraction;
  j["update_gap_days"] = class_json(update_gap_days);
  j["price_change"] = {{"fraction", price_change.fraction},
                       {"mean_changes", price_change.mean_changes},
                       {"magnitudes", price_change.magnitudes},
                       {"drops_with_update", price_change.drops_with_update}};
  j["review_rate"] = class_json(review_rate);
  j["ratings_per_download"] = ratings_per_download;
  auto scripted = ordered_json::array();
  for (const auto& a : scripted_apps) {
    auto changes = ordered_json::array();
    for (const auto& c : a.changes) changes.push_back({{"day", c.day}, {"kind", to_string(c.kind)}});
    scripted.push_back({{"app", a.app.str()}, {"developer", a.developer}, {"price_cents", a.price_cents},
                        {"downloads_lo", a.downloads.lo}, {"changes", changes}});
  }
  j["scripted_apps"] = scripted;
  return j;
}

// ---------------------------------------------------------------------------
// Ground truth

const AppTruth* GroundTruth::find(const AppId& app) const {
  const auto it = std::lower_bound(apps.begin(), apps.end(), app, [](const AppTruth& t, const AppId& id) { return t.app < id; });
  return it != apps.end() && it->app == app ? &*it : nullptr;
}

std::array<double, 3> GroundTruth::class_shares() const {
  std::array<double, 3> shares{};
  for (const auto& a : apps) shares[static_cast<std::size_t>(a.popularity)] += 1.0;
  for (auto& s : shares) s /= apps.empty() ? 1.0 : static_cast<double>(apps.size());
  return shares;
}

double GroundTruth::stale_share() const {
  const auto n = std::count_if(apps.begin(), apps.end(), [](const AppTruth& a) { return a.stale; });
  return apps.empty() ? 0.0 : static_cast<double>(n) / static_cast<double>(apps.size());
}

std::size_t GroundTruth::permission_event_count() const {
  std::size_t n = 0;
  for (const auto& a : apps) n += a.permission_events.size();
  return n;
}

std::optional<double> GroundTruth::decoupling_rate() const {
  std::size_t total = 0, decoupled = 0;
  for (const auto& a : apps) {
    for (const auto& e : a.permission_events) {
      ++total;
      decoupled += e.coupled ? 0 : 1;
    }
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(decoupled) / static_cast<double>(total);
}

ordered_json GroundTruth::to_json() const {
  ordered_json j;
  j["reference"] = format_date(reference);
  j["developer_app_counts"] = developer_app_counts;
  auto list = ordered_json::array();
  for (const auto& a : apps) {
    ordered_json e;
    e["app"] = a.app.str();
    e["developer"] = a.developer;
    e["popularity"] = to_string(a.popularity);
    e["stale"] = a.stale;
    e["paid"] = a.paid;
    auto dates = [](const std::vector<Date>& ds) {
      auto arr = ordered_json::array();
      for (auto d : ds) arr.push_back(format_date(d));
      return arr;
    };
    e["update_days"] = dates(a.update_days);
    e["price_change_days"] = dates(a.price_change_days);
    auto perms = ordered_json::array();
    for (const auto& p : a.permission_events) perms.push_back({{"day", format_date(p.day)}, {"coupled", p.coupled}});
    e["permission_events"] = perms;
    auto scripted = ordered_json::array();
    for (const auto& [d, k] : a.scripted_changes) scripted.push_back({{"day", format_date(d)}, {"kind", to_string(k)}});
    e["scripted_changes"] = scripted;
    auto spikes = ordered_json::array();
    for (const auto& s : a.spike_days) spikes.push_back({{"day", format_date(s.day)}, {"polarity", to_string(s.polarity)}});
    e["spike_days"] = spikes;
    e["scam_cluster"] = a.scam_cluster ? ordered_json(*a.scam_cluster) : ordered_json(nullptr);
    list.push_back(std::move(e));
  }
  j["apps"] = std::move(list);
  return j;
}

std::vector<AppSnapshot> Dataset::latest() const {
  std::map<AppId, const AppSnapshot*> last;
  for (const auto& s : snapshots) {
    auto& slot = last[s.app];
    if (!slot || slot->fetch_time < s.fetch_time) slot = &s;
  }
  std::vector<AppSnapshot> out;
  out.reserve(last.size());
  for (const auto& [id, s] : last) out.push_back(*s);
  return out;
}

// ---------------------------------------------------------------------------
// Generation

namespace {

const std::vector<std::string> kCategories{
    "Arcade & Action", "Books & Reference", "Brain & Puzzle", "Business",  "Cards & Casino", "Casual",
    "Comics",          "Communication",     "Education",      "Entertainment", "Finance",     "Health & Fitness",
    "Lifestyle",       "Media & Video",     "Music & Audio",  "News & Magazines", "Personalization", "Photography",
    "Productivity",    "Shopping",          "Social",         "Sports",         "Tools",          "Travel & Local",
    "Weather"};

const std::vector<std::string> kAdjectives{"Super", "Happy", "Smart", "Tiny",  "Magic", "Rapid", "Lucky", "Pocket",
                                           "Ultra", "Quiet", "Bright", "Crazy", "Daily", "Easy", "Royal", "Wild",
                                           "Simple", "Cosmic", "Golden", "Mini"};
const std::vector<std::string> kNouns{"Flashlight", "Notes",  "Weather", "Puzzle", "Racer",  "Camera", "Diary",
                                      "Radio",      "Runner", "Budget",  "Quiz",   "Keyboard", "Browser", "Tracker",
                                      "Wallpaper",  "Timer",  "Garden",  "Chess",  "Recipes", "Launcher"};
const std::vector<std::string> kSuffixes{"Pro", "Free", "Lite", "HD", "Plus", "Deluxe", "2", "Mobile", "Classic", "Go"};

const std::vector<std::string> kPermissionPool{
    "android.permission.INTERNET",           "android.permission.ACCESS_NETWORK_STATE",
    "android.permission.VIBRATE",            "android.permission.WAKE_LOCK",
    "android.permission.ACCESS_WIFI_STATE",  "android.permission.RECEIVE_BOOT_COMPLETED",
    "android.permission.FLASHLIGHT",         "android.permission.SET_WALLPAPER",
    "android.permission.GET_ACCOUNTS",       "android.permission.CAMERA",
    "android.permission.RECORD_AUDIO",       "android.permission.READ_CONTACTS",
    "android.permission.WRITE_CONTACTS",     "android.permission.ACCESS_FINE_LOCATION",
    "android.permission.ACCESS_COARSE_LOCATION", "android.permission.READ_PHONE_STATE",
    "android.permission.CALL_PHONE",         "android.permission.SEND_SMS",
    "android.permission.RECEIVE_SMS",        "android.permission.READ_SMS",
    "android.permission.WRITE_EXTERNAL_STORAGE", "android.permission.READ_CALENDAR",
    "android.permission.WRITE_CALENDAR",     "android.permission.READ_CALL_LOG",
    "android.permission.BLUETOOTH",          "android.permission.NFC",
    "com.android.vending.BILLING",           "com.android.launcher.permission.INSTALL_SHORTCUT"};

const std::vector<std::int64_t> kPrices{99, 99, 149, 199, 199, 199, 299, 299, 399, 499, 999, 1999};

// Ladder lower bounds per class, cheapest rung most likely.
const std::vector<std::int64_t> kUnpopularRungs{1, 1, 5, 5, 10, 10, 50, 100, 500};
const std::vector<std::int64_t> kPopularRungs{1000, 1000, 5000, 5000, 10000, 50000};
const std::vector<std::int64_t> kMostPopularRungs{100000, 100000, 500000, 1000000, 5000000};

PopularityClass class_of_bucket(const DownloadBucket& b) {
  if (b.lo < 1000) return PopularityClass::Unpopular;
  if (b.lo < 100000) return PopularityClass::Popular;
  return PopularityClass::MostPopular;
}

// The next/previous ladder rung, if any.
std::optional<DownloadBucket> rung_step(const DownloadBucket& b, int step) {
  const auto& ladder = download_ladder();
  const auto it = std::find(ladder.begin(), ladder.end(), b);
  if (it == ladder.end()) return std::nullopt;
  const auto idx = (it - ladder.begin()) + step;
  if (idx < 0 || idx >= static_cast<std::ptrdiff_t>(ladder.size())) return std::nullopt;
  return ladder[static_cast<std::size_t>(idx)];
}

std::string version_string(int v) { return std::to_string(v / 10 + 1) + "." + std::to_string(v % 10); }

// One pending change to an app's state, taking effect on `day` (offset).
struct Mutation {
  int day = 0;
  AttributeKind kind = AttributeKind::Updated;
  std::int64_t value = 0;
  std::string text;
  std::string text2;
};

Mutation mut(int day, AttributeKind kind, std::int64_t value = 0, std::string text = {}, std::string text2 = {}) {
  return Mutation{day, kind, value, std::move(text), std::move(text2)};
}

struct AppPlan {
  AppSnapshot base;  // state before the observation starts (fetch_time unset)
  int version = 0;
  std::int64_t offset_seconds = 0;
  std::vector<Mutation> mutations;  // applied in order within a day
  double review_rate = 0.0;
  bool scripted = false;
  AppTruth truth;
};

std::int64_t draw_rung(std::mt19937_64& rng, PopularityClass c) {
  switch (c) {
    case PopularityClass::Unpopular: return pick(rng, kUnpopularRungs);
    case PopularityClass::Popular: return pick(rng, kPopularRungs);
    case PopularityClass::MostPopular: return pick(rng, kMostPopularRungs);
  }
  return 1;
}

std::set<std::string> draw_permissions(std::mt19937_64& rng) {
  std::set<std::string> out{"android.permission.INTERNET"};
  const int n = uniform_int(rng, 1, 5);
  while (static_cast<int>(out.size()) < n + 1) out.insert(pick(rng, kPermissionPool));
  return out;
}

AppSnapshot base_snapshot(std::mt19937_64& rng, const AppId& id, const std::string& developer, const std::string& title,
                          DownloadBucket downloads, std::int64_t price, double ratings_per_download) {
  AppSnapshot s;
  s.app = id;
  s.title = title;
  s.developer = developer;
  s.category = pick(rng, kCategories);
  s.price_cents = price;
  s.free = price == 0;
  s.downloads = downloads;
  s.rating_avg = static_cast<double>(uniform_int(rng, 25, 49)) / 10.0;
  const double noise = 0.9 + 0.2 * uniform01(rng);
  s.rating_count = std::llround(downloads.midpoint() * ratings_per_download * noise);
  s.size_bytes = static_cast<std::int64_t>(uniform_int(rng, 200, 50'000)) * 1024;
  s.permissions = draw_permissions(rng);
  return s;
}

void add_update(AppPlan& p, int day) {
  p.mutations.push_back(mut(day, AttributeKind::VersionUp));
  p.mutations.push_back(mut(day, AttributeKind::Updated));
}

// Distinct day offsets in [1, days-1] not in `taken`; fewer if the window is full.
std::vector<int> free_days(std::mt19937_64& rng, int days, std::size_t n, const std::set<int>& taken) {
  std::vector<int> pool;
  for (int d = 1; d < days; ++d) {
    if (!taken.count(d)) pool.push_back(d);
  }
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(std::min(n, pool.size()));
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::set<int> update_day_set(const AppPlan& p) {
  std::set<int> out;
  for (const auto& m : p.mutations) {
    if (m.kind == AttributeKind::Updated) out.insert(m.day);
  }
  return out;
}

// Organic events for one app of the developer population.
void plan_organic(AppPlan& p, std::mt19937_64& rng, const MarketScript& script) {
  const int days = script.days;
  const auto cls = p.truth.popularity;

  if (!p.truth.stale && days > 1) {
    std::exponential_distribution<double> gap(1.0 / script.update_gap_days.of(cls));
    double t = gap(rng);
    while (t < days - 1) {
      const int day = 1 + static_cast<int>(t);
      if (!update_day_set(p).count(day)) add_update(p, day);
      t += std::max(1.0, gap(rng));
    }
  }

  if (p.truth.paid && days > 1 && uniform01(rng) < script.price_change.fraction) {
    std::poisson_distribution<int> count(script.price_change.mean_changes);
    const auto n = static_cast<std::size_t>(std::max(1, count(rng)));
    std::int64_t price = p.base.price_cents;
    for (int day : free_days(rng, days, n, {})) {
      const double m = pick(rng, script.price_change.magnitudes);
      const auto next = std::max<std::int64_t>(1, std::llround(static_cast<double>(price) * m));
      if (next == price) continue;
      const bool drop = next < price;
      p.mutations.push_back(mut(day, drop ? AttributeKind::PriceDown : AttributeKind::PriceUp, next));
      if (drop && script.price_change.drops_with_update && !p.truth.stale && !update_day_set(p).count(day)) add_update(p, day);
      price = next;
      p.truth.price_change_days.push_back(script.start + std::chrono::days{day});
    }
  }

  // Permission events: coupled ones bring their own update, decoupled ones
  // go to days without a version change.
  if (!p.truth.stale && days > 1 && script.permission_events_per_app > 0.0) {
    std::poisson_distribution<int> count(script.permission_events_per_app);
    const int n = count(rng);
    std::size_t n_coupled = 0, n_decoupled = 0;
    for (int i = 0; i < n; ++i) (uniform01(rng) < script.decoupling_rate ? n_decoupled : n_coupled) += 1;
    const auto updates = update_day_set(p);
    // coupled events prefer existing update days, then new ones
    std::vector<int> update_days(updates.begin(), updates.end());
    std::shuffle(update_days.begin(), update_days.end(), rng);
    std::vector<int> coupled(update_days.begin(), update_days.begin() + static_cast<std::ptrdiff_t>(std::min(n_coupled, update_days.size())));
    if (coupled.size() < n_coupled) {
      for (int d : free_days(rng, days, n_coupled - coupled.size(), updates)) coupled.push_back(d);
    }
    std::set<int> taken = updates;
    taken.insert(coupled.begin(), coupled.end());
    const auto decoupled = free_days(rng, days, n_decoupled, taken);

    std::vector<std::pair<int, bool>> events;
    for (int d : coupled) events.emplace_back(d, true);
    for (int d : decoupled) events.emplace_back(d, false);
    std::sort(events.begin(), events.end());

    auto held = p.base.permissions;
    for (const auto& [day, is_coupled] : events) {
      if (is_coupled && !updates.count(day)) add_update(p, day);
      const bool remove = held.size() > 1 && uniform01(rng) < 0.5;
      if (remove) {
        std::vector<std::string> candidates(held.begin(), held.end());
        const auto victim = pick(rng, candidates);
        held.erase(victim);
        p.mutations.push_back(mut(day, AttributeKind::PermissionsDown, 0, victim));
      } else {
        std::string added;
        do {
          added = pick(rng, kPermissionPool);
        } while (held.count(added) && held.size() < kPermissionPool.size());
        if (held.count(added)) continue;
        held.insert(added);
        p.mutations.push_back(mut(day, AttributeKind::PermissionsUp, 0, added));
      }
      p.truth.permission_events.push_back({script.start + std::chrono::days{day}, is_coupled});
    }
  }

  // Rare drift: a category move and a downloads step inside the class.
  if (days > 1 && uniform01(rng) < 0.019) {
    std::string next = pick(rng, kCategories);
    if (next != p.base.category) p.mutations.push_back(mut(uniform_int(rng, 1, days - 1), AttributeKind::CategoryChange, 0, next));
  }
  if (days > 1 && uniform01(rng) < 0.05) {
    const auto up = rung_step(p.base.downloads, 1);
    if (up && class_of_bucket(*up) == cls) p.mutations.push_back(mut(uniform_int(rng, 1, days - 1), AttributeKind::DownloadsUp, up->lo));
  }

  std::stable_sort(p.mutations.begin(), p.mutations.end(), [](const Mutation& a, const Mutation& b) { return a.day < b.day; });
  for (const auto d : update_day_set(p)) p.truth.update_days.push_back(script.start + std::chrono::days{d});
}

void plan_scripted(AppPlan& p, const ScriptedApp& a, const MarketScript& script) {
  auto held = p.base.permissions;
  std::vector<std::string> removed;
  std::int64_t price = p.base.price_cents;
  std::string category = p.base.category;
  DownloadBucket downloads = p.base.downloads;
  std::int64_t ratings = p.base.rating_count;
  int fresh = 0;
  auto fail = [&](const std::string& why) { config_error("scripted app " + a.app.str() + ": " + why); };
  auto new_permission = [&] {
    for (;;) {
      std::string name = "android.permission.SCRIPTED_" + std::to_string(fresh++);
      if (!held.count(name)) return name;
    }
  };

  auto changes = a.changes;
  std::stable_sort(changes.begin(), changes.end(), [](const ScriptedChange& x, const ScriptedChange& y) { return x.day < y.day; });
  for (const auto& c : changes) {
    Mutation m = mut(c.day, c.kind);
    switch (c.kind) {
      case AttributeKind::PriceDown:
        if (price <= 1) fail("PriceDown needs a price above one cent");
        price = std::max<std::int64_t>(1, price * 3 / 4);
        m.value = price;
        break;
      case AttributeKind::PriceUp:
        price = price == 0 ? 99 : price + std::max<std::int64_t>(1, price / 2);
        m.value = price;
        break;
      case AttributeKind::DownloadsUp:
      case AttributeKind::DownloadsDown: {
        const auto next = rung_step(downloads, c.kind == AttributeKind::DownloadsUp ? 1 : -1);
        if (!next) fail("no ladder rung left for " + std::string(to_string(c.kind)));
        downloads = *next;
        m.value = downloads.lo;
        break;
      }
      case AttributeKind::ReviewCountUp: ratings += 7; m.value = ratings; break;
      case AttributeKind::ReviewCountDown:
        if (ratings == 0) fail("ReviewCountDown below zero");
        ratings -= 1;
        m.value = ratings;
        break;
      case AttributeKind::VersionUp:
      case AttributeKind::Updated: break;
      case AttributeKind::PermissionsUp:
        // re-granting the most recently removed permission models churn
        if (!removed.empty() && !held.count(removed.back())) {
          m.text = removed.back();
          removed.pop_back();
        } else {
          m.text = new_permission();
        }
        held.insert(m.text);
        break;
      case AttributeKind::PermissionsDown:
        if (held.empty()) fail("PermissionsDown with no permissions left");
        m.text = *held.rbegin();
        held.erase(m.text);
        removed.push_back(m.text);
        break;
      case AttributeKind::PermissionsChanged:
        if (held.empty()) fail("PermissionsChanged with no permissions left");
        m.text = *held.rbegin();
        m.text2 = new_permission();
        held.erase(m.text);
        held.insert(m.text2);
        break;
      case AttributeKind::CategoryChange: {
        const auto it = std::find(kCategories.begin(), kCategories.end(), category);
        category = kCategories[static_cast<std::size_t>((it - kCategories.begin() + 1)) % kCategories.size()];
        m.text = category;
        break;
      }
    }
    p.mutations.push_back(m);
    const Date day = script.start + std::chrono::days{c.day};
    p.truth.scripted_changes.emplace_back(day, c.kind);
    if (c.kind == AttributeKind::Updated) p.truth.update_days.push_back(day);
    if (c.kind == AttributeKind::PriceDown || c.kind == AttributeKind::PriceUp) p.truth.price_change_days.push_back(day);
    if (is_permission_kind(c.kind)) {
      const bool coupled = std::any_of(changes.begin(), changes.end(), [&](const ScriptedChange& o) {
        return o.day == c.day && o.kind == AttributeKind::VersionUp;
      });
      p.truth.permission_events.push_back({day, coupled});
    }
  }
}

void apply(AppSnapshot& s, int& version, const Mutation& m, Date day) {
  switch (m.kind) {
    case AttributeKind::PriceDown:
    case AttributeKind::PriceUp:
      s.price_cents = m.value;
      s.free = m.value == 0;
      break;
    case AttributeKind::DownloadsUp:
    case AttributeKind::DownloadsDown: s.downloads = *ladder_bucket(m.value); break;
    case AttributeKind::ReviewCountUp:
    case AttributeKind::ReviewCountDown: s.rating_count = m.value; break;
    case AttributeKind::VersionUp: s.version = version_string(++version); break;
    case AttributeKind::Updated: s.last_updated = day; break;
    case AttributeKind::PermissionsUp: s.permissions.insert(m.text); break;
    case AttributeKind::PermissionsDown: s.permissions.erase(m.text); break;
    case AttributeKind::PermissionsChanged:
      s.permissions.erase(m.text);
      s.permissions.insert(m.text2);
      break;
    case AttributeKind::CategoryChange: s.category = m.text; break;
  }
}

int organic_rating(std::mt19937_64& rng) {
  // 60% positive, 15% neutral, 25% negative
  const double u = uniform01(rng);
  if (u < 0.35) return 5;
  if (u < 0.60) return 4;
  if (u < 0.75) return 3;
  if (u < 0.87) return 2;
  return 1;
}

std::string hex(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(12, '0');
  for (int i = 11; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = digits[v & 15];
  return out;
}

// Snapshots and reviews of one app over the observation.
void emit_app(AppPlan& p, const MarketScript& script, std::vector<AppSnapshot>& snapshots, std::vector<ReviewRecord>& reviews) {
  auto rng = keyed_rng(script.seed, "reviews/" + p.base.app.str());
  std::vector<int> daily(static_cast<std::size_t>(script.days), 0);
  std::vector<const FraudCampaign*> campaigns;
  for (const auto& c : script.fraud_campaigns) {
    if (c.app == p.base.app) campaigns.push_back(&c);
  }
  std::poisson_distribution<int> organic(std::max(p.review_rate, 1e-12));
  for (int d = 0; d < script.days; ++d) {
    const Date day = script.start + std::chrono::days{d};
    const int n = p.review_rate > 0.0 ? organic(rng) : 0;
    int k = 0;
    auto emit = [&](int rating) {
      ReviewRecord r;
      r.app = p.base.app;
      r.review_id = p.base.app.str() + "-" + std::to_string(d) + "-" + std::to_string(k++);
      r.reviewer_id = "u" + hex(rng());
      r.date = day;
      r.rating = rating;
      reviews.push_back(std::move(r));
    };
    for (int i = 0; i < n; ++i) emit(organic_rating(rng));
    for (const auto* c : campaigns) {
      if (d < c->start_day || d >= c->start_day + c->duration) continue;
      for (int i = 0; i < c->daily_volume; ++i) emit(c->polarity == Polarity::Positive ? 5 : 1);
    }
    daily[static_cast<std::size_t>(d)] = k;
  }

  // Ratings grow with reviews posted before the fetch day. Scripted apps
  // keep theirs under script control unless they are campaign targets.
  const bool organic_ratings = !p.scripted || !campaigns.empty();
  AppSnapshot state = p.base;
  int version = p.version;
  std::size_t next = 0;
  std::int64_t reviews_before = 0;
  const auto cadence = std::chrono::hours{script.snapshot_cadence_hours};
  Timestamp t = start_of(script.start) + std::chrono::seconds{p.offset_seconds};
  int applied_through = -1;
  while (day_of(t) <= script.end()) {
    const int d = static_cast<int>(days_between(script.start, day_of(t)));
    for (int day = applied_through + 1; day <= d; ++day) {
      while (next < p.mutations.size() && p.mutations[next].day == day) {
        apply(state, version, p.mutations[next], script.start + std::chrono::days{day});
        ++next;
      }
      if (day > 0) reviews_before += daily[static_cast<std::size_t>(day - 1)];
    }
    applied_through = d;
    AppSnapshot s = state;
    if (organic_ratings) s.rating_count += reviews_before;
    s.fetch_time = t;
    snapshots.push_back(std::move(s));
    t += cadence;
  }
}

std::vector<TopKObservation> emit_topk(const MarketScript& script, const std::vector<AppPlan>& plans) {
  std::vector<TopKObservation> out;
  for (const auto& cfg : script.topk_lists) {
    auto rng = keyed_rng(script.seed, "topk/" + std::string(to_string(cfg.type)));
    std::vector<AppId> pool;
    for (const auto& p : plans) {
      const bool paid = !p.base.free;
      const bool fits = cfg.type == ListType::Gross || ((cfg.type == ListType::Paid || cfg.type == ListType::NewPaid) == paid);
      if (fits) pool.push_back(p.base.app);
    }
    if (pool.empty()) continue;
    std::shuffle(pool.begin(), pool.end(), rng);
    const std::size_t length = std::min(cfg.length, pool.size());
    std::vector<AppId> list(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(length));
    std::deque<AppId> outsiders(pool.begin() + static_cast<std::ptrdiff_t>(length), pool.end());
    auto churn = [&](std::size_t r) {
      if (length == 1) return cfg.churn_top;
      const double f = static_cast<double>(r) / static_cast<double>(length - 1);
      return cfg.churn_top + (cfg.churn_bottom - cfg.churn_top) * f;
    };

    const auto cadence = std::chrono::hours{script.topk_cadence_hours};
    for (Timestamp t = start_of(script.start); day_of(t) <= script.end(); t += cadence) {
      if (t != start_of(script.start)) {
        for (std::size_t r = 0; r < length; ++r) {
          if (!outsiders.empty() && uniform01(rng) < churn(r)) {
            outsiders.push_back(list[r]);
            list[r] = outsiders.front();
            outsiders.pop_front();
          }
        }
        for (std::size_t r = 0; r + 1 < length; ++r) {
          if (uniform01(rng) < churn(r)) std::swap(list[r], list[r + 1]);
        }
      }
      out.push_back({cfg.type, t, list});
    }
  }
  std::sort(out.begin(), out.end(), [](const TopKObservation& a, const TopKObservation& b) {
    return std::tie(a.fetch_time, a.list_type) < std::tie(b.fetch_time, b.list_type);
  });
  return out;
}

std::string organic_title(std::mt19937_64& rng) {
  return pick(rng, kAdjectives) + " " + pick(rng, kNouns) + " " + pick(rng, kSuffixes);
}

std::string slug(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out.empty() ? "dev" : out;
}

}  // namespace

Dataset generate(const MarketScript& script) {
  script.validate();
  Dataset data;
  std::vector<AppPlan> plans;

  // Developer population.
  const DiscretePowerLaw dev_sizes(script.dev_app_alpha, script.dev_app_max);
  std::vector<std::size_t> organic;  // indices into plans
  for (std::size_t i = 0; i < script.n_developers; ++i) {
    auto rng = keyed_rng(script.seed, "developer/" + std::to_string(i));
    const auto n = dev_sizes(rng);
    data.truth.developer_app_counts.push_back(n);
    for (std::int64_t k = 0; k < n; ++k) {
      AppPlan p;
      p.base.app = AppId("com.sim.d" + std::to_string(i) + ".a" + std::to_string(k));
      p.truth.app = p.base.app;
      p.truth.developer = "Developer " + std::to_string(i);
      organic.push_back(plans.size());
      plans.push_back(std::move(p));
    }
  }

  // Quota labels: rank of a keyed uniform decides class and staleness.
  auto quota = [&](const std::string& stream, auto assign) {
    std::vector<std::pair<double, std::size_t>> order;
    for (auto idx : organic) {
      auto rng = keyed_rng(script.seed, stream + "/" + plans[idx].base.app.str());
      order.emplace_back(uniform01(rng), idx);
    }
    std::sort(order.begin(), order.end());
    for (std::size_t r = 0; r < order.size(); ++r) assign(plans[order[r].second], r, order.size());
  };
  quota("class", [&](AppPlan& p, std::size_t r, std::size_t n) {
    const auto n_unpop = static_cast<std::size_t>(std::llround(script.popularity_mix.unpopular * static_cast<double>(n)));
    const auto n_pop = static_cast<std::size_t>(std::llround(script.popularity_mix.popular * static_cast<double>(n)));
    p.truth.popularity = r < n_unpop ? PopularityClass::Unpopular
                         : r < n_unpop + n_pop ? PopularityClass::Popular
                                               : PopularityClass::MostPopular;
  });
  quota("stale", [&](AppPlan& p, std::size_t r, std::size_t n) {
    p.truth.stale = r < static_cast<std::size_t>(std::llround(script.stale_fraction * static_cast<double>(n)));
  });

  const Date start = script.start;
  for (auto idx : organic) {
    auto& p = plans[idx];
    auto rng = keyed_rng(script.seed, "app/" + p.base.app.str());
    p.truth.paid = uniform01(rng) < script.paid_fraction;
    const auto bucket = *ladder_bucket(draw_rung(rng, p.truth.popularity));
    const std::int64_t price = p.truth.paid ? pick(rng, kPrices) : 0;
    p.base = base_snapshot(rng, p.base.app, p.truth.developer, organic_title(rng), bucket, price, script.ratings_per_download);
    p.version = uniform_int(rng, 0, 30);
    p.base.version = version_string(p.version);
    const int age = p.truth.stale ? uniform_int(rng, 400, 1200) : uniform_int(rng, 0, std::max(0, 365 - script.days));
    p.base.last_updated = start - std::chrono::days{age};
    p.offset_seconds = uniform_int(rng, 0, 3599);
    p.review_rate = script.review_rate.of(p.truth.popularity);
    plan_organic(p, rng, script);
  }

  // Scam developers: clone families with near-identical titles.
  for (const auto& dev : script.scam_developers) {
    auto rng = keyed_rng(script.seed, "scam/" + dev.developer);
    const std::string stem = pick(rng, kAdjectives) + " " + pick(rng, kNouns) + " Live Wallpaper HD";
    for (std::size_t k = 0; k < dev.n_clones; ++k) {
      AppPlan p;
      const AppId id("com.scam." + slug(dev.developer) + ".c" + std::to_string(k));
      p.base = base_snapshot(rng, id, dev.developer, stem + " " + std::to_string(k + 1), *ladder_bucket(100), dev.price_cents,
                             script.ratings_per_download);
      p.base.category = "Personalization";
      p.base.version = version_string(0);
      p.base.last_updated = start - std::chrono::days{uniform_int(rng, 0, 60)};
      p.offset_seconds = uniform_int(rng, 0, 3599);
      p.review_rate = script.review_rate.unpopular;
      p.truth.app = id;
      p.truth.developer = dev.developer;
      p.truth.paid = true;
      p.truth.scam_cluster = dev.developer;
      plans.push_back(std::move(p));
    }
  }

  // Scripted apps: fixed state, changes exactly as listed.
  for (const auto& a : script.scripted_apps) {
    AppPlan p;
    auto rng = keyed_rng(script.seed, "scripted/" + a.app.str());
    p.base = base_snapshot(rng, a.app, a.developer, "Scripted " + a.app.str(), a.downloads, a.price_cents, script.ratings_per_download);
    p.base.permissions = {"android.permission.INTERNET", "android.permission.VIBRATE", "android.permission.WAKE_LOCK"};
    p.base.version = version_string(0);
    p.base.last_updated = start - std::chrono::days{30};
    p.truth.app = a.app;
    p.truth.developer = a.developer;
    p.truth.popularity = class_of_bucket(a.downloads);
    p.truth.paid = a.price_cents > 0;
    plan_scripted(p, a, script);
    p.scripted = true;
    plans.push_back(std::move(p));
  }

  std::set<AppId> ids;
  for (const auto& p : plans) {
    if (!ids.insert(p.base.app).second) config_error("duplicate app id " + p.base.app.str());
  }

  for (const auto& c : script.fraud_campaigns) {
    if (!ids.count(c.app)) config_error("fraud campaign targets unknown app " + c.app.str());
  }
  for (auto& p : plans) {
    for (const auto& c : script.fraud_campaigns) {
      if (c.app != p.base.app) continue;
      p.review_rate = c.baseline_daily;
      for (int d = c.start_day; d < c.start_day + c.duration; ++d) p.truth.spike_days.push_back({start + std::chrono::days{d}, c.polarity});
    }
    std::sort(p.truth.spike_days.begin(), p.truth.spike_days.end());
    p.truth.spike_days.erase(std::unique(p.truth.spike_days.begin(), p.truth.spike_days.end()), p.truth.spike_days.end());
  }

  for (auto& p : plans) emit_app(p, script, data.snapshots, data.reviews);
  data.topk = emit_topk(script, plans);

  std::sort(data.snapshots.begin(), data.snapshots.end(), [](const AppSnapshot& a, const AppSnapshot& b) {
    return std::tie(a.fetch_time, a.app) < std::tie(b.fetch_time, b.app);
  });
  std::sort(data.reviews.begin(), data.reviews.end(), [](const ReviewRecord& a, const ReviewRecord& b) {
    return std::tie(a.date, a.app, a.review_id) < std::tie(b.date, b.app, b.review_id);
  });

  // Staleness truth follows the emitted state at the reference day.
  data.truth.reference = script.end();
  for (auto& p : plans) {
    Date last = p.base.last_updated;
    if (!p.truth.update_days.empty()) last = std::max(last, p.truth.update_days.back());
    p.truth.stale = days_between(last, data.truth.reference) > 365;
    data.truth.apps.push_back(std::move(p.truth));
  }
  std::sort(data.truth.apps.begin(), data.truth.apps.end(), [](const AppTruth& a, const AppTruth& b) { return a.app < b.app; });

  data.manifest.name = script.name;
  data.manifest.currency = "USD";
  data.manifest.observation_start = script.start;
  data.manifest.observation_end = script.end();
  data.manifest.snapshot_cadence_hint = std::to_string(script.snapshot_cadence_hours) + "h";
  return data;
}

void write_dataset(const Dataset& data, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + (dir / name).string());
    return out;
  };
  auto finish = [&](std::ofstream& out, const char* name) {
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + (dir / name).string());
  };
  {
    auto out = open("snapshots.jsonl");
    for (const auto& s : data.snapshots) out << encode_line(s) << '\n';
    finish(out, "snapshots.jsonl");
  }
  {
    auto out = open("reviews.jsonl");
    for (const auto& r : data.reviews) out << encode_line(r) << '\n';
    finish(out, "reviews.jsonl");
  }
  {
    auto out = open("topk.jsonl");
    for (const auto& o : data.topk) out << encode_line(o) << '\n';
    finish(out, "topk.jsonl");
  }
  {
    auto out = open("manifest.json");
    out << to_json(data.manifest).dump(2) << '\n';
    finish(out, "manifest.json");
  }
  {
    auto out = open("ground_truth.json");
    out << data.truth.to_json().dump() << '\n';
    finish(out, "ground_truth.json");
  }
}

// ---------------------------------------------------------------------------
// Mock market

MockMarket render_mock_market(std::span<const AppSnapshot> snapshots, const MockMarketOptions& options) {
  if (snapshots.empty()) throw Error(ErrorCode::InvalidInput, "render_mock_market needs at least one snapshot");
  std::mt19937_64 rng(splitmix64(options.seed));
  MockMarket m;
  std::vector<AppId> ids;
  for (const auto& s : snapshots) ids.push_back(s.app);
  const std::size_t n = ids.size();
  auto link = [&](const AppId& from, const AppId& to) {
    if (from == to) return;
    auto& out = m.similar[from];
    if (std::find(out.begin(), out.end(), to) == out.end()) out.push_back(to);
  };
  for (const auto& id : ids) m.similar[id];
  if (options.connected) {
    for (std::size_t i = 1; i < n; ++i) link(ids[std::uniform_int_distribution<std::size_t>(0, i - 1)(rng)], ids[i]);
  }
  for (std::size_t i = 0; i < n && n > 1; ++i) {
    for (std::size_t k = 0; k < options.extra_links; ++k) link(ids[i], ids[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)]);
  }
  for (const auto& s : snapshots) m.pages[s.app] = render_page(s, m.similar[s.app]);

  m.seeds.push_back(ids[0]);
  std::set<AppId> chosen{ids[0]};
  while (m.seeds.size() < std::min(options.n_seeds, n)) {
    const auto& id = ids[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)];
    if (chosen.insert(id).second) m.seeds.push_back(id);
  }
  return m;
}

void write_mock_market(const MockMarket& market, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "pages", ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + (dir / "pages").string() + ": " + ec.message());
  for (const auto& [id, page] : market.pages) {
    std::ofstream out(dir / "pages" / (id.str() + ".html"), std::ios::binary | std::ios::trunc);
    out << page;
    if (!out) throw Error(ErrorCode::IoError, "cannot write page for " + id.str());
  }
  std::ofstream seeds(dir / "seeds.txt", std::ios::trunc);
  for (const auto& id : market.seeds) seeds << id.str() << '\n';
  if (!seeds) throw Error(ErrorCode::IoError, "cannot write seeds.txt");
}

}  // namespace marketpulse::simgen
