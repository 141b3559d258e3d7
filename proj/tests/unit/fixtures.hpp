#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "marketpulse/model.hpp"

namespace marketpulse::testing {

inline Timestamp at_day(int day, int hour = 0) {
  // 2012-04-01 00:00 UTC
  return timestamp_from_epoch(1333238400LL + day * kSecondsPerDay + hour * kSecondsPerHour);
}

inline Date day_n(int day) { return day_of(at_day(day)); }

inline AppSnapshot make_snapshot(const std::string& app, int day, int hour = 12) {
  AppSnapshot s;
  s.app = AppId(app);
  s.fetch_time = at_day(day, hour);
  s.title = "Title of " + app;
  s.developer = "dev";
  s.category = "Tools";
  s.price_cents = 0;
  s.free = true;
  s.downloads = {1000, 5000};
  s.rating_avg = 4.2;
  s.rating_count = 37;
  s.version = "1.0";
  s.last_updated = day_n(day) - std::chrono::days{30};
  s.size_bytes = 1'887'437;
  s.permissions = {"android.permission.INTERNET", "android.permission.CAMERA"};
  return s;
}

inline AppSnapshot random_snapshot(std::mt19937_64& rng, const std::string& app, int day) {
  auto s = make_snapshot(app, day, static_cast<int>(rng() % 24));
  const auto& ladder = download_ladder();
  s.downloads = ladder[rng() % ladder.size()];
  s.price_cents = (rng() % 3 == 0) ? static_cast<std::int64_t>(rng() % 1000 + 1) : 0;
  s.free = s.price_cents == 0;
  s.rating_avg = static_cast<double>(rng() % 5001) / 1000.0;
  s.rating_count = static_cast<std::int64_t>(rng() % 100000);
  s.version = std::to_string(rng() % 5) + "." + std::to_string(rng() % 10);
  s.last_updated = day_n(day) - std::chrono::days{static_cast<int>(rng() % 900)};
  s.size_bytes = static_cast<std::int64_t>(rng() % 50'000'000);
  s.title = "App \"" + std::to_string(rng() % 1000) + "\" \xc3\xa9";
  s.permissions.clear();
  for (int i = 0, n = static_cast<int>(rng() % 6); i < n; ++i) s.permissions.insert("perm." + std::to_string(rng() % 20));
  return s;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("marketpulse-test-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace marketpulse::testing
