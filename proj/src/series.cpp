#include "marketpulse/series.hpp"

#include <algorithm>

#include "marketpulse/error.hpp"

namespace marketpulse {

void TimeWindow::check() const {
  if (end < start) throw Error(ErrorCode::InvalidWindow, "window end precedes start");
}

RankedListSeries::RankedListSeries(ListType type, std::vector<TopKObservation> observations)
    : type_(type), observations_(std::move(observations)) {
  std::sort(observations_.begin(), observations_.end(),
            [](const auto& a, const auto& b) { return a.fetch_time < b.fetch_time; });
  ranks_.reserve(observations_.size());
  for (std::size_t n = 0; n < observations_.size(); ++n) {
    const auto& obs = observations_[n];
    if (obs.list_type != type_) throw Error(ErrorCode::InvalidInput, "observation list type differs from series");
    if (n > 0 && observations_[n - 1].fetch_time == obs.fetch_time) {
      throw Error(ErrorCode::InvalidInput, "two observations share a fetch_time");
    }
    auto& index = ranks_.emplace_back();
    index.reserve(obs.ranking.size());
    for (std::size_t r = 0; r < obs.ranking.size(); ++r) {
      if (!index.emplace(obs.ranking[r], r + 1).second) {
        throw Error(ErrorCode::InvalidInput, "duplicate app in ranking: " + obs.ranking[r].str());
      }
    }
  }
}

std::size_t RankedListSeries::rank(std::size_t n, const AppId& app) const {
  const auto& index = ranks_.at(n);
  auto it = index.find(app);
  return it == index.end() ? 0 : it->second;
}

}  // namespace marketpulse
