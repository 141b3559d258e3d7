#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "marketpulse/model.hpp"

namespace marketpulse {

// ---------------------------------------------------------------------------
// Pages
//
// A market page is a small HTML subset:
//
//   <div class="metadata">
//     <meta name="app" content="com.example">
//     <meta name="permission" content="...">   (repeatable)
//     ...
//   </div>
//   <div class="similar-apps">
//     <a class="similar" href="com.other">...</a>
//   </div>
//
// Attribute values use the &amp; &lt; &gt; &quot; &#39; escapes.

struct MarketPage {
  AppId app;
  std::string raw;
};

struct ParsedPage {
  AppSnapshot snapshot;
  std::vector<AppId> similar;  // document order, first occurrence only
};

/// Throws Error(MissingField) naming the absent field, or
/// Error(MalformedDocument) for broken structure or unparsable values.
ParsedPage parse_page(std::string_view raw, Timestamp fetch_time);
inline ParsedPage parse_page(const MarketPage& page, Timestamp fetch_time) { return parse_page(page.raw, fetch_time); }

/// Inverse of parse_page for every snapshot field except fetch_time.
std::string render_page(const AppSnapshot& snapshot, std::span<const AppId> similar);

// ---------------------------------------------------------------------------
// Frontier

/// FIFO of apps to fetch plus the set of every app ever enqueued. The
/// check-and-enqueue is atomic, so an app is queued at most once per crawl.
class Frontier {
 public:
  Frontier() = default;
  explicit Frontier(std::span<const AppId> seeds);

  /// Enqueues `app` unless it was seen before; true if it was enqueued.
  bool offer(const AppId& app);
  /// Non-blocking pop.
  std::optional<AppId> try_pop();
  /// Blocks until an app is available (returned and marked in flight) or
  /// the queue is empty with nothing in flight (nullopt).
  std::optional<AppId> pop_wait();
  /// Marks an app handed out by pop_wait as finished.
  void done();

  std::size_t queued() const;
  std::size_t seen() const;

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<AppId> queue_;
  std::unordered_set<AppId> seen_;
  std::size_t in_flight_ = 0;
};

// ---------------------------------------------------------------------------
// Market endpoints

struct FetchResult {
  enum class Status { Ok, NotFound, Error };
  Status status = Status::Error;
  std::string page;
};

class MarketEndpoint {
 public:
  virtual ~MarketEndpoint() = default;
  /// Must be safe to call from several threads at once.
  virtual FetchResult fetch(const AppId& app) = 0;
  /// Cheap reachability check made before a crawl starts.
  virtual bool probe() = 0;
};

/// Pages held in memory; unknown apps answer NotFound.
class InMemoryMarket final : public MarketEndpoint {
 public:
  InMemoryMarket() = default;
  explicit InMemoryMarket(std::map<AppId, std::string> pages) : pages_(std::move(pages)) {}
  InMemoryMarket(InMemoryMarket&& other) noexcept : pages_(std::move(other.pages_)), fetches_(other.fetches_.load()) {}

  /// Loads every `<dir>/pages/*.html` (file stem = app id).
  /// Throws Error(IoError) if the directory is missing.
  static InMemoryMarket load_dir(const std::filesystem::path& dir);

  void put(const AppId& app, std::string page) { pages_[app] = std::move(page); }
  const std::map<AppId, std::string>& pages() const noexcept { return pages_; }
  std::size_t fetch_count() const noexcept { return fetches_.load(); }

  FetchResult fetch(const AppId& app) override;
  bool probe() override { return true; }

 private:
  std::map<AppId, std::string> pages_;
  std::atomic<std::size_t> fetches_{0};
};

/// Serves a MarketEndpoint over loopback TCP with a line protocol: the
/// request is an app id followed by '\n'; the response is
/// "200 <length>\n<page>" or "404\n".
class TcpMarketServer {
 public:
  /// Binds 127.0.0.1:`port` (0 picks a free port) and starts serving.
  /// Throws Error(IoError) if the socket cannot be bound.
  TcpMarketServer(std::shared_ptr<MarketEndpoint> backend, std::uint16_t port = 0);
  ~TcpMarketServer();
  TcpMarketServer(const TcpMarketServer&) = delete;
  TcpMarketServer& operator=(const TcpMarketServer&) = delete;

  std::uint16_t port() const noexcept { return port_; }
  void stop();
  /// Blocks until stop() is called from another thread.
  void wait();

 private:
  void serve();

  std::shared_ptr<MarketEndpoint> backend_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread thread_;
};

/// Client side of the TCP line protocol; one connection per request.
class TcpMarketClient final : public MarketEndpoint {
 public:
  TcpMarketClient(std::string host, std::uint16_t port, int timeout_ms = 5000);
  /// Parses "host:port". Throws Error(InvalidInput).
  static TcpMarketClient from_address(std::string_view address);

  FetchResult fetch(const AppId& app) override;
  bool probe() override;

 private:
  std::string host_;
  std::uint16_t port_;
  int timeout_ms_;
};

// ---------------------------------------------------------------------------
// Crawling

struct CrawlConfig {
  std::size_t workers = 1;
  std::size_t ban_threshold = 50;
  int politeness_delay_ms = 100;
  /// Stamped on every snapshot of this crawl; defaults to the current second.
  std::optional<Timestamp> fetch_time;
};

struct WorkerState {
  std::size_t worker_id = 0;
  std::size_t attempts = 0;
  std::size_t consecutive_404 = 0;
  bool active = true;
};

struct CrawlReport {
  std::vector<AppSnapshot> snapshots;  // in fetch order
  std::vector<AppId> fetch_order;      // every attempted app
  std::size_t pages_fetched = 0;       // attempts, including 404s
  std::size_t not_found = 0;
  std::size_t errors = 0;              // transport failures
  std::size_t parse_failures = 0;
  std::vector<std::pair<AppId, std::string>> parse_errors;
  std::size_t workers_banned = 0;
  bool frontier_exhausted = false;
  std::vector<WorkerState> workers;

  /// Summary without the snapshots themselves.
  nlohmann::ordered_json to_json() const;
};

/// Breadth-first discovery over similar-app links. With one worker the
/// crawl runs on the calling thread and the fetch order is the BFS order
/// from the seeds. A worker that sees ban_threshold consecutive 404s or
/// transport errors stops for the rest of the crawl; the app it was on is
/// not re-queued.
/// Throws Error(InvalidInput) for empty seeds, zero workers or a zero
/// threshold, and Error(CrawlFailed) if the endpoint fails its probe.
CrawlReport crawl(std::span<const AppId> seeds, MarketEndpoint& market, const CrawlConfig& config = {});

struct MergeResult {
  std::vector<AppSnapshot> snapshots;
  std::size_t duplicates = 0;
  std::vector<std::pair<AppSnapshot, std::vector<std::string>>> rejected;  // record + violations
};

/// Collapses records sharing (app, fetch_time), keeping the first, and sets
/// aside records that fail validation.
MergeResult merge_parsed(std::span<const std::vector<AppSnapshot>> batches);

}  // namespace marketpulse
