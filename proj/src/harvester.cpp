#include "marketpulse/harvester.hpp"

#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <chrono>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "marketpulse/csv.hpp"
#include "marketpulse/error.hpp"

namespace marketpulse {

// ---------------------------------------------------------------------------
// Pages

namespace {

std::string escape_attr(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape_attr(std::string_view s) {
  static constexpr std::pair<std::string_view, char> kEntities[] = {
      {"&amp;", '&'}, {"&lt;", '<'}, {"&gt;", '>'}, {"&quot;", '"'}, {"&#39;", '\''}};
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    if (s[i] == '&') {
      bool matched = false;
      for (const auto& [entity, c] : kEntities) {
        if (s.substr(i, entity.size()) == entity) {
          out += c;
          i += entity.size();
          matched = true;
          break;
        }
      }
      if (!matched) throw Error(ErrorCode::MalformedDocument, "unknown entity in attribute value");
      continue;
    }
    out += s[i++];
  }
  return out;
}

struct Tag {
  std::string name;  // lowercase; "/div" for closing tags
  std::map<std::string, std::string> attrs;
};

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

// Parses the tag whose '<' is at `pos`; leaves `pos` after its '>'.
Tag read_tag(std::string_view doc, std::size_t& pos) {
  Tag tag;
  std::size_t i = pos + 1;
  auto fail = [](const char* why) { return Error(ErrorCode::MalformedDocument, why); };
  while (i < doc.size() && !is_space(doc[i]) && doc[i] != '>' && doc[i] != '/') tag.name += static_cast<char>(std::tolower(static_cast<unsigned char>(doc[i++])));
  if (tag.name.empty() && i < doc.size() && doc[i] == '/') {
    tag.name = "/";
    ++i;
    while (i < doc.size() && !is_space(doc[i]) && doc[i] != '>') tag.name += static_cast<char>(std::tolower(static_cast<unsigned char>(doc[i++])));
  }
  if (tag.name.empty() || tag.name == "/") throw fail("empty tag name");
  for (;;) {
    while (i < doc.size() && is_space(doc[i])) ++i;
    if (i >= doc.size()) throw fail("unterminated tag");
    if (doc[i] == '>') {
      ++i;
      break;
    }
    if (doc[i] == '/' && i + 1 < doc.size() && doc[i + 1] == '>') {
      i += 2;
      break;
    }
    std::string key;
    while (i < doc.size() && !is_space(doc[i]) && doc[i] != '=' && doc[i] != '>') key += static_cast<char>(std::tolower(static_cast<unsigned char>(doc[i++])));
    if (key.empty()) throw fail("bad attribute");
    while (i < doc.size() && is_space(doc[i])) ++i;
    if (i >= doc.size() || doc[i] != '=') throw fail("attribute without value");
    ++i;
    while (i < doc.size() && is_space(doc[i])) ++i;
    if (i >= doc.size() || (doc[i] != '"' && doc[i] != '\'')) throw fail("unquoted attribute value");
    const char quote = doc[i++];
    const auto end = doc.find(quote, i);
    if (end == std::string_view::npos) throw fail("unterminated attribute value");
    if (!tag.attrs.emplace(key, unescape_attr(doc.substr(i, end - i))).second) throw fail("repeated attribute");
    i = end + 1;
  }
  pos = i;
  return tag;
}

template <class T>
T parse_number(const std::string& field, const std::string& text) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    throw Error(ErrorCode::MalformedDocument, "bad value for " + field);
  }
  return value;
}

constexpr std::string_view kRequired[] = {"app",         "title",   "developer",    "category", "price", "downloads",
                                          "rating",      "rating_count", "version", "last_updated", "size"};

}  // namespace

ParsedPage parse_page(std::string_view raw, Timestamp fetch_time) {
  if (raw.empty()) throw Error(ErrorCode::MalformedDocument, "empty page");

  enum class Block { None, Metadata, Similar };
  Block block = Block::None;
  int metadata_blocks = 0, similar_blocks = 0, depth = 0;
  std::map<std::string, std::string> fields;
  std::set<std::string> permissions;
  ParsedPage out;
  std::unordered_set<AppId> similar_seen;

  for (std::size_t pos = 0; (pos = raw.find('<', pos)) != std::string_view::npos;) {
    if (raw.substr(pos, 4) == "<!--") {
      const auto end = raw.find("-->", pos + 4);
      if (end == std::string_view::npos) throw Error(ErrorCode::MalformedDocument, "unterminated comment");
      pos = end + 3;
      continue;
    }
    if (raw.substr(pos, 2) == "<!") {  // doctype
      const auto end = raw.find('>', pos);
      if (end == std::string_view::npos) throw Error(ErrorCode::MalformedDocument, "unterminated declaration");
      pos = end + 1;
      continue;
    }
    const Tag tag = read_tag(raw, pos);
    if (tag.name == "div") {
      const auto cls = tag.attrs.find("class");
      const std::string kind = cls == tag.attrs.end() ? "" : cls->second;
      if (block != Block::None) {
        if (kind == "metadata" || kind == "similar-apps") throw Error(ErrorCode::MalformedDocument, "nested block");
        ++depth;
      } else if (kind == "metadata") {
        block = Block::Metadata;
        ++metadata_blocks;
      } else if (kind == "similar-apps") {
        block = Block::Similar;
        ++similar_blocks;
      }
    } else if (tag.name == "/div") {
      if (depth > 0) {
        --depth;
      } else {
        block = Block::None;
      }
    } else if (tag.name == "meta" && block == Block::Metadata) {
      const auto name = tag.attrs.find("name");
      const auto content = tag.attrs.find("content");
      if (name == tag.attrs.end() || content == tag.attrs.end()) {
        throw Error(ErrorCode::MalformedDocument, "meta tag needs name and content");
      }
      if (name->second == "permission") {
        permissions.insert(content->second);
      } else if (!fields.emplace(name->second, content->second).second) {
        throw Error(ErrorCode::MalformedDocument, "repeated field " + name->second);
      }
    } else if (tag.name == "a" && block == Block::Similar) {
      const auto cls = tag.attrs.find("class");
      const auto href = tag.attrs.find("href");
      if (cls == tag.attrs.end() || cls->second != "similar") continue;
      if (href == tag.attrs.end() || !AppId::is_valid(href->second)) {
        throw Error(ErrorCode::MalformedDocument, "similar link without a valid href");
      }
      AppId id(href->second);
      if (similar_seen.insert(id).second) out.similar.push_back(std::move(id));
    }
  }
  if (block != Block::None) throw Error(ErrorCode::MalformedDocument, "unclosed block");
  if (metadata_blocks != 1 || similar_blocks != 1) {
    throw Error(ErrorCode::MalformedDocument, "expected one metadata block and one similar-apps block");
  }
  for (auto name : kRequired) {
    if (!fields.count(std::string(name))) throw Error(ErrorCode::MissingField, std::string(name));
  }

  auto& s = out.snapshot;
  if (!AppId::is_valid(fields["app"])) throw Error(ErrorCode::MalformedDocument, "bad value for app");
  s.app = AppId(fields["app"]);
  s.fetch_time = fetch_time;
  s.title = fields["title"];
  s.developer = fields["developer"];
  s.category = fields["category"];
  s.price_cents = parse_number<std::int64_t>("price", fields["price"]);
  s.free = s.price_cents == 0;
  const auto& dl = fields["downloads"];
  const auto dash = dl.find('-');
  if (dash == std::string::npos) throw Error(ErrorCode::MalformedDocument, "bad value for downloads");
  s.downloads = {parse_number<std::int64_t>("downloads", dl.substr(0, dash)),
                 parse_number<std::int64_t>("downloads", dl.substr(dash + 1))};
  s.rating_avg = parse_number<double>("rating", fields["rating"]);
  s.rating_count = parse_number<std::int64_t>("rating_count", fields["rating_count"]);
  s.version = fields["version"];
  try {
    s.last_updated = parse_date(fields["last_updated"]);
  } catch (const Error&) {
    throw Error(ErrorCode::MalformedDocument, "bad value for last_updated");
  }
  s.size_bytes = parse_number<std::int64_t>("size", fields["size"]);
  s.permissions = std::move(permissions);
  return out;
}

std::string render_page(const AppSnapshot& s, std::span<const AppId> similar) {
  std::ostringstream out;
  auto meta = [&](std::string_view name, std::string_view content) {
    out << "  <meta name=\"" << name << "\" content=\"" << escape_attr(content) << "\">\n";
  };
  out << "<!DOCTYPE html>\n<html><head><title>" << escape_attr(s.title) << "</title></head><body>\n";
  out << "<div class=\"metadata\">\n";
  meta("app", s.app.str());
  meta("title", s.title);
  meta("developer", s.developer);
  meta("category", s.category);
  meta("price", std::to_string(s.price_cents));
  meta("downloads", std::to_string(s.downloads.lo) + "-" + std::to_string(s.downloads.hi));
  meta("rating", csv::number(s.rating_avg));
  meta("rating_count", std::to_string(s.rating_count));
  meta("version", s.version);
  meta("last_updated", format_date(s.last_updated));
  meta("size", std::to_string(s.size_bytes));
  for (const auto& p : s.permissions) meta("permission", p);
  out << "</div>\n<div class=\"similar-apps\">\n";
  for (const auto& id : similar) {
    out << "  <a class=\"similar\" href=\"" << escape_attr(id.str()) << "\">" << escape_attr(id.str()) << "</a>\n";
  }
  out << "</div>\n</body></html>\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Frontier

Frontier::Frontier(std::span<const AppId> seeds) {
  for (const auto& s : seeds) offer(s);
}

bool Frontier::offer(const AppId& app) {
  {
    std::lock_guard lock(mu_);
    if (!seen_.insert(app).second) return false;
    queue_.push_back(app);
  }
  cv_.notify_one();
  return true;
}

std::optional<AppId> Frontier::try_pop() {
  std::lock_guard lock(mu_);
  if (queue_.empty()) return std::nullopt;
  AppId app = std::move(queue_.front());
  queue_.pop_front();
  return app;
}

std::optional<AppId> Frontier::pop_wait() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return !queue_.empty() || in_flight_ == 0; });
  if (queue_.empty()) return std::nullopt;
  AppId app = std::move(queue_.front());
  queue_.pop_front();
  ++in_flight_;
  return app;
}

void Frontier::done() {
  {
    std::lock_guard lock(mu_);
    --in_flight_;
  }
  cv_.notify_all();
}

std::size_t Frontier::queued() const {
  std::lock_guard lock(mu_);
  return queue_.size();
}

std::size_t Frontier::seen() const {
  std::lock_guard lock(mu_);
  return seen_.size();
}

// ---------------------------------------------------------------------------
// Endpoints

InMemoryMarket InMemoryMarket::load_dir(const std::filesystem::path& dir) {
  const auto pages_dir = dir / "pages";
  if (!std::filesystem::is_directory(pages_dir)) {
    throw Error(ErrorCode::IoError, "no pages directory under " + dir.string());
  }
  std::map<AppId, std::string> pages;
  for (const auto& entry : std::filesystem::directory_iterator(pages_dir)) {
    if (entry.path().extension() != ".html") continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream body;
    body << in.rdbuf();
    pages.emplace(AppId(entry.path().stem().string()), body.str());
  }
  return InMemoryMarket(std::move(pages));
}

FetchResult InMemoryMarket::fetch(const AppId& app) {
  ++fetches_;
  const auto it = pages_.find(app);
  if (it == pages_.end()) return {FetchResult::Status::NotFound, {}};
  return {FetchResult::Status::Ok, it->second};
}

namespace {

bool send_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const auto n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

void set_timeouts(int fd, int timeout_ms) {
  timeval tv{timeout_ms / 1000, (timeout_ms % 1000) * 1000};
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
}

}  // namespace

TcpMarketServer::TcpMarketServer(std::shared_ptr<MarketEndpoint> backend, std::uint16_t port)
    : backend_(std::move(backend)) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (listen_fd_ < 0) throw Error(ErrorCode::IoError, std::string("socket: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listen_fd_, 64) < 0) {
    const std::string why = std::strerror(errno);
    ::close(listen_fd_);
    throw Error(ErrorCode::IoError, "cannot listen on port " + std::to_string(port) + ": " + why);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  thread_ = std::thread([this] { serve(); });
}

TcpMarketServer::~TcpMarketServer() { stop(); }

void TcpMarketServer::stop() {
  stopping_ = true;
  if (thread_.joinable()) thread_.join();
  if (listen_fd_ >= 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
}

void TcpMarketServer::wait() {
  while (!stopping_) std::this_thread::sleep_for(std::chrono::milliseconds(200));
}

void TcpMarketServer::serve() {
  while (!stopping_) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    if (::poll(&pfd, 1, 100) <= 0) continue;
    const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) continue;
    set_timeouts(fd, 2000);
    std::string line;
    char c;
    while (line.size() < 4096 && ::recv(fd, &c, 1, 0) == 1 && c != '\n') line += c;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) {
      FetchResult result{FetchResult::Status::NotFound, {}};
      if (AppId::is_valid(line)) result = backend_->fetch(AppId(line));
      if (result.status == FetchResult::Status::Ok) {
        send_all(fd, "200 " + std::to_string(result.page.size()) + "\n" + result.page);
      } else {
        send_all(fd, "404\n");
      }
    }
    ::close(fd);
  }
}

TcpMarketClient::TcpMarketClient(std::string host, std::uint16_t port, int timeout_ms)
    : host_(std::move(host)), port_(port), timeout_ms_(timeout_ms) {}

TcpMarketClient TcpMarketClient::from_address(std::string_view address) {
  const auto colon = address.rfind(':');
  if (colon == std::string_view::npos || colon == 0) throw Error(ErrorCode::InvalidInput, "market address must be host:port");
  unsigned port = 0;
  const auto text = address.substr(colon + 1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), port);
  if (ec != std::errc{} || ptr != text.data() + text.size() || port == 0 || port > 65535) {
    throw Error(ErrorCode::InvalidInput, "bad port in market address");
  }
  return {std::string(address.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

namespace {

int connect_to(const std::string& host, std::uint16_t port, int timeout_ms) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0) return -1;
  int fd = -1;
  for (auto* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    set_timeouts(fd, timeout_ms);
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  return fd;
}

}  // namespace

FetchResult TcpMarketClient::fetch(const AppId& app) {
  const int fd = connect_to(host_, port_, timeout_ms_);
  if (fd < 0) return {FetchResult::Status::Error, {}};
  std::string response;
  if (send_all(fd, app.str() + "\n")) {
    char buf[8192];
    for (;;) {
      const auto n = ::recv(fd, buf, sizeof buf, 0);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) break;
      response.append(buf, static_cast<std::size_t>(n));
    }
  }
  ::close(fd);

  const auto nl = response.find('\n');
  if (nl == std::string::npos) return {FetchResult::Status::Error, {}};
  const std::string_view status(response.data(), nl);
  if (status == "404") return {FetchResult::Status::NotFound, {}};
  if (!status.starts_with("200 ")) return {FetchResult::Status::Error, {}};
  std::size_t length = 0;
  const auto [ptr, ec] = std::from_chars(status.data() + 4, status.data() + status.size(), length);
  if (ec != std::errc{} || response.size() - nl - 1 != length) return {FetchResult::Status::Error, {}};
  return {FetchResult::Status::Ok, response.substr(nl + 1)};
}

bool TcpMarketClient::probe() {
  const int fd = connect_to(host_, port_, timeout_ms_);
  if (fd < 0) return false;
  ::close(fd);
  return true;
}

// ---------------------------------------------------------------------------
// Crawl

nlohmann::ordered_json CrawlReport::to_json() const {
  nlohmann::ordered_json j;
  j["snapshots_emitted"] = snapshots.size();
  j["pages_fetched"] = pages_fetched;
  j["not_found"] = not_found;
  j["errors"] = errors;
  j["parse_failures"] = parse_failures;
  j["workers_banned"] = workers_banned;
  j["frontier_exhausted"] = frontier_exhausted;
  auto& ws = j["workers"] = nlohmann::ordered_json::array();
  for (const auto& w : workers) {
    ws.push_back({{"worker_id", w.worker_id}, {"attempts", w.attempts}, {"consecutive_404", w.consecutive_404}, {"active", w.active}});
  }
  auto& pe = j["parse_errors"] = nlohmann::ordered_json::array();
  for (const auto& [app, why] : parse_errors) pe.push_back({{"app", app.str()}, {"error", why}});
  return j;
}

CrawlReport crawl(std::span<const AppId> seeds, MarketEndpoint& market, const CrawlConfig& config) {
  if (seeds.empty()) throw Error(ErrorCode::InvalidInput, "no seeds");
  if (config.workers == 0) throw Error(ErrorCode::InvalidInput, "need at least one worker");
  if (config.ban_threshold == 0) throw Error(ErrorCode::InvalidInput, "ban_threshold must be at least 1");
  if (config.politeness_delay_ms < 0) throw Error(ErrorCode::InvalidInput, "negative politeness delay");
  if (!market.probe()) throw Error(ErrorCode::CrawlFailed, "market endpoint unreachable");

  const Timestamp fetch_time = config.fetch_time.value_or(
      std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now()));

  Frontier frontier(seeds);
  CrawlReport report;
  report.workers.resize(config.workers);
  std::mutex report_mu;

  // Returns false once the worker is banned.
  auto handle = [&](WorkerState& w, const AppId& app) {
    const auto result = market.fetch(app);
    ++w.attempts;
    std::lock_guard lock(report_mu);
    report.fetch_order.push_back(app);
    ++report.pages_fetched;
    if (result.status != FetchResult::Status::Ok) {
      ++(result.status == FetchResult::Status::NotFound ? report.not_found : report.errors);
      if (++w.consecutive_404 >= config.ban_threshold) {
        w.active = false;
        ++report.workers_banned;
        return false;
      }
      return true;
    }
    w.consecutive_404 = 0;
    try {
      auto parsed = parse_page(result.page, fetch_time);
      for (const auto& next : parsed.similar) frontier.offer(next);
      report.snapshots.push_back(std::move(parsed.snapshot));
    } catch (const Error& e) {
      ++report.parse_failures;
      report.parse_errors.emplace_back(app, e.what());
    }
    return true;
  };
  const auto delay = std::chrono::milliseconds(config.politeness_delay_ms);

  if (config.workers == 1) {
    auto& w = report.workers[0];
    bool first = true;
    while (auto app = frontier.try_pop()) {
      if (!first && delay.count() > 0) std::this_thread::sleep_for(delay);
      first = false;
      if (!handle(w, *app)) break;
    }
  } else {
    std::vector<std::thread> threads;
    for (std::size_t id = 0; id < config.workers; ++id) {
      report.workers[id].worker_id = id;
      threads.emplace_back([&, id] {
        auto& w = report.workers[id];
        bool first = true;
        while (auto app = frontier.pop_wait()) {
          if (!first && delay.count() > 0) std::this_thread::sleep_for(delay);
          first = false;
          const bool alive = handle(w, *app);
          frontier.done();
          if (!alive) break;
        }
      });
    }
    for (auto& t : threads) t.join();
  }
  report.frontier_exhausted = frontier.queued() == 0;
  return report;
}

MergeResult merge_parsed(std::span<const std::vector<AppSnapshot>> batches) {
  MergeResult out;
  std::set<std::pair<AppId, Timestamp>> keys;
  for (const auto& batch : batches) {
    for (const auto& s : batch) {
      if (auto violations = validate_snapshot(s); !violations.empty()) {
        out.rejected.emplace_back(s, std::move(violations));
        continue;
      }
      if (!keys.emplace(s.app, s.fetch_time).second) {
        ++out.duplicates;
        continue;
      }
      out.snapshots.push_back(s);
    }
  }
  return out;
}

}  // namespace marketpulse
