#include "marketpulse/store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "marketpulse/error.hpp"

namespace marketpulse {

namespace fs = std::filesystem;

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string_view to_string(RecordKind kind) noexcept {
  switch (kind) {
    case RecordKind::Snapshot: return "snapshot";
    case RecordKind::Review: return "review";
    case RecordKind::TopK: return "topk";
  }
  return "snapshot";
}

IngestCounts& IngestReport::counts(RecordKind kind) {
  switch (kind) {
    case RecordKind::Snapshot: return snapshots;
    case RecordKind::Review: return reviews;
    case RecordKind::TopK: return topk;
  }
  return snapshots;
}

const IngestCounts& IngestReport::counts(RecordKind kind) const {
  return const_cast<IngestReport*>(this)->counts(kind);
}

void IngestReport::merge(const IngestReport& other) {
  for (auto kind : {RecordKind::Snapshot, RecordKind::Review, RecordKind::TopK}) {
    auto& mine = counts(kind);
    const auto& theirs = other.counts(kind);
    mine.accepted += theirs.accepted;
    mine.deduplicated += theirs.deduplicated;
    mine.rejected += theirs.rejected;
    mine.conflicts += theirs.conflicts;
  }
  rejections.insert(rejections.end(), other.rejections.begin(), other.rejections.end());
  if (other.manifest_status != "absent") manifest_status = other.manifest_status;
}

nlohmann::json IngestReport::to_json() const {
  auto counts_json = [](const IngestCounts& c) {
    return nlohmann::json{{"accepted", c.accepted},
                          {"deduplicated", c.deduplicated},
                          {"rejected", c.rejected},
                          {"conflicts", c.conflicts}};
  };
  nlohmann::json rej = nlohmann::json::array();
  for (const auto& r : rejections) {
    rej.push_back({{"kind", to_string(r.kind)}, {"line", r.line}, {"reason", r.reason}});
  }
  return {{"snapshots", counts_json(snapshots)},
          {"reviews", counts_json(reviews)},
          {"topk", counts_json(topk)},
          {"manifest", manifest_status},
          {"rejections", std::move(rej)}};
}

namespace {

// Read-only descriptor for positioned reads; closed on scope exit.
class ReadOnlyFile {
 public:
  explicit ReadOnlyFile(const std::filesystem::path& path) : fd_(::open(path.c_str(), O_RDONLY | O_CLOEXEC)) {
    if (fd_ < 0) throw Error(ErrorCode::IoError, "cannot open " + path.string() + ": " + std::strerror(errno));
  }
  ~ReadOnlyFile() { ::close(fd_); }
  ReadOnlyFile(const ReadOnlyFile&) = delete;
  ReadOnlyFile& operator=(const ReadOnlyFile&) = delete;
  int fd() const noexcept { return fd_; }

 private:
  int fd_;
};

/// Advisory cross-process writer lock on `<store>/.lock`.
class WriterLock {
 public:
  explicit WriterLock(const fs::path& path) {
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error(ErrorCode::IoError, "cannot open lock file " + path.string() + ": " + std::strerror(errno));
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      throw Error(ErrorCode::IoError, "store is locked by another writer: " + path.string());
    }
  }
  ~WriterLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  WriterLock(const WriterLock&) = delete;
  WriterLock& operator=(const WriterLock&) = delete;

 private:
  int fd_ = -1;
};

// Canonical lines start with a fixed key order, so the index can be rebuilt
// without a full JSON parse. Anything unexpected falls back to the decoder.
class PrefixScanner {
 public:
  explicit PrefixScanner(std::string_view s) : s_(s) {}

  bool literal(std::string_view lit) {
    if (s_.substr(pos_, lit.size()) != lit) return false;
    pos_ += lit.size();
    return true;
  }
  bool plain_string(std::string& out) {
    const auto end = s_.find('"', pos_);
    if (end == std::string_view::npos) return false;
    const auto body = s_.substr(pos_, end - pos_);
    if (body.find('\\') != std::string_view::npos) return false;
    out.assign(body);
    pos_ = end + 1;
    return true;
  }
  bool integer(std::int64_t& out) {
    auto [ptr, ec] = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), out);
    if (ec != std::errc{}) return false;
    pos_ = static_cast<std::size_t>(ptr - s_.data());
    return true;
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += "; ";
    out += p;
  }
  return out;
}

std::size_t list_index(ListType t) { return static_cast<std::size_t>(t); }

std::string pending_key(RecordKind kind, const AppId& app, std::int64_t time, const std::string& review_id,
                        ListType list) {
  switch (kind) {
    case RecordKind::Snapshot: return app.str() + '\n' + std::to_string(time);
    case RecordKind::Review: return app.str() + '\n' + review_id;
    case RecordKind::TopK: return std::string(to_string(list)) + '\n' + std::to_string(time);
  }
  return {};
}

}  // namespace

SnapStore::SnapStore(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec || !fs::is_directory(dir_)) {
    throw Error(ErrorCode::IoError, "cannot create store directory " + dir_.string());
  }
  const auto manifest_path = dir_ / "manifest.json";
  if (fs::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    try {
      manifest_ = manifest_from_json(nlohmann::json::parse(in));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::IoError, "corrupt manifest " + manifest_path.string() + ": " + e.what());
    }
  }
  for (auto kind : {RecordKind::Snapshot, RecordKind::Review, RecordKind::TopK}) load_log(kind);
}

fs::path SnapStore::log_path(RecordKind kind) const {
  switch (kind) {
    case RecordKind::Snapshot: return dir_ / "snapshots.jsonl";
    case RecordKind::Review: return dir_ / "reviews.jsonl";
    case RecordKind::TopK: return dir_ / "topk.jsonl";
  }
  return {};
}

SnapStore::Key SnapStore::key_of_line(RecordKind kind, std::string_view line) {
  Key key;
  PrefixScanner scan(line);
  std::string text;
  switch (kind) {
    case RecordKind::Snapshot:
      if (scan.literal(R"({"app":")") && scan.plain_string(text) && AppId::is_valid(text) &&
          scan.literal(R"(,"fetch_time":)") && scan.integer(key.time)) {
        key.app = AppId(text);
        return key;
      } else {
        const auto s = decode_snapshot_line(line);
        return Key{s.app, epoch_seconds(s.fetch_time), {}, ListType::Free};
      }
    case RecordKind::Review:
      if (scan.literal(R"({"app":")") && scan.plain_string(text) && AppId::is_valid(text) &&
          scan.literal(R"(,"review_id":")") && scan.plain_string(key.review_id)) {
        key.app = AppId(text);
        return key;
      } else {
        const auto r = decode_review_line(line);
        return Key{r.app, 0, r.review_id, ListType::Free};
      }
    case RecordKind::TopK:
      if (scan.literal(R"({"list_type":")") && scan.plain_string(text) && parse_list_type(text) &&
          scan.literal(R"(,"fetch_time":)") && scan.integer(key.time)) {
        key.list = *parse_list_type(text);
        return key;
      } else {
        const auto o = decode_topk_line(line);
        return Key{{}, epoch_seconds(o.fetch_time), {}, o.list_type};
      }
  }
  return key;
}

void SnapStore::load_log(RecordKind kind) {
  const auto path = log_path(kind);
  if (!fs::exists(path)) return;

  // Drop a torn tail (no terminating newline) from an interrupted append.
  {
    std::ifstream probe(path, std::ios::binary | std::ios::ate);
    const auto size = static_cast<std::uint64_t>(probe.tellg());
    if (size > 0) {
      std::uint64_t keep = size;
      char c = 0;
      while (keep > 0) {
        probe.seekg(static_cast<std::streamoff>(keep - 1));
        probe.get(c);
        if (c == '\n') break;
        --keep;
      }
      if (keep != size) {
        probe.close();
        fs::resize_file(path, keep);
      }
    }
  }

  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::string line;
  std::uint64_t offset = 0;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const Entry entry{offset, static_cast<std::uint32_t>(line.size()), fnv1a64(line)};
    offset += line.size() + 1;
    if (line.empty()) continue;
    try {
      index_entry(kind, key_of_line(kind, line), entry);
    } catch (const Error& e) {
      throw Error(ErrorCode::IoError, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

const SnapStore::Entry* SnapStore::find_entry(RecordKind kind, const Key& key) const {
  switch (kind) {
    case RecordKind::Snapshot: {
      auto it = snapshots_.find(key.app);
      if (it == snapshots_.end()) return nullptr;
      auto jt = it->second.find(key.time);
      return jt == it->second.end() ? nullptr : &jt->second;
    }
    case RecordKind::Review: {
      auto it = reviews_.find(key.app);
      if (it == reviews_.end()) return nullptr;
      auto jt = it->second.find(key.review_id);
      return jt == it->second.end() ? nullptr : &jt->second;
    }
    case RecordKind::TopK: {
      const auto& index = topk_[list_index(key.list)];
      auto it = index.find(key.time);
      return it == index.end() ? nullptr : &it->second;
    }
  }
  return nullptr;
}

void SnapStore::index_entry(RecordKind kind, const Key& key, const Entry& entry) {
  switch (kind) {
    case RecordKind::Snapshot:
      if (snapshots_[key.app].insert_or_assign(key.time, entry).second) ++n_snapshots_;
      break;
    case RecordKind::Review:
      if (reviews_[key.app].insert_or_assign(key.review_id, entry).second) ++n_reviews_;
      break;
    case RecordKind::TopK:
      if (topk_[list_index(key.list)].insert_or_assign(key.time, entry).second) ++n_topk_;
      break;
  }
}

void SnapStore::commit(RecordKind kind, std::vector<PendingLine>& batch) {
  if (batch.empty()) return;
  const auto path = log_path(kind);
  const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(ErrorCode::IoError, "cannot open " + path.string() + ": " + std::strerror(errno));
  struct stat st {};
  if (::fstat(fd, &st) != 0) {
    ::close(fd);
    throw Error(ErrorCode::IoError, "cannot stat " + path.string());
  }
  std::string buffer;
  std::vector<Entry> entries;
  entries.reserve(batch.size());
  std::uint64_t offset = static_cast<std::uint64_t>(st.st_size);
  for (const auto& p : batch) {
    entries.push_back({offset, static_cast<std::uint32_t>(p.line.size()), p.hash});
    offset += p.line.size() + 1;
    buffer += p.line;
    buffer += '\n';
  }
  std::size_t written = 0;
  while (written < buffer.size()) {
    const auto n = ::write(fd, buffer.data() + written, buffer.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      const std::string why = std::strerror(errno);
      // Remove the partial batch so the log ends on a committed line.
      if (::ftruncate(fd, st.st_size) != 0) {
        // the torn tail is dropped on next open
      }
      ::close(fd);
      throw Error(ErrorCode::IoError, "write to " + path.string() + " failed: " + why);
    }
    written += static_cast<std::size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);

  std::unique_lock lock(index_mutex_);
  for (std::size_t i = 0; i < batch.size(); ++i) index_entry(kind, batch[i].key, entries[i]);
  batch.clear();
}

IngestReport SnapStore::ingest_lines(RecordKind kind, std::istream& in, std::size_t batch_size) {
  std::lock_guard writer(writer_mutex_);
  WriterLock file_lock(dir_ / ".lock");

  IngestReport report;
  auto& counts = report.counts(kind);
  std::vector<PendingLine> batch;
  std::unordered_map<std::string, std::uint64_t> pending;
  std::string line;
  std::size_t line_no = 0;

  auto reject = [&](std::string reason) {
    ++counts.rejected;
    report.rejections.push_back({kind, line_no, std::move(reason)});
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    PendingLine p;
    try {
      std::vector<std::string> violations;
      switch (kind) {
        case RecordKind::Snapshot: {
          auto s = decode_snapshot_line(line);
          violations = validate_snapshot(s);
          p.key = Key{s.app, epoch_seconds(s.fetch_time), {}, ListType::Free};
          p.line = encode_line(s);
          break;
        }
        case RecordKind::Review: {
          auto r = decode_review_line(line);
          violations = validate_review(r);
          p.key = Key{r.app, 0, r.review_id, ListType::Free};
          p.line = encode_line(r);
          break;
        }
        case RecordKind::TopK: {
          auto o = decode_topk_line(line);
          violations = validate_topk(o);
          p.key = Key{{}, epoch_seconds(o.fetch_time), {}, o.list_type};
          p.line = encode_line(o);
          break;
        }
      }
      if (!violations.empty()) {
        reject(join(violations));
        continue;
      }
    } catch (const Error& e) {
      std::string reason = e.what();
      if (auto pos = reason.find(": "); pos != std::string::npos) reason = reason.substr(pos + 2);
      reject(std::move(reason));
      continue;
    }
    p.hash = fnv1a64(p.line);

    const auto pkey = pending_key(kind, p.key.app, p.key.time, p.key.review_id, p.key.list);
    std::optional<std::uint64_t> existing;
    if (auto it = pending.find(pkey); it != pending.end()) {
      existing = it->second;
    } else if (const Entry* e = find_entry(kind, p.key)) {
      existing = e->hash;
    }
    if (existing) {
      if (*existing == p.hash) {
        ++counts.deduplicated;
      } else {
        ++counts.conflicts;
        reject("conflicting payload for an already stored key");
      }
      continue;
    }
    pending.emplace(pkey, p.hash);
    batch.push_back(std::move(p));
    ++counts.accepted;
    if (batch.size() >= batch_size) {
      commit(kind, batch);
      pending.clear();
    }
  }
  if (in.bad()) throw Error(ErrorCode::IoError, "read error in ingest input");
  commit(kind, batch);
  return report;
}

IngestReport SnapStore::ingest(std::span<const AppSnapshot> snapshots) {
  std::stringstream ss;
  for (const auto& s : snapshots) ss << encode_line(s) << '\n';
  return ingest_lines(RecordKind::Snapshot, ss);
}

IngestReport SnapStore::ingest(std::span<const ReviewRecord> reviews) {
  std::stringstream ss;
  for (const auto& r : reviews) ss << encode_line(r) << '\n';
  return ingest_lines(RecordKind::Review, ss);
}

IngestReport SnapStore::ingest(std::span<const TopKObservation> observations) {
  std::stringstream ss;
  for (const auto& o : observations) ss << encode_line(o) << '\n';
  return ingest_lines(RecordKind::TopK, ss);
}

std::string SnapStore::put_manifest(const DatasetManifest& manifest) {
  std::lock_guard writer(writer_mutex_);
  {
    std::shared_lock lock(index_mutex_);
    if (manifest_) return *manifest_ == manifest ? "unchanged" : "conflict";
  }
  const auto tmp = dir_ / "manifest.json.tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << to_json(manifest).dump(2) << '\n';
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, dir_ / "manifest.json", ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot install manifest: " + ec.message());
  std::unique_lock lock(index_mutex_);
  manifest_ = manifest;
  return "written";
}

IngestReport SnapStore::ingest_dataset(const fs::path& data_dir) {
  if (!fs::is_directory(data_dir)) throw Error(ErrorCode::IoError, "no such data directory " + data_dir.string());
  IngestReport report;
  const auto manifest_path = data_dir / "manifest.json";
  if (fs::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    try {
      report.manifest_status = put_manifest(manifest_from_json(nlohmann::json::parse(in)));
    } catch (const nlohmann::json::exception& e) {
      report.manifest_status = "invalid";
      report.rejections.push_back({RecordKind::Snapshot, 0, std::string("manifest.json: ") + e.what()});
    } catch (const Error& e) {
      if (e.code() == ErrorCode::IoError) throw;
      report.manifest_status = "invalid";
      report.rejections.push_back({RecordKind::Snapshot, 0, std::string("manifest.json: ") + e.what()});
    }
  }
  const std::pair<RecordKind, const char*> logs[] = {
      {RecordKind::Snapshot, "snapshots.jsonl"}, {RecordKind::Review, "reviews.jsonl"}, {RecordKind::TopK, "topk.jsonl"}};
  for (const auto& [kind, name] : logs) {
    const auto path = data_dir / name;
    if (!fs::exists(path)) continue;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
    report.merge(ingest_lines(kind, in));
  }
  return report;
}

std::string SnapStore::read_line(int fd, const Entry& e) const {
  std::string line(e.length, '\0');
  std::size_t done = 0;
  while (done < line.size()) {
    const auto n = ::pread(fd, line.data() + done, line.size() - done, static_cast<off_t>(e.offset + done));
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw Error(ErrorCode::IoError, "short read in " + dir_.string());
    done += static_cast<std::size_t>(n);
  }
  return line;
}

AppSeries SnapStore::query_app_series(const AppId& app, TimeWindow window) const {
  window.check();
  AppSeries series{app, {}};
  std::vector<Entry> entries;
  {
    std::shared_lock lock(index_mutex_);
    auto it = snapshots_.find(app);
    if (it == snapshots_.end()) return series;
    const auto& index = it->second;
    for (auto jt = index.lower_bound(epoch_seconds(window.start));
         jt != index.end() && jt->first <= epoch_seconds(window.end); ++jt) {
      entries.push_back(jt->second);
    }
  }
  if (entries.empty()) return series;
  const ReadOnlyFile in(log_path(RecordKind::Snapshot));
  series.snapshots.reserve(entries.size());
  for (const auto& e : entries) series.snapshots.push_back(decode_snapshot_line(read_line(in.fd(), e)));
  return series;
}

RankedListSeries SnapStore::query_list_series(ListType type, TimeWindow window) const {
  window.check();
  std::vector<Entry> entries;
  {
    std::shared_lock lock(index_mutex_);
    const auto& index = topk_[list_index(type)];
    for (auto it = index.lower_bound(epoch_seconds(window.start));
         it != index.end() && it->first <= epoch_seconds(window.end); ++it) {
      entries.push_back(it->second);
    }
  }
  std::vector<TopKObservation> observations;
  if (!entries.empty()) {
    const ReadOnlyFile in(log_path(RecordKind::TopK));
    observations.reserve(entries.size());
    for (const auto& e : entries) observations.push_back(decode_topk_line(read_line(in.fd(), e)));
  }
  return RankedListSeries(type, std::move(observations));
}

std::vector<ReviewRecord> SnapStore::query_reviews(const AppId& app) const {
  std::vector<Entry> entries;
  {
    std::shared_lock lock(index_mutex_);
    auto it = reviews_.find(app);
    if (it == reviews_.end()) return {};
    for (const auto& [id, e] : it->second) entries.push_back(e);
  }
  const ReadOnlyFile in(log_path(RecordKind::Review));
  std::vector<ReviewRecord> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(decode_review_line(read_line(in.fd(), e)));
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.date != b.date ? a.date < b.date : a.review_id < b.review_id;
  });
  return out;
}

std::optional<AppSnapshot> SnapStore::latest_snapshot(const AppId& app) const {
  Entry entry;
  {
    std::shared_lock lock(index_mutex_);
    auto it = snapshots_.find(app);
    if (it == snapshots_.end() || it->second.empty()) return std::nullopt;
    entry = it->second.rbegin()->second;
  }
  const ReadOnlyFile in(log_path(RecordKind::Snapshot));
  return decode_snapshot_line(read_line(in.fd(), entry));
}

std::vector<AppId> SnapStore::apps() const {
  std::shared_lock lock(index_mutex_);
  std::vector<AppId> out;
  out.reserve(snapshots_.size());
  for (const auto& [app, index] : snapshots_) out.push_back(app);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<AppId> SnapStore::reviewed_apps() const {
  std::shared_lock lock(index_mutex_);
  std::vector<AppId> out;
  out.reserve(reviews_.size());
  for (const auto& [app, index] : reviews_) out.push_back(app);
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t SnapStore::review_count(const AppId& app) const {
  std::shared_lock lock(index_mutex_);
  auto it = reviews_.find(app);
  return it == reviews_.end() ? 0 : it->second.size();
}

std::size_t SnapStore::snapshot_count() const {
  std::shared_lock lock(index_mutex_);
  return n_snapshots_;
}

std::size_t SnapStore::review_count() const {
  std::shared_lock lock(index_mutex_);
  return n_reviews_;
}

std::size_t SnapStore::topk_count() const {
  std::shared_lock lock(index_mutex_);
  return n_topk_;
}

std::optional<DatasetManifest> SnapStore::manifest() const {
  std::shared_lock lock(index_mutex_);
  return manifest_;
}

}  // namespace marketpulse
