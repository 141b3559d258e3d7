#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "marketpulse/codec.hpp"
#include "marketpulse/series.hpp"

namespace marketpulse {

enum class RecordKind { Snapshot, Review, TopK };

std::string_view to_string(RecordKind kind) noexcept;

struct IngestRejection {
  RecordKind kind = RecordKind::Snapshot;
  std::size_t line = 0;  // 1-based line in the input stream
  std::string reason;
};

struct IngestCounts {
  std::size_t accepted = 0;
  std::size_t deduplicated = 0;
  std::size_t rejected = 0;  // includes conflicts
  std::size_t conflicts = 0;
};

struct IngestReport {
  IngestCounts snapshots;
  IngestCounts reviews;
  IngestCounts topk;
  std::vector<IngestRejection> rejections;
  std::string manifest_status = "absent";  // absent | written | unchanged | conflict | invalid

  IngestCounts& counts(RecordKind kind);
  const IngestCounts& counts(RecordKind kind) const;
  void merge(const IngestReport& other);
  nlohmann::json to_json() const;
};

/// Append-log store: snapshots.jsonl, reviews.jsonl and topk.jsonl plus
/// manifest.json in one directory. The in-memory index (entity key -> byte
/// range of its committed line) is rebuilt on open.
///
/// One ingest at a time (in-process mutex plus an advisory file lock);
/// queries may run concurrently with each other and with an ingest, and see
/// the batches committed before they took the index lock.
class SnapStore {
 public:
  /// Opens (creating if needed) the store directory. A torn final line left
  /// by an interrupted write is truncated away.
  explicit SnapStore(std::filesystem::path dir);
  SnapStore(const SnapStore&) = delete;
  SnapStore& operator=(const SnapStore&) = delete;

  const std::filesystem::path& dir() const noexcept { return dir_; }

  /// Ingests `data_dir`/{snapshots,reviews,topk}.jsonl and manifest.json,
  /// whichever exist.
  IngestReport ingest_dataset(const std::filesystem::path& data_dir);
  /// Ingests JSONL lines of one record kind. Commits every `batch_size`
  /// accepted records; on I/O failure throws Error(IoError) with everything
  /// up to the last committed batch in place.
  IngestReport ingest_lines(RecordKind kind, std::istream& in, std::size_t batch_size = 4096);

  IngestReport ingest(std::span<const AppSnapshot> snapshots);
  IngestReport ingest(std::span<const ReviewRecord> reviews);
  IngestReport ingest(std::span<const TopKObservation> observations);
  /// Returns "written", "unchanged" or "conflict" (an existing, different
  /// manifest is kept).
  std::string put_manifest(const DatasetManifest& manifest);

  /// Throws Error(InvalidWindow) if window.end < window.start. Unknown apps
  /// yield an empty series.
  AppSeries query_app_series(const AppId& app, TimeWindow window = TimeWindow::all()) const;
  RankedListSeries query_list_series(ListType type, TimeWindow window = TimeWindow::all()) const;
  /// Reviews of one app ordered by (date, review_id).
  std::vector<ReviewRecord> query_reviews(const AppId& app) const;
  std::optional<AppSnapshot> latest_snapshot(const AppId& app) const;

  std::vector<AppId> apps() const;
  std::vector<AppId> reviewed_apps() const;
  std::size_t review_count(const AppId& app) const;
  std::size_t snapshot_count() const;
  std::size_t review_count() const;
  std::size_t topk_count() const;
  std::optional<DatasetManifest> manifest() const;

 private:
  struct Entry {
    std::uint64_t offset = 0;
    std::uint32_t length = 0;
    std::uint64_t hash = 0;
  };
  using TimeIndex = std::map<std::int64_t, Entry>;

  struct Key {
    AppId app;
    std::int64_t time = 0;
    std::string review_id;
    ListType list = ListType::Free;
  };
  struct PendingLine {
    Key key;
    std::string line;
    std::uint64_t hash = 0;
  };

  std::filesystem::path log_path(RecordKind kind) const;
  void load_log(RecordKind kind);
  /// Looks up an existing entry by the composite key used by the log.
  const Entry* find_entry(RecordKind kind, const Key& key) const;
  void index_entry(RecordKind kind, const Key& key, const Entry& entry);
  static Key key_of_line(RecordKind kind, std::string_view line);
  void commit(RecordKind kind, std::vector<PendingLine>& batch);
  std::string read_line(int fd, const Entry& e) const;

  std::filesystem::path dir_;
  mutable std::shared_mutex index_mutex_;
  std::mutex writer_mutex_;

  std::unordered_map<AppId, TimeIndex> snapshots_;
  std::unordered_map<AppId, std::map<std::string, Entry>> reviews_;
  std::array<TimeIndex, kAllListTypes.size()> topk_;
  std::optional<DatasetManifest> manifest_;
  std::size_t n_snapshots_ = 0;
  std::size_t n_reviews_ = 0;
  std::size_t n_topk_ = 0;
};

/// FNV-1a 64-bit; stable across platforms and runs.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

}  // namespace marketpulse
