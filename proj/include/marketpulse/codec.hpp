#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

#include "marketpulse/model.hpp"

namespace marketpulse {

/// Dataset-level metadata. The currency is recorded here once; records carry
/// integer cents only.
struct DatasetManifest {
  std::string name;
  std::string currency = "USD";
  Date observation_start{};
  Date observation_end{};
  std::string snapshot_cadence_hint;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

// JSONL record codecs. Encoders emit one compact line (no trailing newline)
// with keys in a fixed order; decoders accept exactly the documented field
// set and throw Error(ParseError) naming the offending field otherwise.
// Decoders check types and shapes only; value-level invariants belong to the
// validate_* functions.

nlohmann::json to_json(const AppSnapshot& s);
nlohmann::json to_json(const ReviewRecord& r);
nlohmann::json to_json(const TopKObservation& o);
nlohmann::json to_json(const DatasetManifest& m);

AppSnapshot snapshot_from_json(const nlohmann::json& j);
ReviewRecord review_from_json(const nlohmann::json& j);
TopKObservation topk_from_json(const nlohmann::json& j);
DatasetManifest manifest_from_json(const nlohmann::json& j);

std::string encode_line(const AppSnapshot& s);
std::string encode_line(const ReviewRecord& r);
std::string encode_line(const TopKObservation& o);

AppSnapshot decode_snapshot_line(std::string_view line);
ReviewRecord decode_review_line(std::string_view line);
TopKObservation decode_topk_line(std::string_view line);

}  // namespace marketpulse
