#include "marketpulse/codec.hpp"

#include <algorithm>
#include <charconv>
#include <initializer_list>

#include "marketpulse/error.hpp"

namespace marketpulse {

using nlohmann::json;

namespace {

// ordered_json keeps insertion order so lines come out in the documented
// field order.
using ordered = nlohmann::ordered_json;

void require_exact_fields(const json& j, std::initializer_list<std::string_view> fields) {
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "record is not a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(fields.begin(), fields.end(), it.key()) == fields.end()) {
      throw Error(ErrorCode::ParseError, "unknown field '" + it.key() + "'");
    }
  }
  for (auto f : fields) {
    if (!j.contains(f)) throw Error(ErrorCode::ParseError, "missing field '" + std::string(f) + "'");
  }
}

const json& field(const json& j, const char* name) { return j.at(name); }

std::string get_string(const json& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_string()) throw Error(ErrorCode::ParseError, std::string("field '") + name + "' must be a string");
  return v.get<std::string>();
}

std::int64_t get_int(const json& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_number_integer()) throw Error(ErrorCode::ParseError, std::string("field '") + name + "' must be an integer");
  return v.get<std::int64_t>();
}

double get_number(const json& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_number()) throw Error(ErrorCode::ParseError, std::string("field '") + name + "' must be a number");
  return v.get<double>();
}

bool get_bool(const json& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_boolean()) throw Error(ErrorCode::ParseError, std::string("field '") + name + "' must be a boolean");
  return v.get<bool>();
}

AppId get_app(const json& j, const char* name) {
  auto s = get_string(j, name);
  if (!AppId::is_valid(s)) throw Error(ErrorCode::ParseError, std::string("field '") + name + "' is not a valid app id");
  return AppId(std::move(s));
}

Date get_date(const json& j, const char* name) {
  try {
    return parse_date(get_string(j, name));
  } catch (const Error& e) {
    throw Error(ErrorCode::ParseError, std::string("field '") + name + "': " + e.what());
  }
}

json parse_line(std::string_view line) {
  try {
    return json::parse(line.begin(), line.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, std::string("invalid JSON: ") + e.what());
  }
}

template <typename J>
J snapshot_json(const AppSnapshot& s) {
  J perms = J::array();
  for (const auto& p : s.permissions) perms.push_back(p);
  J j;
  j["app"] = s.app.str();
  j["fetch_time"] = epoch_seconds(s.fetch_time);
  j["title"] = s.title;
  j["developer"] = s.developer;
  j["category"] = s.category;
  j["price_cents"] = s.price_cents;
  j["free"] = s.free;
  j["downloads_lo"] = s.downloads.lo;
  j["downloads_hi"] = s.downloads.hi;
  j["rating_avg"] = s.rating_avg;
  j["rating_count"] = s.rating_count;
  j["version"] = s.version;
  j["last_updated"] = format_date(s.last_updated);
  j["size_bytes"] = s.size_bytes;
  j["permissions"] = std::move(perms);
  return j;
}

template <typename J>
J review_json(const ReviewRecord& r) {
  J j;
  j["app"] = r.app.str();
  j["review_id"] = r.review_id;
  j["reviewer_id"] = r.reviewer_id;
  j["date"] = format_date(r.date);
  j["rating"] = r.rating;
  j["title"] = r.title;
  j["text"] = r.text;
  return j;
}

template <typename J>
J topk_json(const TopKObservation& o) {
  J ranking = J::array();
  for (const auto& id : o.ranking) ranking.push_back(id.str());
  J j;
  j["list_type"] = std::string(to_string(o.list_type));
  j["fetch_time"] = epoch_seconds(o.fetch_time);
  j["ranking"] = std::move(ranking);
  return j;
}

std::string dump_line(const ordered& j) { return j.dump(-1, ' ', false, ordered::error_handler_t::replace); }

// Fast path for lines in the encoder's own layout: fixed key order, no
// whitespace, no escapes, ASCII only. Anything else returns nullopt and goes
// through the full parser, which owns the error messages.
class FlatCursor {
 public:
  explicit FlatCursor(std::string_view s) : s_(s) {}

  bool lit(std::string_view t) {
    if (s_.substr(i_, t.size()) != t) return false;
    i_ += t.size();
    return true;
  }
  bool key(std::string_view k) {
    return i_ < s_.size() && s_[i_++] == '"' && lit(k) && lit("\":");
  }
  std::optional<std::string_view> str() {
    if (i_ >= s_.size() || s_[i_] != '"') return std::nullopt;
    const auto b = ++i_;
    for (; i_ < s_.size(); ++i_) {
      const auto c = static_cast<unsigned char>(s_[i_]);
      if (c == '"') return s_.substr(b, i_++ - b);
      if (c == '\\' || c < 0x20 || c >= 0x80) return std::nullopt;
    }
    return std::nullopt;
  }
  std::optional<std::int64_t> integer() {
    const auto b = i_;
    if (i_ < s_.size() && s_[i_] == '-') ++i_;
    const auto d = i_;
    while (i_ < s_.size() && s_[i_] >= '0' && s_[i_] <= '9') ++i_;
    if (i_ == d || (s_[d] == '0' && i_ - d > 1)) return std::nullopt;
    if (i_ < s_.size() && (s_[i_] == '.' || s_[i_] == 'e' || s_[i_] == 'E')) return std::nullopt;
    std::int64_t v = 0;
    const auto r = std::from_chars(s_.data() + b, s_.data() + i_, v);
    if (r.ec != std::errc() || r.ptr != s_.data() + i_) return std::nullopt;
    return v;
  }
  std::optional<double> number() {
    const auto b = i_;
    if (i_ < s_.size() && s_[i_] == '-') ++i_;
    const auto d = i_;
    while (i_ < s_.size() && s_[i_] >= '0' && s_[i_] <= '9') ++i_;
    if (i_ == d || (s_[d] == '0' && i_ - d > 1)) return std::nullopt;
    if (i_ < s_.size() && s_[i_] == '.') {
      const auto f = ++i_;
      while (i_ < s_.size() && s_[i_] >= '0' && s_[i_] <= '9') ++i_;
      if (i_ == f) return std::nullopt;
    }
    if (i_ < s_.size() && (s_[i_] == 'e' || s_[i_] == 'E')) {
      ++i_;
      if (i_ < s_.size() && (s_[i_] == '+' || s_[i_] == '-')) ++i_;
      const auto e = i_;
      while (i_ < s_.size() && s_[i_] >= '0' && s_[i_] <= '9') ++i_;
      if (i_ == e) return std::nullopt;
    }
    double v = 0;
    const auto r = std::from_chars(s_.data() + b, s_.data() + i_, v);
    if (r.ec != std::errc() || r.ptr != s_.data() + i_) return std::nullopt;
    return v;
  }
  std::optional<bool> boolean() {
    if (lit("true")) return true;
    if (lit("false")) return false;
    return std::nullopt;
  }
  bool at_end() const { return i_ == s_.size(); }

 private:
  std::string_view s_;
  std::size_t i_ = 0;
};

std::optional<AppSnapshot> fast_decode_snapshot(std::string_view line) {
  FlatCursor c(line);
  AppSnapshot s;
  if (!c.lit("{") || !c.key("app")) return std::nullopt;
  const auto app = c.str();
  if (!app || !AppId::is_valid(*app)) return std::nullopt;
  s.app = AppId(std::string(*app));
  std::optional<std::int64_t> i;
  std::optional<std::string_view> t;
  if (!c.lit(",") || !c.key("fetch_time") || !(i = c.integer())) return std::nullopt;
  s.fetch_time = timestamp_from_epoch(*i);
  if (!c.lit(",") || !c.key("title") || !(t = c.str())) return std::nullopt;
  s.title = *t;
  if (!c.lit(",") || !c.key("developer") || !(t = c.str())) return std::nullopt;
  s.developer = *t;
  if (!c.lit(",") || !c.key("category") || !(t = c.str())) return std::nullopt;
  s.category = *t;
  if (!c.lit(",") || !c.key("price_cents") || !(i = c.integer())) return std::nullopt;
  s.price_cents = *i;
  std::optional<bool> b;
  if (!c.lit(",") || !c.key("free") || !(b = c.boolean())) return std::nullopt;
  s.free = *b;
  std::optional<std::int64_t> lo, hi;
  if (!c.lit(",") || !c.key("downloads_lo") || !(lo = c.integer())) return std::nullopt;
  if (!c.lit(",") || !c.key("downloads_hi") || !(hi = c.integer())) return std::nullopt;
  s.downloads = DownloadBucket{*lo, *hi};
  std::optional<double> r;
  if (!c.lit(",") || !c.key("rating_avg") || !(r = c.number())) return std::nullopt;
  s.rating_avg = *r;
  if (!c.lit(",") || !c.key("rating_count") || !(i = c.integer())) return std::nullopt;
  s.rating_count = *i;
  if (!c.lit(",") || !c.key("version") || !(t = c.str())) return std::nullopt;
  s.version = *t;
  if (!c.lit(",") || !c.key("last_updated") || !(t = c.str())) return std::nullopt;
  try {
    s.last_updated = parse_date(*t);
  } catch (const Error&) {
    return std::nullopt;
  }
  if (!c.lit(",") || !c.key("size_bytes") || !(i = c.integer())) return std::nullopt;
  s.size_bytes = *i;
  if (!c.lit(",") || !c.key("permissions") || !c.lit("[")) return std::nullopt;
  if (!c.lit("]")) {
    do {
      if (!(t = c.str()) || !s.permissions.insert(std::string(*t)).second) return std::nullopt;
    } while (c.lit(","));
    if (!c.lit("]")) return std::nullopt;
  }
  if (!c.lit("}") || !c.at_end()) return std::nullopt;
  return s;
}

}  // namespace

json to_json(const AppSnapshot& s) { return snapshot_json<json>(s); }
json to_json(const ReviewRecord& r) { return review_json<json>(r); }
json to_json(const TopKObservation& o) { return topk_json<json>(o); }

json to_json(const DatasetManifest& m) {
  return json{{"name", m.name},
              {"currency", m.currency},
              {"observation_start", format_date(m.observation_start)},
              {"observation_end", format_date(m.observation_end)},
              {"snapshot_cadence_hint", m.snapshot_cadence_hint}};
}

AppSnapshot snapshot_from_json(const json& j) {
  require_exact_fields(j, {"app", "fetch_time", "title", "developer", "category", "price_cents", "free", "downloads_lo",
                           "downloads_hi", "rating_avg", "rating_count", "version", "last_updated", "size_bytes",
                           "permissions"});
  AppSnapshot s;
  s.app = get_app(j, "app");
  s.fetch_time = timestamp_from_epoch(get_int(j, "fetch_time"));
  s.title = get_string(j, "title");
  s.developer = get_string(j, "developer");
  s.category = get_string(j, "category");
  s.price_cents = get_int(j, "price_cents");
  s.free = get_bool(j, "free");
  s.downloads = DownloadBucket{get_int(j, "downloads_lo"), get_int(j, "downloads_hi")};
  s.rating_avg = get_number(j, "rating_avg");
  s.rating_count = get_int(j, "rating_count");
  s.version = get_string(j, "version");
  s.last_updated = get_date(j, "last_updated");
  s.size_bytes = get_int(j, "size_bytes");
  const auto& perms = j.at("permissions");
  if (!perms.is_array()) throw Error(ErrorCode::ParseError, "field 'permissions' must be an array");
  for (const auto& p : perms) {
    if (!p.is_string()) throw Error(ErrorCode::ParseError, "field 'permissions' must hold strings");
    if (!s.permissions.insert(p.get<std::string>()).second) {
      throw Error(ErrorCode::ParseError, "duplicate permission '" + p.get<std::string>() + "'");
    }
  }
  return s;
}

ReviewRecord review_from_json(const json& j) {
  require_exact_fields(j, {"app", "review_id", "reviewer_id", "date", "rating", "title", "text"});
  ReviewRecord r;
  r.app = get_app(j, "app");
  r.review_id = get_string(j, "review_id");
  r.reviewer_id = get_string(j, "reviewer_id");
  r.date = get_date(j, "date");
  const auto rating = get_int(j, "rating");
  if (rating < 1 || rating > 5) throw Error(ErrorCode::ParseError, "rating out of range");
  r.rating = static_cast<int>(rating);
  r.title = get_string(j, "title");
  r.text = get_string(j, "text");
  return r;
}

TopKObservation topk_from_json(const json& j) {
  require_exact_fields(j, {"list_type", "fetch_time", "ranking"});
  TopKObservation o;
  const auto type = parse_list_type(get_string(j, "list_type"));
  if (!type) throw Error(ErrorCode::ParseError, "unknown list_type '" + get_string(j, "list_type") + "'");
  o.list_type = *type;
  o.fetch_time = timestamp_from_epoch(get_int(j, "fetch_time"));
  const auto& ranking = j.at("ranking");
  if (!ranking.is_array()) throw Error(ErrorCode::ParseError, "field 'ranking' must be an array");
  o.ranking.reserve(ranking.size());
  for (const auto& id : ranking) {
    if (!id.is_string() || !AppId::is_valid(id.get<std::string>())) {
      throw Error(ErrorCode::ParseError, "field 'ranking' must hold valid app ids");
    }
    o.ranking.emplace_back(id.get<std::string>());
  }
  return o;
}

DatasetManifest manifest_from_json(const json& j) {
  require_exact_fields(j, {"name", "currency", "observation_start", "observation_end", "snapshot_cadence_hint"});
  DatasetManifest m;
  m.name = get_string(j, "name");
  m.currency = get_string(j, "currency");
  if (m.currency.size() != 3 || !std::all_of(m.currency.begin(), m.currency.end(), [](char c) { return c >= 'A' && c <= 'Z'; })) {
    throw Error(ErrorCode::ParseError, "currency must be a three-letter ISO-4217 code");
  }
  m.observation_start = get_date(j, "observation_start");
  m.observation_end = get_date(j, "observation_end");
  if (m.observation_end < m.observation_start) {
    throw Error(ErrorCode::ParseError, "observation_start after observation_end");
  }
  m.snapshot_cadence_hint = get_string(j, "snapshot_cadence_hint");
  return m;
}

std::string encode_line(const AppSnapshot& s) { return dump_line(snapshot_json<ordered>(s)); }
std::string encode_line(const ReviewRecord& r) { return dump_line(review_json<ordered>(r)); }
std::string encode_line(const TopKObservation& o) { return dump_line(topk_json<ordered>(o)); }

AppSnapshot decode_snapshot_line(std::string_view line) {
  if (auto fast = fast_decode_snapshot(line)) return std::move(*fast);
  return snapshot_from_json(parse_line(line));
}
ReviewRecord decode_review_line(std::string_view line) { return review_from_json(parse_line(line)); }
TopKObservation decode_topk_line(std::string_view line) { return topk_from_json(parse_line(line)); }

}  // namespace marketpulse
