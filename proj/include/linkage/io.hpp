#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "linkage/atlas.hpp"
#include "linkage/core.hpp"
#include "linkage/curves.hpp"
#include "linkage/generator.hpp"
#include "linkage/solver.hpp"

namespace linkage::io {

using json = nlohmann::json;

inline constexpr const char* kFormatName = "linkage-records";
inline constexpr int kFormatVersion = 1;
inline constexpr const char* kShardExtension = ".jsonl";

// ---------------------------------------------------------------- records

struct MechanismRecord {
  std::uint64_t id = 0;
  Mechanism mechanism;
  bool operator==(const MechanismRecord&) const = default;
};

struct TrajectoryRecord {
  std::uint64_t mechanism_id = 0;
  Trajectory trajectory;
};

struct NegativeRecord {
  MechanismRecord mechanism;
  std::size_t locking_step = 0;
  std::size_t steps = 0;
};

/// Upper triangle of the adjacency, row-major, as a '0'/'1' string.
inline std::string encode_adjacency(const Mechanism& m) {
  std::string bits;
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = i + 1; j < m.size(); ++j) bits.push_back(m.connected(i, j) ? '1' : '0');
  return bits;
}

inline json point_json(Vec2 p) {
  if (!is_set(p)) return nullptr;
  return json::array({p.x, p.y});
}

inline Vec2 point_from_json(const json& j) {
  if (j.is_null()) return unset_point();
  if (!j.is_array() || j.size() != 2) throw Error(ErrorCode::Format, "point must be [x, y]");
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

inline json mechanism_json(const Mechanism& m) {
  json types = json::array();
  for (auto t : m.types()) types.push_back(static_cast<int>(t));
  json pos = json::array();
  for (auto p : m.positions()) pos.push_back(point_json(p));
  return json{{"n", m.size()}, {"adjacency", encode_adjacency(m)}, {"types", types},
              {"positions", pos}};
}

inline Mechanism mechanism_from_json(const json& j) {
  const std::size_t n = j.at("n").get<std::size_t>();
  const std::string bits = j.at("adjacency").get<std::string>();
  if (bits.size() != n * (n - 1) / 2 || n < 1)
    throw Error(ErrorCode::Format, "adjacency bit string has the wrong length");
  std::vector<std::uint8_t> adj(n * n, 0);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t jj = i + 1; jj < n; ++jj, ++k) {
      if (bits[k] != '0' && bits[k] != '1')
        throw Error(ErrorCode::Format, "adjacency bits must be '0' or '1'");
      adj[i * n + jj] = adj[jj * n + i] = bits[k] == '1';
    }
  }
  const auto& tj = j.at("types");
  const auto& pj = j.at("positions");
  if (tj.size() != n || pj.size() != n)
    throw Error(ErrorCode::Format, "types/positions length differs from n");
  std::vector<JointType> types;
  for (const auto& t : tj) {
    const int code = t.get<int>();
    if (code < 0 || code > 2) throw Error(ErrorCode::Format, "joint type code must be 0, 1 or 2");
    types.push_back(static_cast<JointType>(code));
  }
  std::vector<Vec2> pos;
  for (const auto& p : pj) pos.push_back(point_from_json(p));
  return Mechanism(std::move(adj), std::move(types), std::move(pos));
}

inline json points_json(std::span<const Vec2> pts) {
  json flat = json::array();
  for (auto p : pts) {
    flat.push_back(p.x);
    flat.push_back(p.y);
  }
  return flat;
}

inline std::vector<Vec2> points_from_json(const json& flat) {
  if (!flat.is_array() || flat.size() % 2 != 0)
    throw Error(ErrorCode::Format, "points must be a flat [x0, y0, x1, y1, ...] array");
  std::vector<Vec2> out(flat.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = {flat[2 * i].get<double>(), flat[2 * i + 1].get<double>()};
  return out;
}

inline json trajectory_json(const Trajectory& t) {
  json joints = json::array();
  for (std::size_t v = 0; v < t.joints(); ++v) joints.push_back(points_json(t.path(v)));
  return json{{"T", t.steps()}, {"n", t.joints()}, {"points", joints}};
}

inline Trajectory trajectory_from_json(const json& j) {
  const std::size_t T = j.at("T").get<std::size_t>();
  const std::size_t n = j.at("n").get<std::size_t>();
  const auto& joints = j.at("points");
  if (joints.size() != n) throw Error(ErrorCode::Format, "trajectory joint count mismatch");
  Trajectory t(n, T);
  for (std::size_t v = 0; v < n; ++v) {
    const auto pts = points_from_json(joints[v]);
    if (pts.size() != T) throw Error(ErrorCode::Format, "trajectory step count mismatch");
    for (std::size_t s = 0; s < T; ++s) t.at(v, s) = pts[s];
  }
  return t;
}

/// Serialization traits, one per record kind.
template <typename Record>
struct RecordTraits;

template <>
struct RecordTraits<MechanismRecord> {
  static constexpr const char* kind = "mechanism";
  static json to_json(const MechanismRecord& r) {
    json j = mechanism_json(r.mechanism);
    j["id"] = r.id;
    return j;
  }
  static MechanismRecord from_json(const json& j) {
    return {j.at("id").get<std::uint64_t>(), mechanism_from_json(j)};
  }
};

template <>
struct RecordTraits<TrajectoryRecord> {
  static constexpr const char* kind = "trajectory";
  static json to_json(const TrajectoryRecord& r) {
    json j = trajectory_json(r.trajectory);
    j["mechanism_id"] = r.mechanism_id;
    return j;
  }
  static TrajectoryRecord from_json(const json& j) {
    return {j.at("mechanism_id").get<std::uint64_t>(), trajectory_from_json(j)};
  }
};

template <>
struct RecordTraits<CurveRecord> {
  static constexpr const char* kind = "curve";
  static json to_json(const CurveRecord& r) {
    return json{{"mechanism_id", r.mechanism_id}, {"joint", r.joint}, {"is_arc", r.is_arc},
                {"is_circle", r.is_circle}, {"points", points_json(r.path.points)}};
  }
  static CurveRecord from_json(const json& j) {
    CurveRecord r;
    r.mechanism_id = j.at("mechanism_id").get<std::uint64_t>();
    r.joint = j.at("joint").get<std::uint32_t>();
    r.is_arc = j.at("is_arc").get<bool>();
    r.is_circle = j.at("is_circle").get<bool>();
    r.path.points = points_from_json(j.at("points"));
    return r;
  }
};

template <>
struct RecordTraits<NegativeRecord> {
  static constexpr const char* kind = "negative";
  static json to_json(const NegativeRecord& r) {
    return json{{"mechanism", RecordTraits<MechanismRecord>::to_json(r.mechanism)},
                {"locking_step", r.locking_step},
                {"steps", r.steps}};
  }
  static NegativeRecord from_json(const json& j) {
    return {RecordTraits<MechanismRecord>::from_json(j.at("mechanism")),
            j.at("locking_step").get<std::size_t>(), j.at("steps").get<std::size_t>()};
  }
};

// ---------------------------------------------------------------- streams

inline std::string header_line(const char* kind) {
  return json{{"format", kFormatName}, {"version", kFormatVersion}, {"kind", kind}}.dump();
}

/// One header line, then one JSON object per line.
template <typename Record>
class RecordWriter {
 public:
  explicit RecordWriter(std::ostream& out) : out_(out) {
    out_ << header_line(RecordTraits<Record>::kind) << '\n';
  }

  void write(const Record& r) {
    out_ << RecordTraits<Record>::to_json(r).dump() << '\n';
    if (!out_) throw Error(ErrorCode::Io, "write failed");
    ++count_;
  }

  std::size_t count() const noexcept { return count_; }

 private:
  std::ostream& out_;
  std::size_t count_ = 0;
};

/// Streaming reader. A final line without a newline that fails to parse is
/// treated as an interrupted append and reported via truncated().
template <typename Record>
class RecordReader {
 public:
  explicit RecordReader(std::istream& in, std::string source = "<stream>")
      : in_(in), source_(std::move(source)) {
    std::string line;
    if (!std::getline(in_, line))
      throw Error(ErrorCode::Format, source_ + ": missing header line");
    ++line_no_;
    json h;
    try {
      h = json::parse(line);
    } catch (const json::exception&) {
      throw Error(ErrorCode::Format, source_ + ": header line is not JSON");
    }
    if (!h.is_object() || h.value("format", "") != kFormatName)
      throw Error(ErrorCode::Format, source_ + ": not a " + std::string(kFormatName) + " file");
    if (!h.contains("version") || !h["version"].is_number_integer() ||
        h["version"].get<int>() != kFormatVersion)
      throw Error(ErrorCode::Version, source_ + ": unsupported schema version " +
                                          (h.contains("version") ? h["version"].dump() : "?") +
                                          " (expected " + std::to_string(kFormatVersion) + ")");
    if (h.value("kind", "") != RecordTraits<Record>::kind)
      throw Error(ErrorCode::Format, source_ + ": holds '" + h.value("kind", "") +
                                         "' records, expected '" + RecordTraits<Record>::kind +
                                         "'");
  }

  /// Next record, or nullopt at end of input.
  std::optional<Record> next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      const bool complete = !in_.eof();
      if (line.empty()) continue;
      try {
        return RecordTraits<Record>::from_json(json::parse(line));
      } catch (const std::exception& e) {
        if (!complete) {
          truncated_ = true;
          return std::nullopt;
        }
        throw Error(ErrorCode::Format,
                    source_ + ":" + std::to_string(line_no_) + ": malformed record: " + e.what());
      }
    }
    return std::nullopt;
  }

  bool truncated() const noexcept { return truncated_; }
  std::size_t line() const noexcept { return line_no_; }

 private:
  std::istream& in_;
  std::string source_;
  std::size_t line_no_ = 0;
  bool truncated_ = false;
};

template <typename Record>
std::size_t write_records(std::ostream& out, std::span<const Record> records) {
  RecordWriter<Record> w(out);
  for (const auto& r : records) w.write(r);
  return w.count();
}

template <typename Record>
struct ReadResult {
  std::vector<Record> records;
  bool truncated = false;
};

template <typename Record>
ReadResult<Record> read_records(std::istream& in, const std::string& source = "<stream>") {
  RecordReader<Record> reader(in, source);
  ReadResult<Record> out;
  while (auto r = reader.next()) out.records.push_back(std::move(*r));
  out.truncated = reader.truncated();
  return out;
}

// ---------------------------------------------------------------- shards

/// Shard files for `kind` in a directory, sorted by name. A regular file
/// path is returned as a single shard.
inline std::vector<std::filesystem::path> shard_files(const std::filesystem::path& path,
                                                      const std::string& prefix) {
  namespace fs = std::filesystem;
  if (fs::is_regular_file(path)) return {path};
  if (!fs::is_directory(path))
    throw Error(ErrorCode::Io, "no such file or directory: " + path.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(path)) {
    const std::string name = e.path().filename().string();
    if (e.is_regular_file() && name.rfind(prefix, 0) == 0 &&
        e.path().extension() == kShardExtension)
      out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::string shard_name(const std::string& prefix, std::size_t shard) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "-%05zu", shard);
  return prefix + buf + kShardExtension;
}

/// Visits every record of every shard in order; returns the record count.
template <typename Record>
std::size_t for_each_record(const std::filesystem::path& path, const std::string& prefix,
                            const std::function<void(Record&&)>& fn,
                            bool* any_truncated = nullptr) {
  std::size_t count = 0;
  for (const auto& file : shard_files(path, prefix)) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + file.string());
    RecordReader<Record> reader(in, file.string());
    while (auto r = reader.next()) {
      fn(std::move(*r));
      ++count;
    }
    if (reader.truncated() && any_truncated) *any_truncated = true;
  }
  return count;
}

// ---------------------------------------------------------------- stats

inline json stats_json(const GenerationStats& stats) {
  json sizes = json::object();
  for (const auto& [n, s] : stats.by_size) {
    sizes[std::to_string(n)] = json{{"searches", s.attempts.size() + s.failed_searches},
                                    {"mean_attempts", s.mean_attempts()},
                                    {"median_attempts", s.median_attempts()},
                                    {"simulated", s.simulated},
                                    {"accepted", s.accepted},
                                    {"locking", s.locking},
                                    {"failed_searches", s.failed_searches},
                                    {"rejection_rate", s.rejection_rate()}};
  }
  const SizeStats t = stats.totals();
  return json{{"by_size", sizes},
              {"simulated", t.simulated},
              {"accepted", t.accepted},
              {"locking", t.locking},
              {"mean_attempts", t.mean_attempts()},
              {"rejection_rate", t.rejection_rate()},
              {"topologies_discarded", stats.topologies_discarded}};
}

// ---------------------------------------------------------------- atlas

inline constexpr const char* kAtlasManifest = "atlas.json";
inline constexpr const char* kCurvePrefix = "curves";
inline constexpr const char* kMechanismPrefix = "mechanisms";
inline constexpr const char* kTrajectoryPrefix = "trajectories";
inline constexpr const char* kNegativePrefix = "negatives";

/// Writes curves, the mechanisms they reference, and the scan order.
inline void save_atlas(const Atlas& atlas, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream out(dir / shard_name(kCurvePrefix, 0));
    RecordWriter<CurveRecord> w(out);
    for (const auto& r : atlas.records()) w.write(r);
  }
  {
    std::vector<std::uint64_t> ids;
    for (const auto& [id, m] : atlas.mechanisms()) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    std::ofstream out(dir / shard_name(kMechanismPrefix, 0));
    RecordWriter<MechanismRecord> w(out);
    for (auto id : ids) w.write({id, atlas.mechanism(id)});
  }
  json manifest{{"format", kFormatName},
                {"version", kFormatVersion},
                {"kind", "atlas"},
                {"seed", atlas.seed()},
                {"size", atlas.size()},
                {"order", std::vector<std::size_t>(atlas.order().begin(), atlas.order().end())}};
  std::ofstream(dir / kAtlasManifest) << manifest.dump() << '\n';
}

/// Loads an atlas; mechanisms come from `mechanisms_dir` when given.
inline Atlas load_atlas(const std::filesystem::path& dir,
                        const std::filesystem::path& mechanisms_dir = {}) {
  std::ifstream in(dir / kAtlasManifest);
  if (!in) throw Error(ErrorCode::Io, "cannot open atlas manifest in " + dir.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, std::string("atlas manifest: ") + e.what());
  }
  if (manifest.value("format", "") != kFormatName || manifest.value("kind", "") != "atlas")
    throw Error(ErrorCode::Format, "not an atlas manifest");
  if (manifest.value("version", -1) != kFormatVersion)
    throw Error(ErrorCode::Version, "unsupported atlas manifest version");
  std::vector<CurveRecord> records;
  for_each_record<CurveRecord>(dir, kCurvePrefix,
                               [&](CurveRecord&& r) { records.push_back(std::move(r)); });
  MechanismStore store;
  for_each_record<MechanismRecord>(mechanisms_dir.empty() ? dir : mechanisms_dir, kMechanismPrefix,
                                   [&](MechanismRecord&& r) {
    store.emplace(r.id, std::move(r.mechanism));
  });
  return Atlas(std::move(records), std::move(store), manifest.at("seed").get<std::uint64_t>(),
               manifest.at("order").get<std::vector<std::size_t>>());
}

/// Query point lists: a JSON array of [x, y] pairs, a JSON object with a
/// "points" member, or plain text with one "x y" (or "x,y") pair per line.
inline std::vector<Vec2> parse_point_list(const std::string& text) {
  std::vector<Vec2> out;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && (text[first] == '[' || text[first] == '{')) {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::Format, std::string("point list: ") + e.what());
    }
    const json& arr = j.is_object() ? j.at("points") : j;
    if (!arr.is_array()) throw Error(ErrorCode::Format, "point list must be an array");
    if (!arr.empty() && arr[0].is_number()) return points_from_json(arr);
    for (const auto& p : arr) out.push_back(point_from_json(p));
    return out;
  }
  std::istringstream in(text);
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::replace(line.begin(), line.end(), ',', ' ');
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    double x, y;
    if (!(ls >> x >> y)) throw Error(ErrorCode::Format, "point list line " + std::to_string(no));
    out.push_back({x, y});
  }
  return out;
}

}  // namespace linkage::io
