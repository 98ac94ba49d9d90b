#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "linkage/core.hpp"
#include "linkage/curves.hpp"
#include "linkage/random.hpp"
#include "linkage/solver.hpp"

namespace linkage {

inline constexpr double kRetrievalThreshold = 0.03;
inline constexpr std::size_t kRetrievalCount = 3;

using MechanismStore = std::unordered_map<std::uint64_t, Mechanism>;

/// Cheap shape summary used by the heuristic prefilter.
struct CurveDescriptor {
  static constexpr std::size_t kBins = 12;
  double height = 0.0;  // normalized bbox height; the width is always 1
  std::array<double, kBins> radial{};

  static CurveDescriptor of(std::span<const Vec2> pts) {
    CurveDescriptor d;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (auto p : pts) {
      lo = std::min(lo, p.y);
      hi = std::max(hi, p.y);
      const double r = std::min(distance(p, {0.5, 0.5}) / 0.75, 0.999999);
      d.radial[static_cast<std::size_t>(r * kBins)] += 1.0;
    }
    d.height = hi - lo;
    for (auto& b : d.radial) b /= static_cast<double>(pts.size());
    return d;
  }

  double distance_to(const CurveDescriptor& o) const {
    double s = std::abs(height - o.height);
    for (std::size_t i = 0; i < kBins; ++i) s += std::abs(radial[i] - o.radial[i]);
    return s;
  }
};

/// Curated curves plus the mechanisms behind them, scanned in a fixed
/// seeded order.
class Atlas {
 public:
  Atlas() = default;

  /// Builds a fresh scan order from `seed`.
  Atlas(std::vector<CurveRecord> records, MechanismStore mechanisms, std::uint64_t seed)
      : records_(std::move(records)), mechanisms_(std::move(mechanisms)), seed_(seed) {
    order_.resize(records_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    Rng rng = make_stream({seed, 0x61746c61ULL});
    // Fisher-Yates with our own index draws so the order is library-independent.
    for (std::size_t i = order_.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
      std::swap(order_[i - 1], order_[std::min(j, i - 1)]);
    }
    finish();
  }

  /// Restores a persisted atlas with its stored scan order.
  Atlas(std::vector<CurveRecord> records, MechanismStore mechanisms, std::uint64_t seed,
        std::vector<std::size_t> order)
      : records_(std::move(records)),
        mechanisms_(std::move(mechanisms)),
        seed_(seed),
        order_(std::move(order)) {
    std::vector<bool> seen(records_.size(), false);
    if (order_.size() != records_.size())
      throw Error(ErrorCode::Format, "scan order length does not match record count");
    for (auto i : order_) {
      if (i >= records_.size() || seen[i])
        throw Error(ErrorCode::Format, "scan order is not a permutation");
      seen[i] = true;
    }
    finish();
  }

  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  std::uint64_t seed() const noexcept { return seed_; }
  std::span<const std::size_t> order() const noexcept { return order_; }
  std::span<const CurveRecord> records() const noexcept { return records_; }
  const CurveRecord& record(std::size_t i) const { return records_[i]; }
  const MechanismStore& mechanisms() const noexcept { return mechanisms_; }
  const Mechanism& mechanism(std::uint64_t id) const { return mechanisms_.at(id); }
  const PointSoA& points(std::size_t i) const { return soa_[i]; }
  const CurveDescriptor& descriptor(std::size_t i) const { return descriptors_[i]; }

 private:
  void finish() {
    soa_.reserve(records_.size());
    descriptors_.reserve(records_.size());
    for (const auto& r : records_) {
      if (!mechanisms_.count(r.mechanism_id))
        throw Error(ErrorCode::Reference,
                    "curve references missing mechanism " + std::to_string(r.mechanism_id));
      if (r.joint >= mechanisms_.at(r.mechanism_id).size())
        throw Error(ErrorCode::Reference, "curve references a joint outside its mechanism");
      if (r.path.points.empty()) throw Error(ErrorCode::Format, "curve record without points");
      soa_.emplace_back(r.path.points);
      descriptors_.push_back(CurveDescriptor::of(r.path.points));
    }
  }

  std::vector<CurveRecord> records_;
  MechanismStore mechanisms_;
  std::uint64_t seed_ = 0;
  std::vector<std::size_t> order_;
  std::vector<PointSoA> soa_;
  std::vector<CurveDescriptor> descriptors_;
};

inline Atlas build_atlas(std::vector<CurveRecord> records, MechanismStore mechanisms,
                         std::uint64_t seed) {
  return Atlas(std::move(records), std::move(mechanisms), seed);
}

enum class ScanMode { Exact, Heuristic };

struct RetrievalOptions {
  std::size_t k = kRetrievalCount;
  double threshold = kRetrievalThreshold;
  ScanMode mode = ScanMode::Exact;
  std::size_t budget = 0;  // heuristic mode: candidates kept by the prefilter
  bool reduce = true;      // attach reduced mechanisms to hits
};

struct RetrievalHit {
  std::size_t record_index = 0;
  std::uint64_t mechanism_id = 0;
  std::uint32_t joint = 0;
  double distance = 0.0;
  bool above_threshold = false;  // padding from the best records seen
  std::optional<ReducedMechanism> reduced;
};

struct RetrievalResult {
  std::vector<RetrievalHit> hits;
  std::size_t scanned = 0;
  std::string diagnostic;
};

/// Candidate records in scan order. Exact mode (or budget >= size) keeps
/// every record; heuristic mode keeps the `budget` records whose descriptors
/// are closest to the query's.
inline std::vector<std::size_t> coarse_filter(const Atlas& atlas, const NormalizedPath& query,
                                              ScanMode mode, std::size_t budget) {
  std::vector<std::size_t> all(atlas.order().begin(), atlas.order().end());
  if (mode == ScanMode::Exact || budget >= atlas.size()) return all;
  const CurveDescriptor q = CurveDescriptor::of(query.points);
  std::vector<std::pair<double, std::size_t>> scored;  // (descriptor distance, scan position)
  scored.reserve(all.size());
  for (std::size_t pos = 0; pos < all.size(); ++pos)
    scored.emplace_back(q.distance_to(atlas.descriptor(all[pos])), pos);
  std::nth_element(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(budget),
                   scored.end());
  scored.resize(budget);
  std::vector<std::size_t> positions;
  for (const auto& s : scored) positions.push_back(s.second);
  std::sort(positions.begin(), positions.end());
  std::vector<std::size_t> out;
  for (auto pos : positions) out.push_back(all[pos]);
  return out;
}

/// Shuffle-and-scan retrieval.
///
/// Records are visited in the atlas scan order and collected while their
/// chamfer distance is below the threshold; the scan stops at k such hits.
/// If the scan runs out first, the best records seen pad the result and are
/// flagged above-threshold. Records that provably cannot enter the result are
/// abandoned early, which never changes the answer.
inline RetrievalResult retrieve(const Atlas& atlas, std::span<const Vec2> query_points,
                                const RetrievalOptions& opt = {}) {
  RetrievalResult out;
  if (atlas.empty()) {
    out.diagnostic = "atlas is empty";
    return out;
  }
  if (opt.k == 0) return out;
  const NormalizedPath query = looks_normalized(query_points)
                                   ? NormalizedPath{{query_points.begin(), query_points.end()}}
                                   : normalize(query_points);
  const PointSoA q(query.points);
  const auto candidates = coarse_filter(atlas, query, opt.mode, opt.budget);

  using Entry = std::pair<double, std::size_t>;  // (distance, record index)
  std::priority_queue<Entry> best;               // k smallest, max on top
  std::vector<Entry> hits;
  const double inf = std::numeric_limits<double>::infinity();
  for (std::size_t idx : candidates) {
    // Exact distances are needed below the threshold (hits) and below the
    // current k-th best (padding); anything beyond both can be abandoned.
    const double bound = best.size() < opt.k ? inf : std::max(best.top().first, opt.threshold);
    const double d = chamfer_bounded(q, atlas.points(idx), bound);
    ++out.scanned;
    if (d == inf) continue;
    if (d < opt.threshold) hits.emplace_back(d, idx);
    if (best.size() < opt.k) {
      best.emplace(d, idx);
    } else if (Entry{d, idx} < best.top()) {
      best.pop();
      best.emplace(d, idx);
    }
    if (hits.size() >= opt.k) break;
  }

  std::vector<Entry> chosen = hits;
  if (chosen.size() < opt.k) {
    std::vector<Entry> pool;
    while (!best.empty()) {
      pool.push_back(best.top());
      best.pop();
    }
    std::sort(pool.begin(), pool.end());
    for (const auto& e : pool) {
      if (chosen.size() >= opt.k) break;
      if (!(e.first < opt.threshold)) chosen.push_back(e);
    }
  }
  std::sort(chosen.begin(), chosen.end());

  for (const auto& [d, idx] : chosen) {
    const CurveRecord& r = atlas.record(idx);
    RetrievalHit h;
    h.record_index = idx;
    h.mechanism_id = r.mechanism_id;
    h.joint = r.joint;
    h.distance = d;
    h.above_threshold = !(d < opt.threshold);
    if (opt.reduce) {
      const Mechanism& m = atlas.mechanism(r.mechanism_id);
      h.reduced = reduce_mechanism(m, compile_plan(m), r.joint);
    }
    out.hits.push_back(std::move(h));
  }
  if (hits.empty()) out.diagnostic = "no record below threshold; showing best matches";
  return out;
}

/// Every record sorted by chamfer distance to the query, by exhaustive scan.
inline std::vector<std::pair<double, std::size_t>> brute_force_ranking(
    const Atlas& atlas, std::span<const Vec2> query_points) {
  const NormalizedPath query = looks_normalized(query_points)
                                   ? NormalizedPath{{query_points.begin(), query_points.end()}}
                                   : normalize(query_points);
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t i = 0; i < atlas.size(); ++i)
    all.emplace_back(chamfer(query.points, atlas.record(i).path.points), i);
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace linkage
