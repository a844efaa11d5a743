#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "cfrec/errors.hpp"
#include "cfrec/feature_space.hpp"
#include "cfrec/record_store.hpp"

namespace cfrec {

// One search hit. similarity = 1/(1+distance), a bounded monotone transform
// used for downstream scoring.
struct Neighbor {
  std::string user_id;
  double distance = 0.0;
  double similarity = 1.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

struct SearchParams {
  std::size_t k = 10;
  std::vector<double> weights;  // one coefficient per coordinate
  std::size_t partitions = 1;
};

// Weighted L1 distance over two user vectors:
//
//   d(u, u') = sum_i w_i * |u_i - u'_i|
//
// On binary coordinates with unit weights this is the Hamming distance.
// Symmetric, non-negative, and zero exactly when all weighted coordinates
// agree.
inline double weighted_l1_distance(std::span<const double> u,
                                   std::span<const double> v,
                                   std::span<const double> w) {
  if (u.size() != v.size() || u.size() != w.size()) {
    throw ValidationError("weights",
                          "vector/weight length mismatch in distance");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    sum += w[i] * std::fabs(u[i] - v[i]);
  }
  return sum;
}

inline double similarity_from_distance(double distance) {
  return 1.0 / (1.0 + distance);
}

// Stable shard assignment for partitioned search. FNV-1a, not std::hash,
// so partition contents do not depend on the standard library build.
inline std::uint64_t stable_hash(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Immutable snapshot of every user's feature vector, the structure queries
// run against. Vectors are kept sorted by user id.
class ProfileIndex {
 public:
  ProfileIndex(FeatureSchema schema, std::vector<FeatureVector> vectors)
      : schema_(std::move(schema)), vectors_(std::move(vectors)) {
    std::sort(vectors_.begin(), vectors_.end(),
              [](const FeatureVector& a, const FeatureVector& b) {
                return a.user_id < b.user_id;
              });
  }

  // Vectorizes every user in the store. When a window is given only events
  // inside it contribute, per the temporal constraint; profiles always do.
  static ProfileIndex build(const RecordStore& store,
                            const FeatureSchema& schema,
                            const std::optional<Duration>& window = {},
                            UtcTime reference = {}) {
    std::vector<FeatureVector> vectors;
    for (const std::string& user : store.user_ids()) {
      const auto events = store.events_for(user, window, reference);
      FeatureVector fv = vectorize(events, store.profile_for(user), schema);
      fv.user_id = user;  // profile-less, event-less users keep their id
      vectors.push_back(std::move(fv));
    }
    return ProfileIndex(schema, std::move(vectors));
  }

  const FeatureSchema& schema() const { return schema_; }
  const std::vector<FeatureVector>& vectors() const { return vectors_; }
  std::size_t size() const { return vectors_.size(); }

  const FeatureVector* find(const std::string& user_id) const {
    const auto it = std::lower_bound(
        vectors_.begin(), vectors_.end(), user_id,
        [](const FeatureVector& fv, const std::string& id) {
          return fv.user_id < id;
        });
    if (it == vectors_.end() || it->user_id != user_id) return nullptr;
    return &*it;
  }

 private:
  FeatureSchema schema_;
  std::vector<FeatureVector> vectors_;
};

namespace detail {

// Bounded selection of the k smallest (distance, user id) pairs seen so far.
// A plain max-heap over a vector; candidates worse than the current k-th are
// rejected in O(1) after the heap fills.
class TopK {
 public:
  explicit TopK(std::size_t k) : k_(k) { heap_.reserve(k + 1); }

  static bool worse(const Neighbor& a, const Neighbor& b) {
    return a.distance != b.distance ? a.distance < b.distance
                                    : a.user_id < b.user_id;
  }

  void offer(Neighbor n) {
    if (heap_.size() == k_ && !worse(n, heap_.front())) return;
    heap_.push_back(std::move(n));
    std::push_heap(heap_.begin(), heap_.end(), worse);
    if (heap_.size() > k_) {
      std::pop_heap(heap_.begin(), heap_.end(), worse);
      heap_.pop_back();
    }
  }

  // Ascending (distance, user id).
  std::vector<Neighbor> sorted() && {
    std::sort(heap_.begin(), heap_.end(), worse);
    return std::move(heap_);
  }

  std::vector<Neighbor>& raw() { return heap_; }

 private:
  std::size_t k_;
  std::vector<Neighbor> heap_;
};

inline const FeatureVector& checked_target(const ProfileIndex& index,
                                           const std::string& target,
                                           const SearchParams& params) {
  if (params.k < 1) {
    throw ValidationError("k", "neighbor count k must be >= 1");
  }
  if (params.partitions < 1) {
    throw ValidationError("partitions", "partition count must be >= 1");
  }
  if (params.weights.size() != index.schema().m()) {
    throw ValidationError("weights", "weight vector length does not match "
                                     "the schema");
  }
  const FeatureVector* fv = index.find(target);
  if (!fv) {
    throw ValidationError("user_id", "unknown target user '" + target + "'");
  }
  return *fv;
}

}  // namespace detail

// Exact k-nearest-neighbor search: one optimized linear scan over all user
// vectors with a bounded heap of size k. The target itself is excluded. Ties
// in distance are broken by ascending user id; output is ascending by
// (distance, user id). If fewer than k other users exist, all are returned.
inline std::vector<Neighbor> k_nearest(const ProfileIndex& index,
                                       const std::string& target,
                                       const SearchParams& params) {
  const FeatureVector& tv = detail::checked_target(index, target, params);
  detail::TopK top(params.k);
  for (const FeatureVector& fv : index.vectors()) {
    if (fv.user_id == target) continue;
    const double d =
        weighted_l1_distance(tv.coords, fv.coords, params.weights);
    top.offer(Neighbor{fv.user_id, d, similarity_from_distance(d)});
  }
  return std::move(top).sorted();
}

// Partition-parallel variant: users are sharded by stable hash of their id,
// each partition is scanned independently for a local top-k, and the locals
// are merged on (distance, user id). Element-for-element identical to
// k_nearest for every partition count.
inline std::vector<Neighbor> k_nearest_partitioned(const ProfileIndex& index,
                                                   const std::string& target,
                                                   const SearchParams& params) {
  const FeatureVector& tv = detail::checked_target(index, target, params);
  const std::size_t partition_count = params.partitions;
  if (partition_count == 1) return k_nearest(index, target, params);

  std::vector<detail::TopK> locals;
  locals.reserve(partition_count);
  for (std::size_t p = 0; p < partition_count; ++p) locals.emplace_back(params.k);

  auto scan_partition = [&](std::size_t p) {
    detail::TopK& top = locals[p];
    for (const FeatureVector& fv : index.vectors()) {
      if (stable_hash(fv.user_id) % partition_count != p) continue;
      if (fv.user_id == target) continue;
      const double d =
          weighted_l1_distance(tv.coords, fv.coords, params.weights);
      top.offer(Neighbor{fv.user_id, d, similarity_from_distance(d)});
    }
  };

  std::vector<std::thread> workers;
  workers.reserve(partition_count);
  for (std::size_t p = 0; p < partition_count; ++p) {
    workers.emplace_back(scan_partition, p);
  }
  for (std::thread& t : workers) t.join();

  // Deterministic reduction: order never depends on worker scheduling.
  std::vector<Neighbor> merged;
  for (detail::TopK& top : locals) {
    for (Neighbor& n : top.raw()) merged.push_back(std::move(n));
  }
  std::sort(merged.begin(), merged.end(), detail::TopK::worse);
  if (merged.size() > params.k) merged.resize(params.k);
  return merged;
}

}  // namespace cfrec
