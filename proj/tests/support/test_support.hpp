#pragma once

// Shared helpers for the test suites: independent oracles, fixture builders,
// and a scratch-directory guard. Everything here stays implementation-free:
// oracles recompute expected results from first principles.

#include <algorithm>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "cfrec/cfrec.hpp"

namespace cfrec::testing {

// Brute-force k-NN oracle: every pairwise distance, full sort, take k.
// Independent of the bounded-heap search path it checks.
inline std::vector<Neighbor> brute_force_knn(const ProfileIndex& index,
                                             const std::string& target,
                                             std::size_t k,
                                             const std::vector<double>& w) {
  const FeatureVector* tv = index.find(target);
  std::vector<Neighbor> all;
  for (const FeatureVector& fv : index.vectors()) {
    if (fv.user_id == target) continue;
    double d = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      d += w[i] * std::fabs(tv->coords[i] - fv.coords[i]);
    }
    all.push_back(Neighbor{fv.user_id, d, 1.0 / (1.0 + d)});
  }
  std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
    return a.distance != b.distance ? a.distance < b.distance
                                    : a.user_id < b.user_id;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

// A ProfileIndex over raw coordinate vectors, bypassing event vectorization.
// Handy for distance/search tests that want full control of the geometry.
inline ProfileIndex index_from_coords(
    const std::vector<std::pair<std::string, std::vector<double>>>& rows) {
  // Fabricate a schema with exactly rows[0].second.size() coordinates:
  // m = 3d + 5 + s + l; choose decks so the made-up groups line up.
  const std::size_t m = rows.front().second.size();
  if (m < 8) throw std::runtime_error("fixture needs at least 8 coordinates");
  std::set<std::string> catalog{"deck-placeholder"};
  std::vector<std::string> skills;
  for (std::size_t i = 0; i + 8 < m; ++i) {
    skills.push_back("s" + std::to_string(i));
  }
  FeatureSchema schema = build_schema(catalog, skills, {});
  if (schema.m() != m) throw std::runtime_error("fixture arithmetic is off");
  std::vector<FeatureVector> vectors;
  for (const auto& [user, coords] : rows) {
    FeatureVector fv;
    fv.user_id = user;
    fv.coords = coords;
    vectors.push_back(std::move(fv));
  }
  return ProfileIndex(schema, std::move(vectors));
}

// Random vectors in [0,1]^m.
inline std::vector<std::pair<std::string, std::vector<double>>> random_rows(
    std::size_t count, std::size_t m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::pair<std::string, std::vector<double>>> rows;
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> coords(m);
    for (double& c : coords) c = unit(rng);
    char name[16];
    std::snprintf(name, sizeof name, "u%04zu", i);
    rows.emplace_back(name, std::move(coords));
  }
  return rows;
}

// RAII scratch directory under the system temp root.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    auto root = std::filesystem::temp_directory_path();
    std::mt19937_64 rng(std::random_device{}());
    dir_ = root / ("cfrec-" + tag + "-" + std::to_string(rng()));
    std::filesystem::create_directories(dir_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  const std::filesystem::path& path() const { return dir_; }
  std::filesystem::path file(const std::string& name) const {
    return dir_ / name;
  }

 private:
  std::filesystem::path dir_;
};

inline UtcTime ts(const std::string& text) {
  const auto parsed = parse_rfc3339(text);
  if (!parsed) throw std::runtime_error("bad fixture timestamp: " + text);
  return *parsed;
}

inline ActivityEvent event(const std::string& id, const std::string& user,
                           const std::string& deck, EventKind kind,
                           std::optional<double> value,
                           const std::string& when) {
  return ActivityEvent{id, user, deck, kind, value, ts(when)};
}

}  // namespace cfrec::testing
