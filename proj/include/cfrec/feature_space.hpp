#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfrec/errors.hpp"
#include "cfrec/record_store.hpp"

namespace cfrec {

// Engagement saturates at this many events per deck under log scaling, which
// keeps every coordinate inside [0,1].
inline constexpr double kEngagementCap = 100.0;

inline constexpr std::size_t kAgeBucketCount = 5;

// Age bucket index for the one-hot encoding: <18, 18-25, 26-35, 36-50, >50.
inline std::size_t age_bucket(int age) {
  if (age < 18) return 0;
  if (age <= 25) return 1;
  if (age <= 35) return 2;
  if (age <= 50) return 3;
  return 4;
}

enum class FeatureGroup {
  kAssociation,
  kEngagement,
  kRating,
  kAge,
  kSkills,
  kLocation,
};

// The m-dimensional layout every user vector shares. Coordinates are laid
// out in blocks:
//
//   [ association | engagement | rating | age buckets | skills | location ]
//     one per deck  one per deck  one per deck   5 one-hot    multi-hot  one-hot
//
// Decks and vocabularies are sorted, so the same inputs always produce the
// same schema. The schema is never serialized; it is rebuilt from the store.
class FeatureSchema {
 public:
  FeatureSchema(std::vector<std::string> deck_order,
                std::vector<std::string> skills_vocab,
                std::vector<std::string> location_vocab)
      : deck_order_(std::move(deck_order)),
        skills_vocab_(std::move(skills_vocab)),
        location_vocab_(std::move(location_vocab)) {
    for (std::size_t i = 0; i < deck_order_.size(); ++i) {
      deck_pos_[deck_order_[i]] = i;
    }
    for (std::size_t i = 0; i < skills_vocab_.size(); ++i) {
      skill_pos_[skills_vocab_[i]] = i;
    }
    for (std::size_t i = 0; i < location_vocab_.size(); ++i) {
      location_pos_[location_vocab_[i]] = i;
    }
  }

  std::size_t deck_count() const { return deck_order_.size(); }
  const std::vector<std::string>& deck_order() const { return deck_order_; }
  const std::vector<std::string>& skills_vocab() const { return skills_vocab_; }
  const std::vector<std::string>& location_vocab() const {
    return location_vocab_;
  }

  std::size_t m() const {
    return 3 * deck_count() + kAgeBucketCount + skills_vocab_.size() +
           location_vocab_.size();
  }

  std::size_t association_offset() const { return 0; }
  std::size_t engagement_offset() const { return deck_count(); }
  std::size_t rating_offset() const { return 2 * deck_count(); }
  std::size_t age_offset() const { return 3 * deck_count(); }
  std::size_t skills_offset() const { return age_offset() + kAgeBucketCount; }
  std::size_t location_offset() const {
    return skills_offset() + skills_vocab_.size();
  }

  std::optional<std::size_t> deck_position(const std::string& deck_id) const {
    const auto it = deck_pos_.find(deck_id);
    if (it == deck_pos_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<std::size_t> skill_position(const std::string& tag) const {
    const auto it = skill_pos_.find(tag);
    if (it == skill_pos_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<std::size_t> location_position(const std::string& label) const {
    const auto it = location_pos_.find(label);
    if (it == location_pos_.end()) return std::nullopt;
    return it->second;
  }

  FeatureGroup group_of(std::size_t coord) const {
    if (coord < engagement_offset()) return FeatureGroup::kAssociation;
    if (coord < rating_offset()) return FeatureGroup::kEngagement;
    if (coord < age_offset()) return FeatureGroup::kRating;
    if (coord < skills_offset()) return FeatureGroup::kAge;
    if (coord < location_offset()) return FeatureGroup::kSkills;
    return FeatureGroup::kLocation;
  }

  friend bool operator==(const FeatureSchema& a, const FeatureSchema& b) {
    return a.deck_order_ == b.deck_order_ &&
           a.skills_vocab_ == b.skills_vocab_ &&
           a.location_vocab_ == b.location_vocab_;
  }

 private:
  std::vector<std::string> deck_order_;
  std::vector<std::string> skills_vocab_;
  std::vector<std::string> location_vocab_;
  std::map<std::string, std::size_t> deck_pos_;
  std::map<std::string, std::size_t> skill_pos_;
  std::map<std::string, std::size_t> location_pos_;
};

inline FeatureSchema build_schema(const std::set<std::string>& catalog,
                                  std::vector<std::string> skills_vocab,
                                  std::vector<std::string> location_vocab) {
  if (catalog.empty()) {
    throw ValidationError("catalog",
                          "cannot build a feature space over an empty catalog");
  }
  std::vector<std::string> decks(catalog.begin(), catalog.end());
  auto sort_unique = [](std::vector<std::string>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  sort_unique(skills_vocab);
  sort_unique(location_vocab);
  return FeatureSchema(std::move(decks), std::move(skills_vocab),
                       std::move(location_vocab));
}

// Vocabularies are the union of what the store's profiles declare.
inline FeatureSchema schema_from_store(const RecordStore& store) {
  std::vector<std::string> skills, locations;
  for (const auto& [_, profile] : store.profiles()) {
    skills.insert(skills.end(), profile.skills.begin(), profile.skills.end());
    if (profile.location) locations.push_back(*profile.location);
  }
  return build_schema(store.catalog(), std::move(skills),
                      std::move(locations));
}

// A user as a point in the schema's coordinate space, plus the cached set of
// decks the user is associated with.
struct FeatureVector {
  std::string user_id;
  std::vector<double> coords;
  std::set<std::string> association_set;
};

// Maps a 1-5 rating onto [0,1].
inline double normalize_rating(double r) {
  if (!(r >= 1.0 && r <= 5.0)) {
    throw ValidationError("value", "rating out of range [1,5]");
  }
  return (r - 1.0) / 4.0;
}

// Builds one user's feature vector from their events and optional profile.
// Pure: identical inputs always produce the identical vector.
//
// Per deck: association is 1 after any association-kind event; engagement is
// log(1+count)/log(1+cap) over those events, capped at 1; rating is the
// latest 1-5 rating normalized to [0,1]. A rating on a deck the user never
// otherwise touched is ignored, keeping "association 0 implies rating 0".
inline FeatureVector vectorize(const std::vector<ActivityEvent>& events,
                               const DemographicProfile* profile,
                               const FeatureSchema& schema) {
  FeatureVector fv;
  fv.coords.assign(schema.m(), 0.0);

  for (const ActivityEvent& ev : events) {
    if (fv.user_id.empty()) {
      fv.user_id = ev.user_id;
    } else if (ev.user_id != fv.user_id) {
      throw ValidationError("user_id",
                            "vectorize requires events of a single user");
    }
  }
  if (profile) {
    if (fv.user_id.empty()) {
      fv.user_id = profile->user_id;
    } else if (profile->user_id != fv.user_id) {
      throw ValidationError("user_id",
                            "profile and events belong to different users");
    }
  }

  std::map<std::size_t, std::size_t> association_counts;
  std::map<std::size_t, double> latest_rating;
  for (const ActivityEvent& ev : events) {
    if (ev.kind == EventKind::kSearch) continue;  // stored but featureless
    const auto pos = schema.deck_position(ev.deck_id);
    if (!pos) {
      throw ValidationError("deck_id", "deck '" + ev.deck_id +
                                           "' is not in the schema (stale "
                                           "schema?)");
    }
    if (ev.kind == EventKind::kRating) {
      latest_rating[*pos] = *ev.value;  // events arrive time-ordered
    } else {
      ++association_counts[*pos];
      fv.association_set.insert(ev.deck_id);
    }
  }

  const double engagement_denom = std::log1p(kEngagementCap);
  for (const auto& [pos, count] : association_counts) {
    fv.coords[schema.association_offset() + pos] = 1.0;
    fv.coords[schema.engagement_offset() + pos] =
        std::min(1.0, std::log1p(double(count)) / engagement_denom);
  }
  for (const auto& [pos, rating] : latest_rating) {
    if (association_counts.count(pos)) {
      fv.coords[schema.rating_offset() + pos] = normalize_rating(rating);
    }
  }

  if (profile) {
    if (profile->age) {
      fv.coords[schema.age_offset() + age_bucket(*profile->age)] = 1.0;
    }
    for (const std::string& tag : profile->skills) {
      const auto pos = schema.skill_position(tag);
      if (!pos) {
        throw ValidationError("skills",
                              "skill tag '" + tag + "' is not in the schema");
      }
      fv.coords[schema.skills_offset() + *pos] = 1.0;
    }
    if (profile->location) {
      const auto pos = schema.location_position(*profile->location);
      if (!pos) {
        throw ValidationError("location", "location '" + *profile->location +
                                              "' is not in the schema");
      }
      fv.coords[schema.location_offset() + *pos] = 1.0;
    }
  }
  return fv;
}

// ---------------------------------------------------------------------------
// Per-group weights, expanded to one coefficient per coordinate.

struct GroupWeights {
  double association = 1.0;
  double engagement = 1.0;
  double rating = 1.0;
  double age = 1.0;
  double skills = 1.0;
  double location = 1.0;

  double of(FeatureGroup g) const {
    switch (g) {
      case FeatureGroup::kAssociation: return association;
      case FeatureGroup::kEngagement: return engagement;
      case FeatureGroup::kRating: return rating;
      case FeatureGroup::kAge: return age;
      case FeatureGroup::kSkills: return skills;
      case FeatureGroup::kLocation: return location;
    }
    return 1.0;
  }

  friend bool operator==(const GroupWeights&, const GroupWeights&) = default;
};

inline GroupWeights uniform_weights() { return GroupWeights{}; }

namespace detail {
inline constexpr const char* kGroupNames[] = {"association", "engagement",
                                              "rating",      "age",
                                              "skills",      "location"};
}

inline void validate_weights(const GroupWeights& w) {
  const double values[] = {w.association, w.engagement, w.rating,
                           w.age,         w.skills,     w.location};
  for (std::size_t i = 0; i < 6; ++i) {
    if (!(values[i] >= 0.0) || std::isnan(values[i]) ||
        std::isinf(values[i])) {
      throw ValidationError(detail::kGroupNames[i],
                            std::string("weight '") + detail::kGroupNames[i] +
                                "' must be a finite non-negative number");
    }
  }
}

// w_i = weight of coordinate i's group; length is schema.m().
inline std::vector<double> expand_weights(const GroupWeights& weights,
                                          const FeatureSchema& schema) {
  validate_weights(weights);
  std::vector<double> w(schema.m());
  const std::size_t d = schema.deck_count();
  std::fill_n(w.begin() + schema.association_offset(), d, weights.association);
  std::fill_n(w.begin() + schema.engagement_offset(), d, weights.engagement);
  std::fill_n(w.begin() + schema.rating_offset(), d, weights.rating);
  std::fill_n(w.begin() + schema.age_offset(), kAgeBucketCount, weights.age);
  std::fill_n(w.begin() + schema.skills_offset(), schema.skills_vocab().size(),
              weights.skills);
  std::fill_n(w.begin() + schema.location_offset(),
              schema.location_vocab().size(), weights.location);
  return w;
}

// Weight file format: a single JSON object with all six group keys.
inline GroupWeights weights_from_json(const nlohmann::json& j) {
  if (!j.is_object()) {
    throw ValidationError("weights", "weight file must be a JSON object");
  }
  GroupWeights w;
  double* slots[] = {&w.association, &w.engagement, &w.rating,
                     &w.age,         &w.skills,     &w.location};
  for (std::size_t i = 0; i < 6; ++i) {
    const char* name = detail::kGroupNames[i];
    if (!j.contains(name)) {
      throw ValidationError(name,
                            std::string("missing weight group '") + name + "'");
    }
    if (!j.at(name).is_number()) {
      throw ValidationError(name,
                            std::string("weight '") + name +
                                "' must be a number");
    }
    *slots[i] = j.at(name).get<double>();
  }
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(std::begin(detail::kGroupNames),
                     std::end(detail::kGroupNames), [&](const char* n) {
                       return key == n;
                     }) == std::end(detail::kGroupNames)) {
      throw ValidationError(key, "unknown weight group '" + key + "'");
    }
  }
  validate_weights(w);
  return w;
}

inline nlohmann::ordered_json weights_to_json(const GroupWeights& w) {
  nlohmann::ordered_json j;
  j["association"] = w.association;
  j["engagement"] = w.engagement;
  j["rating"] = w.rating;
  j["age"] = w.age;
  j["skills"] = w.skills;
  j["location"] = w.location;
  return j;
}

inline GroupWeights load_weights(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open weight file: " + file.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) {
    throw ValidationError("weights",
                          "weight file is not valid JSON: " + file.string());
  }
  return weights_from_json(j);
}

inline void save_weights(const GroupWeights& w,
                         const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw IoError("cannot write weight file: " + file.string());
  out << weights_to_json(w).dump(2) << '\n';
  if (!out) throw IoError("failed writing weight file: " + file.string());
}

}  // namespace cfrec
