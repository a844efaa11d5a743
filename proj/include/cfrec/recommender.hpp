#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cfrec/errors.hpp"
#include "cfrec/knn.hpp"
#include "cfrec/record_store.hpp"

namespace cfrec {

enum class RecSource { kCf, kPopularity, kHybrid };

inline const char* to_string(RecSource s) {
  switch (s) {
    case RecSource::kCf: return "cf";
    case RecSource::kPopularity: return "popularity";
    case RecSource::kHybrid: return "hybrid";
  }
  return "unknown";
}

// One ranked deck. Lists are sorted by score descending, ties by deck id
// ascending, and never contain a deck the target is already associated with.
struct Recommendation {
  std::string deck_id;
  double score = 0.0;
  RecSource source = RecSource::kCf;
  bool cold_start = false;

  friend bool operator==(const Recommendation&,
                         const Recommendation&) = default;
};

enum class PopularityWindow { kAll, kMonth, kWeek };

inline std::optional<Duration> window_duration(PopularityWindow w) {
  switch (w) {
    case PopularityWindow::kAll: return std::nullopt;
    case PopularityWindow::kMonth: return std::chrono::days{30};
    case PopularityWindow::kWeek: return std::chrono::days{7};
  }
  return std::nullopt;
}

inline std::optional<PopularityWindow> parse_popularity_window(
    const std::string& text) {
  if (text == "all") return PopularityWindow::kAll;
  if (text == "month") return PopularityWindow::kMonth;
  if (text == "week") return PopularityWindow::kWeek;
  return std::nullopt;
}

inline const char* to_string(PopularityWindow w) {
  switch (w) {
    case PopularityWindow::kAll: return "all";
    case PopularityWindow::kMonth: return "month";
    case PopularityWindow::kWeek: return "week";
  }
  return "unknown";
}

// Coefficients of the popularity score. Defaults weigh stronger engagement
// signals higher; all overridable from configuration.
struct PopularityWeights {
  double visit = 1.0;
  double edit = 2.0;
  double comment = 2.0;
  double like = 3.0;
  double rating = 5.0;  // applied to the normalized average rating
};

struct PopularityStats {
  std::string deck_id;
  std::size_t visits = 0;
  std::size_t edits = 0;
  std::size_t comments = 0;
  std::size_t likes = 0;
  std::optional<double> avg_rating;  // mean of 1-5 ratings in the window
  double raw_score = 0.0;
  PopularityWindow window = PopularityWindow::kAll;
};

// Popularity of every catalog deck over the given window (counts restricted
// to timestamp >= reference - window). Sorted by raw_score descending, ties
// by deck id ascending. Decks without events in the window score 0.
inline std::vector<PopularityStats> popularity(
    const RecordStore& store, const std::optional<Duration>& window,
    UtcTime reference, const PopularityWeights& weights = {},
    PopularityWindow window_label = PopularityWindow::kAll) {
  if (window && window->count() < 0) {
    throw ValidationError("window", "window must be non-negative");
  }
  std::map<std::string, PopularityStats> by_deck;
  for (const std::string& deck : store.catalog()) {
    PopularityStats s;
    s.deck_id = deck;
    s.window = window_label;
    by_deck.emplace(deck, std::move(s));
  }

  std::map<std::string, std::pair<double, std::size_t>> rating_acc;
  const UtcTime cutoff = window ? reference - *window : UtcTime::min();
  for (const ActivityEvent& ev : store.events()) {
    if (window && ev.timestamp < cutoff) continue;
    PopularityStats& s = by_deck[ev.deck_id];
    s.deck_id = ev.deck_id;
    switch (ev.kind) {
      case EventKind::kVisit: ++s.visits; break;
      case EventKind::kEdit: ++s.edits; break;
      case EventKind::kComment: ++s.comments; break;
      case EventKind::kLike: ++s.likes; break;
      case EventKind::kRating: {
        auto& [sum, count] = rating_acc[ev.deck_id];
        sum += *ev.value;
        ++count;
        break;
      }
      default: break;
    }
  }

  std::vector<PopularityStats> out;
  out.reserve(by_deck.size());
  for (auto& [deck, s] : by_deck) {
    const auto it = rating_acc.find(deck);
    if (it != rating_acc.end() && it->second.second > 0) {
      s.avg_rating = it->second.first / double(it->second.second);
    }
    s.raw_score = weights.visit * double(s.visits) +
                  weights.edit * double(s.edits) +
                  weights.comment * double(s.comments) +
                  weights.like * double(s.likes) +
                  weights.rating *
                      (s.avg_rating ? (*s.avg_rating - 1.0) / 4.0 : 0.0);
    out.push_back(std::move(s));
  }
  std::sort(out.begin(), out.end(),
            [](const PopularityStats& a, const PopularityStats& b) {
              return a.raw_score != b.raw_score ? a.raw_score > b.raw_score
                                                : a.deck_id < b.deck_id;
            });
  return out;
}

inline std::vector<PopularityStats> popularity(
    const RecordStore& store, PopularityWindow window, UtcTime reference,
    const PopularityWeights& weights = {}) {
  return popularity(store, window_duration(window), reference, weights,
                    window);
}

namespace detail {

// Candidate decks from the neighborhood with their similarity-mass scores:
// score(deck) = sum of similarities of neighbors associated with the deck,
// normalized by the total similarity of all k neighbors. Decks already
// associated to the target are excluded.
inline std::map<std::string, double> cf_candidate_scores(
    const std::vector<Neighbor>& neighbors, const ProfileIndex& index,
    const std::set<std::string>& target_associations) {
  double total_similarity = 0.0;
  for (const Neighbor& n : neighbors) total_similarity += n.similarity;

  std::map<std::string, double> scores;
  if (total_similarity <= 0.0) return scores;
  for (const Neighbor& n : neighbors) {
    const FeatureVector* fv = index.find(n.user_id);
    if (!fv) continue;
    for (const std::string& deck : fv->association_set) {
      if (target_associations.count(deck)) continue;
      scores[deck] += n.similarity;
    }
  }
  for (auto& [_, score] : scores) score /= total_similarity;
  return scores;
}

inline std::vector<Recommendation> top_n(
    const std::map<std::string, double>& scores, std::size_t n,
    RecSource source, bool cold_start) {
  std::vector<Recommendation> out;
  out.reserve(scores.size());
  for (const auto& [deck, score] : scores) {
    out.push_back(Recommendation{deck, score, source, cold_start});
  }
  std::sort(out.begin(), out.end(),
            [](const Recommendation& a, const Recommendation& b) {
              return a.score != b.score ? a.score > b.score
                                        : a.deck_id < b.deck_id;
            });
  if (out.size() > n) out.resize(n);
  return out;
}

}  // namespace detail

// Neighbor cross-matching: the k most similar users vote for the decks they
// are associated with, and the top n the target lacks are recommended.
// Scores are similarity mass normalized into [0,1].
inline std::vector<Recommendation> cf_recommend(const ProfileIndex& index,
                                                const std::string& target,
                                                std::size_t k, std::size_t n,
                                                std::span<const double>
                                                    weights) {
  if (n < 1) throw ValidationError("n", "list length n must be >= 1");
  SearchParams params;
  params.k = k;
  params.weights.assign(weights.begin(), weights.end());
  const auto neighbors = k_nearest(index, target, params);
  const FeatureVector* tv = index.find(target);
  const auto scores =
      detail::cf_candidate_scores(neighbors, index, tv->association_set);
  return detail::top_n(scores, n, RecSource::kCf, false);
}

struct HybridConfig {
  double alpha = 0.7;  // CF share of the blended score
  std::size_t k = 10;
  std::size_t n = 5;
  std::size_t cold_start_min_events = 5;
  std::optional<Duration> window;  // temporal constraint on user activity
  PopularityWeights popularity_weights;
};

inline void validate_hybrid_config(const HybridConfig& c) {
  if (!(c.alpha >= 0.0 && c.alpha <= 1.0)) {
    throw ValidationError("alpha", "alpha must lie in [0,1]");
  }
  if (c.k < 1) throw ValidationError("k", "neighbor count k must be >= 1");
  if (c.n < 1) throw ValidationError("n", "list length n must be >= 1");
}

// Blend of CF and popularity: candidates are the CF candidates plus the top
// 2n popular decks (minus the target's associations); each candidate scores
// alpha * cf + (1 - alpha) * pop, where pop is the min-max normalized raw
// popularity over the candidate set (all-equal collapses to 0).
inline std::vector<Recommendation> hybrid_recommend(
    const ProfileIndex& index, const RecordStore& store,
    const std::string& target, const HybridConfig& config,
    std::span<const double> weights, UtcTime reference) {
  validate_hybrid_config(config);
  SearchParams params;
  params.k = config.k;
  params.weights.assign(weights.begin(), weights.end());
  const auto neighbors = k_nearest(index, target, params);
  const FeatureVector* tv = index.find(target);
  const auto cf_scores =
      detail::cf_candidate_scores(neighbors, index, tv->association_set);

  const auto pop = popularity(store, config.window, reference,
                              config.popularity_weights);
  std::map<std::string, double> pop_raw;
  for (const PopularityStats& s : pop) pop_raw[s.deck_id] = s.raw_score;

  std::set<std::string> candidates;
  for (const auto& [deck, _] : cf_scores) candidates.insert(deck);
  std::size_t taken = 0;
  for (const PopularityStats& s : pop) {
    if (taken >= 2 * config.n) break;
    ++taken;
    if (tv->association_set.count(s.deck_id)) continue;
    candidates.insert(s.deck_id);
  }
  if (candidates.empty()) return {};

  double pop_min = 0.0, pop_max = 0.0;
  bool first = true;
  for (const std::string& deck : candidates) {
    const double raw = pop_raw.count(deck) ? pop_raw[deck] : 0.0;
    if (first || raw < pop_min) pop_min = raw;
    if (first || raw > pop_max) pop_max = raw;
    first = false;
  }
  const double pop_span = pop_max - pop_min;

  std::map<std::string, double> blended;
  for (const std::string& deck : candidates) {
    const auto cf_it = cf_scores.find(deck);
    const double cf = cf_it == cf_scores.end() ? 0.0 : cf_it->second;
    const double raw = pop_raw.count(deck) ? pop_raw[deck] : 0.0;
    const double pop_norm = pop_span > 0.0 ? (raw - pop_min) / pop_span : 0.0;
    blended[deck] = config.alpha * cf + (1.0 - config.alpha) * pop_norm;
  }
  return detail::top_n(blended, config.n, RecSource::kHybrid, false);
}

// Similarity-weighted mean of the latest ratings the k nearest neighbors
// gave the deck, on the original 1-5 scale. nullopt when no neighbor rated
// it ("no prediction available").
inline std::optional<double> predict_rating(const ProfileIndex& index,
                                            const RecordStore& store,
                                            const std::string& target,
                                            const std::string& deck_id,
                                            std::size_t k,
                                            std::span<const double> weights) {
  SearchParams params;
  params.k = k;
  params.weights.assign(weights.begin(), weights.end());
  const auto neighbors = k_nearest(index, target, params);
  double weighted_sum = 0.0, similarity_sum = 0.0;
  for (const Neighbor& n : neighbors) {
    const auto rating = store.latest_rating(n.user_id, deck_id);
    if (!rating) continue;
    weighted_sum += n.similarity * *rating;
    similarity_sum += n.similarity;
  }
  if (similarity_sum <= 0.0) return std::nullopt;
  return weighted_sum / similarity_sum;
}

// Mean of all rating events on a deck (the fallback when CF has no basis).
inline std::optional<double> deck_mean_rating(const RecordStore& store,
                                              const std::string& deck_id) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const ActivityEvent& ev : store.events()) {
    if (ev.kind == EventKind::kRating && ev.deck_id == deck_id) {
      sum += *ev.value;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / double(count);
}

inline std::optional<double> global_mean_rating(const RecordStore& store) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const ActivityEvent& ev : store.events()) {
    if (ev.kind == EventKind::kRating) {
      sum += *ev.value;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / double(count);
}

struct RatingPrediction {
  enum class Basis { kCf, kDeckMean, kGlobalMean };
  double value = 0.0;
  Basis basis = Basis::kCf;
};

inline const char* to_string(RatingPrediction::Basis b) {
  switch (b) {
    case RatingPrediction::Basis::kCf: return "cf";
    case RatingPrediction::Basis::kDeckMean: return "deck_mean";
    case RatingPrediction::Basis::kGlobalMean: return "global_mean";
  }
  return "unknown";
}

// CF prediction with the documented fallback chain: neighbors' ratings, then
// the deck's mean, then the store's global mean. nullopt only when the store
// holds no ratings at all.
inline std::optional<RatingPrediction> predict_rating_with_fallback(
    const ProfileIndex& index, const RecordStore& store,
    const std::string& target, const std::string& deck_id, std::size_t k,
    std::span<const double> weights) {
  if (index.find(target)) {
    const auto cf = predict_rating(index, store, target, deck_id, k, weights);
    if (cf) return RatingPrediction{*cf, RatingPrediction::Basis::kCf};
  }
  const auto deck_mean = deck_mean_rating(store, deck_id);
  if (deck_mean) {
    return RatingPrediction{*deck_mean, RatingPrediction::Basis::kDeckMean};
  }
  const auto global = global_mean_rating(store);
  if (global) {
    return RatingPrediction{*global, RatingPrediction::Basis::kGlobalMean};
  }
  return std::nullopt;
}

enum class ColdStartStatus { kSufficient, kCold };

// A user is cold while their association-relevant event count (within the
// window, when one applies) is below min_events.
inline ColdStartStatus cold_start_gate(const RecordStore& store,
                                       const std::string& target,
                                       std::size_t min_events,
                                       const std::optional<Duration>& window =
                                           {},
                                       UtcTime reference = {}) {
  std::size_t associations = 0;
  for (const ActivityEvent& ev : store.events_for(target, window, reference)) {
    if (is_association_kind(ev.kind)) ++associations;
  }
  return associations >= min_events ? ColdStartStatus::kSufficient
                                    : ColdStartStatus::kCold;
}

// The full serving pipeline: popularity fallback while the target is cold
// (or absent from the index), hybrid blending once enough activity exists.
// Popularity scores are normalized by the list maximum so every emitted
// score lies in [0,1].
inline std::vector<Recommendation> recommend(const ProfileIndex& index,
                                             const RecordStore& store,
                                             const std::string& target,
                                             const HybridConfig& config,
                                             std::span<const double> weights,
                                             UtcTime reference) {
  validate_hybrid_config(config);
  const bool cold = cold_start_gate(store, target, config.cold_start_min_events,
                                    config.window, reference) ==
                        ColdStartStatus::kCold ||
                    index.find(target) == nullptr;
  if (!cold) {
    return hybrid_recommend(index, store, target, config, weights, reference);
  }

  std::set<std::string> associated;
  for (const ActivityEvent& ev :
       store.events_for(target, config.window, reference)) {
    if (is_association_kind(ev.kind)) associated.insert(ev.deck_id);
  }
  const auto pop = popularity(store, config.window, reference,
                              config.popularity_weights);
  double max_raw = 0.0;
  for (const PopularityStats& s : pop) max_raw = std::max(max_raw, s.raw_score);

  std::vector<Recommendation> out;
  for (const PopularityStats& s : pop) {
    if (out.size() >= config.n) break;
    if (associated.count(s.deck_id)) continue;
    const double score = max_raw > 0.0 ? s.raw_score / max_raw : 0.0;
    out.push_back(Recommendation{s.deck_id, score, RecSource::kPopularity,
                                 true});
  }
  return out;
}

}  // namespace cfrec
