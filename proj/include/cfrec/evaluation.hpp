#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfrec/errors.hpp"
#include "cfrec/feature_space.hpp"
#include "cfrec/knn.hpp"
#include "cfrec/recommender.hpp"
#include "cfrec/record_store.hpp"

namespace cfrec {

// Per-user temporal split of a store. Train events strictly precede holdout
// events in time; a user's relevant set holds the decks first associated in
// the held-out tail.
struct Split {
  RecordStore train;
  std::map<std::string, std::vector<ActivityEvent>> holdout_events;
  std::map<std::string, std::set<std::string>> relevant;
};

// Holds out the final ceil(fraction * count) events of every user with at
// least two events. When identical timestamps straddle the boundary the
// holdout expands to keep the split strict; a user whose events all share
// one timestamp stays entirely in train.
inline Split temporal_split(const RecordStore& store, double holdout_fraction) {
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
    throw ValidationError("holdout_fraction",
                          "holdout fraction must lie in (0,1)");
  }
  Split split;
  std::vector<std::pair<std::size_t, ActivityEvent>> train_events;

  for (const std::string& user : store.user_ids()) {
    const auto events = store.events_for(user);
    std::size_t holdout_len = 0;
    if (events.size() >= 2) {
      holdout_len = static_cast<std::size_t>(
          std::ceil(holdout_fraction * double(events.size())));
      // Keep max(train ts) < min(holdout ts).
      while (holdout_len < events.size() &&
             events[events.size() - holdout_len - 1].timestamp ==
                 events[events.size() - holdout_len].timestamp) {
        ++holdout_len;
      }
      if (holdout_len >= events.size()) holdout_len = 0;
    }
    const std::size_t train_len = events.size() - holdout_len;

    std::set<std::string> train_assoc;
    for (std::size_t i = 0; i < train_len; ++i) {
      if (is_association_kind(events[i].kind)) {
        train_assoc.insert(events[i].deck_id);
      }
    }
    if (holdout_len > 0) {
      auto& tail = split.holdout_events[user];
      std::set<std::string>& rel = split.relevant[user];
      for (std::size_t i = train_len; i < events.size(); ++i) {
        tail.push_back(events[i]);
        if (is_association_kind(events[i].kind) &&
            !train_assoc.count(events[i].deck_id)) {
          rel.insert(events[i].deck_id);
        }
      }
    }
    for (std::size_t i = 0; i < train_len; ++i) {
      // Defer appends so the rebuilt log keeps the original global order.
      train_events.emplace_back(0, events[i]);
    }
  }

  std::map<std::string, std::size_t> order;
  for (std::size_t i = 0; i < store.events().size(); ++i) {
    order[store.events()[i].event_id] = i;
  }
  for (auto& [seq, ev] : train_events) seq = order[ev.event_id];
  std::sort(train_events.begin(), train_events.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (auto& [_, ev] : train_events) split.train.append_ingested(ev);
  for (const auto& [__, profile] : store.profiles()) {
    split.train.upsert_profile(profile);
  }
  return split;
}

// ---------------------------------------------------------------------------
// Ranking and error metrics.

// |top-n intersect relevant| / min(n, |recommended|); 0 when nothing was
// recommended.
inline double precision_at_n(const std::vector<std::string>& recommended,
                             const std::set<std::string>& relevant,
                             std::size_t n) {
  if (n < 1) throw ValidationError("n", "metric cutoff n must be >= 1");
  if (recommended.empty()) return 0.0;
  const std::size_t cutoff = std::min(n, recommended.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < cutoff; ++i) {
    if (relevant.count(recommended[i])) ++hits;
  }
  return double(hits) / double(cutoff);
}

// |top-n intersect relevant| / |relevant|; nullopt (user skipped) when the
// relevant set is empty.
inline std::optional<double> recall_at_n(
    const std::vector<std::string>& recommended,
    const std::set<std::string>& relevant, std::size_t n) {
  if (n < 1) throw ValidationError("n", "metric cutoff n must be >= 1");
  if (relevant.empty()) return std::nullopt;
  const std::size_t cutoff = std::min(n, recommended.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < cutoff; ++i) {
    if (relevant.count(recommended[i])) ++hits;
  }
  return double(hits) / double(relevant.size());
}

// DCG@n = sum_i gain_i / log2(i + 1), positions starting at 1.
inline double dcg_at_n(const std::vector<double>& gains, std::size_t n) {
  const std::size_t cutoff = std::min(n, gains.size());
  double dcg = 0.0;
  for (std::size_t i = 0; i < cutoff; ++i) {
    dcg += gains[i] / std::log2(double(i) + 2.0);
  }
  return dcg;
}

inline double ndcg_at_n(const std::vector<double>& gains,
                        const std::vector<double>& ideal_gains,
                        std::size_t n) {
  const double ideal = dcg_at_n(ideal_gains, n);
  if (ideal <= 0.0) return 0.0;
  return dcg_at_n(gains, n) / ideal;
}

// Mean squared error over (predicted, actual) pairs.
inline double mse(const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.empty()) {
    throw ValidationError("pairs", "mse requires at least one pair");
  }
  double sum = 0.0;
  for (const auto& [predicted, actual] : pairs) {
    const double err = predicted - actual;
    sum += err * err;
  }
  return sum / double(pairs.size());
}

inline double rmse(const std::vector<std::pair<double, double>>& pairs) {
  return std::sqrt(mse(pairs));
}

// Fraction of the catalog that appears in at least one recommendation list.
inline double coverage(const std::vector<std::vector<std::string>>& lists,
                       std::size_t catalog_size) {
  if (catalog_size == 0) {
    throw ValidationError("catalog", "coverage requires a non-empty catalog");
  }
  std::set<std::string> seen;
  for (const auto& list : lists) seen.insert(list.begin(), list.end());
  return double(seen.size()) / double(catalog_size);
}

// Train-set association structure used by the diversity and novelty metrics.
struct AssociationIndex {
  std::map<std::string, std::set<std::string>> users_by_deck;
  std::size_t total_users = 0;
};

inline AssociationIndex build_association_index(const RecordStore& store) {
  AssociationIndex idx;
  for (const ActivityEvent& ev : store.events()) {
    if (is_association_kind(ev.kind)) {
      idx.users_by_deck[ev.deck_id].insert(ev.user_id);
    }
  }
  idx.total_users = store.user_count();
  return idx;
}

namespace detail {
inline double jaccard(const std::set<std::string>& a,
                      const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& x : a) inter += b.count(x);
  const std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 1.0 : double(inter) / double(uni);
}
}  // namespace detail

// 1 - mean pairwise Jaccard similarity of the recommended decks' train-set
// association sets. Lists with fewer than two decks are maximally diverse by
// convention.
inline double diversity(const std::vector<std::string>& list,
                        const AssociationIndex& assoc) {
  if (list.size() < 2) return 1.0;
  static const std::set<std::string> kEmpty;
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < list.size(); ++i) {
    for (std::size_t j = i + 1; j < list.size(); ++j) {
      const auto ia = assoc.users_by_deck.find(list[i]);
      const auto ib = assoc.users_by_deck.find(list[j]);
      sum += detail::jaccard(ia == assoc.users_by_deck.end() ? kEmpty
                                                             : ia->second,
                             ib == assoc.users_by_deck.end() ? kEmpty
                                                             : ib->second);
      ++pairs;
    }
  }
  return 1.0 - sum / double(pairs);
}

// Mean -log2(p_deck) over the list, where p is the fraction of train users
// associated with the deck. Unseen decks are smoothed to 1/(N+1).
inline double novelty(const std::vector<std::string>& list,
                      const AssociationIndex& assoc) {
  if (list.empty() || assoc.total_users == 0) return 0.0;
  double sum = 0.0;
  for (const std::string& deck : list) {
    const auto it = assoc.users_by_deck.find(deck);
    const std::size_t users =
        it == assoc.users_by_deck.end() ? 0 : it->second.size();
    const double p = users > 0
                         ? double(users) / double(assoc.total_users)
                         : 1.0 / double(assoc.total_users + 1);
    sum += -std::log2(p);
  }
  return sum / double(list.size());
}

// ---------------------------------------------------------------------------
// Offline evaluation harness.

struct EvalParams {
  std::size_t k = 10;
  std::size_t n = 5;
  double alpha = 0.7;
  double holdout_fraction = 0.2;
  GroupWeights weights;
  std::optional<Duration> window;
  std::uint64_t seed = 0;  // echoed in reports; the harness itself is
                           // deterministic
};

struct MetricSet {
  double precision = 0.0;
  std::optional<double> recall;
  double dcg = 0.0;
  double ndcg = 0.0;
  std::optional<double> mse;
  std::optional<double> rmse;
  double coverage = 0.0;
  double diversity = 0.0;
  double novelty = 0.0;
};

struct EvalReport {
  std::string variant;  // cf | popularity | hybrid
  MetricSet metrics;
  std::size_t holdout_users = 0;
  std::size_t rating_pairs = 0;
};

// Runs the full offline protocol: temporal split, per-holdout-user top-n
// recommendation with the CF, popularity, and hybrid variants, every metric
// aggregated by unweighted mean over users. Deterministic for a fixed store
// and config.
inline std::vector<EvalReport> run_offline_eval(const RecordStore& store,
                                                const EvalParams& params) {
  const Split split = temporal_split(store, params.holdout_fraction);
  if (split.holdout_events.empty()) {
    throw ValidationError("store",
                          "store does not support a temporal split (no user "
                          "has two timestamped events)");
  }
  if (split.train.catalog().empty()) {
    throw ValidationError("store", "train split has no decks");
  }

  const FeatureSchema schema = schema_from_store(split.train);
  // Reference instant for windowed runs: the latest train event.
  UtcTime reference{};
  for (const ActivityEvent& ev : split.train.events()) {
    reference = std::max(reference, ev.timestamp);
  }
  const ProfileIndex index =
      ProfileIndex::build(split.train, schema, params.window, reference);
  const auto weights = expand_weights(params.weights, schema);
  const AssociationIndex assoc = build_association_index(split.train);

  const auto pop = popularity(split.train, params.window, reference);

  struct Accumulator {
    std::vector<double> precision, dcg, ndcg, diversity, novelty;
    std::vector<double> recall;
    std::vector<std::vector<std::string>> lists;
    std::vector<std::pair<double, double>> pairs;
  };
  std::map<std::string, Accumulator> acc;  // variant -> per-user values

  HybridConfig hybrid_config;
  hybrid_config.alpha = params.alpha;
  hybrid_config.k = params.k;
  hybrid_config.n = params.n;
  hybrid_config.window = params.window;

  for (const auto& [user, tail] : split.holdout_events) {
    const FeatureVector* tv = index.find(user);
    if (!tv) continue;  // holdout users always have train events
    const std::set<std::string>& relevant = split.relevant.at(user);

    std::map<std::string, std::vector<std::string>> variant_lists;
    for (const Recommendation& r :
         cf_recommend(index, user, params.k, params.n, weights)) {
      variant_lists["cf"].push_back(r.deck_id);
    }
    {
      auto& list = variant_lists["popularity"];
      for (const PopularityStats& s : pop) {
        if (list.size() >= params.n) break;
        if (tv->association_set.count(s.deck_id)) continue;
        list.push_back(s.deck_id);
      }
    }
    for (const Recommendation& r : hybrid_recommend(
             index, split.train, user, hybrid_config, weights, reference)) {
      variant_lists["hybrid"].push_back(r.deck_id);
    }

    for (auto& [variant, list] : variant_lists) {
      Accumulator& a = acc[variant];
      a.precision.push_back(precision_at_n(list, relevant, params.n));
      if (const auto r = recall_at_n(list, relevant, params.n)) {
        a.recall.push_back(*r);
      }
      std::vector<double> gains;
      gains.reserve(list.size());
      for (const std::string& deck : list) {
        gains.push_back(relevant.count(deck) ? 1.0 : 0.0);
      }
      std::vector<double> ideal(std::min(params.n, relevant.size()), 1.0);
      a.dcg.push_back(dcg_at_n(gains, params.n));
      a.ndcg.push_back(ndcg_at_n(gains, ideal, params.n));
      if (!list.empty()) {
        a.diversity.push_back(diversity(list, assoc));
        a.novelty.push_back(novelty(list, assoc));
      }
      a.lists.push_back(list);
    }

    // Rating pairs: one per held-out rating event, CF prediction with the
    // deck-mean then global-mean fallback; the popularity variant uses the
    // non-personalized fallback chain only.
    for (const ActivityEvent& ev : tail) {
      if (ev.kind != EventKind::kRating) continue;
      const auto cf_pred = predict_rating_with_fallback(
          index, split.train, user, ev.deck_id, params.k, weights);
      if (cf_pred) {
        acc["cf"].pairs.emplace_back(cf_pred->value, *ev.value);
        acc["hybrid"].pairs.emplace_back(cf_pred->value, *ev.value);
      }
      auto pop_pred = deck_mean_rating(split.train, ev.deck_id);
      if (!pop_pred) pop_pred = global_mean_rating(split.train);
      if (pop_pred) {
        acc["popularity"].pairs.emplace_back(*pop_pred, *ev.value);
      }
    }
  }

  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (const double x : v) s += x;
    return v.empty() ? 0.0 : s / double(v.size());
  };

  std::vector<EvalReport> reports;
  for (const std::string variant : {"cf", "popularity", "hybrid"}) {
    const Accumulator& a = acc[variant];
    EvalReport r;
    r.variant = variant;
    r.holdout_users = a.precision.size();
    r.rating_pairs = a.pairs.size();
    r.metrics.precision = mean(a.precision);
    if (!a.recall.empty()) r.metrics.recall = mean(a.recall);
    r.metrics.dcg = mean(a.dcg);
    r.metrics.ndcg = mean(a.ndcg);
    if (!a.pairs.empty()) {
      r.metrics.mse = mse(a.pairs);
      r.metrics.rmse = rmse(a.pairs);
    }
    r.metrics.coverage = coverage(a.lists, split.train.catalog().size());
    r.metrics.diversity = mean(a.diversity);
    r.metrics.novelty = mean(a.novelty);
    reports.push_back(std::move(r));
  }
  return reports;
}

// ---------------------------------------------------------------------------
// Report serialization: JSON and a flat variant,metric,value CSV.

namespace detail {
inline nlohmann::ordered_json metric_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  return *v;
}
}  // namespace detail

inline nlohmann::ordered_json report_to_json(
    const std::vector<EvalReport>& reports, const EvalParams& params) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json config;
  config["k"] = params.k;
  config["n"] = params.n;
  config["alpha"] = params.alpha;
  config["holdout_fraction"] = params.holdout_fraction;
  config["weights"] = weights_to_json(params.weights);
  config["seed"] = params.seed;
  if (params.window) {
    config["window_seconds"] = params.window->count();
  } else {
    config["window_seconds"] = nullptr;
  }
  j["config"] = std::move(config);
  nlohmann::ordered_json variants;
  for (const EvalReport& r : reports) {
    nlohmann::ordered_json m;
    m["precision_at_n"] = r.metrics.precision;
    m["recall_at_n"] = detail::metric_json(r.metrics.recall);
    m["dcg_at_n"] = r.metrics.dcg;
    m["ndcg_at_n"] = r.metrics.ndcg;
    m["mse"] = detail::metric_json(r.metrics.mse);
    m["rmse"] = detail::metric_json(r.metrics.rmse);
    m["coverage"] = r.metrics.coverage;
    m["diversity"] = r.metrics.diversity;
    m["novelty"] = r.metrics.novelty;
    m["holdout_users"] = r.holdout_users;
    m["rating_pairs"] = r.rating_pairs;
    variants[r.variant] = std::move(m);
  }
  j["variants"] = std::move(variants);
  return j;
}

inline std::string report_to_csv(const std::vector<EvalReport>& reports) {
  auto num = [](double v) { return nlohmann::json(v).dump(); };
  auto opt = [&](const std::optional<double>& v) {
    return v ? num(*v) : std::string();
  };
  std::string csv = "variant,metric,value\n";
  for (const EvalReport& r : reports) {
    csv += r.variant + ",precision_at_n," + num(r.metrics.precision) + "\n";
    csv += r.variant + ",recall_at_n," + opt(r.metrics.recall) + "\n";
    csv += r.variant + ",dcg_at_n," + num(r.metrics.dcg) + "\n";
    csv += r.variant + ",ndcg_at_n," + num(r.metrics.ndcg) + "\n";
    csv += r.variant + ",mse," + opt(r.metrics.mse) + "\n";
    csv += r.variant + ",rmse," + opt(r.metrics.rmse) + "\n";
    csv += r.variant + ",coverage," + num(r.metrics.coverage) + "\n";
    csv += r.variant + ",diversity," + num(r.metrics.diversity) + "\n";
    csv += r.variant + ",novelty," + num(r.metrics.novelty) + "\n";
  }
  return csv;
}

}  // namespace cfrec
