#pragma once

#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "cfrec/errors.hpp"
#include "cfrec/event.hpp"
#include "cfrec/record_store.hpp"

namespace cfrec {

// Knobs for the planted-cluster activity generator. Users are assigned
// round-robin to clusters; each cluster prefers a disjoint contiguous block
// of the deck catalog.
struct SynthParams {
  std::size_t n_users = 200;
  std::size_t n_decks = 50;
  std::size_t n_clusters = 4;
  double events_per_user_mean = 20.0;
  double rating_fraction = 0.25;  // chance an event is a rating
  double noise_fraction = 0.1;    // chance an association targets any deck
  std::uint64_t rng_seed = 1;
  bool with_profiles = true;
};

struct SyntheticData {
  std::vector<ActivityEvent> events;      // ascending timestamps
  std::vector<DemographicProfile> profiles;
};

inline void validate_synth_params(const SynthParams& p) {
  if (p.n_users < 1) {
    throw ValidationError("n_users", "n_users must be >= 1");
  }
  if (p.n_decks < 1) {
    throw ValidationError("n_decks", "n_decks must be >= 1");
  }
  if (p.n_clusters < 1 || p.n_clusters > p.n_users ||
      p.n_clusters > p.n_decks) {
    throw ValidationError("n_clusters",
                          "n_clusters must lie in [1, min(n_users, n_decks)]");
  }
  if (!(p.events_per_user_mean > 0.0)) {
    throw ValidationError("events_per_user_mean",
                          "events_per_user_mean must be positive");
  }
  if (!(p.rating_fraction >= 0.0 && p.rating_fraction <= 1.0)) {
    throw ValidationError("rating_fraction",
                          "rating_fraction must lie in [0,1]");
  }
  if (!(p.noise_fraction >= 0.0 && p.noise_fraction <= 1.0)) {
    throw ValidationError("noise_fraction", "noise_fraction must lie in [0,1]");
  }
}

namespace detail {

inline std::string padded_id(char prefix, std::size_t index,
                             std::size_t total) {
  int width = 1;
  for (std::size_t t = total; t >= 10; t /= 10) ++width;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%0*zu", prefix, width, index + 1);
  return buf;
}

}  // namespace detail

// Deterministic activity stream with planted cluster structure. Users mostly
// interact inside their cluster's deck block; noise events target any deck.
// Ratings cover decks the user already touched: own-block decks rate 4-5,
// everything else 1-3. Timestamps strictly increase, interleaved across
// users on a one-minute grid.
inline SyntheticData generate_synthetic(const SynthParams& params) {
  validate_synth_params(params);
  std::mt19937_64 rng(params.rng_seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  std::vector<std::string> decks(params.n_decks);
  for (std::size_t d = 0; d < params.n_decks; ++d) {
    decks[d] = detail::padded_id('d', d, params.n_decks);
  }
  // Contiguous, disjoint cluster blocks covering the catalog.
  auto block_begin = [&](std::size_t c) {
    return c * params.n_decks / params.n_clusters;
  };
  auto in_block = [&](std::size_t c, std::size_t deck) {
    return deck >= block_begin(c) && deck < block_begin(c + 1);
  };

  std::poisson_distribution<int> event_count(params.events_per_user_mean);

  struct PlannedEvent {
    std::size_t user;
    std::size_t deck;
    EventKind kind;
    std::optional<double> value;
  };
  std::vector<std::vector<PlannedEvent>> plans(params.n_users);

  for (std::size_t u = 0; u < params.n_users; ++u) {
    const std::size_t cluster = u % params.n_clusters;
    const std::size_t block_size = block_begin(cluster + 1) - block_begin(cluster);
    const std::size_t count =
        std::max<std::size_t>(2, std::size_t(event_count(rng)));
    std::vector<std::size_t> touched;

    for (std::size_t e = 0; e < count; ++e) {
      PlannedEvent ev;
      ev.user = u;
      const bool want_rating =
          !touched.empty() && coin(rng) < params.rating_fraction;
      if (want_rating) {
        ev.deck = touched[std::uniform_int_distribution<std::size_t>(
            0, touched.size() - 1)(rng)];
        ev.kind = EventKind::kRating;
        if (in_block(cluster, ev.deck)) {
          ev.value = double(std::uniform_int_distribution<int>(4, 5)(rng));
        } else {
          ev.value = double(std::uniform_int_distribution<int>(1, 3)(rng));
        }
      } else {
        if (coin(rng) < params.noise_fraction) {
          ev.deck = std::uniform_int_distribution<std::size_t>(
              0, params.n_decks - 1)(rng);
        } else {
          ev.deck = block_begin(cluster) +
                    std::uniform_int_distribution<std::size_t>(
                        0, block_size - 1)(rng);
        }
        const double kind_draw = coin(rng);
        if (kind_draw < 0.70) {
          ev.kind = EventKind::kVisit;
          ev.value = double(std::uniform_int_distribution<int>(10, 600)(rng));
        } else if (kind_draw < 0.80) {
          ev.kind = EventKind::kEdit;
        } else if (kind_draw < 0.90) {
          ev.kind = EventKind::kComment;
        } else {
          ev.kind = EventKind::kLike;
        }
        touched.push_back(ev.deck);
      }
      plans[u].push_back(ev);
    }
  }

  // Interleave user streams round-robin on a one-minute grid so per-user and
  // global timestamps both strictly increase.
  const UtcTime base = *parse_rfc3339("2024-01-01T00:00:00Z");
  SyntheticData data;
  std::size_t seq = 0;
  for (std::size_t step = 0;; ++step) {
    bool emitted = false;
    for (std::size_t u = 0; u < params.n_users; ++u) {
      if (step >= plans[u].size()) continue;
      const PlannedEvent& p = plans[u][step];
      ActivityEvent ev;
      ev.event_id = detail::padded_id('e', seq, params.n_users * 64);
      ev.user_id = detail::padded_id('u', p.user, params.n_users);
      ev.deck_id = decks[p.deck];
      ev.kind = p.kind;
      ev.value = p.value;
      ev.timestamp = base + std::chrono::minutes{seq};
      data.events.push_back(std::move(ev));
      ++seq;
      emitted = true;
    }
    if (!emitted) break;
  }

  if (params.with_profiles) {
    static const std::vector<std::string> kLocations = {"asia", "europe",
                                                        "north-america",
                                                        "south-america"};
    static const std::vector<std::string> kSkills = {
        "biology", "design", "engineering", "history", "languages", "math"};
    for (std::size_t u = 0; u < params.n_users; ++u) {
      DemographicProfile p;
      p.user_id = detail::padded_id('u', u, params.n_users);
      p.age = std::uniform_int_distribution<int>(16, 70)(rng);
      p.location = kLocations[std::uniform_int_distribution<std::size_t>(
          0, kLocations.size() - 1)(rng)];
      const std::size_t tag_count =
          std::uniform_int_distribution<std::size_t>(1, 2)(rng);
      while (p.skills.size() < tag_count) {
        p.skills.insert(kSkills[std::uniform_int_distribution<std::size_t>(
            0, kSkills.size() - 1)(rng)]);
      }
      p.registered_at =
          base - std::chrono::days{
                     std::uniform_int_distribution<int>(1, 365)(rng)};
      data.profiles.push_back(std::move(p));
    }
  }
  return data;
}

// Builds an in-memory store from generated data (ids are stored verbatim --
// synthetic identifiers carry no personal data to pseudonymize).
inline RecordStore store_from_synthetic(const SyntheticData& data) {
  RecordStore store;
  for (const ActivityEvent& ev : data.events) store.append_ingested(ev);
  for (const DemographicProfile& p : data.profiles) store.upsert_profile(p);
  return store;
}

}  // namespace cfrec
