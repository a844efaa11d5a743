#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "cfrec/anonymize.hpp"
#include "cfrec/errors.hpp"
#include "cfrec/event.hpp"

namespace cfrec {

// Append-only user activity record store: validated events with pseudonymous
// user ids, demographic profiles, and the deck catalog. Single writer;
// readers that need isolation take a copy and the service layer swaps whole
// snapshots. The store never reads the wall clock -- callers pass the
// reference instant for any windowed retrieval.
class RecordStore {
 public:
  RecordStore() = default;

  // Validates, pseudonymizes and appends one raw record. Returns the event
  // id (assigned when the record carried none). Throws ValidationError
  // naming the offending field.
  std::string ingest(const EventCandidate& raw, const Pseudonymizer& anon) {
    validate_candidate(raw);
    ActivityEvent ev;
    ev.event_id = raw.event_id ? *raw.event_id : next_event_id();
    if (event_ids_.count(ev.event_id)) {
      throw ValidationError("event_id",
                            "duplicate event id '" + ev.event_id + "'");
    }
    ev.user_id = anon(raw.user_id);
    ev.deck_id = raw.deck_id;
    ev.kind = raw.kind;
    ev.value = raw.value;
    ev.timestamp = raw.timestamp;
    append(std::move(ev));
    return events_.back().event_id;
  }

  // Appends an already-pseudonymized event (log reload path). Validates the
  // same invariants as ingest but performs no id mapping.
  void append_ingested(const ActivityEvent& ev) {
    if (ev.event_id.empty()) {
      throw ValidationError("event_id", "missing field 'event_id'");
    }
    if (ev.user_id.empty()) {
      throw ValidationError("user_id", "missing field 'user_id'");
    }
    if (ev.deck_id.empty()) {
      throw ValidationError("deck_id", "missing field 'deck_id'");
    }
    validate_kind_value(ev.kind, ev.value);
    if (event_ids_.count(ev.event_id)) {
      throw ValidationError("event_id",
                            "duplicate event id '" + ev.event_id + "'");
    }
    append(ev);
  }

  void upsert_profile(DemographicProfile profile) {
    validate_profile(profile);
    profiles_[profile.user_id] = std::move(profile);
  }

  void upsert_profile_raw(DemographicProfile profile,
                          const Pseudonymizer& anon) {
    profile.user_id = anon(profile.user_id);
    upsert_profile(std::move(profile));
  }

  const std::vector<ActivityEvent>& events() const { return events_; }
  const std::set<std::string>& catalog() const { return catalog_; }
  const std::map<std::string, DemographicProfile>& profiles() const {
    return profiles_;
  }

  std::size_t event_count() const { return events_.size(); }
  std::size_t deck_count() const { return catalog_.size(); }

  const DemographicProfile* profile_for(const std::string& user_id) const {
    const auto it = profiles_.find(user_id);
    return it == profiles_.end() ? nullptr : &it->second;
  }

  // Everyone with at least one event or a profile, ascending.
  std::vector<std::string> user_ids() const {
    std::vector<std::string> ids;
    ids.reserve(by_user_.size() + profiles_.size());
    auto ev = by_user_.begin();
    auto pr = profiles_.begin();
    while (ev != by_user_.end() || pr != profiles_.end()) {
      if (pr == profiles_.end() ||
          (ev != by_user_.end() && ev->first < pr->first)) {
        ids.push_back(ev->first);
        ++ev;
      } else {
        if (ev != by_user_.end() && ev->first == pr->first) ++ev;
        ids.push_back(pr->first);
        ++pr;
      }
    }
    return ids;
  }

  std::size_t user_count() const { return user_ids().size(); }

  // Full event history of one user, ascending by (timestamp, ingest order).
  // Unknown users yield an empty list.
  std::vector<ActivityEvent> events_for(const std::string& user_id) const {
    std::vector<ActivityEvent> out;
    const auto it = by_user_.find(user_id);
    if (it == by_user_.end()) return out;
    out.reserve(it->second.size());
    for (const std::size_t idx : it->second) out.push_back(events_[idx]);
    return out;
  }

  // Only events with timestamp >= reference - window. A negative window is
  // an argument error.
  std::vector<ActivityEvent> events_for(const std::string& user_id,
                                        Duration window,
                                        UtcTime reference) const {
    if (window.count() < 0) {
      throw ValidationError("window", "window must be non-negative");
    }
    const UtcTime cutoff = reference - window;
    std::vector<ActivityEvent> out;
    const auto it = by_user_.find(user_id);
    if (it == by_user_.end()) return out;
    for (const std::size_t idx : it->second) {
      if (events_[idx].timestamp >= cutoff) out.push_back(events_[idx]);
    }
    return out;
  }

  std::vector<ActivityEvent> events_for(
      const std::string& user_id, const std::optional<Duration>& window,
      UtcTime reference) const {
    return window ? events_for(user_id, *window, reference)
                  : events_for(user_id);
  }

  // Latest 1-5 rating a user gave a deck ("last rating wins").
  std::optional<double> latest_rating(const std::string& user_id,
                                      const std::string& deck_id) const {
    const auto it = by_user_.find(user_id);
    if (it == by_user_.end()) return std::nullopt;
    std::optional<double> rating;
    for (const std::size_t idx : it->second) {
      const ActivityEvent& ev = events_[idx];
      if (ev.kind == EventKind::kRating && ev.deck_id == deck_id) {
        rating = ev.value;  // per-user order is ascending, so last wins
      }
    }
    return rating;
  }

  // Users worth prompting for explicit feedback: at least one association
  // event but fewer than min_ratings rating events. Ordered by rating count
  // ascending, then user id.
  std::vector<std::string> rating_prompt_candidates(
      std::size_t min_ratings) const {
    std::vector<std::pair<std::size_t, std::string>> hits;
    for (const auto& [user, indices] : by_user_) {
      std::size_t associations = 0, ratings = 0;
      for (const std::size_t idx : indices) {
        if (is_association_kind(events_[idx].kind)) {
          ++associations;
        } else if (events_[idx].kind == EventKind::kRating) {
          ++ratings;
        }
      }
      if (associations >= 1 && ratings < min_ratings) {
        hits.emplace_back(ratings, user);
      }
    }
    std::sort(hits.begin(), hits.end());
    std::vector<std::string> out;
    out.reserve(hits.size());
    for (auto& [_, user] : hits) out.push_back(std::move(user));
    return out;
  }

 private:
  static void validate_candidate(const EventCandidate& raw) {
    if (raw.user_id.empty()) {
      throw ValidationError("user_id", "missing field 'user_id'");
    }
    if (raw.deck_id.empty()) {
      throw ValidationError("deck_id", "missing field 'deck_id'");
    }
    validate_kind_value(raw.kind, raw.value);
  }

  std::string next_event_id() {
    char buf[32];
    for (;;) {
      std::snprintf(buf, sizeof buf, "e%06llu",
                    static_cast<unsigned long long>(next_seq_));
      ++next_seq_;
      if (!event_ids_.count(buf)) return buf;
    }
  }

  void append(ActivityEvent ev) {
    const std::size_t idx = events_.size();
    catalog_.insert(ev.deck_id);
    event_ids_.insert(ev.event_id);
    auto& per_user = by_user_[ev.user_id];
    // Keep per-user indices ordered by (timestamp, ingest order).
    auto pos = std::upper_bound(per_user.begin(), per_user.end(), ev.timestamp,
                                [this](UtcTime ts, std::size_t i) {
                                  return ts < events_[i].timestamp;
                                });
    per_user.insert(pos, idx);
    events_.push_back(std::move(ev));
  }

  std::vector<ActivityEvent> events_;
  std::unordered_set<std::string> event_ids_;
  std::map<std::string, std::vector<std::size_t>> by_user_;
  std::set<std::string> catalog_;
  std::map<std::string, DemographicProfile> profiles_;
  std::uint64_t next_seq_ = 1;
};

// ---------------------------------------------------------------------------
// Persistence: UTF-8 JSON-lines, one object per event/profile, append-only.

struct StorePaths {
  std::filesystem::path events;
  std::filesystem::path profiles;
};

// A store path is either a directory (containing events.jsonl and
// profiles.jsonl) or the events file itself, with profiles.jsonl looked up
// next to it.
inline StorePaths resolve_store_paths(const std::filesystem::path& path) {
  if (std::filesystem::is_regular_file(path)) {
    return {path, path.parent_path() / "profiles.jsonl"};
  }
  return {path / "events.jsonl", path / "profiles.jsonl"};
}

inline void load_events(RecordStore& store, const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open event log: " + file.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const EventCandidate c = event_candidate_from_line(line);
      if (!c.event_id) {
        throw ValidationError("event_id", "missing field 'event_id'");
      }
      ActivityEvent ev{*c.event_id, c.user_id, c.deck_id,
                       c.kind,       c.value,  c.timestamp};
      store.append_ingested(ev);
    } catch (const ValidationError& e) {
      throw ValidationError(e.field(), file.string() + ":" +
                                           std::to_string(line_no) + ": " +
                                           e.what());
    }
  }
}

inline void load_profiles(RecordStore& store,
                          const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open profile log: " + file.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      store.upsert_profile(profile_from_line(line));
    } catch (const ValidationError& e) {
      throw ValidationError(e.field(), file.string() + ":" +
                                           std::to_string(line_no) + ": " +
                                           e.what());
    }
  }
}

// Loads a store; a missing profiles file is fine, a missing events file is
// an empty store only if the path's directory exists.
inline RecordStore load_store(const std::filesystem::path& path) {
  const StorePaths paths = resolve_store_paths(path);
  RecordStore store;
  if (std::filesystem::exists(paths.events)) {
    load_events(store, paths.events);
  }
  if (std::filesystem::exists(paths.profiles)) {
    load_profiles(store, paths.profiles);
  }
  return store;
}

inline void save_events(const RecordStore& store,
                        const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw IoError("cannot write event log: " + file.string());
  for (const ActivityEvent& ev : store.events()) {
    out << to_log_line(ev) << '\n';
  }
  if (!out) throw IoError("failed writing event log: " + file.string());
}

inline void save_profiles(const RecordStore& store,
                          const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw IoError("cannot write profile log: " + file.string());
  for (const auto& [_, profile] : store.profiles()) {
    out << to_log_line(profile) << '\n';
  }
  if (!out) throw IoError("failed writing profile log: " + file.string());
}

// Appends event log lines without rewriting the file.
inline void append_event_lines(const std::filesystem::path& file,
                               const std::vector<ActivityEvent>& events) {
  std::ofstream out(file, std::ios::app);
  if (!out) throw IoError("cannot append to event log: " + file.string());
  for (const ActivityEvent& ev : events) {
    out << to_log_line(ev) << '\n';
  }
  out.flush();
  if (!out) throw IoError("failed appending to event log: " + file.string());
}

}  // namespace cfrec
