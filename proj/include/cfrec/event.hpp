#pragma once

#include <optional>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "cfrec/errors.hpp"
#include "cfrec/time_utils.hpp"

namespace cfrec {

// One user action on a deck. "rating" carries a 1-5 value, "visit" may carry
// a duration in seconds, every other kind is valueless.
enum class EventKind {
  kVisit,
  kCreate,
  kEdit,
  kComment,
  kDiscussion,
  kSearch,
  kLike,
  kRating,
};

// Kinds that associate a user with a deck. Searches have no reliable deck
// target and ratings are preference signals, so neither counts.
inline bool is_association_kind(EventKind kind) {
  return kind != EventKind::kSearch && kind != EventKind::kRating;
}

inline const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::kVisit: return "visit";
    case EventKind::kCreate: return "create";
    case EventKind::kEdit: return "edit";
    case EventKind::kComment: return "comment";
    case EventKind::kDiscussion: return "discussion";
    case EventKind::kSearch: return "search";
    case EventKind::kLike: return "like";
    case EventKind::kRating: return "rating";
  }
  return "unknown";
}

inline std::optional<EventKind> parse_event_kind(const std::string& text) {
  if (text == "visit") return EventKind::kVisit;
  if (text == "create") return EventKind::kCreate;
  if (text == "edit") return EventKind::kEdit;
  if (text == "comment") return EventKind::kComment;
  if (text == "discussion") return EventKind::kDiscussion;
  if (text == "search") return EventKind::kSearch;
  if (text == "like") return EventKind::kLike;
  if (text == "rating") return EventKind::kRating;
  return std::nullopt;
}

// A fully validated, stored event. user_id is always a pseudonym.
struct ActivityEvent {
  std::string event_id;
  std::string user_id;
  std::string deck_id;
  EventKind kind = EventKind::kVisit;
  std::optional<double> value;
  UtcTime timestamp{};

  friend bool operator==(const ActivityEvent&, const ActivityEvent&) = default;
};

// A parsed-but-not-yet-ingested record: user id still raw, event id possibly
// unassigned.
struct EventCandidate {
  std::optional<std::string> event_id;
  std::string user_id;
  std::string deck_id;
  EventKind kind = EventKind::kVisit;
  std::optional<double> value;
  UtcTime timestamp{};
};

struct DemographicProfile {
  std::string user_id;
  std::optional<int> age;
  std::set<std::string> skills;
  std::optional<std::string> location;
  UtcTime registered_at{};

  friend bool operator==(const DemographicProfile&,
                         const DemographicProfile&) = default;
};

// Enforces the kind/value contract shared by candidates and stored events.
inline void validate_kind_value(EventKind kind,
                                const std::optional<double>& value) {
  switch (kind) {
    case EventKind::kRating:
      if (!value.has_value()) {
        throw ValidationError("value", "rating events require a value");
      }
      if (!(*value >= 1.0 && *value <= 5.0)) {
        throw ValidationError("value", "rating out of range [1,5]");
      }
      break;
    case EventKind::kVisit:
      if (value.has_value() && !(*value >= 0.0)) {
        throw ValidationError("value", "visit duration must be >= 0");
      }
      break;
    default:
      if (value.has_value()) {
        throw ValidationError(
            "value", std::string("events of kind '") + to_string(kind) +
                         "' carry no value");
      }
  }
}

namespace detail {

inline std::string require_string(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) {
    throw ValidationError(key, std::string("missing field '") + key + "'");
  }
  if (!j.at(key).is_string() || j.at(key).get<std::string>().empty()) {
    throw ValidationError(key,
                          std::string("field '") + key +
                              "' must be a non-empty string");
  }
  return j.at(key).get<std::string>();
}

inline std::optional<double> optional_number(const nlohmann::json& j,
                                             const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  if (!j.at(key).is_number()) {
    throw ValidationError(key, std::string("field '") + key +
                                   "' must be a number or null");
  }
  return j.at(key).get<double>();
}

inline UtcTime require_timestamp(const nlohmann::json& j, const char* key) {
  const std::string raw = require_string(j, key);
  const auto parsed = parse_rfc3339(raw);
  if (!parsed) {
    throw ValidationError(key, "unparseable timestamp '" + raw +
                                   "' (expected RFC 3339 UTC)");
  }
  return *parsed;
}

}  // namespace detail

// Parses one raw event record. Throws ValidationError naming the offending
// field; the kind/value contract is checked here as well.
inline EventCandidate event_candidate_from_json(const nlohmann::json& j) {
  if (!j.is_object()) {
    throw ValidationError("record", "event record must be a JSON object");
  }
  EventCandidate c;
  if (j.contains("event_id") && !j.at("event_id").is_null()) {
    c.event_id = detail::require_string(j, "event_id");
  }
  c.user_id = detail::require_string(j, "user_id");
  c.deck_id = detail::require_string(j, "deck_id");
  const std::string kind_text = detail::require_string(j, "kind");
  const auto kind = parse_event_kind(kind_text);
  if (!kind) {
    throw ValidationError("kind", "unknown event kind '" + kind_text + "'");
  }
  c.kind = *kind;
  c.value = detail::optional_number(j, "value");
  c.timestamp = detail::require_timestamp(j, "timestamp");
  validate_kind_value(c.kind, c.value);
  return c;
}

inline EventCandidate event_candidate_from_line(const std::string& line) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded()) {
    throw ValidationError("record", "line is not valid JSON");
  }
  return event_candidate_from_json(j);
}

// Log line for a stored event. Field order and formatting are fixed so a
// reloaded store re-serializes byte-identically.
inline std::string to_log_line(const ActivityEvent& ev) {
  nlohmann::ordered_json j;
  j["event_id"] = ev.event_id;
  j["user_id"] = ev.user_id;
  j["deck_id"] = ev.deck_id;
  j["kind"] = to_string(ev.kind);
  if (ev.value.has_value()) {
    j["value"] = *ev.value;
  } else {
    j["value"] = nullptr;
  }
  j["timestamp"] = format_rfc3339(ev.timestamp);
  return j.dump();
}

inline void validate_profile(const DemographicProfile& p) {
  if (p.user_id.empty()) {
    throw ValidationError("user_id", "profile requires a user_id");
  }
  if (p.age.has_value() && !(*p.age > 0 && *p.age < 150)) {
    throw ValidationError("age", "age out of range (0,150)");
  }
}

inline DemographicProfile profile_from_json(const nlohmann::json& j) {
  if (!j.is_object()) {
    throw ValidationError("record", "profile record must be a JSON object");
  }
  DemographicProfile p;
  p.user_id = detail::require_string(j, "user_id");
  if (j.contains("age") && !j.at("age").is_null()) {
    if (!j.at("age").is_number_integer()) {
      throw ValidationError("age", "age must be an integer or null");
    }
    p.age = j.at("age").get<int>();
  }
  if (j.contains("skills") && !j.at("skills").is_null()) {
    if (!j.at("skills").is_array()) {
      throw ValidationError("skills", "skills must be an array of strings");
    }
    for (const auto& tag : j.at("skills")) {
      if (!tag.is_string()) {
        throw ValidationError("skills", "skills must be an array of strings");
      }
      p.skills.insert(tag.get<std::string>());
    }
  }
  if (j.contains("location") && !j.at("location").is_null()) {
    if (!j.at("location").is_string()) {
      throw ValidationError("location", "location must be a string or null");
    }
    p.location = j.at("location").get<std::string>();
  }
  p.registered_at = detail::require_timestamp(j, "registered_at");
  validate_profile(p);
  return p;
}

inline DemographicProfile profile_from_line(const std::string& line) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded()) {
    throw ValidationError("record", "line is not valid JSON");
  }
  return profile_from_json(j);
}

inline std::string to_log_line(const DemographicProfile& p) {
  nlohmann::ordered_json j;
  j["user_id"] = p.user_id;
  if (p.age.has_value()) {
    j["age"] = *p.age;
  } else {
    j["age"] = nullptr;
  }
  j["skills"] = p.skills;  // std::set keeps tags sorted
  if (p.location.has_value()) {
    j["location"] = *p.location;
  } else {
    j["location"] = nullptr;
  }
  j["registered_at"] = format_rfc3339(p.registered_at);
  return j.dump();
}

}  // namespace cfrec
