#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "support/test_support.hpp"

using namespace cfrec;
using cfrec::testing::ScratchDir;
using cfrec::testing::ts;

namespace {

const Pseudonymizer kAnon("unit-test-key");

EventCandidate candidate(const std::string& user, const std::string& deck,
                         EventKind kind, std::optional<double> value,
                         const std::string& when) {
  EventCandidate c;
  c.user_id = user;
  c.deck_id = deck;
  c.kind = kind;
  c.value = value;
  c.timestamp = ts(when);
  return c;
}

TEST(Anonymize, DeterministicPerKey) {
  const Pseudonymizer p("secret");
  EXPECT_EQ(p("alice"), p("alice"));
  EXPECT_NE(p("alice"), p("alicf"));
}

TEST(Anonymize, KeySeparation) {
  const Pseudonymizer p1("key-one"), p2("key-two");
  EXPECT_NE(p1("alice"), p2("alice"));
}

TEST(Anonymize, EmptyKeyRejected) {
  EXPECT_THROW(Pseudonymizer(""), ValidationError);
}

TEST(Anonymize, RevealsNoSubstringOfRawId) {
  const Pseudonymizer p("secret");
  for (const std::string raw : {"alice", "bob.smith@example.org", "user_77"}) {
    EXPECT_EQ(p(raw).find(raw), std::string::npos);
  }
}

// Collision check over a 10^4-name corpus: a keyed 128-bit hash must keep
// distinct raw ids distinct.
TEST(Anonymize, InjectiveOnNameCorpus) {
  const Pseudonymizer p("secret");
  std::set<std::string> pseudonyms;
  for (int i = 0; i < 10000; ++i) {
    pseudonyms.insert(p("member-" + std::to_string(i) + "@slidewiki.test"));
  }
  EXPECT_EQ(pseudonyms.size(), 10000u);
}

TEST(Anonymize, StableAcrossInstances) {
  // Two pseudonymizers with the same key model a process restart.
  EXPECT_EQ(Pseudonymizer("restart-key")("alice"),
            Pseudonymizer("restart-key")("alice"));
}

TEST(RecordStore, IngestRoundTripPreservesEverythingButRawId) {
  RecordStore store;
  const std::string id = store.ingest(
      candidate("u1", "d1", EventKind::kRating, 4.0, "2024-01-15T10:30:00Z"),
      kAnon);
  const auto events = store.events_for(kAnon("u1"));
  ASSERT_EQ(events.size(), 1u);
  EXPECT_EQ(events[0].event_id, id);
  EXPECT_EQ(events[0].deck_id, "d1");
  EXPECT_EQ(events[0].kind, EventKind::kRating);
  EXPECT_EQ(events[0].value, 4.0);
  EXPECT_EQ(events[0].timestamp, ts("2024-01-15T10:30:00Z"));
  EXPECT_EQ(events[0].user_id, kAnon("u1"));
  EXPECT_NE(events[0].user_id, "u1");
}

TEST(RecordStore, RatingOutOfRangeRejected) {
  RecordStore store;
  try {
    store.ingest(candidate("u1", "d1", EventKind::kRating, 7.0,
                           "2024-01-15T10:30:00Z"),
                 kAnon);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "value");
    EXPECT_NE(std::string(e.what()).find("rating out of range"),
              std::string::npos);
  }
}

TEST(RecordStore, SameRawUserGetsSamePseudonym) {
  RecordStore store;
  store.ingest(candidate("u1", "d1", EventKind::kVisit, std::nullopt,
                         "2024-01-15T10:30:00Z"),
               kAnon);
  store.ingest(candidate("u1", "d2", EventKind::kVisit, std::nullopt,
                         "2024-01-15T11:30:00Z"),
               kAnon);
  ASSERT_EQ(store.events().size(), 2u);
  EXPECT_EQ(store.events()[0].user_id, store.events()[1].user_id);
}

TEST(RecordStore, FieldValidationNamesTheField) {
  RecordStore store;
  auto expect_field = [&](EventCandidate c, const std::string& field) {
    try {
      store.ingest(c, kAnon);
      FAIL() << "expected rejection on field " << field;
    } catch (const ValidationError& e) {
      EXPECT_EQ(e.field(), field);
    }
  };
  expect_field(candidate("", "d1", EventKind::kVisit, std::nullopt,
                         "2024-01-15T10:30:00Z"),
               "user_id");
  expect_field(candidate("u1", "", EventKind::kVisit, std::nullopt,
                         "2024-01-15T10:30:00Z"),
               "deck_id");
  expect_field(candidate("u1", "d1", EventKind::kVisit, -5.0,
                         "2024-01-15T10:30:00Z"),
               "value");
  expect_field(candidate("u1", "d1", EventKind::kLike, 1.0,
                         "2024-01-15T10:30:00Z"),
               "value");
}

TEST(RecordStore, MalformedJsonRecordsRejected) {
  EXPECT_THROW(event_candidate_from_line("not json"), ValidationError);
  auto expect_field = [](const std::string& line, const std::string& field) {
    try {
      event_candidate_from_line(line);
      FAIL() << "expected rejection on " << field << " for " << line;
    } catch (const ValidationError& e) {
      EXPECT_EQ(e.field(), field);
    }
  };
  expect_field(R"({"deck_id":"d1","kind":"visit","timestamp":"2024-01-15T10:30:00Z"})",
               "user_id");
  expect_field(R"({"user_id":"u1","deck_id":"d1","kind":"hover","timestamp":"2024-01-15T10:30:00Z"})",
               "kind");
  expect_field(R"({"user_id":"u1","deck_id":"d1","kind":"visit","timestamp":"yesterday"})",
               "timestamp");
  expect_field(R"({"user_id":"u1","deck_id":"d1","kind":"rating","value":0.5,"timestamp":"2024-01-15T10:30:00Z"})",
               "value");
}

TEST(RecordStore, DuplicateEventIdRejected) {
  RecordStore store;
  EventCandidate c = candidate("u1", "d1", EventKind::kVisit, std::nullopt,
                               "2024-01-15T10:30:00Z");
  c.event_id = "evt-1";
  store.ingest(c, kAnon);
  c.timestamp = ts("2024-01-15T11:30:00Z");
  EXPECT_THROW(store.ingest(c, kAnon), ValidationError);
}

TEST(RecordStore, AssignedIdsSkipTakenOnes) {
  RecordStore store;
  EventCandidate c = candidate("u1", "d1", EventKind::kVisit, std::nullopt,
                               "2024-01-15T10:30:00Z");
  c.event_id = "e000001";
  store.ingest(c, kAnon);
  c.event_id.reset();
  const std::string assigned = store.ingest(c, kAnon);
  EXPECT_NE(assigned, "e000001");
  EXPECT_EQ(store.events().size(), 2u);
}

TEST(RecordStore, CatalogAutoExtends) {
  RecordStore store;
  store.ingest(candidate("u1", "d9", EventKind::kVisit, std::nullopt,
                         "2024-01-15T10:30:00Z"),
               kAnon);
  EXPECT_TRUE(store.catalog().count("d9"));
}

TEST(EventsFor, WindowBoundaries) {
  RecordStore store;
  const std::string user = kAnon("u1");
  store.ingest(candidate("u1", "d1", EventKind::kVisit, std::nullopt,
                         "2024-01-01T00:00:00Z"),
               kAnon);
  store.ingest(candidate("u1", "d2", EventKind::kVisit, std::nullopt,
                         "2024-01-05T00:00:00Z"),
               kAnon);
  store.ingest(candidate("u1", "d3", EventKind::kVisit, std::nullopt,
                         "2024-01-09T00:00:00Z"),
               kAnon);
  const UtcTime now = ts("2024-01-10T00:00:00Z");

  const auto latest = store.events_for(user, std::chrono::days{2}, now);
  ASSERT_EQ(latest.size(), 1u);
  EXPECT_EQ(latest[0].deck_id, "d3");

  EXPECT_EQ(store.events_for(user).size(), 3u);
  EXPECT_TRUE(store.events_for("nobody").empty());
  EXPECT_THROW(store.events_for(user, Duration{-1}, now), ValidationError);

  // Boundary is inclusive: timestamp == reference - window stays in.
  const auto exact = store.events_for(user, std::chrono::days{5}, now);
  ASSERT_EQ(exact.size(), 2u);
  EXPECT_EQ(exact[0].deck_id, "d2");
}

TEST(EventsFor, WiderWindowIsSuperset) {
  std::mt19937_64 rng(7);
  RecordStore store;
  for (int i = 0; i < 40; ++i) {
    char when[32];
    std::snprintf(when, sizeof when, "2024-01-%02dT%02d:00:00Z",
                  1 + int(rng() % 28), int(rng() % 24));
    store.ingest(candidate("u1", "d" + std::to_string(rng() % 5),
                           EventKind::kVisit, std::nullopt, when),
                 kAnon);
  }
  const std::string user = kAnon("u1");
  const UtcTime now = ts("2024-02-01T00:00:00Z");
  for (int days = 0; days <= 31; days += 3) {
    const auto narrow = store.events_for(user, std::chrono::days{days}, now);
    const auto wide =
        store.events_for(user, std::chrono::days{days + 3}, now);
    std::set<std::string> wide_ids;
    for (const auto& ev : wide) wide_ids.insert(ev.event_id);
    for (const auto& ev : narrow) EXPECT_TRUE(wide_ids.count(ev.event_id));
  }
}

TEST(EventsFor, AscendingTimestampsRegardlessOfIngestOrder) {
  RecordStore store;
  store.ingest(candidate("u1", "d2", EventKind::kVisit, std::nullopt,
                         "2024-01-05T00:00:00Z"),
               kAnon);
  store.ingest(candidate("u1", "d1", EventKind::kVisit, std::nullopt,
                         "2024-01-01T00:00:00Z"),
               kAnon);
  store.ingest(candidate("u1", "d3", EventKind::kVisit, std::nullopt,
                         "2024-01-03T00:00:00Z"),
               kAnon);
  const auto events = store.events_for(kAnon("u1"));
  ASSERT_EQ(events.size(), 3u);
  EXPECT_EQ(events[0].deck_id, "d1");
  EXPECT_EQ(events[1].deck_id, "d3");
  EXPECT_EQ(events[2].deck_id, "d2");
}

TEST(RatingPrompt, ThresholdAndOrdering) {
  RecordStore store;
  // u-visits: 5 visits, no ratings. u-rated: 2 ratings plus a visit.
  for (int i = 0; i < 5; ++i) {
    store.ingest(candidate("u-visits", "d1", EventKind::kVisit, std::nullopt,
                           "2024-01-0" + std::to_string(i + 1) +
                               "T00:00:00Z"),
                 kAnon);
  }
  store.ingest(candidate("u-rated", "d1", EventKind::kVisit, std::nullopt,
                         "2024-01-01T00:00:00Z"),
               kAnon);
  store.ingest(candidate("u-rated", "d1", EventKind::kRating, 4.0,
                         "2024-01-02T00:00:00Z"),
               kAnon);
  store.ingest(candidate("u-rated", "d2", EventKind::kRating, 5.0,
                         "2024-01-03T00:00:00Z"),
               kAnon);

  const auto prompt1 = store.rating_prompt_candidates(1);
  ASSERT_EQ(prompt1.size(), 1u);
  EXPECT_EQ(prompt1[0], kAnon("u-visits"));

  EXPECT_TRUE(RecordStore().rating_prompt_candidates(1).empty());

  // min_ratings=3 includes both; fewest ratings first.
  const auto prompt3 = store.rating_prompt_candidates(3);
  ASSERT_EQ(prompt3.size(), 2u);
  EXPECT_EQ(prompt3[0], kAnon("u-visits"));
  EXPECT_EQ(prompt3[1], kAnon("u-rated"));
}

TEST(RatingPrompt, RatingOnlyUserExcluded) {
  RecordStore store;
  store.ingest(candidate("u1", "d1", EventKind::kRating, 3.0,
                         "2024-01-01T00:00:00Z"),
               kAnon);
  EXPECT_TRUE(store.rating_prompt_candidates(5).empty());
}

TEST(Persistence, ReloadReproducesByteIdenticalLogs) {
  ScratchDir scratch("store");
  RecordStore store;
  store.ingest(candidate("alice", "d1", EventKind::kVisit, 42.0,
                         "2024-01-15T10:30:00Z"),
               kAnon);
  store.ingest(candidate("bob", "d2", EventKind::kRating, 3.5,
                         "2024-01-16T08:00:00Z"),
               kAnon);
  store.ingest(candidate("alice", "d2", EventKind::kLike, std::nullopt,
                         "2024-01-17T09:15:00Z"),
               kAnon);
  DemographicProfile profile;
  profile.user_id = "alice";
  profile.age = 34;
  profile.skills = {"design", "math"};
  profile.location = "europe";
  profile.registered_at = ts("2023-06-01T00:00:00Z");
  store.upsert_profile_raw(profile, kAnon);

  save_events(store, scratch.file("events.jsonl"));
  save_profiles(store, scratch.file("profiles.jsonl"));

  const RecordStore reloaded = load_store(scratch.path());
  EXPECT_EQ(reloaded.events(), store.events());
  EXPECT_EQ(reloaded.profiles(), store.profiles());
  EXPECT_EQ(reloaded.catalog(), store.catalog());

  save_events(reloaded, scratch.file("events2.jsonl"));
  save_profiles(reloaded, scratch.file("profiles2.jsonl"));
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  EXPECT_EQ(slurp(scratch.file("events.jsonl")),
            slurp(scratch.file("events2.jsonl")));
  EXPECT_EQ(slurp(scratch.file("profiles.jsonl")),
            slurp(scratch.file("profiles2.jsonl")));
  EXPECT_FALSE(slurp(scratch.file("events.jsonl")).find("alice") !=
               std::string::npos);
}

TEST(Persistence, CorruptLogNamesLine) {
  ScratchDir scratch("corrupt");
  {
    std::ofstream out(scratch.file("events.jsonl"));
    out << R"({"event_id":"e1","user_id":"u1","deck_id":"d1","kind":"visit","value":null,"timestamp":"2024-01-15T10:30:00Z"})"
        << "\n";
    out << R"({"event_id":"e2","user_id":"u1","deck_id":"d1","kind":"rating","value":9,"timestamp":"2024-01-15T10:31:00Z"})"
        << "\n";
  }
  try {
    load_store(scratch.path());
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "value");
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
  }
}

TEST(Profiles, ValidationAndDefaults) {
  RecordStore store;
  DemographicProfile p;
  p.user_id = "u1";
  p.age = 200;
  p.registered_at = ts("2024-01-01T00:00:00Z");
  EXPECT_THROW(store.upsert_profile(p), ValidationError);
  p.age.reset();
  store.upsert_profile(p);
  EXPECT_NE(store.profile_for("u1"), nullptr);
  EXPECT_EQ(store.profile_for("missing"), nullptr);
}

TEST(Timestamps, ParseAndFormat) {
  EXPECT_EQ(format_rfc3339(ts("2024-01-15T10:30:00Z")),
            "2024-01-15T10:30:00Z");
  EXPECT_TRUE(parse_rfc3339("2024-01-15T10:30:00.123Z").has_value());
  EXPECT_EQ(*parse_rfc3339("2024-01-15T10:30:00.999Z"),
            ts("2024-01-15T10:30:00Z"));
  EXPECT_FALSE(parse_rfc3339("2024-01-15 10:30:00Z").has_value());
  EXPECT_FALSE(parse_rfc3339("2024-13-15T10:30:00Z").has_value());
  EXPECT_FALSE(parse_rfc3339("2024-02-30T10:30:00Z").has_value());
  EXPECT_FALSE(parse_rfc3339("2024-01-15T10:30:00+02:00").has_value());
  EXPECT_FALSE(parse_rfc3339("2024-01-15T25:30:00Z").has_value());
}

}  // namespace
