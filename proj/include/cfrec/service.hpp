#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "cfrec/anonymize.hpp"
#include "cfrec/errors.hpp"
#include "cfrec/feature_space.hpp"
#include "cfrec/knn.hpp"
#include "cfrec/recommender.hpp"
#include "cfrec/record_store.hpp"

namespace cfrec {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path store_path;
  std::optional<std::filesystem::path> weights_path;
  std::string anonymization_key;
  HybridConfig defaults;
};

// HTTP front door over the recommendation library. The service itself adds
// no ranking logic: every response is the library's answer for the current
// snapshot.
//
// Concurrency: one writer. Ingestion batches are all-or-nothing; they append
// to the event log, rebuild the schema/index, and swap a complete snapshot
// under a mutex. Readers grab the snapshot pointer once per request, so a
// request never observes a partially ingested batch.
class RecommenderService {
 public:
  explicit RecommenderService(ServiceConfig config)
      : config_(std::move(config)), anon_(config_.anonymization_key) {
    validate_hybrid_config(config_.defaults);
    paths_ = resolve_store_paths(config_.store_path);
    if (!paths_.events.parent_path().empty()) {
      std::filesystem::create_directories(paths_.events.parent_path());
    }
    weights_ = config_.weights_path ? load_weights(*config_.weights_path)
                                    : uniform_weights();
    publish(load_store(config_.store_path));
    register_routes();
  }

  // Blocking serve loop on the configured address.
  bool listen() { return server_.listen(config_.host, config_.port); }

  // Test support: bind an ephemeral port, serve from a background caller.
  int bind_any_port() { return server_.bind_to_any_port(config_.host); }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  bool is_running() const { return server_.is_running(); }

  // Everything derived from one store version. Immutable once published.
  struct Snapshot {
    RecordStore store;
    std::optional<FeatureSchema> schema;  // absent while the catalog is empty
    std::optional<ProfileIndex> index;
  };

  std::shared_ptr<const Snapshot> snapshot() const {
    std::lock_guard lock(snapshot_mutex_);
    return snapshot_;
  }

 private:
  void publish(RecordStore store) {
    auto snap = std::make_shared<Snapshot>();
    if (!store.catalog().empty()) {
      snap->schema = schema_from_store(store);
      snap->index = ProfileIndex::build(store, *snap->schema);
    }
    snap->store = std::move(store);
    std::lock_guard lock(snapshot_mutex_);
    snapshot_ = std::move(snap);
  }

  static void send_json(httplib::Response& res, int status,
                        const nlohmann::ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, int status,
                         const std::string& message,
                         const std::string& field = "") {
    nlohmann::ordered_json j;
    j["error"] = message;
    if (!field.empty()) j["field"] = field;
    send_json(res, status, j);
  }

  static UtcTime now() {
    return std::chrono::time_point_cast<std::chrono::seconds>(
        std::chrono::system_clock::now());
  }

  void register_routes() {
    server_.Get("/v1/health", [this](const httplib::Request&,
                                     httplib::Response& res) {
      const auto snap = snapshot();
      nlohmann::ordered_json j;
      j["status"] = "ok";
      j["users"] = snap->store.user_count();
      j["decks"] = snap->store.deck_count();
      send_json(res, 200, j);
    });

    server_.Post("/v1/events", [this](const httplib::Request& req,
                                      httplib::Response& res) {
      nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
      if (body.is_discarded()) {
        send_error(res, 400, "request body is not valid JSON", "body");
        return;
      }
      std::vector<nlohmann::json> records;
      if (body.is_array()) {
        records.assign(body.begin(), body.end());
      } else {
        records.push_back(std::move(body));
      }
      std::vector<EventCandidate> batch;
      batch.reserve(records.size());
      try {
        for (const auto& record : records) {
          batch.push_back(event_candidate_from_json(record));
        }
      } catch (const ValidationError& e) {
        send_error(res, 400, e.what(), e.field());
        return;
      }

      // Single writer: ingest into a copy, persist, then swap the snapshot.
      std::lock_guard write_lock(write_mutex_);
      RecordStore next = snapshot()->store;
      const std::size_t before = next.event_count();
      try {
        for (const EventCandidate& candidate : batch) {
          next.ingest(candidate, anon_);
        }
      } catch (const ValidationError& e) {
        send_error(res, 400, e.what(), e.field());
        return;
      }
      std::vector<ActivityEvent> appended(next.events().begin() + before,
                                          next.events().end());
      try {
        append_event_lines(paths_.events, appended);
      } catch (const IoError& e) {
        send_error(res, 500, e.what());
        return;
      }
      publish(std::move(next));
      nlohmann::ordered_json j;
      j["accepted"] = appended.size();
      send_json(res, 202, j);
    });

    server_.Get(R"(/v1/users/([^/]+)/recommendations)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  handle_recommendations(req, res);
                });

    server_.Get(R"(/v1/users/([^/]+)/predicted-rating/([^/]+))",
                [this](const httplib::Request& req, httplib::Response& res) {
                  handle_predicted_rating(req, res);
                });

    server_.Get("/v1/decks/popular", [this](const httplib::Request& req,
                                            httplib::Response& res) {
      const std::string window_text = req.get_param_value("window").empty()
                                          ? "all"
                                          : req.get_param_value("window");
      const auto window = parse_popularity_window(window_text);
      if (!window) {
        send_error(res, 400, "window must be one of all|month|week", "window");
        return;
      }
      const auto snap = snapshot();
      nlohmann::ordered_json items = nlohmann::ordered_json::array();
      for (const PopularityStats& s :
           popularity(snap->store, *window, now(),
                      config_.defaults.popularity_weights)) {
        nlohmann::ordered_json item;
        item["deck_id"] = s.deck_id;
        item["visits"] = s.visits;
        item["edits"] = s.edits;
        item["comments"] = s.comments;
        item["likes"] = s.likes;
        if (s.avg_rating) {
          item["avg_rating"] = *s.avg_rating;
        } else {
          item["avg_rating"] = nullptr;
        }
        item["score"] = s.raw_score;
        items.push_back(std::move(item));
      }
      nlohmann::ordered_json j;
      j["window"] = to_string(*window);
      j["items"] = std::move(items);
      send_json(res, 200, j);
    });
  }

  void handle_recommendations(const httplib::Request& req,
                              httplib::Response& res) {
    const std::string raw_user = req.matches[1];
    HybridConfig cfg = config_.defaults;
    try {
      if (req.has_param("n")) cfg.n = std::stoul(req.get_param_value("n"));
      if (req.has_param("k")) cfg.k = std::stoul(req.get_param_value("k"));
      if (req.has_param("alpha")) {
        cfg.alpha = std::stod(req.get_param_value("alpha"));
      }
      if (req.has_param("window_days")) {
        const long days = std::stol(req.get_param_value("window_days"));
        if (days < 0) throw std::invalid_argument("negative");
        cfg.window = std::chrono::days{days};
      }
    } catch (const std::exception&) {
      send_error(res, 400, "malformed query parameter", "query");
      return;
    }

    const auto snap = snapshot();
    if (!snap->index) {
      send_error(res, 409, "store is empty; ingest events first", "store");
      return;
    }
    try {
      validate_hybrid_config(cfg);
      const std::string user = anon_(raw_user);
      const auto weights = expand_weights(weights_, *snap->schema);
      const UtcTime reference = now();
      const bool cold =
          cold_start_gate(snap->store, user, cfg.cold_start_min_events,
                          cfg.window, reference) == ColdStartStatus::kCold ||
          snap->index->find(user) == nullptr;
      const auto items =
          recommend(*snap->index, snap->store, user, cfg, weights, reference);
      nlohmann::ordered_json j;
      j["user_id"] = raw_user;
      j["cold_start"] = cold;
      nlohmann::ordered_json list = nlohmann::ordered_json::array();
      for (const Recommendation& r : items) {
        nlohmann::ordered_json item;
        item["deck_id"] = r.deck_id;
        item["score"] = r.score;
        item["source"] = to_string(r.source);
        list.push_back(std::move(item));
      }
      j["items"] = std::move(list);
      send_json(res, 200, j);
    } catch (const ValidationError& e) {
      send_error(res, 400, e.what(), e.field());
    }
  }

  void handle_predicted_rating(const httplib::Request& req,
                               httplib::Response& res) {
    const std::string raw_user = req.matches[1];
    const std::string deck_id = req.matches[2];
    const auto snap = snapshot();
    if (!snap->index) {
      send_error(res, 409, "store is empty; ingest events first", "store");
      return;
    }
    const std::string user = anon_(raw_user);
    const auto weights = expand_weights(weights_, *snap->schema);
    const auto prediction = predict_rating_with_fallback(
        *snap->index, snap->store, user, deck_id, config_.defaults.k, weights);
    if (!prediction) {
      send_error(res, 404, "no ratings available to predict from", "deck_id");
      return;
    }
    nlohmann::ordered_json j;
    j["user_id"] = raw_user;
    j["deck_id"] = deck_id;
    j["predicted_rating"] = prediction->value;
    j["basis"] = to_string(prediction->basis);
    send_json(res, 200, j);
  }

  ServiceConfig config_;
  Pseudonymizer anon_;
  StorePaths paths_;
  GroupWeights weights_;
  httplib::Server server_;
  mutable std::mutex snapshot_mutex_;
  std::mutex write_mutex_;
  std::shared_ptr<const Snapshot> snapshot_;
};

}  // namespace cfrec
