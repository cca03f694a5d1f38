#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "convrec/common.hpp"
#include "convrec/critique.hpp"
#include "convrec/model.hpp"

namespace convrec {

// Turn limit reached or session already finished.
class SessionClosed : public Error {
public:
    using Error::Error;
};

struct ServiceConfig {
    std::size_t top_k = 3;
    int max_turns = 10;
    std::chrono::seconds ttl{30 * 60};
    std::filesystem::path transcript_log;  // JSONL; empty disables persistence
};

// Answer to a study prompt: yes / weak-yes / weak-no / no -> 1, 2/3, 1/3, 0.
double feedback_score(const std::string& answer);

struct Recommendation {
    int item = -1;
    std::string item_id;
    std::string title;
    double score = 0.0;
    AspectSet aspects;
};

struct LiveTurn {
    int turn = 0;
    std::vector<Recommendation> shown;
    AspectSet critiques;
    std::vector<std::string> excluded;  // item ids removed after this turn
    nlohmann::json feedback = nlohmann::json::object();  // prompt -> {answer, score}
};

// Persisted record of a finished (or expired) session.
struct LiveTranscript {
    std::string session_id;
    std::optional<std::string> user_id;  // empty for cold start
    std::string created_at;              // ISO-8601 UTC
    std::string closed_at;
    std::string status;                  // accepted, closed, expired
    std::optional<std::string> accepted;
    std::vector<LiveTurn> turns;
    nlohmann::json feedback = nlohmann::json::object();
};

nlohmann::json to_json(const Recommendation& rec, const std::vector<std::string>& labels);
nlohmann::json to_json(const LiveTranscript& t);
LiveTranscript transcript_from_json(const nlohmann::json& j);

// Reads "item_id -> title" records ({"item_id": ..., "title": ...} per line).
std::map<std::string, std::string> load_item_titles(const std::filesystem::path& path);

// Everything a session manager serves from: the model plus corpus indices.
struct ServingData {
    ExpertModel model;
    AspectContext ctx;
    std::vector<std::string> user_ids;
    std::vector<std::string> item_ids;
    std::vector<std::string> aspect_labels;
    std::map<std::string, std::string> titles;
};

// In-memory live sessions over a shared immutable model. Calls on one session
// are serialized; different sessions proceed concurrently.
class SessionManager {
public:
    using Clock = std::function<std::chrono::steady_clock::time_point()>;

    SessionManager(std::shared_ptr<const ServingData> data, ServiceConfig config, Clock clock = {});

    struct View {
        std::string session_id;
        int turn = 0;
        std::vector<Recommendation> recommendations;
    };

    // Cold start when user_id is empty; NotFound for an unknown user.
    View create(const std::optional<std::string>& user_id);
    View recommendations(const std::string& session_id);
    // Critiques aspects shown in the current justifications; `shown` item ids are
    // excluded afterwards (all currently shown items when empty).
    View critique(const std::string& session_id, const AspectSet& aspects, const std::vector<std::string>& shown,
                  const nlohmann::json& feedback = nlohmann::json::object());
    LiveTranscript close(const std::string& session_id, const std::optional<std::string>& accepted,
                         const nlohmann::json& feedback = nlohmann::json::object());

    // Drops sessions idle longer than the TTL (persisting them as expired).
    std::size_t evict_expired();
    std::size_t active() const;

    const ServingData& data() const { return *data_; }
    const ServiceConfig& config() const { return config_; }

    // The latent user vector of a live session (for tests and diagnostics).
    Vector user_vector(const std::string& session_id);

private:
    struct Live {
        std::mutex mu;
        bool closed = false;
        Vector base;
        Vector freq;
        CritiqueState state;
        std::vector<int> excluded;
        std::vector<Recommendation> shown;
        int turn = 1;
        std::chrono::steady_clock::time_point last_used;
        LiveTranscript transcript;
    };

    std::shared_ptr<Live> find(const std::string& id);
    std::vector<Recommendation> rank(const Live& s) const;
    void persist(const LiveTranscript& t);
    std::string new_id();

    std::shared_ptr<const ServingData> data_;
    ServiceConfig config_;
    Clock clock_;
    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<Live>> sessions_;
    std::mt19937_64 id_rng_;
    std::mutex log_mu_;
};

// HTTP/JSON front end:
//   POST /sessions {user_id?}                      -> {session_id, turn, recommendations}
//   GET  /sessions/{id}/recommendations            -> {session_id, turn, recommendations}
//   POST /sessions/{id}/critiques {aspects, shown, feedback?}
//   POST /sessions/{id}/close {accepted?, feedback?}
//   GET  /healthz
// Errors are {error, detail}.
class HttpService {
public:
    explicit HttpService(SessionManager& sessions);
    ~HttpService();
    HttpService(const HttpService&) = delete;
    HttpService& operator=(const HttpService&) = delete;

    // Binds to host:port (port 0 picks a free port) and returns the port.
    int bind(const std::string& host, int port);
    // Blocks serving requests until stop().
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace convrec
