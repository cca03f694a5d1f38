#include "convrec/service.hpp"

#include <algorithm>
#include <ctime>
#include <fstream>
#include <set>

#include <httplib.h>

#include "convrec/justify.hpp"
#include "convrec/recsys.hpp"

namespace convrec {

namespace {

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

nlohmann::json scored_feedback(const nlohmann::json& feedback) {
    if (feedback.is_null()) return nlohmann::json::object();
    if (!feedback.is_object()) throw InvalidInput("feedback must be an object of prompt -> answer");
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [prompt, answer] : feedback.items()) {
        if (!answer.is_string()) throw InvalidInput("feedback answer for '" + prompt + "' must be a string");
        const auto a = answer.get<std::string>();
        out[prompt] = {{"answer", a}, {"score", feedback_score(a)}};
    }
    return out;
}

nlohmann::json rec_record(const Recommendation& r) {
    return {{"item", r.item}, {"item_id", r.item_id}, {"title", r.title}, {"score", r.score}, {"aspects", r.aspects}};
}

Recommendation rec_from_record(const nlohmann::json& j) {
    Recommendation r;
    r.item = j.at("item").get<int>();
    r.item_id = j.at("item_id").get<std::string>();
    r.title = j.at("title").get<std::string>();
    r.score = j.at("score").get<double>();
    r.aspects = j.at("aspects").get<AspectSet>();
    return r;
}

}  // namespace

double feedback_score(const std::string& answer) {
    if (answer == "yes") return 1.0;
    if (answer == "weak-yes") return 2.0 / 3.0;
    if (answer == "weak-no") return 1.0 / 3.0;
    if (answer == "no") return 0.0;
    throw InvalidInput("unknown feedback answer '" + answer + "' (expected yes, weak-yes, weak-no, no)");
}

nlohmann::json to_json(const Recommendation& rec, const std::vector<std::string>& labels) {
    nlohmann::json aspects = nlohmann::json::array();
    for (int a : rec.aspects) {
        aspects.push_back({{"index", a}, {"label", a < static_cast<int>(labels.size()) ? labels[a] : ""}});
    }
    return {{"item_id", rec.item_id}, {"title", rec.title}, {"score", rec.score}, {"aspects", aspects}};
}

nlohmann::json to_json(const LiveTranscript& t) {
    nlohmann::json turns = nlohmann::json::array();
    for (const auto& turn : t.turns) {
        nlohmann::json shown = nlohmann::json::array();
        for (const auto& r : turn.shown) shown.push_back(rec_record(r));
        turns.push_back({{"turn", turn.turn},
                         {"shown", shown},
                         {"critiques", turn.critiques},
                         {"excluded", turn.excluded},
                         {"feedback", turn.feedback}});
    }
    return {{"session_id", t.session_id},
            {"user_id", t.user_id ? nlohmann::json(*t.user_id) : nlohmann::json(nullptr)},
            {"created_at", t.created_at},
            {"closed_at", t.closed_at},
            {"status", t.status},
            {"accepted", t.accepted ? nlohmann::json(*t.accepted) : nlohmann::json(nullptr)},
            {"turns", turns},
            {"feedback", t.feedback}};
}

LiveTranscript transcript_from_json(const nlohmann::json& j) {
    LiveTranscript t;
    try {
        t.session_id = j.at("session_id").get<std::string>();
        if (!j.at("user_id").is_null()) t.user_id = j.at("user_id").get<std::string>();
        t.created_at = j.at("created_at").get<std::string>();
        t.closed_at = j.at("closed_at").get<std::string>();
        t.status = j.at("status").get<std::string>();
        if (!j.at("accepted").is_null()) t.accepted = j.at("accepted").get<std::string>();
        for (const auto& tj : j.at("turns")) {
            LiveTurn turn;
            turn.turn = tj.at("turn").get<int>();
            for (const auto& r : tj.at("shown")) turn.shown.push_back(rec_from_record(r));
            turn.critiques = tj.at("critiques").get<AspectSet>();
            turn.excluded = tj.at("excluded").get<std::vector<std::string>>();
            turn.feedback = tj.at("feedback");
            t.turns.push_back(std::move(turn));
        }
        t.feedback = j.at("feedback");
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("malformed transcript record: ") + e.what());
    }
    return t;
}

std::map<std::string, std::string> load_item_titles(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw NotFound("cannot open item metadata " + path.string());
    std::map<std::string, std::string> titles;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            titles[j.at("item_id").get<std::string>()] = j.at("title").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw InvalidInput(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return titles;
}

SessionManager::SessionManager(std::shared_ptr<const ServingData> data, ServiceConfig config, Clock clock)
    : data_(std::move(data)), config_(std::move(config)), clock_(std::move(clock)), id_rng_(std::random_device{}()) {
    if (!data_) throw InvalidInput("SessionManager: no serving data");
    data_->model.check_consistent();
    const auto& m = data_->model;
    if (data_->ctx.n_aspects() != m.n_aspects() || data_->ctx.user_freq.rows() != m.n_users() ||
        data_->ctx.item_presence.rows() != m.n_items()) {
        throw InvalidInput("SessionManager: aspect matrices do not match the model");
    }
    if (static_cast<int>(data_->item_ids.size()) != m.n_items() ||
        static_cast<int>(data_->user_ids.size()) != m.n_users()) {
        throw InvalidInput("SessionManager: id lists do not match the model");
    }
    if (config_.top_k < 1) throw InvalidInput("SessionManager: top_k must be >= 1");
    if (config_.max_turns < 1) throw InvalidInput("SessionManager: max_turns must be >= 1");
    if (!clock_) clock_ = [] { return std::chrono::steady_clock::now(); };
}

std::string SessionManager::new_id() {
    static const char* hex = "0123456789abcdef";
    std::string id;
    for (int word = 0; word < 2; ++word) {
        auto x = id_rng_();
        for (int i = 0; i < 16; ++i, x >>= 4) id.push_back(hex[x & 15]);
    }
    return id;
}

std::vector<Recommendation> SessionManager::rank(const Live& s) const {
    const auto& d = *data_;
    const Vector gamma = apply_critique(s.base, s.state, d.model.encoder, d.model.fusion);
    const Vector scores = d.model.scores(gamma);
    const ItemList ranking = rank_items(scores, s.excluded);
    std::vector<Recommendation> out;
    for (std::size_t k = 0; k < ranking.size() && k < config_.top_k; ++k) {
        Recommendation r;
        r.item = ranking[k];
        r.item_id = d.item_ids[r.item];
        auto it = d.titles.find(r.item_id);
        r.title = it == d.titles.end() ? r.item_id : it->second;
        r.score = scores(r.item);
        r.aspects = emit_justification(d.model.aspect_probs(gamma, r.item), JustifyMode::Deterministic);
        out.push_back(std::move(r));
    }
    return out;
}

SessionManager::View SessionManager::create(const std::optional<std::string>& user_id) {
    const auto& d = *data_;
    auto s = std::make_shared<Live>();
    if (user_id && !user_id->empty()) {
        auto it = std::find(d.user_ids.begin(), d.user_ids.end(), *user_id);
        if (it == d.user_ids.end()) throw NotFound("unknown user '" + *user_id + "'");
        const auto u = static_cast<Eigen::Index>(it - d.user_ids.begin());
        s->base = d.model.user_base.row(u).transpose();
        s->freq = d.ctx.user_freq.row(u).transpose();
        s->transcript.user_id = *user_id;
    } else {
        // Cold start: population-mean base embedding, no aspect history.
        s->base = d.model.user_base.colwise().mean().transpose();
        s->freq = Vector::Zero(d.model.n_aspects());
    }
    s->state = CritiqueState::initial(s->freq);
    s->shown = rank(*s);
    s->last_used = clock_();
    s->transcript.created_at = utc_now();

    View v;
    v.turn = 1;
    v.recommendations = s->shown;
    std::lock_guard lock(mu_);
    do {
        v.session_id = new_id();
    } while (sessions_.count(v.session_id));
    s->transcript.session_id = v.session_id;
    sessions_[v.session_id] = s;
    return v;
}

std::shared_ptr<SessionManager::Live> SessionManager::find(const std::string& id) {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFound("unknown session '" + id + "'");
    return it->second;
}

SessionManager::View SessionManager::recommendations(const std::string& session_id) {
    auto s = find(session_id);
    std::lock_guard lock(s->mu);
    if (s->closed) throw SessionClosed("session '" + session_id + "' is closed");
    s->last_used = clock_();
    return {session_id, s->turn, s->shown};
}

SessionManager::View SessionManager::critique(const std::string& session_id, const AspectSet& aspects,
                                              const std::vector<std::string>& shown, const nlohmann::json& feedback) {
    auto s = find(session_id);
    std::lock_guard lock(s->mu);
    if (s->closed) throw SessionClosed("session '" + session_id + "' is closed");
    if (s->turn >= config_.max_turns) {
        throw SessionClosed("session '" + session_id + "' reached the turn limit of " +
                            std::to_string(config_.max_turns));
    }
    const auto& d = *data_;

    std::set<int> displayed;
    for (const auto& r : s->shown) displayed.insert(r.aspects.begin(), r.aspects.end());
    std::set<int> mask;
    for (int a : aspects) {
        if (a < 0 || a >= d.model.n_aspects()) throw InvalidInput("aspect index " + std::to_string(a) + " out of range");
        if (!displayed.count(a)) {
            const std::string name = a < static_cast<int>(d.aspect_labels.size()) ? d.aspect_labels[a] : std::to_string(a);
            throw Rejected("aspect '" + name + "' was not shown in the current justifications");
        }
        mask.insert(a);
    }

    std::vector<int> drop;
    std::vector<std::string> dropped_ids;
    if (shown.empty()) {
        for (const auto& r : s->shown) {
            drop.push_back(r.item);
            dropped_ids.push_back(r.item_id);
        }
    } else {
        for (const auto& id : shown) {
            auto it = std::find_if(s->shown.begin(), s->shown.end(), [&](const Recommendation& r) { return r.item_id == id; });
            if (it == s->shown.end()) throw Rejected("item '" + id + "' is not among the current recommendations");
            if (std::find(drop.begin(), drop.end(), it->item) == drop.end()) {
                drop.push_back(it->item);
                dropped_ids.push_back(id);
            }
        }
    }

    const CritiqueMask m{AspectSet(mask.begin(), mask.end())};
    CritiqueState next = update_critique_state(s->state, m, s->freq, &d.aspect_labels);
    const auto scored = scored_feedback(feedback);

    s->transcript.turns.push_back({s->turn, s->shown, m.aspects, dropped_ids, scored});
    s->state = std::move(next);
    s->excluded.insert(s->excluded.end(), drop.begin(), drop.end());
    s->shown = rank(*s);
    ++s->turn;
    s->last_used = clock_();
    return {session_id, s->turn, s->shown};
}

LiveTranscript SessionManager::close(const std::string& session_id, const std::optional<std::string>& accepted,
                                     const nlohmann::json& feedback) {
    auto s = find(session_id);
    LiveTranscript t;
    {
        std::lock_guard lock(s->mu);
        if (s->closed) throw SessionClosed("session '" + session_id + "' is closed");
        if (accepted) {
            auto it = std::find(data_->item_ids.begin(), data_->item_ids.end(), *accepted);
            if (it == data_->item_ids.end()) throw NotFound("unknown item '" + *accepted + "'");
        }
        const auto scored = scored_feedback(feedback);
        s->transcript.turns.push_back({s->turn, s->shown, {}, {}, nlohmann::json::object()});
        s->transcript.accepted = accepted;
        s->transcript.feedback = scored;
        s->transcript.status = accepted ? "accepted" : "closed";
        s->transcript.closed_at = utc_now();
        s->closed = true;
        t = s->transcript;
    }
    persist(t);
    std::lock_guard lock(mu_);
    sessions_.erase(session_id);
    return t;
}

std::size_t SessionManager::evict_expired() {
    const auto now = clock_();
    std::vector<std::shared_ptr<Live>> expired;
    {
        std::lock_guard lock(mu_);
        for (auto it = sessions_.begin(); it != sessions_.end();) {
            std::unique_lock slock(it->second->mu, std::try_to_lock);
            if (slock && now - it->second->last_used > config_.ttl) {
                expired.push_back(it->second);
                it = sessions_.erase(it);
            } else {
                ++it;
            }
        }
    }
    for (const auto& s : expired) {
        LiveTranscript t;
        {
            std::lock_guard lock(s->mu);
            s->closed = true;
            s->transcript.turns.push_back({s->turn, s->shown, {}, {}, nlohmann::json::object()});
            s->transcript.status = "expired";
            s->transcript.closed_at = utc_now();
            t = s->transcript;
        }
        persist(t);
    }
    return expired.size();
}

std::size_t SessionManager::active() const {
    std::lock_guard lock(mu_);
    return sessions_.size();
}

Vector SessionManager::user_vector(const std::string& session_id) {
    auto s = find(session_id);
    std::lock_guard lock(s->mu);
    return apply_critique(s->base, s->state, data_->model.encoder, data_->model.fusion);
}

void SessionManager::persist(const LiveTranscript& t) {
    if (config_.transcript_log.empty()) return;
    std::lock_guard lock(log_mu_);
    std::ofstream out(config_.transcript_log, std::ios::app);
    if (!out) throw Error("cannot append to transcript log " + config_.transcript_log.string());
    out << to_json(t).dump() << '\n';
    out.flush();
    if (!out) throw Error("failed writing transcript log " + config_.transcript_log.string());
}

struct HttpService::Impl {
    SessionManager& sessions;
    httplib::Server server;

    explicit Impl(SessionManager& s) : sessions(s) {}

    static void reply(httplib::Response& res, int status, const nlohmann::json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    nlohmann::json view_json(const SessionManager::View& v) const {
        nlohmann::json recs = nlohmann::json::array();
        for (const auto& r : v.recommendations) recs.push_back(to_json(r, sessions.data().aspect_labels));
        return {{"session_id", v.session_id},
                {"turn", v.turn},
                {"max_turns", sessions.config().max_turns},
                {"recommendations", recs}};
    }

    template <typename F>
    void guarded(httplib::Response& res, F&& f) {
        try {
            sessions.evict_expired();
            f();
        } catch (const NotFound& e) {
            reply(res, 404, {{"error", "not_found"}, {"detail", e.what()}});
        } catch (const SessionClosed& e) {
            reply(res, 409, {{"error", "session_closed"}, {"detail", e.what()}});
        } catch (const Rejected& e) {
            reply(res, 422, {{"error", "rejected"}, {"detail", e.what()}});
        } catch (const InvalidInput& e) {
            reply(res, 400, {{"error", "invalid_request"}, {"detail", e.what()}});
        } catch (const nlohmann::json::exception& e) {
            reply(res, 400, {{"error", "invalid_request"}, {"detail", e.what()}});
        } catch (const std::exception& e) {
            reply(res, 500, {{"error", "internal"}, {"detail", e.what()}});
        }
    }

    static nlohmann::json body_of(const httplib::Request& req) {
        if (req.body.empty()) return nlohmann::json::object();
        auto j = nlohmann::json::parse(req.body, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw InvalidInput("request body must be a JSON object");
        return j;
    }

    void routes() {
        server.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
            reply(res, 200, {{"status", "ok"}, {"active_sessions", sessions.active()}});
        });
        server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto body = body_of(req);
                std::optional<std::string> user;
                if (body.contains("user_id") && !body["user_id"].is_null()) user = body["user_id"].get<std::string>();
                reply(res, 201, view_json(sessions.create(user)));
            });
        });
        server.Get(R"(/sessions/([0-9a-zA-Z]+)/recommendations)",
                   [this](const httplib::Request& req, httplib::Response& res) {
                       guarded(res, [&] { reply(res, 200, view_json(sessions.recommendations(req.matches[1]))); });
                   });
        server.Post(R"(/sessions/([0-9a-zA-Z]+)/critiques)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto body = body_of(req);
                if (!body.contains("aspects") || !body["aspects"].is_array()) {
                    throw InvalidInput("'aspects' must be an array of aspect indices");
                }
                const auto aspects = body["aspects"].get<AspectSet>();
                std::vector<std::string> shown;
                if (body.contains("shown")) shown = body["shown"].get<std::vector<std::string>>();
                const auto feedback = body.value("feedback", nlohmann::json::object());
                reply(res, 200, view_json(sessions.critique(req.matches[1], aspects, shown, feedback)));
            });
        });
        server.Post(R"(/sessions/([0-9a-zA-Z]+)/close)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto body = body_of(req);
                std::optional<std::string> accepted;
                if (body.contains("accepted") && !body["accepted"].is_null()) {
                    accepted = body["accepted"].get<std::string>();
                }
                const auto t = sessions.close(req.matches[1], accepted, body.value("feedback", nlohmann::json::object()));
                reply(res, 200, to_json(t));
            });
        });
    }
};

HttpService::HttpService(SessionManager& sessions) : impl_(std::make_unique<Impl>(sessions)) { impl_->routes(); }

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port) {
    if (port == 0) {
        const int p = impl_->server.bind_to_any_port(host);
        if (p < 0) throw Error("cannot bind " + host);
        return p;
    }
    if (!impl_->server.bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void HttpService::listen() { impl_->server.listen_after_bind(); }

void HttpService::stop() {
    if (impl_) impl_->server.stop();
}

}  // namespace convrec
