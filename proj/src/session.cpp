#include "convrec/session.hpp"

#include <algorithm>

namespace convrec {

using nlohmann::json;

int SessionResult::best_rank() const {
    if (goal_ranks.empty()) return 0;
    return *std::min_element(goal_ranks.begin(), goal_ranks.end());
}

json to_json(const TurnRecord& t) {
    json j = {{"turn", t.turn}, {"item", t.item}, {"justification", t.justification}, {"goal_rank", t.goal_rank}};
    j["critique"] = t.critique ? json(*t.critique) : json(nullptr);
    if (t.answer) j["answer"] = *t.answer;
    return j;
}

json to_json(const SessionResult& r) {
    json turns = json::array();
    for (const auto& t : r.transcript) turns.push_back(to_json(t));
    return {{"user", r.user},   {"goal", r.goal}, {"success", r.success}, {"turns", r.turns},
            {"goal_ranks", r.goal_ranks}, {"transcript", turns}};
}

SessionResult session_from_json(const json& j) {
    SessionResult r;
    r.user = j.at("user").get<int>();
    r.goal = j.at("goal").get<int>();
    r.success = j.at("success").get<bool>();
    r.turns = j.at("turns").get<int>();
    r.goal_ranks = j.at("goal_ranks").get<std::vector<int>>();
    for (const auto& t : j.at("transcript")) {
        TurnRecord turn;
        turn.turn = t.at("turn").get<int>();
        turn.item = t.at("item").get<int>();
        turn.justification = t.at("justification").get<AspectSet>();
        turn.goal_rank = t.at("goal_rank").get<int>();
        if (!t.at("critique").is_null()) turn.critique = t.at("critique").get<int>();
        if (t.contains("answer")) turn.answer = t.at("answer").get<bool>();
        r.transcript.push_back(std::move(turn));
    }
    return r;
}

AspectSet valid_critiques(const AspectSet& justification, const Eigen::Ref<const Vector>& goal_profile,
                          const AspectSet& critiqued) {
    AspectSet out;
    for (int a : justification) {
        if (a < 0 || a >= goal_profile.size()) throw InvalidInput("justification aspect out of range");
        if (goal_profile[a] != 0) continue;
        if (std::binary_search(critiqued.begin(), critiqued.end(), a)) continue;
        out.push_back(a);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::optional<int> argmax_over(const AspectSet& candidates, const std::vector<double>& weight) {
    std::optional<int> best;
    for (int a : candidates) {
        if (!best || weight.at(a) > weight.at(*best) || (weight.at(a) == weight.at(*best) && a < *best)) best = a;
    }
    return best;
}

}  // namespace convrec
