#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "convrec/common.hpp"

namespace convrec {

struct TurnRecord {
    int turn = 0;          // 1-based
    int item = -1;         // recommended item
    AspectSet justification;
    std::optional<int> critique;  // critiqued (or queried) aspect
    std::optional<bool> answer;   // query mode: simulated yes/no
    int goal_rank = 0;     // 1-based rank of the goal before recommending
};

struct SessionResult {
    int user = -1;
    int goal = -1;
    bool success = false;
    int turns = 0;  // turns used (success turn, or the turn limit)
    std::vector<int> goal_ranks;
    std::vector<TurnRecord> transcript;

    int best_rank() const;
};

nlohmann::json to_json(const TurnRecord& turn);
nlohmann::json to_json(const SessionResult& result);
SessionResult session_from_json(const nlohmann::json& j);

// {a : justification_a = 1, goal profile_a = 0, a not critiqued}, ascending.
AspectSet valid_critiques(const AspectSet& justification, const Eigen::Ref<const Vector>& goal_profile,
                          const AspectSet& critiqued);

// Argmax of `weight` over `candidates`, lowest index on ties.
std::optional<int> argmax_over(const AspectSet& candidates, const std::vector<double>& weight);

}  // namespace convrec
