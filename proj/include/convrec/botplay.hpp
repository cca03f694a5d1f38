#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <json.hpp>

#include "convrec/common.hpp"
#include "convrec/model.hpp"
#include "convrec/session.hpp"

namespace convrec {

// Simulated seeker: critiques the most popular justification aspect that the
// goal item's reviews never mention.
struct SeekerModel {
    std::vector<double> popularity;  // total mentions across training reviews
};

std::optional<int> seeker_select(const AspectSet& justification, const Eigen::Ref<const Vector>& goal_profile,
                                 const SeekerModel& seeker, const AspectSet& critiqued);

struct BotPlayConfig {
    int max_turns = 10;
    double discount = 0.9;
    double lr = 0.01;
    int epochs = 1;
    std::size_t max_sessions = 0;  // per epoch; 0 = every training pair
    bool train_user_base = true;
    bool train_items = true;
    bool train_encoder = true;
    // Removes items mentioning a critiqued aspect from the softmax (score
    // -1e15) and from later recommendations.
    bool mask_critiqued = false;
    std::uint64_t seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
};

struct SessionGrad {
    Vector user_base;
    Matrix item;
    Matrix enc_weight;
    Vector enc_bias;

    static SessionGrad zeros_like(const ExpertModel& model);
};

struct SessionLoss {
    double loss = 0.0;
    std::vector<double> turn_ce;  // undiscounted per-turn cross entropy (bits)
    SessionResult result;
};

// Cross entropy of the goal under softmax(scores), in bits.
double goal_cross_entropy(const Eigen::Ref<const Vector>& scores, int goal);

// Unrolls one expert/seeker conversation and returns
// sum_t discount^(t-1) * CE(goal, softmax(scores_t)). When `grad` is given,
// it receives the exact gradient with respect to the user's base embedding,
// all item embeddings and the aspect encoder.
SessionLoss session_loss(const ExpertModel& model, const AspectContext& ctx, int user, int goal,
                         const BotPlayConfig& config, SessionGrad* grad = nullptr);

// Thrown when fine-tuning produces a non-finite loss or parameters.
class BotPlayDiverged : public Diverged {
public:
    BotPlayDiverged(const std::string& what, ExpertModel last_good)
        : Diverged(what), last_good(std::move(last_good)) {}
    ExpertModel last_good;
};

struct FinetuneStats {
    std::vector<double> epoch_loss;  // mean session loss per epoch
    std::vector<double> epoch_success;
};

using TranscriptSink = std::function<void(const SessionResult&)>;

// One SGD step per (user, goal) session over the training positives.
ExpertModel finetune(const ExpertModel& model, const InteractionSet& train, const AspectContext& ctx,
                     const BotPlayConfig& config, FinetuneStats* stats = nullptr, const TranscriptSink& sink = {});

// Picks the config with the best validation SR@1 (first on ties).
struct BotPlaySelection {
    std::size_t best = 0;
    std::vector<double> sr1;
    ExpertModel model;
};

// Fine-tunes with every config and keeps the best validation SR@1 (first on
// ties). Diverged candidates score NaN and are skipped.
BotPlaySelection select_botplay_config(const std::vector<BotPlayConfig>& grid, const ExpertModel& model,
                                       const InteractionSet& train, const InteractionSet& valid,
                                       const AspectContext& ctx, std::size_t valid_pairs, std::uint64_t seed);

}  // namespace convrec
