#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <json.hpp>

#include "convrec/common.hpp"
#include "convrec/corpus.hpp"
#include "convrec/model.hpp"

namespace convrec {

struct JointHyperparams {
    int h = 10;
    double lr = 0.001;
    double l2 = 0.01;
    double lambda_kp = 0.5;
    int epochs = 200;
    int negatives = 1;
    double init_std = 0.01;
    std::uint64_t seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
};

struct StagewiseHyperparams {
    int h = 50;
    double l2 = 80.0;
    int head_epochs = 10;
    double head_lr = 0.01;
    std::uint64_t seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
};

// Loss weights for one (u, i, j) training triple.
struct JointLossTerms {
    double lambda_kp = 0.5;
    double l2 = 0.01;        // on the three touched embedding rows
    double dense_l2 = 0.0;   // on encoder and head weight matrices (biases unpenalized)
};

struct TripleGrad {
    Vector user_base;
    Vector item_pos;
    Vector item_neg;
    Matrix enc_weight;
    Vector enc_bias;
    HeadGrad head;

    static TripleGrad zeros_like(const ExpertModel& model);
    void set_zero();
};

// lambda_kp * BCE(head(gamma_u + gamma_i), K^I_i) - log sigmoid(x_ui - x_uj) + L2 terms,
// with gamma_u = fuse(gamma^MF_u, encode(K^U_u)). Writes the exact gradient when
// `grad` is non-null.
double joint_triple_loss(const ExpertModel& model, const Eigen::Ref<const Vector>& user_freq_row, int user,
                         int pos, int neg, const Eigen::Ref<const Vector>& pos_profile,
                         const JointLossTerms& terms, TripleGrad* grad);

// Seeded initial parameters for the joint model (sum fusion).
ExpertModel init_joint_model(int n_users, int n_items, int n_aspects, const JointHyperparams& hp);

ExpertModel train_joint_bpr(const InteractionSet& train, const AspectContext& ctx, const JointHyperparams& hp);

// Ridge regression encode(K^U_u) ~= target_u with an unpenalized intercept.
AspectEncoder fit_aspect_encoder(const Matrix& user_freq, const Matrix& target, double l2);

// Stage 1 PLRec, stage 2 encoder regression, stage 3 head fit by SGD on the
// aspect loss with frozen embeddings (mean fusion).
ExpertModel train_stagewise_plrec(const InteractionSet& train, const AspectContext& ctx,
                                  const StagewiseHyperparams& hp);

// Scores of every item for a user.
using UserScorer = std::function<Vector(int user)>;

// Scores with the training-time fused vector fuse(gamma^MF_u, encode(K^U_u)).
UserScorer initial_scorer(const ExpertModel& model, const Matrix& user_freq);

// Fraction of (u, i+, j-) triples ranked correctly, ties counting 1/2.
// Negatives exclude eval positives and, when given, `exclude` positives.
// sample_size == 0 enumerates every triple.
double auc(const UserScorer& scorer, const InteractionSet& eval, const InteractionSet* exclude,
           std::size_t sample_size, std::uint64_t seed);

enum class SelectionCriterion { Auc, Sr1 };

struct TrainConfig {
    ModelKind kind = ModelKind::Bpr;
    JointHyperparams joint;
    StagewiseHyperparams stagewise;

    nlohmann::json to_json() const;
};

ExpertModel train_expert(const TrainConfig& config, const InteractionSet& train, const AspectContext& ctx);

struct SelectionOptions {
    std::size_t auc_samples = 0;  // 0 = exhaustive
    std::size_t sr_pairs = 500;
    int max_turns = 10;
    std::uint64_t seed = 0;
};

struct SelectionResult {
    std::size_t best = 0;
    std::vector<double> scores;
    ExpertModel model;
};

// Trains every config and keeps the argmax of the validation criterion
// (first in grid order on ties). Sr1 runs Pop-strategy simulations over
// validation pairs.
SelectionResult select_hyperparameters(const std::vector<TrainConfig>& grid, const InteractionSet& train,
                                       const InteractionSet& valid, const AspectContext& ctx,
                                       SelectionCriterion criterion, const SelectionOptions& options = {});

}  // namespace convrec
