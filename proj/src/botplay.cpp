#include "convrec/botplay.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "convrec/recsys.hpp"

namespace convrec {

using nlohmann::json;

std::optional<int> seeker_select(const AspectSet& justification, const Eigen::Ref<const Vector>& goal_profile,
                                 const SeekerModel& seeker, const AspectSet& critiqued) {
    return argmax_over(valid_critiques(justification, goal_profile, critiqued), seeker.popularity);
}

void BotPlayConfig::validate() const {
    if (max_turns < 1) throw InvalidInput("bot-play: max_turns must be >= 1");
    if (!(discount > 0 && discount <= 1)) throw InvalidInput("bot-play: discount must be in (0, 1]");
    if (lr < 0 || epochs < 0) throw InvalidInput("bot-play: lr and epochs must be non-negative");
}

json BotPlayConfig::to_json() const {
    return {{"max_turns", max_turns},
            {"discount", discount},
            {"lr", lr},
            {"epochs", epochs},
            {"max_sessions", max_sessions},
            {"train_user_base", train_user_base},
            {"train_items", train_items},
            {"train_encoder", train_encoder},
            {"mask_critiqued", mask_critiqued},
            {"seed", seed}};
}

SessionGrad SessionGrad::zeros_like(const ExpertModel& m) {
    return {Vector::Zero(m.dim()), Matrix::Zero(m.n_items(), m.dim()),
            Matrix::Zero(m.encoder.weight.rows(), m.dim()), Vector::Zero(m.dim())};
}

namespace {

constexpr double kMaskedScore = -1e15;

// Softmax probabilities, stabilized by the max score.
Vector softmax(const Eigen::Ref<const Vector>& scores) {
    const double top = scores.maxCoeff();
    Vector e = (scores.array() - top).exp().matrix();
    return e / e.sum();
}

}  // namespace

double goal_cross_entropy(const Eigen::Ref<const Vector>& scores, int goal) {
    const double top = scores.maxCoeff();
    const double log_z = top + std::log((scores.array() - top).exp().sum());
    return (log_z - scores[goal]) / std::numbers::ln2;
}

SessionLoss session_loss(const ExpertModel& model, const AspectContext& ctx, int user, int goal,
                         const BotPlayConfig& config, SessionGrad* grad) {
    config.validate();
    if (goal < 0 || goal >= model.n_items()) throw InvalidInput("session_loss: goal out of range");
    const double w = fusion_weight(model.fusion);
    const Vector base = model.user_base.row(user);
    const Vector freq = ctx.user_freq.row(user);
    const Vector goal_profile = ctx.item_presence.row(goal);
    const SeekerModel seeker{ctx.popularity};

    SessionLoss out;
    out.result.user = user;
    out.result.goal = goal;
    CritiqueState state = CritiqueState::initial(freq);
    std::vector<int> excluded;
    std::vector<char> pruned(static_cast<std::size_t>(model.n_items()), 0);
    double weight = 1.0;

    for (int t = 1; t <= config.max_turns; ++t) {
        const Vector gamma = apply_critique(base, state, model.encoder, model.fusion);
        Vector scores = model.scores(gamma);
        if (config.mask_critiqued) {
            for (int i = 0; i < model.n_items(); ++i) {
                if (pruned[i]) scores[i] = kMaskedScore;
            }
        }
        const double ce = goal_cross_entropy(scores, goal);
        out.turn_ce.push_back(ce);
        out.loss += weight * ce;

        if (grad) {
            // d CE / d scores = (softmax - onehot(goal)) / ln 2
            Vector d_scores = softmax(scores);
            d_scores[goal] -= 1.0;
            d_scores *= weight / std::numbers::ln2;
            if (config.mask_critiqued) {
                for (int i = 0; i < model.n_items(); ++i) {
                    if (pruned[i]) d_scores[i] = 0.0;
                }
            }
            const Vector d_gamma = model.item.transpose() * d_scores;
            grad->item.noalias() += d_scores * gamma.transpose();
            grad->user_base += w * d_gamma;
            grad->enc_weight.noalias() += state.c * (w * d_gamma).transpose();
            grad->enc_bias += w * d_gamma;
        }

        std::vector<int> hidden = excluded;
        if (config.mask_critiqued) {
            for (int i = 0; i < model.n_items(); ++i) {
                if (pruned[i] && i != goal) hidden.push_back(i);
            }
        }
        const ItemList ranking = rank_items(scores, hidden);
        const int top = ranking.front();
        TurnRecord turn;
        turn.turn = t;
        turn.item = top;
        turn.goal_rank = rank_of(scores, goal, hidden);
        out.result.goal_ranks.push_back(turn.goal_rank);
        out.result.turns = t;
        if (top == goal) {
            out.result.success = true;
            out.result.transcript.push_back(std::move(turn));
            break;
        }
        turn.justification = emit_justification(model.aspect_probs(gamma, top), JustifyMode::Deterministic);
        turn.critique = seeker_select(turn.justification, goal_profile, seeker, state.critiqued);
        if (turn.critique) {
            state = update_critique_state(state, CritiqueMask::single(*turn.critique), freq);
            if (config.mask_critiqued) {
                for (int i = 0; i < model.n_items(); ++i) {
                    if (ctx.item_presence(i, *turn.critique) != 0) pruned[i] = 1;
                }
            }
        }
        excluded.push_back(top);
        out.result.transcript.push_back(std::move(turn));
        weight *= config.discount;
    }
    return out;
}

ExpertModel finetune(const ExpertModel& model, const InteractionSet& train, const AspectContext& ctx,
                     const BotPlayConfig& config, FinetuneStats* stats, const TranscriptSink& sink) {
    config.validate();
    if (train.n_users() != model.n_users() || train.n_items() != model.n_items()) {
        throw InvalidInput("finetune: training interactions do not match the model");
    }
    ExpertModel m = model;
    auto pairs = train.pairs();
    std::mt19937_64 rng(config.seed);
    SessionGrad grad = SessionGrad::zeros_like(m);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(pairs.begin(), pairs.end(), rng);
        const std::size_t n = config.max_sessions ? std::min(config.max_sessions, pairs.size()) : pairs.size();
        double total = 0.0;
        double successes = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const auto [u, g] = pairs[k];
            grad.user_base.setZero();
            grad.item.setZero();
            grad.enc_weight.setZero();
            grad.enc_bias.setZero();
            ExpertModel last_good = m;
            const SessionLoss s = session_loss(m, ctx, u, g, config, &grad);
            if (!std::isfinite(s.loss)) {
                throw BotPlayDiverged("bot-play: non-finite loss at epoch " + std::to_string(epoch) + ", session " +
                                          std::to_string(k),
                                      std::move(last_good));
            }
            if (config.train_user_base) m.user_base.row(u) -= config.lr * grad.user_base.transpose();
            if (config.train_items) m.item -= config.lr * grad.item;
            if (config.train_encoder) {
                m.encoder.weight -= config.lr * grad.enc_weight;
                m.encoder.bias -= config.lr * grad.enc_bias;
            }
            if (!m.item.allFinite() || !m.encoder.weight.allFinite() || !m.user_base.row(u).allFinite()) {
                throw BotPlayDiverged("bot-play: non-finite parameters at epoch " + std::to_string(epoch) +
                                          ", session " + std::to_string(k),
                                      std::move(last_good));
            }
            total += s.loss;
            successes += s.result.success ? 1.0 : 0.0;
            if (sink) sink(s.result);
        }
        if (stats) {
            stats->epoch_loss.push_back(n ? total / static_cast<double>(n) : 0.0);
            stats->epoch_success.push_back(n ? successes / static_cast<double>(n) : 0.0);
        }
    }
    m.extra["botplay"] = config.to_json();
    return m;
}

}  // namespace convrec
