#include "convrec/train.hpp"

#include <algorithm>
#include <random>
#include <string>

#include "convrec/recsys.hpp"

namespace convrec {

using nlohmann::json;

void JointHyperparams::validate() const {
    if (h < 1 || epochs < 0 || negatives < 1 || lr < 0 || l2 < 0 || lambda_kp < 0 || init_std < 0) {
        throw InvalidInput("invalid joint BPR hyperparameters");
    }
}

json JointHyperparams::to_json() const {
    return {{"h", h},           {"lr", lr},         {"l2", l2},
            {"lambda_kp", lambda_kp}, {"epochs", epochs}, {"negatives", negatives},
            {"init_std", init_std},   {"seed", seed}};
}

void StagewiseHyperparams::validate() const {
    if (h < 1 || l2 < 0 || head_epochs < 0 || head_lr < 0) {
        throw InvalidInput("invalid stagewise PLRec hyperparameters");
    }
}

json StagewiseHyperparams::to_json() const {
    return {{"h", h}, {"l2", l2}, {"head_epochs", head_epochs}, {"head_lr", head_lr}, {"seed", seed}};
}

TripleGrad TripleGrad::zeros_like(const ExpertModel& model) {
    const int h = model.dim();
    return {Vector::Zero(h),
            Vector::Zero(h),
            Vector::Zero(h),
            Matrix::Zero(model.encoder.weight.rows(), h),
            Vector::Zero(h),
            HeadGrad::zeros_like(model.head)};
}

void TripleGrad::set_zero() {
    user_base.setZero();
    item_pos.setZero();
    item_neg.setZero();
    enc_weight.setZero();
    enc_bias.setZero();
    head.scale(0.0);
}

double joint_triple_loss(const ExpertModel& model, const Eigen::Ref<const Vector>& user_freq_row, int user,
                         int pos, int neg, const Eigen::Ref<const Vector>& pos_profile,
                         const JointLossTerms& terms, TripleGrad* grad) {
    const double w = fusion_weight(model.fusion);
    const Vector base = model.user_base.row(user);
    const Vector gi = model.item.row(pos);
    const Vector gj = model.item.row(neg);
    const Vector gu = model.user_vector(base, user_freq_row);

    const double diff = gu.dot(gi) - gu.dot(gj);
    const HeadActivations acts = head_forward(model.head, gu + gi);
    const double bce = aspect_loss(acts.probs, pos_profile);

    auto sq = [](const auto& m) { return m.squaredNorm(); };
    double loss = terms.lambda_kp * bce - log_sigmoid(diff) + terms.l2 * (sq(base) + sq(gi) + sq(gj));
    if (terms.dense_l2 > 0) {
        loss += terms.dense_l2 * (sq(model.encoder.weight) + sq(model.head.w1) + sq(model.head.w2) + sq(model.head.w3));
    }
    if (!grad) return loss;

    // d(-log sigmoid(diff)) / d diff = -sigmoid(-diff)
    const double d_diff = -sigmoid(-diff);
    const Vector d_input = head_backward(model.head, acts, pos_profile, terms.lambda_kp, &grad->head);
    const Vector d_gu = d_diff * (gi - gj) + d_input;
    grad->item_pos += d_diff * gu + d_input + 2.0 * terms.l2 * gi;
    grad->item_neg += -d_diff * gu + 2.0 * terms.l2 * gj;
    grad->user_base += w * d_gu + 2.0 * terms.l2 * base;
    grad->enc_weight.noalias() += user_freq_row * (w * d_gu).transpose();
    grad->enc_bias += w * d_gu;
    if (terms.dense_l2 > 0) {
        grad->enc_weight += 2.0 * terms.dense_l2 * model.encoder.weight;
        grad->head.w1 += 2.0 * terms.dense_l2 * model.head.w1;
        grad->head.w2 += 2.0 * terms.dense_l2 * model.head.w2;
        grad->head.w3 += 2.0 * terms.dense_l2 * model.head.w3;
    }
    return loss;
}

ExpertModel init_joint_model(int n_users, int n_items, int n_aspects, const JointHyperparams& hp) {
    hp.validate();
    std::mt19937_64 rng(hp.seed);
    ExpertModel m;
    m.kind = ModelKind::Bpr;
    m.fusion = FusionMode::Sum;
    m.seed = hp.seed;
    m.user_base = random_normal(n_users, hp.h, hp.init_std, rng);
    m.item = random_normal(n_items, hp.h, hp.init_std, rng);
    m.encoder.weight = random_normal(n_aspects, hp.h, hp.init_std, rng);
    m.encoder.bias = Vector::Zero(hp.h);
    m.head = JustificationHead::random(hp.h, n_aspects, rng);
    m.hyperparams = hp.to_json();
    return m;
}

namespace {

void sgd_step(ExpertModel& m, const TripleGrad& g, int u, int i, int j, double lr) {
    m.user_base.row(u) -= lr * g.user_base.transpose();
    m.item.row(i) -= lr * g.item_pos.transpose();
    m.item.row(j) -= lr * g.item_neg.transpose();
    m.encoder.weight -= lr * g.enc_weight;
    m.encoder.bias -= lr * g.enc_bias;
    m.head.w1 -= lr * g.head.w1;
    m.head.b1 -= lr * g.head.b1;
    m.head.w2 -= lr * g.head.w2;
    m.head.b2 -= lr * g.head.b2;
    m.head.w3 -= lr * g.head.w3;
    m.head.b3 -= lr * g.head.b3;
}

void check_context(const InteractionSet& train, const AspectContext& ctx) {
    if (ctx.user_freq.rows() != train.n_users() || ctx.item_presence.rows() != train.n_items() ||
        ctx.user_freq.cols() != ctx.item_presence.cols()) {
        throw InvalidInput("aspect matrices are not aligned with the interaction indices");
    }
}

}  // namespace

ExpertModel train_joint_bpr(const InteractionSet& train, const AspectContext& ctx, const JointHyperparams& hp) {
    check_context(train, ctx);
    ExpertModel m = init_joint_model(train.n_users(), train.n_items(), ctx.n_aspects(), hp);
    auto pairs = train.pairs();
    if (pairs.empty()) throw InvalidInput("train_joint_bpr: no positive interactions");
    // The dense penalty is spread over the epoch so it is applied once per pass.
    const JointLossTerms terms{hp.lambda_kp, hp.l2,
                               hp.l2 / static_cast<double>(pairs.size() * static_cast<std::size_t>(hp.negatives))};
    std::mt19937_64 rng(hp.seed ^ 0x9e3779b97f4a7c15ULL);
    TripleGrad grad = TripleGrad::zeros_like(m);
    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        std::shuffle(pairs.begin(), pairs.end(), rng);
        std::size_t step = 0;
        for (auto [u, i] : pairs) {
            for (int n = 0; n < hp.negatives; ++n, ++step) {
                const int j = sample_negative(train, u, rng);
                grad.set_zero();
                const double loss = joint_triple_loss(m, ctx.user_freq.row(u).transpose(), u, i, j,
                                                      ctx.item_presence.row(i).transpose(), terms, &grad);
                if (!std::isfinite(loss)) {
                    throw Diverged("train_joint_bpr: non-finite loss at epoch " + std::to_string(epoch) +
                                   ", step " + std::to_string(step));
                }
                sgd_step(m, grad, u, i, j, hp.lr);
            }
        }
    }
    return m;
}

AspectEncoder fit_aspect_encoder(const Matrix& user_freq, const Matrix& target, double l2) {
    if (user_freq.rows() != target.rows() || user_freq.rows() == 0) {
        throw InvalidInput("fit_aspect_encoder: row count mismatch");
    }
    if (l2 < 0) throw InvalidInput("fit_aspect_encoder: l2 must be >= 0");
    const Eigen::RowVectorXd x_mean = user_freq.colwise().mean();
    const Eigen::RowVectorXd y_mean = target.colwise().mean();
    const Matrix xc = user_freq.rowwise() - x_mean;
    const Matrix yc = target.rowwise() - y_mean;
    Matrix normal = xc.transpose() * xc;
    normal.diagonal().array() += l2;
    Eigen::LDLT<Matrix> solver(normal);
    AspectEncoder enc;
    enc.weight = solver.solve(xc.transpose() * yc);
    if (solver.info() != Eigen::Success || !enc.weight.allFinite()) {
        throw InvalidInput("fit_aspect_encoder: singular normal matrix; use l2 > 0");
    }
    enc.bias = (y_mean - x_mean * enc.weight).transpose();
    return enc;
}

ExpertModel train_stagewise_plrec(const InteractionSet& train, const AspectContext& ctx,
                                  const StagewiseHyperparams& hp) {
    hp.validate();
    check_context(train, ctx);
    const PlrecModel base = train_plrec(train, hp.h, hp.l2, hp.seed);

    ExpertModel m;
    m.kind = ModelKind::Plrec;
    m.fusion = FusionMode::Mean;
    m.seed = hp.seed;
    m.hyperparams = hp.to_json();
    m.user_base = base.user_base;
    m.item = base.item;
    m.projection = base.projection;
    m.encoder = fit_aspect_encoder(ctx.user_freq, m.user_base, hp.l2);

    std::mt19937_64 rng(hp.seed ^ 0x5851f42d4c957f2dULL);
    m.head = JustificationHead::random(hp.h, ctx.n_aspects(), rng);
    auto pairs = train.pairs();
    std::vector<Vector> fused(static_cast<std::size_t>(train.n_users()));
    for (int u = 0; u < train.n_users(); ++u) {
        fused[u] = m.user_vector(m.user_base.row(u).transpose(), ctx.user_freq.row(u).transpose());
    }
    HeadGrad grad = HeadGrad::zeros_like(m.head);
    for (int epoch = 0; epoch < hp.head_epochs; ++epoch) {
        std::shuffle(pairs.begin(), pairs.end(), rng);
        for (auto [u, i] : pairs) {
            const Vector input = fused[u] + m.item.row(i).transpose();
            const HeadActivations acts = head_forward(m.head, input);
            grad.scale(0.0);
            head_backward(m.head, acts, ctx.item_presence.row(i).transpose(), 1.0, &grad);
            m.head.w1 -= hp.head_lr * grad.w1;
            m.head.b1 -= hp.head_lr * grad.b1;
            m.head.w2 -= hp.head_lr * grad.w2;
            m.head.b2 -= hp.head_lr * grad.b2;
            m.head.w3 -= hp.head_lr * grad.w3;
            m.head.b3 -= hp.head_lr * grad.b3;
        }
        if (!m.head.w3.allFinite()) throw Diverged("stagewise head fit diverged at epoch " + std::to_string(epoch));
    }
    return m;
}

UserScorer initial_scorer(const ExpertModel& model, const Matrix& user_freq) {
    return [&model, &user_freq](int u) {
        return model.scores(model.user_vector(model.user_base.row(u).transpose(), user_freq.row(u).transpose()));
    };
}

double auc(const UserScorer& scorer, const InteractionSet& eval, const InteractionSet* exclude,
           std::size_t sample_size, std::uint64_t seed) {
    if (eval.size() == 0) throw InvalidInput("auc: evaluation set has no positives");
    auto is_positive = [&](int u, int i) { return eval.contains(u, i) || (exclude && exclude->contains(u, i)); };
    double correct = 0.0;
    double total = 0.0;
    if (sample_size == 0) {
        for (int u = 0; u < eval.n_users(); ++u) {
            if (eval.positives(u).empty()) continue;
            const Vector s = scorer(u);
            for (int i : eval.positives(u)) {
                for (int j = 0; j < eval.n_items(); ++j) {
                    if (is_positive(u, j)) continue;
                    correct += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
                    total += 1.0;
                }
            }
        }
    } else {
        const auto pairs = eval.pairs();
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<std::size_t> pick(0, pairs.size() - 1);
        std::uniform_int_distribution<int> item(0, eval.n_items() - 1);
        for (std::size_t k = 0; k < sample_size; ++k) {
            auto [u, i] = pairs[pick(rng)];
            int j = -1;
            for (int tries = 0; tries < 1000 && j < 0; ++tries) {
                const int cand = item(rng);
                if (!is_positive(u, cand)) j = cand;
            }
            if (j < 0) continue;
            const Vector s = scorer(u);
            correct += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
            total += 1.0;
        }
    }
    if (total == 0) throw InvalidInput("auc: no (positive, negative) pairs to compare");
    return correct / total;
}

json TrainConfig::to_json() const {
    return {{"kind", to_string(kind)}, {"params", kind == ModelKind::Bpr ? joint.to_json() : stagewise.to_json()}};
}

ExpertModel train_expert(const TrainConfig& config, const InteractionSet& train, const AspectContext& ctx) {
    return config.kind == ModelKind::Bpr ? train_joint_bpr(train, ctx, config.joint)
                                         : train_stagewise_plrec(train, ctx, config.stagewise);
}

}  // namespace convrec
