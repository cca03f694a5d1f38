#include <doctest.h>

#include <random>

#include "convrec/train.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace convrec;

namespace {

// Four users, six items, three aspects. Items 2a and 2a+1 carry aspect a;
// users 0 and 1 like aspect 0, users 2 and 3 like aspect 1.
struct TinyWorld {
    InteractionSet train{4, 6, {{0}, {1}, {2}, {3}}};
    InteractionSet test{4, 6, {{1}, {0}, {3}, {2}}};
    AspectContext ctx;

    TinyWorld() {
        AspectMatrices m;
        m.user_freq = CountMatrix::Zero(4, 3);
        m.user_freq(0, 0) = m.user_freq(1, 0) = 2;
        m.user_freq(2, 1) = m.user_freq(3, 1) = 2;
        m.item_freq = CountMatrix::Zero(6, 3);
        for (int i = 0; i < 6; ++i) m.item_freq(i, i / 2) = 1;
        m.item_presence = m.item_freq;
        ctx = AspectContext::from(m);
    }
};

// Exhaustive pair-ranking AUC computed from raw scores.
double oracle_auc(const ExpertModel& m, const AspectContext& ctx, const InteractionSet& eval,
                  const InteractionSet& train) {
    double correct = 0, total = 0;
    for (int u = 0; u < eval.n_users(); ++u) {
        oracle::Vec user(m.dim());
        for (int k = 0; k < m.dim(); ++k) {
            double enc = m.encoder.bias(k);
            for (int a = 0; a < m.n_aspects(); ++a) enc += m.encoder.weight(a, k) * ctx.user_freq(u, a);
            user[k] = m.fusion == FusionMode::Sum ? m.user_base(u, k) + enc : 0.5 * (m.user_base(u, k) + enc);
        }
        auto s = [&](int i) {
            oracle::Vec item(m.item.row(i).data(), m.item.row(i).data() + m.dim());
            return oracle::dot(user, item);
        };
        for (int i : eval.positives(u))
            for (int j = 0; j < eval.n_items(); ++j) {
                if (eval.contains(u, j) || train.contains(u, j)) continue;
                total += 1;
                correct += s(i) > s(j) ? 1.0 : (s(i) == s(j) ? 0.5 : 0.0);
            }
    }
    return correct / total;
}

}  // namespace

TEST_SUITE("train") {

TEST_CASE("joint triple loss gradient matches finite differences for every parameter group") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        auto m = fixture::random_model(3, 4, 3, 3, seed);
        auto ctx = fixture::random_context(3, 4, 3, seed + 10, 0.6);
        const JointLossTerms terms{0.7, 0.05, 0.02};
        const int u = 1, i = 2, j = 0;
        const Vector freq = ctx.user_freq.row(u).transpose();
        const Vector profile = ctx.item_presence.row(i).transpose();
        auto grad = TripleGrad::zeros_like(m);
        joint_triple_loss(m, freq, u, i, j, profile, terms, &grad);
        auto loss = [&] { return joint_triple_loss(m, freq, u, i, j, profile, terms, nullptr); };

        auto check_block = [&](auto& param, const auto& g, const char* name) {
            for (Eigen::Index r = 0; r < param.rows(); ++r)
                for (Eigen::Index c = 0; c < param.cols(); ++c) {
                    const double fd = oracle::central_difference(loss, &param(r, c));
                    INFO(name << "(" << r << "," << c << ")");
                    CHECK(oracle::relative_error(g(r, c), fd) <= 1e-4);
                }
        };
        for (int k = 0; k < m.dim(); ++k) {
            CHECK(oracle::relative_error(grad.user_base(k), oracle::central_difference(loss, &m.user_base(u, k))) <= 1e-4);
            CHECK(oracle::relative_error(grad.item_pos(k), oracle::central_difference(loss, &m.item(i, k))) <= 1e-4);
            CHECK(oracle::relative_error(grad.item_neg(k), oracle::central_difference(loss, &m.item(j, k))) <= 1e-4);
        }
        check_block(m.encoder.weight, grad.enc_weight, "W_enc");
        check_block(m.encoder.bias, grad.enc_bias, "b_enc");
        check_block(m.head.w1, grad.head.w1, "w1");
        check_block(m.head.b1, grad.head.b1, "b1");
        check_block(m.head.w2, grad.head.w2, "w2");
        check_block(m.head.b2, grad.head.b2, "b2");
        check_block(m.head.w3, grad.head.w3, "w3");
        check_block(m.head.b3, grad.head.b3, "b3");
    }
}

TEST_CASE("joint loss decomposes into its terms") {
    auto m = fixture::random_model(3, 4, 3, 3, 4);
    auto ctx = fixture::random_context(3, 4, 3, 5);
    const Vector freq = ctx.user_freq.row(0).transpose();
    const Vector profile = ctx.item_presence.row(1).transpose();
    const Vector user = m.user_vector(m.user_base.row(0).transpose(), freq);
    const double x_ui = user.dot(m.item.row(1)), x_uj = user.dot(m.item.row(3));
    const double bce = aspect_loss(m.aspect_probs(user, 1), profile);
    const double reg = m.user_base.row(0).squaredNorm() + m.item.row(1).squaredNorm() + m.item.row(3).squaredNorm();
    const double expected = 0.5 * bce - std::log(oracle::sigmoid(x_ui - x_uj)) + 0.01 * reg;
    CHECK(joint_triple_loss(m, freq, 0, 1, 3, profile, {0.5, 0.01, 0.0}, nullptr) ==
          doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("zero aspect weight leaves the head untouched") {
    auto m = fixture::random_model(3, 4, 3, 3, 6);
    auto ctx = fixture::random_context(3, 4, 3, 7);
    auto grad = TripleGrad::zeros_like(m);
    joint_triple_loss(m, ctx.user_freq.row(2).transpose(), 2, 0, 1, ctx.item_presence.row(0).transpose(),
                      {0.0, 0.01, 0.0}, &grad);
    CHECK(grad.head.w1.norm() == 0.0);
    CHECK(grad.head.w3.norm() == 0.0);
    CHECK(grad.head.b3.norm() == 0.0);

    TinyWorld w;
    JointHyperparams hp;
    hp.lambda_kp = 0.0;
    hp.l2 = 0.0;  // no weight decay, so only the aspect loss could move the head
    hp.epochs = 20;
    hp.lr = 0.05;
    auto trained = train_joint_bpr(w.train, w.ctx, hp);
    auto init = init_joint_model(4, 6, 3, hp);
    CHECK(trained.head.w1 == init.head.w1);
    CHECK(trained.head.w3 == init.head.w3);
}

TEST_CASE("tiny planted instance reaches held-out AUC 0.9") {
    TinyWorld w;
    JointHyperparams hp;
    hp.h = 4;
    hp.lr = 0.05;
    hp.l2 = 0.01;
    hp.lambda_kp = 0.5;
    hp.epochs = 500;
    hp.init_std = 0.1;
    hp.seed = 1;
    auto m = train_joint_bpr(w.train, w.ctx, hp);
    const double oracle_value = oracle_auc(m, w.ctx, w.test, w.train);
    CHECK(oracle_value >= 0.9);
    CHECK(auc(initial_scorer(m, w.ctx.user_freq), w.test, &w.train, 0, 0) ==
          doctest::Approx(oracle_value).epsilon(1e-12));
}

TEST_CASE("joint training is deterministic and aborts on divergence") {
    TinyWorld w;
    JointHyperparams hp;
    hp.epochs = 30;
    hp.lr = 0.05;
    hp.seed = 3;
    CHECK(serialize_model(train_joint_bpr(w.train, w.ctx, hp)) == serialize_model(train_joint_bpr(w.train, w.ctx, hp)));
    hp.lr = 1e30;
    hp.init_std = 1.0;
    CHECK_THROWS_AS(train_joint_bpr(w.train, w.ctx, hp), Diverged);
}

TEST_CASE("encoder regression recovers targets for an identity design") {
    std::mt19937_64 rng(2);
    const Matrix x = Matrix::Identity(5, 5);
    const Matrix target = random_normal(5, 3, 1.0, rng);
    auto enc = fit_aspect_encoder(x, target, 1e-12);
    for (int u = 0; u < 5; ++u) {
        CHECK((encode(x.row(u).transpose(), enc) - target.row(u).transpose()).norm() <= 1e-6);
    }
}

TEST_CASE("encoder regression equals the dense solve with an unpenalized intercept") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 20, k = 6, h = 4;
        Matrix x(n, k);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < k; ++c) x(r, c) = static_cast<double>(rng() % 4);
        const Matrix y = random_normal(n, h, 1.0, rng);
        const double l2 = 0.3 + trial;
        auto enc = fit_aspect_encoder(x, y, l2);

        // Augmented design [x, 1] with penalty diag(l2, ..., l2, 0).
        oracle::Mat xa = oracle::zeros(n, k + 1), ya = oracle::zeros(n, h);
        for (int r = 0; r < n; ++r) {
            for (int c = 0; c < k; ++c) xa[r][c] = x(r, c);
            xa[r][k] = 1.0;
            for (int c = 0; c < h; ++c) ya[r][c] = y(r, c);
        }
        auto normal = oracle::matmul(oracle::transpose(xa), xa);
        for (int c = 0; c < k; ++c) normal[c][c] += l2;
        const auto beta = oracle::solve(normal, oracle::matmul(oracle::transpose(xa), ya));
        for (int c = 0; c < h; ++c) {
            for (int a = 0; a < k; ++a) CHECK(std::abs(enc.weight(a, c) - beta[a][c]) <= 1e-8);
            CHECK(std::abs(enc.bias(c) - beta[k][c]) <= 1e-8);
        }
        double res_lib = 0, res_oracle = 0;
        for (int r = 0; r < n; ++r) {
            const Vector pred = encode(x.row(r).transpose(), enc);
            for (int c = 0; c < h; ++c) {
                double p = beta[k][c];
                for (int a = 0; a < k; ++a) p += xa[r][a] * beta[a][c];
                res_lib += std::pow(pred(c) - y(r, c), 2);
                res_oracle += std::pow(p - y(r, c), 2);
            }
        }
        CHECK(std::abs(res_lib - res_oracle) <= 1e-8);
    }
}

TEST_CASE("huge ridge weight sends the encoder to the column mean") {
    std::mt19937_64 rng(1);
    Matrix x(8, 3);
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 3; ++c) x(r, c) = static_cast<double>(rng() % 3);
    const Matrix y = random_normal(8, 2, 1.0, rng);
    auto enc = fit_aspect_encoder(x, y, 1e14);
    CHECK(enc.weight.cwiseAbs().maxCoeff() < 1e-10);
    CHECK((enc.bias - y.colwise().mean().transpose()).norm() < 1e-10);
}

TEST_CASE("stagewise model is deterministic and uses mean fusion") {
    auto train = fixture::random_interactions(12, 10, 4, 3);
    auto ctx = fixture::random_context(12, 10, 5, 4);
    StagewiseHyperparams hp;
    hp.h = 4;
    hp.l2 = 1.0;
    hp.head_epochs = 3;
    hp.seed = 2;
    auto a = train_stagewise_plrec(train, ctx, hp);
    auto b = train_stagewise_plrec(train, ctx, hp);
    CHECK(serialize_model(a) == serialize_model(b));
    CHECK(a.fusion == FusionMode::Mean);
    CHECK(a.kind == ModelKind::Plrec);
    auto base = train_plrec(train, 4, 1.0, 2);
    CHECK(a.item == base.item);
    CHECK(a.encoder.weight == fit_aspect_encoder(ctx.user_freq, base.user_base, 1.0).weight);
}

TEST_CASE("stagewise head fit lowers the aspect loss") {
    auto train = fixture::random_interactions(15, 12, 4, 8);
    auto ctx = fixture::random_context(15, 12, 4, 9);
    StagewiseHyperparams hp;
    hp.h = 5;
    hp.l2 = 0.5;
    hp.head_lr = 0.05;
    auto loss_of = [&](const ExpertModel& m) {
        double total = 0;
        for (auto [u, i] : train.pairs()) {
            const Vector user = m.user_vector(m.user_base.row(u).transpose(), ctx.user_freq.row(u).transpose());
            total += aspect_loss(m.aspect_probs(user, i), ctx.item_presence.row(i).transpose());
        }
        return total;
    };
    hp.head_epochs = 0;
    const double before = loss_of(train_stagewise_plrec(train, ctx, hp));
    hp.head_epochs = 50;
    const double after = loss_of(train_stagewise_plrec(train, ctx, hp));
    CHECK(after < before);
}

TEST_CASE("AUC examples") {
    InteractionSet eval(2, 5, {{0, 1}, {4}});
    UserScorer flat = [](int) { return Vector(Vector::Zero(5)); };
    CHECK(auc(flat, eval, nullptr, 0, 0) == 0.5);
    UserScorer perfect = [&](int u) {
        Vector s = Vector::Zero(5);
        for (int i : eval.positives(u)) s(i) = 1.0;
        return s;
    };
    CHECK(auc(perfect, eval, nullptr, 0, 0) == 1.0);
    CHECK(auc(perfect, eval, nullptr, 200, 3) == 1.0);
    CHECK_THROWS_AS(auc(flat, InteractionSet(2, 5), nullptr, 0, 0), InvalidInput);
}

TEST_CASE("AUC on a hand-counted 20-triple case") {
    // User 0: positives {0, 1}, negatives {2..6} -> 10 triples.
    // User 1: positives {7, 8}, negatives {2..6} minus excluded 2 and 3 -> 6 triples.
    // User 2: positive {9}, negatives {3, 4, 5, 6} -> 4 triples. Total 20.
    InteractionSet eval(3, 10, {{0, 1}, {7, 8}, {9}});
    InteractionSet exclude(3, 10, {{7, 8, 9}, {0, 1, 2, 3, 9}, {0, 1, 2, 7, 8}});
    Vector s0(10), s1(10), s2(10);
    s0 << 5, 1, 4, 3, 2, 0, 1, 9, 9, 9;   // item 0 beats all 5; item 1 beats item 5, ties item 6 -> 6.5
    s1 << 9, 9, 9, 9, 2, 2, 2, 3, 2, 9;   // item 7 beats 3; item 8 ties 3 -> 4.5
    s2 << 9, 9, 9, 1, 1, 5, 0, 9, 9, 1;   // item 9 beats 6, ties 3 and 4 -> 2
    UserScorer scorer = [&](int u) { return u == 0 ? s0 : (u == 1 ? s1 : s2); };
    CHECK(auc(scorer, eval, &exclude, 0, 0) == doctest::Approx(13.0 / 20.0).epsilon(1e-15));
}

TEST_CASE("hyperparameter selection") {
    TinyWorld w;
    TrainConfig good;
    good.joint.h = 4;
    good.joint.lr = 0.05;
    good.joint.epochs = 300;
    good.joint.init_std = 0.1;
    good.joint.seed = 1;
    TrainConfig untrained = good;
    untrained.joint.lr = 0.0;

    auto single = select_hyperparameters({good}, w.train, w.test, w.ctx, SelectionCriterion::Auc);
    CHECK(single.best == 0);
    CHECK(single.scores.size() == 1);

    auto pick = select_hyperparameters({untrained, good}, w.train, w.test, w.ctx, SelectionCriterion::Auc);
    CHECK(pick.best == 1);
    CHECK(pick.scores[1] > pick.scores[0]);

    auto tie = select_hyperparameters({good, good}, w.train, w.test, w.ctx, SelectionCriterion::Auc);
    CHECK(tie.best == 0);

    SelectionOptions opts;
    opts.sr_pairs = 4;
    opts.max_turns = 3;
    auto by_sr = select_hyperparameters({untrained, good}, w.train, w.test, w.ctx, SelectionCriterion::Sr1, opts);
    CHECK(by_sr.scores.size() == 2);
    CHECK(by_sr.scores[by_sr.best] >= by_sr.scores[1 - by_sr.best]);
}

}  // TEST_SUITE
