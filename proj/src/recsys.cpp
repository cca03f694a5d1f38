#include "convrec/recsys.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <string>

namespace convrec {

double score(const Eigen::Ref<const Vector>& user_vec, const Eigen::Ref<const Vector>& item_vec) {
    if (user_vec.size() != item_vec.size()) {
        throw InvalidInput("score: dimension mismatch " + std::to_string(user_vec.size()) + " vs " +
                           std::to_string(item_vec.size()));
    }
    return user_vec.dot(item_vec);
}

double bpr_pair_objective(double x_ui, double x_uj) { return sigmoid(x_ui - x_uj); }

void BprHyperparams::validate() const {
    if (h < 1) throw InvalidInput("h must be >= 1");
    if (lr < 0 || l2 < 0 || epochs < 0 || negatives < 1 || init_std < 0) {
        throw InvalidInput("invalid BPR hyperparameters");
    }
}

Matrix random_normal(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = stddev * normal(rng);
    }
    return m;
}

int sample_negative(const InteractionSet& train, int user, std::mt19937_64& rng) {
    const auto& pos = train.positives(user);
    const int n_neg = train.n_items() - static_cast<int>(pos.size());
    if (n_neg <= 0) throw InvalidInput("user " + std::to_string(user) + " has no negative items");
    // k-th negative = k-th index not in the sorted positive list.
    int k = std::uniform_int_distribution<int>(0, n_neg - 1)(rng);
    int item = k;
    for (int p : pos) {
        if (p <= item) {
            ++item;
        } else {
            break;
        }
    }
    return item;
}

Embeddings train_bpr(const InteractionSet& train, const BprHyperparams& hp) {
    hp.validate();
    std::mt19937_64 rng(hp.seed);
    Embeddings emb;
    emb.user_base = random_normal(train.n_users(), hp.h, hp.init_std, rng);
    emb.item = random_normal(train.n_items(), hp.h, hp.init_std, rng);

    auto pairs = train.pairs();
    if (pairs.empty()) throw InvalidInput("train_bpr: no positive interactions");
    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        std::shuffle(pairs.begin(), pairs.end(), rng);
        std::size_t step = 0;
        for (auto [u, i] : pairs) {
            for (int n = 0; n < hp.negatives; ++n, ++step) {
                const int j = sample_negative(train, u, rng);
                Vector gu = emb.user_base.row(u);
                Vector gi = emb.item.row(i);
                Vector gj = emb.item.row(j);
                const double diff = gu.dot(gi) - gu.dot(gj);
                const double objective = log_sigmoid(diff);
                if (!std::isfinite(objective)) {
                    throw Diverged("train_bpr: non-finite objective at epoch " + std::to_string(epoch) +
                                   ", step " + std::to_string(step));
                }
                // d/d diff of log sigmoid(diff) = sigmoid(-diff)
                const double w = sigmoid(-diff);
                emb.user_base.row(u) += hp.lr * (w * (gi - gj) - 2.0 * hp.l2 * gu).transpose();
                emb.item.row(i) += hp.lr * (w * gu - 2.0 * hp.l2 * gi).transpose();
                emb.item.row(j) += hp.lr * (-w * gu - 2.0 * hp.l2 * gj).transpose();
            }
        }
    }
    return emb;
}

namespace {

Matrix orthonormal_basis(const Matrix& y) {
    Eigen::HouseholderQR<Matrix> qr(y);
    return qr.householderQ() * Matrix::Identity(y.rows(), y.cols());
}

void normalize_signs(Matrix& vectors) {
    for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
        Eigen::Index arg = 0;
        vectors.col(c).cwiseAbs().maxCoeff(&arg);
        if (vectors(arg, c) < 0) vectors.col(c) *= -1.0;
    }
}

}  // namespace

TruncatedSvd randomized_svd(const Matrix& a, int rank, const SvdOptions& options) {
    const auto m = a.rows();
    const auto n = a.cols();
    if (rank < 1 || rank > std::min(m, n)) {
        throw InvalidInput("randomized_svd: rank " + std::to_string(rank) + " outside [1, " +
                           std::to_string(std::min(m, n)) + "]");
    }
    const auto sketch = std::min<Eigen::Index>(rank + options.oversampling, std::min(m, n));
    std::mt19937_64 rng(options.seed);
    const Matrix omega = random_normal(n, sketch, 1.0, rng);
    Matrix q = orthonormal_basis(a * omega);
    for (int it = 0; it < options.power_iterations; ++it) {
        q = orthonormal_basis(a.transpose() * q);
        q = orthonormal_basis(a * q);
    }
    const Matrix b = q.transpose() * a;  // sketch x n
    Eigen::JacobiSVD<Matrix> svd(b, Eigen::ComputeThinV);
    TruncatedSvd out;
    out.right = svd.matrixV().leftCols(rank);
    out.singular_values = svd.singularValues().head(rank);
    normalize_signs(out.right);
    return out;
}

PlrecModel train_plrec(const InteractionSet& train, int h, double l2, std::uint64_t seed) {
    if (h < 1 || train.n_items() < h) {
        throw InvalidInput("train_plrec: need 1 <= h <= |I| (h=" + std::to_string(h) + ")");
    }
    if (l2 < 0) throw InvalidInput("train_plrec: l2 must be >= 0");
    const Matrix r = train.dense();
    PlrecModel model;
    model.l2 = l2;
    model.projection = randomized_svd(r, std::min<int>(h, static_cast<int>(std::min(r.rows(), r.cols()))),
                                      {.seed = seed})
                           .right;
    if (model.projection.cols() < h) {
        // Rank-deficient sketch (|U| < h): pad with zero directions.
        Matrix padded = Matrix::Zero(r.cols(), h);
        padded.leftCols(model.projection.cols()) = model.projection;
        model.projection = std::move(padded);
    }
    model.user_base = r * model.projection;
    Matrix normal = model.user_base.transpose() * model.user_base;
    normal.diagonal().array() += l2;
    Eigen::LLT<Matrix> chol(normal);
    const Vector pivots = chol.matrixLLT().diagonal();
    if (chol.info() != Eigen::Success || pivots.minCoeff() <= 1e-7 * pivots.maxCoeff()) {
        throw InvalidInput("train_plrec: normal matrix is singular; use l2 > 0");
    }
    // W^T = (Z^T Z + l2 I)^-1 Z^T R
    model.item = chol.solve(model.user_base.transpose() * r).transpose();
    if (!model.item.allFinite()) throw InvalidInput("train_plrec: non-finite solution; use l2 > 0");
    return model;
}

ItemList rank_items(const Eigen::Ref<const Vector>& scores, std::span<const int> excluded) {
    std::vector<char> skip(static_cast<std::size_t>(scores.size()), 0);
    for (int i : excluded) {
        if (i >= 0 && i < scores.size()) skip[i] = 1;
    }
    ItemList order;
    order.reserve(scores.size());
    for (int i = 0; i < scores.size(); ++i) {
        if (!skip[i]) order.push_back(i);
    }
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] > scores[b]; });
    return order;
}

ItemList rank_items(const Eigen::Ref<const Vector>& user_vec, const Matrix& items,
                    std::span<const int> excluded) {
    if (user_vec.size() != items.cols()) throw InvalidInput("rank_items: dimension mismatch");
    const Vector scores = items * user_vec;
    return rank_items(scores, excluded);
}

int rank_of(const Eigen::Ref<const Vector>& scores, int item, std::span<const int> excluded) {
    std::vector<char> skip(static_cast<std::size_t>(scores.size()), 0);
    for (int i : excluded) {
        if (i >= 0 && i < scores.size()) skip[i] = 1;
    }
    if (skip.at(item)) throw InvalidInput("rank_of: item is excluded");
    int ahead = 0;
    const double s = scores[item];
    for (int i = 0; i < scores.size(); ++i) {
        if (skip[i] || i == item) continue;
        if (scores[i] > s || (scores[i] == s && i < item)) ++ahead;
    }
    return ahead + 1;
}

}  // namespace convrec
