#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "convrec/common.hpp"
#include "convrec/corpus.hpp"

namespace convrec {

// Inner-product score of a user and an item vector.
double score(const Eigen::Ref<const Vector>& user_vec, const Eigen::Ref<const Vector>& item_vec);

// P(i >_u j) = sigmoid(x_ui - x_uj).
double bpr_pair_objective(double x_ui, double x_uj);

struct Embeddings {
    Matrix user_base;  // |U| x h
    Matrix item;       // |I| x h

    int dim() const { return static_cast<int>(item.cols()); }
};

struct BprHyperparams {
    int h = 10;
    double lr = 0.001;
    double l2 = 0.01;
    int epochs = 200;
    int negatives = 1;  // negatives sampled per positive
    std::uint64_t seed = 0;
    double init_std = 0.01;

    void validate() const;
};

// Uniform draw from the items a user has not interacted with.
int sample_negative(const InteractionSet& train, int user, std::mt19937_64& rng);

// Standalone BPR: SGD ascent on log sigmoid(x_ui - x_uj) minus L2 on the three
// touched embeddings.
Embeddings train_bpr(const InteractionSet& train, const BprHyperparams& hp);

// Gaussian init with the given standard deviation, seeded.
Matrix random_normal(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng);

struct SvdOptions {
    int power_iterations = 2;
    int oversampling = 10;
    std::uint64_t seed = 0;
};

// Top-`rank` right singular vectors (columns) and singular values of `a`.
struct TruncatedSvd {
    Matrix right;  // cols x rank
    Vector singular_values;
};

// Randomized range finder followed by an exact SVD of the projected matrix.
// Singular vector signs are normalized so the largest-magnitude entry of
// each vector is positive.
TruncatedSvd randomized_svd(const Matrix& a, int rank, const SvdOptions& options = {});

struct PlrecModel {
    Matrix projection;  // V, |I| x h
    Matrix item;        // W, |I| x h
    Matrix user_base;   // R V, |U| x h
    double l2 = 0.0;
};

// Linear recommender: Z = R V from a rank-h SVD of R, then the ridge solution
// W = R^T Z (Z^T Z + l2 I)^-1.
PlrecModel train_plrec(const InteractionSet& train, int h, double l2, std::uint64_t seed);

// Items outside `excluded`, by descending score, ties by ascending index.
// Returns an empty list when everything is excluded.
ItemList rank_items(const Eigen::Ref<const Vector>& scores, std::span<const int> excluded = {});
ItemList rank_items(const Eigen::Ref<const Vector>& user_vec, const Matrix& items,
                    std::span<const int> excluded = {});

// 1-based position of `item` under rank_items ordering among the non-excluded
// items (counts items strictly ahead, with the same tie rule).
int rank_of(const Eigen::Ref<const Vector>& scores, int item, std::span<const int> excluded = {});

}  // namespace convrec
