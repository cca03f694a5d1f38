#pragma once

#include <cstdint>
#include <random>

#include "convrec/common.hpp"

namespace convrec {

// Aspect prediction MLP: input h -> ReLU(h) -> ReLU(h) -> |K| logits.
struct JustificationHead {
    Matrix w1;  // h x h
    Vector b1;
    Matrix w2;  // h x h
    Vector b2;
    Matrix w3;  // |K| x h
    Vector b3;

    static JustificationHead zeros(int h, int n_aspects);
    static JustificationHead random(int h, int n_aspects, std::mt19937_64& rng);

    int input_dim() const { return static_cast<int>(w1.cols()); }
    int n_aspects() const { return static_cast<int>(w3.rows()); }
};

// Intermediate activations kept for backpropagation.
struct HeadActivations {
    Vector input;
    Vector pre1, act1;
    Vector pre2, act2;
    Vector logits;
    Vector probs;
};

HeadActivations head_forward(const JustificationHead& head, const Eigen::Ref<const Vector>& input);

// p = sigmoid(MLP(user_vec + item_vec)).
Vector predict_aspect_probs(const Eigen::Ref<const Vector>& user_vec, const Eigen::Ref<const Vector>& item_vec,
                            const JustificationHead& head);

inline constexpr double kProbClamp = 1e-12;

// Mean binary cross entropy over aspects; probabilities are clamped to
// [1e-12, 1 - 1e-12] before taking logs.
double aspect_loss(const Eigen::Ref<const Vector>& probs, const Eigen::Ref<const Vector>& target);

// Gradients of the head parameters, same shapes as JustificationHead.
struct HeadGrad {
    Matrix w1;
    Vector b1;
    Matrix w2;
    Vector b2;
    Matrix w3;
    Vector b3;

    static HeadGrad zeros_like(const JustificationHead& head);
    void scale(double s);
};

// Backpropagates `scale * aspect_loss` through the head. Accumulates into
// `grad` (may be null) and returns d loss / d input.
Vector head_backward(const JustificationHead& head, const HeadActivations& acts,
                     const Eigen::Ref<const Vector>& target, double scale, HeadGrad* grad);

enum class JustifyMode { Deterministic, Sampled };

// Deterministic: {a : p_a > 0.5}. Sampled: independent Bernoulli(p_a) draws.
// An empty result falls back to the argmax aspect (lowest index on ties).
AspectSet emit_justification(const Eigen::Ref<const Vector>& probs, JustifyMode mode, std::mt19937_64* rng = nullptr);
AspectSet emit_justification(const Eigen::Ref<const Vector>& probs, JustifyMode mode, std::uint64_t seed);

}  // namespace convrec
