#include "convrec/justify.hpp"

#include <algorithm>

#include "convrec/recsys.hpp"

namespace convrec {

JustificationHead JustificationHead::zeros(int h, int n_aspects) {
    return {Matrix::Zero(h, h), Vector::Zero(h), Matrix::Zero(h, h),
            Vector::Zero(h),    Matrix::Zero(n_aspects, h), Vector::Zero(n_aspects)};
}

JustificationHead JustificationHead::random(int h, int n_aspects, std::mt19937_64& rng) {
    // He-style scaling for the rectified layers.
    const double s = std::sqrt(2.0 / std::max(h, 1));
    JustificationHead head = zeros(h, n_aspects);
    head.w1 = random_normal(h, h, s, rng);
    head.w2 = random_normal(h, h, s, rng);
    head.w3 = random_normal(n_aspects, h, std::sqrt(1.0 / std::max(h, 1)), rng);
    return head;
}

HeadActivations head_forward(const JustificationHead& head, const Eigen::Ref<const Vector>& input) {
    if (input.size() != head.w1.cols()) throw InvalidInput("justification head: input dimension mismatch");
    HeadActivations a;
    a.input = input;
    a.pre1 = head.w1 * input + head.b1;
    a.act1 = a.pre1.cwiseMax(0.0);
    a.pre2 = head.w2 * a.act1 + head.b2;
    a.act2 = a.pre2.cwiseMax(0.0);
    a.logits = head.w3 * a.act2 + head.b3;
    a.probs = a.logits.unaryExpr([](double z) { return sigmoid(z); });
    return a;
}

Vector predict_aspect_probs(const Eigen::Ref<const Vector>& user_vec, const Eigen::Ref<const Vector>& item_vec,
                            const JustificationHead& head) {
    if (user_vec.size() != item_vec.size()) throw InvalidInput("predict_aspect_probs: dimension mismatch");
    Vector probs = head_forward(head, user_vec + item_vec).probs;
    if (!probs.allFinite()) throw Diverged("predict_aspect_probs: non-finite output");
    return probs;
}

double aspect_loss(const Eigen::Ref<const Vector>& probs, const Eigen::Ref<const Vector>& target) {
    if (probs.size() != target.size() || probs.size() == 0) throw InvalidInput("aspect_loss: size mismatch");
    double total = 0.0;
    for (Eigen::Index a = 0; a < probs.size(); ++a) {
        const double p = std::clamp(probs[a], kProbClamp, 1.0 - kProbClamp);
        total -= target[a] * std::log(p) + (1.0 - target[a]) * std::log(1.0 - p);
    }
    return total / static_cast<double>(probs.size());
}

HeadGrad HeadGrad::zeros_like(const JustificationHead& head) {
    return {Matrix::Zero(head.w1.rows(), head.w1.cols()), Vector::Zero(head.b1.size()),
            Matrix::Zero(head.w2.rows(), head.w2.cols()), Vector::Zero(head.b2.size()),
            Matrix::Zero(head.w3.rows(), head.w3.cols()), Vector::Zero(head.b3.size())};
}

void HeadGrad::scale(double s) {
    w1 *= s;
    b1 *= s;
    w2 *= s;
    b2 *= s;
    w3 *= s;
    b3 *= s;
}

Vector head_backward(const JustificationHead& head, const HeadActivations& acts,
                     const Eigen::Ref<const Vector>& target, double scale, HeadGrad* grad) {
    // d mean-BCE / d logit = (p - k) / |K|
    const Vector d_logits = scale * (acts.probs - target) / static_cast<double>(acts.probs.size());
    const Vector d_act2 = head.w3.transpose() * d_logits;
    const Vector d_pre2 = d_act2.cwiseProduct((acts.pre2.array() > 0.0).cast<double>().matrix());
    const Vector d_act1 = head.w2.transpose() * d_pre2;
    const Vector d_pre1 = d_act1.cwiseProduct((acts.pre1.array() > 0.0).cast<double>().matrix());
    if (grad) {
        grad->w3.noalias() += d_logits * acts.act2.transpose();
        grad->b3 += d_logits;
        grad->w2.noalias() += d_pre2 * acts.act1.transpose();
        grad->b2 += d_pre2;
        grad->w1.noalias() += d_pre1 * acts.input.transpose();
        grad->b1 += d_pre1;
    }
    return head.w1.transpose() * d_pre1;
}

AspectSet emit_justification(const Eigen::Ref<const Vector>& probs, JustifyMode mode, std::mt19937_64* rng) {
    AspectSet out;
    if (mode == JustifyMode::Sampled) {
        if (!rng) throw InvalidInput("sampled justification needs a random generator");
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (Eigen::Index a = 0; a < probs.size(); ++a) {
            if (unit(*rng) < probs[a]) out.push_back(static_cast<int>(a));
        }
    } else {
        for (Eigen::Index a = 0; a < probs.size(); ++a) {
            if (probs[a] > 0.5) out.push_back(static_cast<int>(a));
        }
    }
    if (out.empty() && probs.size() > 0) {
        Eigen::Index best = 0;
        for (Eigen::Index a = 1; a < probs.size(); ++a) {
            if (probs[a] > probs[best]) best = a;
        }
        out.push_back(static_cast<int>(best));
    }
    return out;
}

AspectSet emit_justification(const Eigen::Ref<const Vector>& probs, JustifyMode mode, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return emit_justification(probs, mode, &rng);
}

}  // namespace convrec
