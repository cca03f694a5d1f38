#include "convrec/critique.hpp"

#include <algorithm>

namespace convrec {

AspectEncoder AspectEncoder::zeros(int n_aspects, int h) {
    return {Matrix::Zero(n_aspects, h), Vector::Zero(h)};
}

Vector encode(const Eigen::Ref<const Vector>& critique, const AspectEncoder& enc) {
    if (critique.size() != enc.weight.rows()) throw InvalidInput("encode: critique vector has wrong length");
    return enc.weight.transpose() * critique + enc.bias;
}

FusionMode parse_fusion(const std::string& name) {
    if (name == "sum") return FusionMode::Sum;
    if (name == "mean") return FusionMode::Mean;
    throw InvalidInput("unknown fusion mode \"" + name + "\"");
}

std::string to_string(FusionMode mode) { return mode == FusionMode::Sum ? "sum" : "mean"; }

double fusion_weight(FusionMode mode) { return mode == FusionMode::Sum ? 1.0 : 0.5; }

Vector fuse(const Eigen::Ref<const Vector>& base, const Eigen::Ref<const Vector>& enc_out, FusionMode mode) {
    if (base.size() != enc_out.size()) throw InvalidInput("fuse: dimension mismatch");
    return fusion_weight(mode) * (base + enc_out);
}

CritiqueState CritiqueState::initial(const Eigen::Ref<const Vector>& user_freq_row) {
    return {user_freq_row, {}};
}

bool CritiqueState::was_critiqued(int aspect) const {
    return std::binary_search(critiqued.begin(), critiqued.end(), aspect);
}

Vector CritiqueMask::dense(int n_aspects) const {
    Vector m = Vector::Zero(n_aspects);
    for (int a : aspects) m[a] = 1.0;
    return m;
}

CritiqueState update_critique_state(const CritiqueState& state, const CritiqueMask& mask,
                                    const Eigen::Ref<const Vector>& user_freq_row,
                                    const std::vector<std::string>* labels) {
    if (user_freq_row.size() != state.c.size()) throw InvalidInput("critique: frequency row has wrong length");
    CritiqueState next = state;
    AspectSet seen;
    for (int a : mask.aspects) {
        if (a < 0 || a >= state.c.size()) throw InvalidInput("critique: aspect index out of range");
        const std::string name = labels && a < static_cast<int>(labels->size()) ? (*labels)[a] : std::to_string(a);
        if (state.was_critiqued(a) || std::find(seen.begin(), seen.end(), a) != seen.end()) {
            throw Rejected("aspect \"" + name + "\" was already critiqued");
        }
        seen.push_back(a);
        next.c[a] -= std::max(user_freq_row[a], 1.0);
        next.critiqued.insert(std::lower_bound(next.critiqued.begin(), next.critiqued.end(), a), a);
    }
    return next;
}

Vector apply_critique(const Eigen::Ref<const Vector>& user_base, const CritiqueState& state,
                      const AspectEncoder& enc, FusionMode mode) {
    return fuse(user_base, encode(state.c, enc), mode);
}

}  // namespace convrec
