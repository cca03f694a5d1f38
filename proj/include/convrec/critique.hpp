#pragma once

#include <string>
#include <vector>

#include "convrec/common.hpp"

namespace convrec {

// Linear projection from aspect space to the user space: W^T c + b.
struct AspectEncoder {
    Matrix weight;  // |K| x h
    Vector bias;    // h

    static AspectEncoder zeros(int n_aspects, int h);
    int n_aspects() const { return static_cast<int>(weight.rows()); }
    int dim() const { return static_cast<int>(weight.cols()); }
};

Vector encode(const Eigen::Ref<const Vector>& critique, const AspectEncoder& enc);

enum class FusionMode { Sum, Mean };

FusionMode parse_fusion(const std::string& name);
std::string to_string(FusionMode mode);

// Weight applied to each operand: 1 for sum, 1/2 for mean.
double fusion_weight(FusionMode mode);

Vector fuse(const Eigen::Ref<const Vector>& base, const Eigen::Ref<const Vector>& enc_out, FusionMode mode);

// Cumulative critique vector and the aspects already critiqued in a session.
struct CritiqueState {
    Vector c;            // starts as the user's K^U row
    AspectSet critiqued; // sorted

    static CritiqueState initial(const Eigen::Ref<const Vector>& user_freq_row);
    bool was_critiqued(int aspect) const;
};

// Binary per-aspect mask for one turn; several aspects may be set.
struct CritiqueMask {
    AspectSet aspects;  // sorted, unique

    static CritiqueMask single(int aspect) { return {{aspect}}; }
    bool empty() const { return aspects.empty(); }
    Vector dense(int n_aspects) const;
};

// c <- c - max(user_freq, 1) * m; the critiqued set grows by the mask.
// Throws Rejected (naming the aspect) when a masked aspect was critiqued before.
CritiqueState update_critique_state(const CritiqueState& state, const CritiqueMask& mask,
                                    const Eigen::Ref<const Vector>& user_freq_row,
                                    const std::vector<std::string>* labels = nullptr);

// Next-turn user vector: fuse(base, encode(c)). Always re-fused from the
// stored base embedding with the cumulative critique vector.
Vector apply_critique(const Eigen::Ref<const Vector>& user_base, const CritiqueState& state,
                      const AspectEncoder& enc, FusionMode mode);

}  // namespace convrec
