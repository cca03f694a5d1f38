#pragma once

#include <random>

#include "convrec/model.hpp"
#include "convrec/recsys.hpp"

// Small random models and aspect statistics shared by the unit tests.
namespace fixture {

inline convrec::ExpertModel random_model(int n_users, int n_items, int n_aspects, int h, std::uint64_t seed,
                                         convrec::FusionMode fusion = convrec::FusionMode::Sum,
                                         double scale = 0.5) {
    std::mt19937_64 rng(seed);
    convrec::ExpertModel m;
    m.kind = fusion == convrec::FusionMode::Sum ? convrec::ModelKind::Bpr : convrec::ModelKind::Plrec;
    m.fusion = fusion;
    m.user_base = convrec::random_normal(n_users, h, scale, rng);
    m.item = convrec::random_normal(n_items, h, scale, rng);
    m.encoder.weight = convrec::random_normal(n_aspects, h, scale, rng);
    m.encoder.bias = convrec::random_normal(h, 1, scale, rng).col(0);
    m.head = convrec::JustificationHead::random(h, n_aspects, rng);
    m.head.b1 = convrec::random_normal(h, 1, 0.1, rng).col(0);
    m.head.b2 = convrec::random_normal(h, 1, 0.1, rng).col(0);
    m.head.b3 = convrec::random_normal(n_aspects, 1, 0.1, rng).col(0);
    m.seed = seed;
    return m;
}

// Random count matrices with K^I derived from F^I.
inline convrec::AspectContext random_context(int n_users, int n_items, int n_aspects, std::uint64_t seed,
                                             double density = 0.4) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    convrec::AspectMatrices m;
    m.user_freq = convrec::CountMatrix::Zero(n_users, n_aspects);
    m.item_freq = convrec::CountMatrix::Zero(n_items, n_aspects);
    for (int u = 0; u < n_users; ++u)
        for (int a = 0; a < n_aspects; ++a)
            if (unit(rng) < density) m.user_freq(u, a) = 1 + static_cast<int>(rng() % 4);
    for (int i = 0; i < n_items; ++i)
        for (int a = 0; a < n_aspects; ++a)
            if (unit(rng) < density) m.item_freq(i, a) = 1 + static_cast<int>(rng() % 5);
    m.item_presence = (m.item_freq.array() > 0).cast<std::int64_t>();
    return convrec::AspectContext::from(m);
}

inline convrec::InteractionSet random_interactions(int n_users, int n_items, int per_user, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    convrec::InteractionSet set(n_users, n_items);
    for (int u = 0; u < n_users; ++u) {
        for (int k = 0; k < per_user; ++k) set.add(u, static_cast<int>(rng() % n_items));
    }
    return set;
}

}  // namespace fixture
