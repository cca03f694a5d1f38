#include <doctest.h>

#include <random>

#include "convrec/critique.hpp"
#include "convrec/recsys.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace convrec;

TEST_SUITE("critique") {

TEST_CASE("encode examples") {
    AspectEncoder enc;
    enc.weight.resize(3, 2);
    enc.weight << 1, 2, 3, 4, 5, 6;
    enc.bias.resize(2);
    enc.bias << 0.5, -0.5;
    CHECK(encode(Vector::Zero(3), enc) == enc.bias);
    Vector onehot = Vector::Zero(3);
    onehot(1) = 1;
    Vector expected(2);
    expected << 3.5, 3.5;
    CHECK(encode(onehot, enc) == expected);
}

TEST_CASE("encode matches a scalar loop") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        AspectEncoder enc{random_normal(7, 4, 1.0, rng), random_normal(4, 1, 1.0, rng).col(0)};
        Vector c = random_normal(7, 1, 2.0, rng).col(0);
        auto out = encode(c, enc);
        for (int k = 0; k < 4; ++k) {
            double s = enc.bias(k);
            for (int a = 0; a < 7; ++a) s += enc.weight(a, k) * c(a);
            CHECK(std::abs(out(k) - s) <= 1e-12);
        }
    }
}

TEST_CASE("fusion modes") {
    Vector a(2), b(2);
    a << 1, 2;
    b << 3, 4;
    CHECK(fuse(a, b, FusionMode::Sum) == Vector(Vector::LinSpaced(2, 4, 6)));
    Vector mean(2);
    mean << 2, 3;
    CHECK(fuse(a, b, FusionMode::Mean) == mean);
    CHECK(fuse(a, Vector::Zero(2), FusionMode::Sum) == a);
    CHECK(parse_fusion("sum") == FusionMode::Sum);
    CHECK(parse_fusion("mean") == FusionMode::Mean);
    CHECK_THROWS_AS(parse_fusion("max"), InvalidInput);
}

TEST_CASE("critique update examples") {
    Vector freq(2);
    freq << 3, 0;
    auto s = CritiqueState::initial(freq);
    auto next = update_critique_state(s, CritiqueMask::single(0), freq);
    CHECK(next.c(0) == 0.0);
    CHECK(next.c(1) == 0.0);
    CHECK(next.critiqued == AspectSet{0});

    Vector zero = Vector::Zero(2);
    auto z = update_critique_state(CritiqueState::initial(zero), CritiqueMask::single(1), zero);
    CHECK(z.c(1) == -1.0);
    CHECK(z.c(0) == 0.0);

    auto same = update_critique_state(s, CritiqueMask{}, freq);
    CHECK(same.c == s.c);
    CHECK(same.critiqued.empty());
}

TEST_CASE("re-critiquing an aspect is rejected by name") {
    Vector freq = Vector::Ones(3);
    std::vector<std::string> labels = {"citrus", "hoppy", "dark"};
    auto s = update_critique_state(CritiqueState::initial(freq), CritiqueMask::single(1), freq, &labels);
    try {
        update_critique_state(s, CritiqueMask{{0, 1}}, freq, &labels);
        FAIL("expected rejection");
    } catch (const Rejected& e) {
        CHECK(std::string(e.what()).find("hoppy") != std::string::npos);
    }
}

TEST_CASE("cumulative update matches the elementwise formula") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        const int k = 1 + static_cast<int>(rng() % 10);
        Vector freq(k);
        for (int a = 0; a < k; ++a) freq(a) = static_cast<double>(rng() % 4);  // both max branches
        auto state = CritiqueState::initial(freq);
        oracle::Vec c(freq.data(), freq.data() + k);
        const oracle::Vec f = c;
        std::vector<int> used(k, 0);
        for (int turn = 0; turn < 3; ++turn) {
            CritiqueMask mask;
            std::vector<int> bits(k, 0);
            for (int a = 0; a < k; ++a)
                if (!used[a] && rng() % 3 == 0) {
                    mask.aspects.push_back(a);
                    bits[a] = used[a] = 1;
                }
            state = update_critique_state(state, mask, freq);
            c = oracle::critique_update(c, f, bits);
            for (int a = 0; a < k; ++a) CHECK(std::abs(state.c(a) - c[a]) <= 1e-12);
        }
        for (std::size_t x = 1; x < state.critiqued.size(); ++x) CHECK(state.critiqued[x - 1] < state.critiqued[x]);
    }
}

TEST_CASE("apply_critique before any critique equals the training-time fused vector") {
    auto m = fixture::random_model(3, 4, 5, 3, 1);
    auto ctx = fixture::random_context(3, 4, 5, 2);
    for (int u = 0; u < 3; ++u) {
        const Vector row = ctx.user_freq.row(u).transpose();
        const Vector base = m.user_base.row(u).transpose();
        auto v = apply_critique(base, CritiqueState::initial(row), m.encoder, FusionMode::Sum);
        CHECK((v - m.user_vector(base, row)).norm() <= 1e-14);
    }
}

TEST_CASE("zero encoder leaves the user vector at its base") {
    AspectEncoder enc = AspectEncoder::zeros(4, 3);
    Vector base(3);
    base << 0.1, -2, 5;
    Vector freq = Vector::Ones(4);
    auto s = update_critique_state(CritiqueState::initial(freq), CritiqueMask{{0, 2}}, freq);
    CHECK(apply_critique(base, s, enc, FusionMode::Sum) == base);
}

TEST_CASE("one critique on a two-aspect model by hand") {
    AspectEncoder enc;
    enc.weight.resize(2, 2);
    enc.weight << 1, 0, 0.5, 2;
    enc.bias.resize(2);
    enc.bias << 0.1, 0.2;
    Vector base(2);
    base << 1, 1;
    Vector freq(2);
    freq << 2, 0;
    auto s = update_critique_state(CritiqueState::initial(freq), CritiqueMask::single(1), freq);
    // c' = (2, -1); W^T c' + b = (2 - 0.5 + 0.1, 0 - 2 + 0.2) = (1.6, -1.8)
    Vector sum(2), mean(2);
    sum << 2.6, -0.8;
    mean << 1.3, -0.4;
    CHECK((apply_critique(base, s, enc, FusionMode::Sum) - sum).norm() <= 1e-12);
    CHECK((apply_critique(base, s, enc, FusionMode::Mean) - mean).norm() <= 1e-12);
}

TEST_CASE("two single critiques compose like one two-aspect mask") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        const int k = 5;
        auto m = fixture::random_model(1, 2, k, 4, trial);
        Vector freq(k);
        for (int a = 0; a < k; ++a) freq(a) = static_cast<double>(rng() % 3);
        const int a = static_cast<int>(rng() % k);
        const int b = (a + 1 + static_cast<int>(rng() % (k - 1))) % k;
        auto s0 = CritiqueState::initial(freq);
        auto seq = update_critique_state(update_critique_state(s0, CritiqueMask::single(a), freq),
                                         CritiqueMask::single(b), freq);
        CritiqueMask both{{std::min(a, b), std::max(a, b)}};
        auto once = update_critique_state(s0, both, freq);
        const Vector base = m.user_base.row(0).transpose();
        for (auto mode : {FusionMode::Sum, FusionMode::Mean}) {
            CHECK((apply_critique(base, seq, m.encoder, mode) - apply_critique(base, once, m.encoder, mode)).norm() <=
                  1e-12);
        }
        CHECK(seq.critiqued == once.critiqued);
        auto idle = update_critique_state(once, CritiqueMask{}, freq);
        CHECK(apply_critique(base, idle, m.encoder, FusionMode::Sum) == apply_critique(base, once, m.encoder, FusionMode::Sum));
    }
}

}  // TEST_SUITE
