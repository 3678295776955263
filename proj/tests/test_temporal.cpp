#include <gtest/gtest.h>

#include <cmath>

#include "spa/gradcheck.hpp"
#include "spa/temporal.hpp"

using namespace spa;

namespace {

FeatureWindow make_window(std::vector<Tensor> slots, std::vector<bool> padded = {}) {
    FeatureWindow w;
    const std::size_t n = slots.size();
    w.slots = std::move(slots);
    for (std::size_t j = 0; j < n; ++j) w.times.push_back(std::int64_t(j));
    w.padded = padded.empty() ? std::vector<bool>(n, false) : std::move(padded);
    return w;
}

GruWeights zero_gru(std::size_t d) {
    GruWeights g;
    g.wz = Tensor::zeros({2 * d, d}, true);
    g.wr = Tensor::zeros({2 * d, d}, true);
    g.wh = Tensor::zeros({2 * d, d}, true);
    g.bz = Tensor::zeros({1, d}, true);
    g.br = Tensor::zeros({1, d}, true);
    g.bh = Tensor::zeros({1, d}, true);
    return g;
}

GruWeights random_gru(std::size_t d, Rng& rng) {
    GruWeights g;
    g.wz = Tensor::uniform({2 * d, d}, -0.5, 0.5, rng, true);
    g.wr = Tensor::uniform({2 * d, d}, -0.5, 0.5, rng, true);
    g.wh = Tensor::uniform({2 * d, d}, -0.5, 0.5, rng, true);
    g.bz = Tensor::uniform({1, d}, -0.2, 0.2, rng, true);
    g.br = Tensor::uniform({1, d}, -0.2, 0.2, rng, true);
    g.bh = Tensor::uniform({1, d}, -0.2, 0.2, rng, true);
    return g;
}

SaWeights random_sa(std::size_t d, std::size_t heads, Rng& rng, bool pe = true) {
    SaWeights s;
    s.wq = Tensor::uniform({d, d}, -0.5, 0.5, rng, true);
    s.wk = Tensor::uniform({d, d}, -0.5, 0.5, rng, true);
    s.wv = Tensor::uniform({d, d}, -0.5, 0.5, rng, true);
    s.wo = Tensor::uniform({d, d}, -0.5, 0.5, rng, true);
    s.headCount = heads;
    s.positionEncoding = pe;
    return s;
}

}  // namespace

TEST(Identity, ReturnsCurrentSlotBitwise) {
    Rng rng(1);
    Tensor a = Tensor::uniform({3, 2}, -1, 1, rng);
    Tensor b = Tensor::uniform({3, 2}, -1, 1, rng);
    Tensor c = Tensor::uniform({3, 2}, -1, 1, rng);
    FeatureWindow w = make_window({a, b, c});
    Tensor out = identity_aggregate(w);
    EXPECT_EQ(out.raw(), c.raw());  // same node, trivially bitwise equal
}

TEST(Identity, AllZeroWindowGivesZero) {
    FeatureWindow w = make_window({Tensor::zeros({2, 3}), Tensor::zeros({2, 3})});
    for (double v : identity_aggregate(w).values()) EXPECT_EQ(v, 0.0);
}

TEST(Identity, DegenerateSingleSlotWindow) {
    Rng rng(2);
    Tensor x = Tensor::uniform({4, 2}, -1, 1, rng);
    FeatureWindow w = make_window({x});
    EXPECT_EQ(identity_aggregate(w).raw(), x.raw());
}

TEST(Window, MalformedWindowsRejected) {
    FeatureWindow empty;
    EXPECT_THROW(identity_aggregate(empty), SpaError);

    FeatureWindow w = make_window({Tensor::zeros({2, 2}), Tensor::zeros({2, 2})});
    w.padded = {false, true};  // current slot flagged as padding
    EXPECT_THROW(identity_aggregate(w), SpaError);

    FeatureWindow mixed = make_window({Tensor::zeros({2, 2}), Tensor::zeros({3, 2})});
    EXPECT_THROW(identity_aggregate(mixed), SpaError);
}

TEST(Gru, AllZeroWeightsGiveZeroState) {
    Rng rng(3);
    FeatureWindow w = make_window({Tensor::uniform({2, 2}, -1, 1, rng),
                                   Tensor::uniform({2, 2}, -1, 1, rng),
                                   Tensor::uniform({2, 2}, -1, 1, rng)});
    Tensor out = gru_aggregate(w, zero_gru(2));
    for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(Gru, SingleSlotWindowRunsOneStep) {
    Rng rng(4);
    Tensor x = Tensor::uniform({3, 2}, -1, 1, rng);
    GruWeights g = random_gru(2, rng);
    Tensor single = gru_aggregate(make_window({x}), g);
    // same as a longer window whose earlier slots are all padding
    FeatureWindow padded = make_window({Tensor::zeros({3, 2}), Tensor::zeros({3, 2}), x},
                                       {true, true, false});
    Tensor viaPadding = gru_aggregate(padded, g);
    EXPECT_EQ(single.values(), viaPadding.values());
}

TEST(Gru, ScalarHandTraceOfTwoSteps) {
    GruWeights g;
    g.wz = Tensor::from({2, 1}, {0.2, 0.4}, true);
    g.wr = Tensor::from({2, 1}, {-0.3, 0.5}, true);
    g.wh = Tensor::from({2, 1}, {0.7, -0.6}, true);
    g.bz = Tensor::from({1, 1}, {0.1}, true);
    g.br = Tensor::from({1, 1}, {-0.2}, true);
    g.bh = Tensor::from({1, 1}, {0.05}, true);
    FeatureWindow w = make_window({Tensor::from({1, 1}, {0.5}), Tensor::from({1, 1}, {-0.3})});
    Tensor out = gru_aggregate(w, g);

    auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
    double h = 0.0;
    for (double x : {0.5, -0.3}) {
        const double z = sig(0.2 * x + 0.4 * h + 0.1);
        const double r = sig(-0.3 * x + 0.5 * h - 0.2);
        const double n = std::tanh(0.7 * x - 0.6 * (r * h) + 0.05);
        h = (1.0 - z) * h + z * n;
    }
    EXPECT_NEAR(out.values()[0], h, 1e-12);
}

TEST(Gru, PaddedSlotValuesAreIgnored) {
    Rng rng(5);
    Tensor garbage = Tensor::uniform({2, 2}, -9, 9, rng);
    Tensor x1 = Tensor::uniform({2, 2}, -1, 1, rng);
    Tensor x2 = Tensor::uniform({2, 2}, -1, 1, rng);
    GruWeights g = random_gru(2, rng);
    Tensor a = gru_aggregate(make_window({garbage, x1, x2}, {true, false, false}), g);
    Tensor b = gru_aggregate(make_window({Tensor::zeros({2, 2}), x1, x2}, {true, false, false}), g);
    EXPECT_EQ(a.values(), b.values());
}

TEST(Gru, ShapeMismatchRejected) {
    Rng rng(6);
    GruWeights g = random_gru(3, rng);
    FeatureWindow w = make_window({Tensor::zeros({2, 2})});
    EXPECT_THROW(gru_aggregate(w, g), SpaError);
}

TEST(Gru, GradCheck) {
    Rng rng(7);
    Tensor x0 = Tensor::uniform({2, 2}, -1, 1, rng, true);
    Tensor x1 = Tensor::uniform({2, 2}, -1, 1, rng, true);
    GruWeights g = random_gru(2, rng);
    auto res = grad_check(
        [&](const std::vector<Tensor>&) {
            return sum(gru_aggregate(make_window({x0, x1}), g));
        },
        {x0, x1, g.wz, g.wr, g.wh, g.bz, g.br, g.bh});
    EXPECT_LT(res.max_error, 1e-4);
}

TEST(Sa, IdenticalSlotsWithoutPositionsGiveUniformAttention) {
    Rng rng(8);
    Tensor x = Tensor::uniform({3, 4}, -1, 1, rng);
    SaWeights s = random_sa(4, 2, rng, /*pe=*/false);
    TemporalAttention att;
    Tensor out = sa_aggregate(make_window({x, x, x}), s, &att);

    for (std::size_t head = 0; head < 2; ++head)
        for (double a : att.perHead[head]) EXPECT_DOUBLE_EQ(a, 1.0 / 3.0);

    Tensor expect = matmul(matmul(x, s.wv), s.wo);
    for (std::size_t i = 0; i < out.numel(); ++i)
        EXPECT_NEAR(out.values()[i], expect.values()[i], 1e-12);
}

TEST(Sa, SingletonWindowAttendsWithWeightOne) {
    Rng rng(9);
    Tensor x = Tensor::uniform({2, 4}, -1, 1, rng);
    SaWeights s = random_sa(4, 2, rng);
    TemporalAttention att;
    sa_aggregate(make_window({x}), s, &att);
    for (std::size_t head = 0; head < 2; ++head)
        for (double a : att.perHead[head]) EXPECT_EQ(a, 1.0);
}

TEST(Sa, TwoSlotScalarHeadsMatchHandSoftmax) {
    // d=2, 2 heads -> one scalar per head; identity projections, positions off
    SaWeights s;
    s.wq = Tensor::from({2, 2}, {1, 0, 0, 1}, true);
    s.wk = Tensor::from({2, 2}, {1, 0, 0, 1}, true);
    s.wv = Tensor::from({2, 2}, {1, 0, 0, 1}, true);
    s.wo = Tensor::from({2, 2}, {1, 0, 0, 1}, true);
    s.headCount = 2;
    s.positionEncoding = false;
    Tensor a = Tensor::from({1, 2}, {0.8, -0.6});
    Tensor b = Tensor::from({1, 2}, {0.3, 0.9});
    TemporalAttention att;
    Tensor out = sa_aggregate(make_window({a, b}), s, &att);

    // head 0 uses coordinate 0, head 1 uses coordinate 1; query is slot b
    for (std::size_t head = 0; head < 2; ++head) {
        const double q = b.values()[head];
        const double k0 = a.values()[head], k1 = b.values()[head];
        const double l0 = q * k0, l1 = q * k1;  // dh = 1, scale 1
        const double m = std::max(l0, l1);
        const double e0 = std::exp(l0 - m), e1 = std::exp(l1 - m);
        const double a0 = e0 / (e0 + e1), a1 = e1 / (e0 + e1);
        EXPECT_NEAR(att.perHead[head][0], a0, 1e-12);
        EXPECT_NEAR(att.perHead[head][1], a1, 1e-12);
        const double expect = a0 * a.values()[head] + a1 * b.values()[head];
        EXPECT_NEAR(out.values()[head], expect, 1e-12);
    }
}

TEST(Sa, AttentionRowsSumToOnePerHead) {
    Rng rng(10);
    std::vector<Tensor> slots;
    for (int j = 0; j < 4; ++j) slots.push_back(Tensor::uniform({5, 4}, -1, 1, rng));
    SaWeights s = random_sa(4, 2, rng);
    TemporalAttention att;
    sa_aggregate(make_window(std::move(slots), {true, false, false, false}), s, &att);
    EXPECT_EQ(att.keptSlots.size(), 3u);
    for (std::size_t head = 0; head < 2; ++head) {
        for (std::size_t ent = 0; ent < 5; ++ent) {
            double total = 0.0;
            for (std::size_t slot = 0; slot < 3; ++slot)
                total += att.perHead[head][ent * 3 + slot];
            EXPECT_NEAR(total, 1.0, 1e-12);
        }
    }
}

TEST(Sa, PositionEncodingFollowsSinCosForm) {
    auto pe0 = sinusoidal_encoding(0, 4);
    EXPECT_DOUBLE_EQ(pe0[0], 0.0);  // sin(0)
    EXPECT_DOUBLE_EQ(pe0[1], 1.0);  // cos(0)
    EXPECT_DOUBLE_EQ(pe0[2], 0.0);
    EXPECT_DOUBLE_EQ(pe0[3], 1.0);
    auto pe3 = sinusoidal_encoding(3, 4);
    EXPECT_DOUBLE_EQ(pe3[0], std::sin(3.0));
    EXPECT_DOUBLE_EQ(pe3[1], std::cos(3.0));
    EXPECT_DOUBLE_EQ(pe3[2], std::sin(3.0 / 100.0));
    EXPECT_DOUBLE_EQ(pe3[3], std::cos(3.0 / 100.0));
}

TEST(Sa, PositionEncodingBreaksSlotSymmetry) {
    Rng rng(11);
    Tensor x = Tensor::uniform({2, 4}, -1, 1, rng);
    SaWeights withPe = random_sa(4, 2, rng);
    SaWeights noPe = withPe;
    noPe.positionEncoding = false;
    TemporalAttention att;
    sa_aggregate(make_window({x, x, x}), withPe, &att);
    bool nonUniform = false;
    for (const auto& head : att.perHead)
        for (double a : head)
            if (std::abs(a - 1.0 / 3.0) > 1e-6) nonUniform = true;
    EXPECT_TRUE(nonUniform);
}

TEST(Sa, HeadCountMustDivideDim) {
    Rng rng(12);
    SaWeights s = random_sa(4, 3, rng);
    FeatureWindow w = make_window({Tensor::zeros({2, 4})});
    try {
        sa_aggregate(w, s);
        FAIL() << "expected config error";
    } catch (const SpaError& e) {
        EXPECT_EQ(e.kind(), "config");
    }
}

TEST(Sa, GradCheckWithPaddingAndPositions) {
    Rng rng(13);
    Tensor x1 = Tensor::uniform({2, 4}, -1, 1, rng, true);
    Tensor x2 = Tensor::uniform({2, 4}, -1, 1, rng, true);
    SaWeights s = random_sa(4, 2, rng);
    auto res = grad_check(
        [&](const std::vector<Tensor>&) {
            FeatureWindow w = make_window({Tensor::zeros({2, 4}), x1, x2}, {true, false, false});
            return sum(sa_aggregate(w, s));
        },
        {x1, x2, s.wq, s.wk, s.wv, s.wo});
    EXPECT_LT(res.max_error, 1e-4);
}
