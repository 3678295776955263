#pragma once

// The three candidate temporal aggregation operations. A FeatureWindow holds
// the per-entity features of the last tau+1 timesteps (oldest first), with
// pre-history slots zeroed and flagged; each op reduces the window to one
// feature matrix. All features are batched entityCount x d.

#include <cmath>
#include <vector>

#include "spa/tensor.hpp"

namespace spa {

struct FeatureWindow {
    std::vector<Tensor> slots;        // tau+1 tensors, each entityCount x d
    std::vector<std::int64_t> times;  // slot times; negative for padding
    std::vector<bool> padded;         // true when the slot predates history

    void validate() const {
        if (slots.empty() || slots.size() != times.size() || slots.size() != padded.size())
            throw SpaError("temporal", "shape", "window slots/times/flags must align and be non-empty");
        if (padded.back())
            throw SpaError("temporal", "usage", "current slot cannot be padding");
        for (const auto& s : slots)
            if (s.shape() != slots.back().shape())
                throw SpaError("temporal", "shape", "window slots must share one shape");
    }
};

struct GruWeights {
    // gate maps stored transposed for row batches: [input || state] (n x 2d)
    // times weight (2d x d); biases 1 x d
    Tensor wz, wr, wh;
    Tensor bz, br, bh;
};

struct SaWeights {
    Tensor wq, wk, wv;  // d x d, columns partitioned per head
    Tensor wo;          // d x d output projection
    std::size_t headCount = 1;
    bool positionEncoding = true;
};

// per-head attention weights of the current-slot query over kept window
// slots, plus which window indices were kept
struct TemporalAttention {
    std::vector<std::size_t> keptSlots;
    std::vector<std::vector<double>> perHead;  // [head][keptSlot * entity] row-major E x S
};

inline Tensor identity_aggregate(const FeatureWindow& w) {
    w.validate();
    return w.slots.back();
}

namespace detail {

inline Tensor row_bias(const Tensor& bias, std::size_t n) {
    return matmul(Tensor::full({n, 1}, 1.0), bias);
}

}  // namespace detail

// Gated recurrence oldest -> current from a zero state; padded slots are
// skipped with the state carried through.
inline Tensor gru_aggregate(const FeatureWindow& w, const GruWeights& weights) {
    w.validate();
    const std::size_t E = w.slots.back().shape()[0];
    const std::size_t d = w.slots.back().shape()[1];
    if (weights.wz.shape() != Shape{2 * d, d})
        throw SpaError("temporal", "shape", "gate weights must be 2d x d");
    Tensor state = Tensor::zeros({E, d});
    Tensor onesEd = Tensor::full({E, d}, 1.0);
    for (std::size_t j = 0; j < w.slots.size(); ++j) {
        if (w.padded[j]) continue;
        const Tensor& x = w.slots[j];
        Tensor cat = concat({x, state}, 1);
        Tensor z = sigmoid(add(matmul(cat, weights.wz), detail::row_bias(weights.bz, E)));
        Tensor r = sigmoid(add(matmul(cat, weights.wr), detail::row_bias(weights.br, E)));
        Tensor catn = concat({x, mul(r, state)}, 1);
        Tensor n = tanh_t(add(matmul(catn, weights.wh), detail::row_bias(weights.bh, E)));
        state = add(mul(sub(onesEd, z), state), mul(z, n));
    }
    return state;
}

inline std::vector<double> sinusoidal_encoding(std::size_t slotIndex, std::size_t d) {
    std::vector<double> pe(d);
    for (std::size_t k = 0; k < d; ++k) {
        const double exponent = double(2 * (k / 2)) / double(d);
        const double angle = double(slotIndex) / std::pow(10000.0, exponent);
        pe[k] = (k % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
    return pe;
}

// Scaled dot-product attention with the current slot as the only query and
// every non-padded slot as key/value; sinusoidal encodings indexed by window
// slot are added to the inputs first. Padded slots are dropped outright,
// which equals masking their logits to -inf.
inline Tensor sa_aggregate(const FeatureWindow& w, const SaWeights& weights,
                           TemporalAttention* attentionOut = nullptr) {
    w.validate();
    const std::size_t E = w.slots.back().shape()[0];
    const std::size_t d = w.slots.back().shape()[1];
    const std::size_t heads = weights.headCount;
    if (heads == 0 || d % heads != 0)
        throw SpaError("temporal", "config", "feature dim must be divisible by head count");
    const std::size_t dh = d / heads;

    std::vector<std::size_t> kept;
    for (std::size_t j = 0; j < w.slots.size(); ++j)
        if (!w.padded[j]) kept.push_back(j);

    auto with_pe = [&](std::size_t j) {
        if (!weights.positionEncoding) return w.slots[j];
        auto pe = sinusoidal_encoding(j, d);
        return add(w.slots[j], matmul(Tensor::full({E, 1}, 1.0), Tensor::from({1, d}, pe)));
    };

    Tensor q = matmul(with_pe(w.slots.size() - 1), weights.wq);
    std::vector<Tensor> ks, vs;
    ks.reserve(kept.size());
    vs.reserve(kept.size());
    for (std::size_t j : kept) {
        Tensor x = with_pe(j);
        ks.push_back(matmul(x, weights.wk));
        vs.push_back(matmul(x, weights.wv));
    }

    std::vector<std::size_t> headCols(heads, dh);
    auto qh = split(q, 1, headCols);
    if (attentionOut) {
        attentionOut->keptSlots = kept;
        attentionOut->perHead.assign(heads, {});
    }
    const double scale = 1.0 / std::sqrt(double(dh));
    std::vector<Tensor> headOut;
    for (std::size_t h = 0; h < heads; ++h) {
        std::vector<Tensor> logitCols;
        std::vector<Tensor> vh;
        for (std::size_t s = 0; s < kept.size(); ++s) {
            auto kh = split(ks[s], 1, headCols)[h];
            vh.push_back(split(vs[s], 1, headCols)[h]);
            logitCols.push_back(smul(sum(mul(qh[h], kh), 1, true), scale));  // E x 1
        }
        Tensor logits = logitCols.size() == 1 ? logitCols[0] : concat(logitCols, 1);  // E x S
        Tensor alpha = softmax(logits, 1);
        if (attentionOut) attentionOut->perHead[h] = alpha.values();
        auto alphaCols = split(alpha, 1, std::vector<std::size_t>(kept.size(), 1));
        Tensor acc;
        for (std::size_t s = 0; s < kept.size(); ++s) {
            Tensor term = mul(matmul(alphaCols[s], Tensor::full({1, dh}, 1.0)), vh[s]);
            acc = s == 0 ? term : add(acc, term);
        }
        headOut.push_back(acc);
    }
    Tensor cat = headOut.size() == 1 ? headOut[0] : concat(headOut, 1);
    return matmul(cat, weights.wo);
}

}  // namespace spa
