#pragma once

// The three candidate spatial aggregation operations. Each maps an augmented
// snapshot plus entityCount x d features to new features of the same shape.
//
// Message direction: RGCN and RGAT deliver along each edge (s,r,o) from
// subject to object (inverse edges provide the reverse path); COMPGCN
// follows its source formulation and lets the subject aggregate the object,
// selecting W_out / W_in / W_self by edge class.

#include <cmath>
#include <unordered_map>
#include <utility>
#include <vector>

#include "spa/data.hpp"
#include "spa/tensor.hpp"

namespace spa {

struct RgcnWeights {
    std::vector<Tensor> bases;  // B basis matrices, each d x d (row convention)
    Tensor coeff;               // augmentedRelationCount x B
    Tensor bias;                // 1 x d
};

struct RgatWeights {
    std::vector<Tensor> relTransform;  // one d x d per augmented relation
    Tensor attDst, attSrc;             // 1 x d each, sliced per head
    Tensor outProj;                    // d x d
    Tensor bias;                       // 1 x d
    std::size_t headCount = 1;
    double leakySlope = 0.2;
};

struct CompgcnWeights {
    Tensor wIn, wOut, wSelf;  // d x d direction transforms
    Tensor wRel;              // d x d relation update
    Tensor bias;              // 1 x d
    bool subtractCompose = false;  // composition defaults to elementwise product
};

// per-edge attention weights in snapshot edge order, one vector per head
struct SpatialAttention {
    std::vector<std::vector<double>> perHead;
};

namespace detail {

inline void require_augmented(const Snapshot& snap) {
    if (!snap.augmented)
        throw SpaError("spatial", "usage", "spatial ops need an augmented snapshot");
}

inline Tensor ones_const(std::size_t r, std::size_t c) { return Tensor::full({r, c}, 1.0); }

// bias is 1 x d; replicate across n rows
inline Tensor broadcast_rows(const Tensor& row, std::size_t n) {
    return matmul(ones_const(n, 1), row);
}

// column (n x 1) replicated across d columns
inline Tensor broadcast_cols(const Tensor& col, std::size_t d) {
    return matmul(col, ones_const(1, d));
}

inline Tensor leaky_relu(const Tensor& x, double slope) {
    return add(smul(x, slope), smul(relu(x), 1.0 - slope));
}

// x -> 1/x elementwise for strictly positive x, via exp(-log x)
inline Tensor reciprocal_pos(const Tensor& x) { return exp_t(smul(log_t(x), -1.0)); }

}  // namespace detail

// h'_o = ReLU( sum over incoming edges of (1/|N_r(o)|) (h_s W_r) + bias )
// with W_r expanded from the shared bases.
inline Tensor rgcn_forward(const Snapshot& snap, const Tensor& H, const RgcnWeights& w) {
    detail::require_augmented(snap);
    const std::size_t E = H.shape()[0], d = H.shape()[1];
    const std::size_t B = w.bases.size();
    if (w.coeff.shape()[1] != B)
        throw SpaError("spatial", "shape", "coefficient columns must match basis count");
    const std::size_t nEdges = snap.edges.size();

    std::vector<std::size_t> srcs(nEdges), dsts(nEdges), rels(nEdges);
    for (std::size_t i = 0; i < nEdges; ++i) {
        srcs[i] = snap.edges[i].subject;
        dsts[i] = snap.edges[i].object;
        rels[i] = snap.edges[i].relation;
    }

    // 1/|N_r(dest)| per edge, a graph constant
    std::unordered_map<std::uint64_t, double> relDegree;
    for (std::size_t i = 0; i < nEdges; ++i) relDegree[rels[i] * E + dsts[i]] += 1.0;
    std::vector<double> norm(nEdges);
    for (std::size_t i = 0; i < nEdges; ++i) norm[i] = 1.0 / relDegree[rels[i] * E + dsts[i]];

    Tensor src_feat = gather(H, srcs);                 // edges x d
    Tensor coefPerEdge = gather(w.coeff, rels);        // edges x B
    std::vector<std::size_t> ones_cols(B, 1);
    auto coefCols = split(coefPerEdge, 1, ones_cols);  // B tensors, edges x 1

    Tensor msg;
    for (std::size_t b = 0; b < B; ++b) {
        Tensor term = mul(detail::broadcast_cols(coefCols[b], d), matmul(src_feat, w.bases[b]));
        msg = b == 0 ? term : add(msg, term);
    }
    msg = mul(msg, detail::broadcast_cols(Tensor::from({nEdges, 1}, norm), d));
    Tensor agg = scatter_add(msg, dsts, E);
    return relu(add(agg, detail::broadcast_rows(w.bias, E)));
}

namespace detail {

// transformed[e] = features[pick(e)] * relTransform[rel(e)], computed with one
// matmul per relation then restored to edge order
inline Tensor per_relation_transform(const Tensor& H, const std::vector<std::size_t>& rows,
                                     const std::vector<std::size_t>& rels,
                                     const std::vector<Tensor>& relTransform) {
    const std::size_t nEdges = rows.size();
    std::map<std::size_t, std::vector<std::size_t>> byRel;  // ordered for determinism
    for (std::size_t i = 0; i < nEdges; ++i) byRel[rels[i]].push_back(i);
    std::vector<Tensor> blocks;
    std::vector<std::size_t> groupedToEdge;
    groupedToEdge.reserve(nEdges);
    for (const auto& [rel, idxs] : byRel) {
        if (rel >= relTransform.size())
            throw SpaError("spatial", "shape", "relation id exceeds transform table");
        std::vector<std::size_t> sel(idxs.size());
        for (std::size_t k = 0; k < idxs.size(); ++k) sel[k] = rows[idxs[k]];
        blocks.push_back(matmul(gather(H, sel), relTransform[rel]));
        groupedToEdge.insert(groupedToEdge.end(), idxs.begin(), idxs.end());
    }
    Tensor grouped = blocks.size() == 1 ? blocks[0] : concat(blocks, 0);
    std::vector<std::size_t> edgeToGrouped(nEdges);
    for (std::size_t g = 0; g < nEdges; ++g) edgeToGrouped[groupedToEdge[g]] = g;
    return gather(grouped, edgeToGrouped);
}

// softmax of `logits` (n x 1) within segments keyed by `segment`, built from
// exp/log so the adjoint is exact; the max shift per segment is a constant.
inline Tensor segment_softmax(const Tensor& logits, const std::vector<std::size_t>& segment,
                              std::size_t segmentCount) {
    const std::size_t n = segment.size();
    std::vector<double> segMax(segmentCount, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < n; ++i)
        segMax[segment[i]] = std::max(segMax[segment[i]], logits.values()[i]);
    std::vector<double> shift(n);
    for (std::size_t i = 0; i < n; ++i) shift[i] = segMax[segment[i]];
    Tensor ex = exp_t(sub(logits, Tensor::from({n, 1}, shift)));
    Tensor denomPerSeg = scatter_add(ex, segment, segmentCount);  // segments x 1
    Tensor invDenomPerEdge = reciprocal_pos(gather(denomPerSeg, segment));
    return mul(ex, invDenomPerEdge);
}

}  // namespace detail

// Within-relation transform, one softmax per destination across all of its
// incoming edges; per-head attention over head slices of the transformed
// features, heads concatenated then projected.
inline Tensor rgat_forward(const Snapshot& snap, const Tensor& H, const RgatWeights& w,
                           SpatialAttention* attentionOut = nullptr) {
    detail::require_augmented(snap);
    const std::size_t E = H.shape()[0], d = H.shape()[1];
    const std::size_t heads = w.headCount;
    if (heads == 0 || d % heads != 0)
        throw SpaError("spatial", "config", "feature dim must be divisible by head count");
    const std::size_t dh = d / heads;
    const std::size_t nEdges = snap.edges.size();

    std::vector<std::size_t> srcs(nEdges), dsts(nEdges), rels(nEdges);
    for (std::size_t i = 0; i < nEdges; ++i) {
        srcs[i] = snap.edges[i].subject;
        dsts[i] = snap.edges[i].object;
        rels[i] = snap.edges[i].relation;
    }

    Tensor tSrc = detail::per_relation_transform(H, srcs, rels, w.relTransform);
    Tensor tDst = detail::per_relation_transform(H, dsts, rels, w.relTransform);

    std::vector<std::size_t> headCols(heads, dh);
    auto srcSlices = split(tSrc, 1, headCols);
    auto dstSlices = split(tDst, 1, headCols);
    auto attDstSlices = split(w.attDst, 1, headCols);  // 1 x dh each
    auto attSrcSlices = split(w.attSrc, 1, headCols);

    if (attentionOut) attentionOut->perHead.assign(heads, {});
    std::vector<Tensor> headOut;
    for (std::size_t h = 0; h < heads; ++h) {
        Tensor logits = add(matmul(dstSlices[h], transpose(attDstSlices[h])),
                            matmul(srcSlices[h], transpose(attSrcSlices[h])));  // edges x 1
        logits = detail::leaky_relu(logits, w.leakySlope);
        Tensor alpha = detail::segment_softmax(logits, dsts, E);
        if (attentionOut) attentionOut->perHead[h] = alpha.values();
        Tensor weighted = mul(detail::broadcast_cols(alpha, dh), srcSlices[h]);
        headOut.push_back(scatter_add(weighted, dsts, E));  // E x dh
    }
    Tensor cat = headOut.size() == 1 ? headOut[0] : concat(headOut, 1);
    Tensor projected = matmul(cat, w.outProj);
    return relu(add(projected, detail::broadcast_rows(w.bias, E)));
}

// Subject-side aggregation: each edge (s,r,o) contributes
// W_dir(r) applied to compose(h_o, z_r) into s, mean over s's edges; the
// relation table itself advances by wRel.
inline std::pair<Tensor, Tensor> compgcn_forward(const Snapshot& snap, const Tensor& H,
                                                 const Tensor& relEmb, const CompgcnWeights& w,
                                                 std::size_t relationCount) {
    detail::require_augmented(snap);
    const std::size_t E = H.shape()[0], d = H.shape()[1];
    if (relEmb.shape()[0] != 2 * relationCount + 1)
        throw SpaError("spatial", "shape", "relation table must cover augmented relations");
    if (relEmb.shape()[1] != d)
        throw SpaError("spatial", "shape", "relation and entity feature dims differ");
    const std::size_t nEdges = snap.edges.size();

    std::vector<std::size_t> srcs(nEdges), dsts(nEdges), rels(nEdges);
    std::vector<std::size_t> cls(nEdges);  // 0 original, 1 inverse, 2 loop
    for (std::size_t i = 0; i < nEdges; ++i) {
        dsts[i] = snap.edges[i].subject;
        srcs[i] = snap.edges[i].object;
        rels[i] = snap.edges[i].relation;
        cls[i] = rels[i] < relationCount ? 0 : (rels[i] < 2 * relationCount ? 1 : 2);
    }

    Tensor composed = w.subtractCompose ? sub(gather(H, srcs), gather(relEmb, rels))
                                        : mul(gather(H, srcs), gather(relEmb, rels));

    // group by direction class for the three transforms
    std::vector<Tensor> classTransforms = {w.wOut, w.wIn, w.wSelf};
    std::vector<std::vector<std::size_t>> byClass(3);
    for (std::size_t i = 0; i < nEdges; ++i) byClass[cls[i]].push_back(i);
    std::vector<Tensor> blocks;
    std::vector<std::size_t> groupedToEdge;
    for (std::size_t c = 0; c < 3; ++c) {
        if (byClass[c].empty()) continue;
        blocks.push_back(matmul(gather(composed, byClass[c]), classTransforms[c]));
        groupedToEdge.insert(groupedToEdge.end(), byClass[c].begin(), byClass[c].end());
    }
    Tensor grouped = blocks.size() == 1 ? blocks[0] : concat(blocks, 0);
    std::vector<std::size_t> edgeToGrouped(nEdges);
    for (std::size_t g = 0; g < nEdges; ++g) edgeToGrouped[groupedToEdge[g]] = g;
    Tensor msg = gather(grouped, edgeToGrouped);

    std::vector<double> degree(E, 0.0);
    for (std::size_t i = 0; i < nEdges; ++i) degree[dsts[i]] += 1.0;
    std::vector<double> norm(nEdges);
    for (std::size_t i = 0; i < nEdges; ++i) norm[i] = 1.0 / degree[dsts[i]];
    msg = mul(msg, detail::broadcast_cols(Tensor::from({nEdges, 1}, norm), d));

    Tensor agg = scatter_add(msg, dsts, E);
    Tensor out = relu(add(agg, detail::broadcast_rows(w.bias, E)));
    Tensor relOut = matmul(relEmb, w.wRel);
    return {out, relOut};
}

}  // namespace spa
