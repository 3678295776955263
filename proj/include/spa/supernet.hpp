#pragma once

// Weight-sharing supernet over the architecture space: one embedding table
// plus per-(layer, candidate) operation weights. A forward pass activates
// exactly one candidate per slot as named by an ArchDescriptor; unsampled
// candidates are untouched by construction.

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "spa/arch.hpp"
#include "spa/data.hpp"
#include "spa/spatial.hpp"
#include "spa/temporal.hpp"
#include "spa/tensor.hpp"

namespace spa {

struct ModelConfig {
    std::size_t dim = 100;        // feature width; halves act as real/imaginary in the decoder
    std::size_t layerCount = 3;
    std::size_t window = 8;       // tau; a forward pass sees window+1 snapshots
    std::size_t saHeads = 4;      // graph-attention heads
    std::size_t taHeads = 4;      // temporal-attention heads
    double dropout = 0.1;
    double leakySlope = 0.2;
    bool subtractCompose = false;
    bool positionEncoding = true;

    void validate() const {
        if (dim == 0 || dim % 2 != 0)
            throw SpaError("supernet", "config", "feature dim must be positive and even");
        if (layerCount == 0) throw SpaError("supernet", "config", "need at least one layer");
        if (saHeads == 0 || dim % saHeads != 0)
            throw SpaError("supernet", "config", "dim must be divisible by saHeads");
        if (taHeads == 0 || dim % taHeads != 0)
            throw SpaError("supernet", "config", "dim must be divisible by taHeads");
        if (!(dropout >= 0.0) || dropout >= 1.0)
            throw SpaError("supernet", "config", "dropout must lie in [0, 1)");
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["dim"] = dim;
        j["layerCount"] = layerCount;
        j["window"] = window;
        j["saHeads"] = saHeads;
        j["taHeads"] = taHeads;
        j["dropout"] = dropout;
        j["leakySlope"] = leakySlope;
        j["subtractCompose"] = subtractCompose;
        j["positionEncoding"] = positionEncoding;
        return j;
    }

    static ModelConfig from_json(const nlohmann::json& j) {
        ModelConfig c;
        c.dim = j.at("dim").get<std::size_t>();
        c.layerCount = j.at("layerCount").get<std::size_t>();
        c.window = j.at("window").get<std::size_t>();
        c.saHeads = j.at("saHeads").get<std::size_t>();
        c.taHeads = j.at("taHeads").get<std::size_t>();
        c.dropout = j.at("dropout").get<double>();
        c.leakySlope = j.at("leakySlope").get<double>();
        c.subtractCompose = j.at("subtractCompose").get<bool>();
        c.positionEncoding = j.at("positionEncoding").get<bool>();
        c.validate();
        return c;
    }
};

namespace detail {

// Every tensor gets its own generator keyed by a stable name, so two builds
// that allocate different candidate subsets still initialize shared tensors
// identically.
inline Tensor init_glorot(Shape shape, std::uint64_t seed, const std::string& name) {
    Rng rng(derive_seed(seed, name));
    const double fanIn = double(shape[0]);
    const double fanOut = double(shape.size() > 1 ? shape[1] : 1);
    const double limit = std::sqrt(6.0 / (fanIn + fanOut));
    return Tensor::uniform(std::move(shape), -limit, limit, rng, true);
}

inline Tensor init_zero(Shape shape) { return Tensor::zeros(std::move(shape), true); }

template <typename Op>
bool allows(const std::vector<Op>& set, Op op) {
    for (auto x : set)
        if (x == op) return true;
    return false;
}

}  // namespace detail

struct SupernetParams {
    ModelConfig config;
    SearchSpace space;
    std::size_t entityCount = 0;
    std::size_t relationCount = 0;  // original; the table also covers inverse + self-loop rows
    std::uint64_t seed = 0;

    Tensor embedding;  // (entityCount + 2*relationCount + 1) x dim

    struct LayerParams {
        std::optional<RgcnWeights> rgcn;
        std::optional<RgatWeights> rgat;
        std::optional<CompgcnWeights> compgcn;
        std::optional<GruWeights> gru;
        std::optional<SaWeights> sa;
        Tensor lcProj;  // 2d x d, allocated only when LC_CONCAT is allowed
    };
    std::vector<LayerParams> layers;
    Tensor lfProj;  // (L*d) x d, allocated only when LF_CONCAT is allowed

    std::size_t augmented_relation_count() const { return 2 * relationCount + 1; }

    static SupernetParams init(std::size_t entityCount, std::size_t relationCount,
                               const ModelConfig& config, const SearchSpace& space,
                               std::uint64_t seed) {
        config.validate();
        space.validate();
        if (space.layer_count() != config.layerCount)
            throw SpaError("supernet", "config", "search space depth differs from layerCount");
        if (entityCount == 0 || relationCount == 0)
            throw SpaError("supernet", "config", "need at least one entity and relation");

        SupernetParams p;
        p.config = config;
        p.space = space;
        p.entityCount = entityCount;
        p.relationCount = relationCount;
        p.seed = seed;

        const std::size_t d = config.dim;
        const std::size_t Raug = p.augmented_relation_count();
        {
            Rng rng(derive_seed(seed, "embedding"));
            p.embedding = Tensor::uniform({entityCount + Raug, d}, -0.1, 0.1, rng, true);
        }

        const std::size_t basisCount = std::min<std::size_t>(8, Raug);
        for (std::size_t i = 0; i < config.layerCount; ++i) {
            const std::string prefix = "layer" + std::to_string(i) + ".";
            LayerParams lp;
            if (detail::allows(space.sa[i], SaOp::RGCN)) {
                RgcnWeights w;
                for (std::size_t b = 0; b < basisCount; ++b)
                    w.bases.push_back(
                        detail::init_glorot({d, d}, seed, prefix + "rgcn.basis" + std::to_string(b)));
                w.coeff = detail::init_glorot({Raug, basisCount}, seed, prefix + "rgcn.coeff");
                w.bias = detail::init_zero({1, d});
                lp.rgcn = std::move(w);
            }
            if (detail::allows(space.sa[i], SaOp::RGAT)) {
                RgatWeights w;
                for (std::size_t r = 0; r < Raug; ++r)
                    w.relTransform.push_back(
                        detail::init_glorot({d, d}, seed, prefix + "rgat.rel" + std::to_string(r)));
                w.attDst = detail::init_glorot({1, d}, seed, prefix + "rgat.attDst");
                w.attSrc = detail::init_glorot({1, d}, seed, prefix + "rgat.attSrc");
                w.outProj = detail::init_glorot({d, d}, seed, prefix + "rgat.outProj");
                w.bias = detail::init_zero({1, d});
                w.headCount = config.saHeads;
                w.leakySlope = config.leakySlope;
                lp.rgat = std::move(w);
            }
            if (detail::allows(space.sa[i], SaOp::COMPGCN)) {
                CompgcnWeights w;
                w.wIn = detail::init_glorot({d, d}, seed, prefix + "compgcn.wIn");
                w.wOut = detail::init_glorot({d, d}, seed, prefix + "compgcn.wOut");
                w.wSelf = detail::init_glorot({d, d}, seed, prefix + "compgcn.wSelf");
                w.wRel = detail::init_glorot({d, d}, seed, prefix + "compgcn.wRel");
                w.bias = detail::init_zero({1, d});
                w.subtractCompose = config.subtractCompose;
                lp.compgcn = std::move(w);
            }
            if (detail::allows(space.ta[i], TaOp::GRU)) {
                GruWeights w;
                w.wz = detail::init_glorot({2 * d, d}, seed, prefix + "gru.wz");
                w.wr = detail::init_glorot({2 * d, d}, seed, prefix + "gru.wr");
                w.wh = detail::init_glorot({2 * d, d}, seed, prefix + "gru.wh");
                w.bz = detail::init_zero({1, d});
                w.br = detail::init_zero({1, d});
                w.bh = detail::init_zero({1, d});
                lp.gru = std::move(w);
            }
            if (detail::allows(space.ta[i], TaOp::SA)) {
                SaWeights w;
                w.wq = detail::init_glorot({d, d}, seed, prefix + "sa.wq");
                w.wk = detail::init_glorot({d, d}, seed, prefix + "sa.wk");
                w.wv = detail::init_glorot({d, d}, seed, prefix + "sa.wv");
                w.wo = detail::init_glorot({d, d}, seed, prefix + "sa.wo");
                w.headCount = config.taHeads;
                w.positionEncoding = config.positionEncoding;
                lp.sa = std::move(w);
            }
            if (detail::allows(space.lc[i], LcOp::LC_CONCAT))
                lp.lcProj = detail::init_glorot({2 * d, d}, seed, prefix + "lcProj");
            p.layers.push_back(std::move(lp));
        }
        if (detail::allows(space.lf, LfOp::LF_CONCAT))
            p.lfProj = detail::init_glorot({config.layerCount * d, d}, seed, "lfProj");
        return p;
    }

    // Stable enumeration order; names double as checkpoint keys and as the
    // per-tensor initialization seeds.
    std::vector<std::pair<std::string, Tensor>> named_parameters() const {
        std::vector<std::pair<std::string, Tensor>> out;
        out.emplace_back("embedding", embedding);
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const std::string prefix = "layer" + std::to_string(i) + ".";
            const LayerParams& lp = layers[i];
            if (lp.rgcn) {
                for (std::size_t b = 0; b < lp.rgcn->bases.size(); ++b)
                    out.emplace_back(prefix + "rgcn.basis" + std::to_string(b), lp.rgcn->bases[b]);
                out.emplace_back(prefix + "rgcn.coeff", lp.rgcn->coeff);
                out.emplace_back(prefix + "rgcn.bias", lp.rgcn->bias);
            }
            if (lp.rgat) {
                for (std::size_t r = 0; r < lp.rgat->relTransform.size(); ++r)
                    out.emplace_back(prefix + "rgat.rel" + std::to_string(r), lp.rgat->relTransform[r]);
                out.emplace_back(prefix + "rgat.attDst", lp.rgat->attDst);
                out.emplace_back(prefix + "rgat.attSrc", lp.rgat->attSrc);
                out.emplace_back(prefix + "rgat.outProj", lp.rgat->outProj);
                out.emplace_back(prefix + "rgat.bias", lp.rgat->bias);
            }
            if (lp.compgcn) {
                out.emplace_back(prefix + "compgcn.wIn", lp.compgcn->wIn);
                out.emplace_back(prefix + "compgcn.wOut", lp.compgcn->wOut);
                out.emplace_back(prefix + "compgcn.wSelf", lp.compgcn->wSelf);
                out.emplace_back(prefix + "compgcn.wRel", lp.compgcn->wRel);
                out.emplace_back(prefix + "compgcn.bias", lp.compgcn->bias);
            }
            if (lp.gru) {
                out.emplace_back(prefix + "gru.wz", lp.gru->wz);
                out.emplace_back(prefix + "gru.wr", lp.gru->wr);
                out.emplace_back(prefix + "gru.wh", lp.gru->wh);
                out.emplace_back(prefix + "gru.bz", lp.gru->bz);
                out.emplace_back(prefix + "gru.br", lp.gru->br);
                out.emplace_back(prefix + "gru.bh", lp.gru->bh);
            }
            if (lp.sa) {
                out.emplace_back(prefix + "sa.wq", lp.sa->wq);
                out.emplace_back(prefix + "sa.wk", lp.sa->wk);
                out.emplace_back(prefix + "sa.wv", lp.sa->wv);
                out.emplace_back(prefix + "sa.wo", lp.sa->wo);
            }
            if (lp.lcProj.defined()) out.emplace_back(prefix + "lcProj", lp.lcProj);
        }
        if (lfProj.defined()) out.emplace_back("lfProj", lfProj);
        return out;
    }

    std::vector<Tensor> parameters() const {
        std::vector<Tensor> out;
        for (auto& [name, t] : named_parameters()) out.push_back(t);
        return out;
    }

    // Parameters a given path can actually touch; everything else stays
    // frozen during a step on that path.
    std::vector<Tensor> path_parameters(const ArchDescriptor& arch) const {
        if (arch.layers.size() != layers.size())
            throw SpaError("supernet", "config", "descriptor depth differs from supernet");
        std::vector<Tensor> out;
        out.push_back(embedding);
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const LayerParams& lp = layers[i];
            switch (arch.layers[i].sa) {
                case SaOp::RGCN: {
                    if (!lp.rgcn) throw SpaError("supernet", "config", "RGCN not allocated");
                    for (const auto& b : lp.rgcn->bases) out.push_back(b);
                    out.push_back(lp.rgcn->coeff);
                    out.push_back(lp.rgcn->bias);
                    break;
                }
                case SaOp::RGAT: {
                    if (!lp.rgat) throw SpaError("supernet", "config", "RGAT not allocated");
                    for (const auto& w : lp.rgat->relTransform) out.push_back(w);
                    out.push_back(lp.rgat->attDst);
                    out.push_back(lp.rgat->attSrc);
                    out.push_back(lp.rgat->outProj);
                    out.push_back(lp.rgat->bias);
                    break;
                }
                case SaOp::COMPGCN: {
                    if (!lp.compgcn) throw SpaError("supernet", "config", "COMPGCN not allocated");
                    out.push_back(lp.compgcn->wIn);
                    out.push_back(lp.compgcn->wOut);
                    out.push_back(lp.compgcn->wSelf);
                    out.push_back(lp.compgcn->wRel);
                    out.push_back(lp.compgcn->bias);
                    break;
                }
            }
            switch (arch.layers[i].ta) {
                case TaOp::GRU: {
                    if (!lp.gru) throw SpaError("supernet", "config", "GRU not allocated");
                    out.push_back(lp.gru->wz);
                    out.push_back(lp.gru->wr);
                    out.push_back(lp.gru->wh);
                    out.push_back(lp.gru->bz);
                    out.push_back(lp.gru->br);
                    out.push_back(lp.gru->bh);
                    break;
                }
                case TaOp::SA: {
                    if (!lp.sa) throw SpaError("supernet", "config", "SA not allocated");
                    out.push_back(lp.sa->wq);
                    out.push_back(lp.sa->wk);
                    out.push_back(lp.sa->wv);
                    out.push_back(lp.sa->wo);
                    break;
                }
                case TaOp::IDENTITY: break;
            }
            if (arch.layers[i].lc == LcOp::LC_CONCAT) {
                if (!lp.lcProj.defined())
                    throw SpaError("supernet", "config", "LC_CONCAT projection not allocated");
                out.push_back(lp.lcProj);
            }
        }
        if (arch.lf == LfOp::LF_CONCAT) {
            if (!lfProj.defined())
                throw SpaError("supernet", "config", "LF_CONCAT projection not allocated");
            out.push_back(lfProj);
        }
        return out;
    }

    Tensor entity_features() const {
        std::vector<std::size_t> rows(entityCount);
        for (std::size_t e = 0; e < entityCount; ++e) rows[e] = e;
        return gather(embedding, rows);
    }

    Tensor relation_features() const {
        const std::size_t Raug = augmented_relation_count();
        std::vector<std::size_t> rows(Raug);
        for (std::size_t r = 0; r < Raug; ++r) rows[r] = entityCount + r;
        return gather(embedding, rows);
    }
};

// ---------------------------------------------------------------------------
// layer connection and layer fusion

inline Tensor lc_apply(LcOp op, const Tensor& hPrev, const Tensor& hCur,
                       const Tensor& proj = Tensor()) {
    switch (op) {
        case LcOp::LC_SKIP: return hCur;
        case LcOp::LC_SUM: return add(hPrev, hCur);
        case LcOp::LC_CONCAT: {
            if (!proj.defined())
                throw SpaError("supernet", "config", "LC_CONCAT needs a projection matrix");
            return matmul(concat({hPrev, hCur}, 1), proj);
        }
    }
    throw SpaError("supernet", "config", "unknown layer-connection op");
}

inline Tensor lf_apply(LfOp op, const std::vector<Tensor>& zs, const Tensor& proj = Tensor()) {
    if (zs.empty()) throw SpaError("supernet", "usage", "fusion needs at least one layer output");
    switch (op) {
        case LfOp::LF_SKIP: return zs.back();
        case LfOp::LF_MEAN: {
            Tensor acc = zs[0];
            for (std::size_t i = 1; i < zs.size(); ++i) acc = add(acc, zs[i]);
            return smul(acc, 1.0 / double(zs.size()));
        }
        case LfOp::LF_MAX: {
            // elementwise max via max(a,b) = a + relu(b - a); ties keep the
            // earlier layer's gradient route, values are order-independent
            Tensor acc = zs[0];
            for (std::size_t i = 1; i < zs.size(); ++i) acc = add(acc, relu(sub(zs[i], acc)));
            return acc;
        }
        case LfOp::LF_CONCAT: {
            if (!proj.defined())
                throw SpaError("supernet", "config", "LF_CONCAT needs a projection matrix");
            return matmul(zs.size() == 1 ? zs[0] : concat(zs, 1), proj);
        }
    }
    throw SpaError("supernet", "config", "unknown fusion op");
}

// ---------------------------------------------------------------------------
// forward pass

// Snapshots augmented once up front; forwards at every timestep reuse them.
struct EncoderInputs {
    const TemporalKG* kg = nullptr;
    std::vector<Snapshot> augmented;

    static EncoderInputs build(const TemporalKG& kg) {
        EncoderInputs in;
        in.kg = &kg;
        in.augmented.reserve(kg.snapshots.size());
        for (const auto& s : kg.snapshots)
            in.augmented.push_back(augment_snapshot(s, kg.entityCount, kg.relationCount));
        return in;
    }
};

struct ForwardOptions {
    bool training = false;
    Rng* dropoutRng = nullptr;
};

// Entity features at time t: per window snapshot a spatial pass, per layer a
// temporal aggregation over the raw spatial outputs, layer connections
// feeding the next layer, and a final fusion across layers.
inline Tensor supernet_forward(const EncoderInputs& inputs, TimeIndex t,
                               const ArchDescriptor& arch, const SupernetParams& params,
                               const ForwardOptions& options = {}) {
    const TemporalKG& kg = *inputs.kg;
    const ModelConfig& cfg = params.config;
    if (t >= kg.timestepCount)
        throw SpaError("supernet", "bounds", "forward time out of range");
    if (!params.space.contains(arch))
        throw SpaError("supernet", "config",
                       "descriptor " + arch.canonical() + " lies outside the supernet space");
    if (options.training && cfg.dropout > 0.0 && options.dropoutRng == nullptr)
        throw SpaError("supernet", "usage", "training forward needs a dropout rng");

    const std::size_t E = kg.entityCount;
    const std::size_t d = cfg.dim;
    const std::size_t slotCount = cfg.window + 1;

    std::vector<std::int64_t> times(slotCount);
    std::vector<bool> padded(slotCount);
    for (std::size_t j = 0; j < slotCount; ++j) {
        const std::int64_t tj = std::int64_t(t) - std::int64_t(cfg.window) + std::int64_t(j);
        times[j] = tj;
        padded[j] = tj < 0;
    }

    const Tensor zeroSlot = Tensor::zeros({E, d});
    const Tensor h0 = params.entity_features();
    std::vector<Tensor> hhat(slotCount);
    for (std::size_t j = 0; j < slotCount; ++j) hhat[j] = padded[j] ? zeroSlot : h0;

    Tensor relCur = params.relation_features();
    std::vector<Tensor> zPerLayer;

    for (std::size_t i = 0; i < cfg.layerCount; ++i) {
        const LayerChoice& choice = arch.layers[i];
        const SupernetParams::LayerParams& lp = params.layers[i];

        std::vector<Tensor> hCur(slotCount);
        for (std::size_t j = 0; j < slotCount; ++j) {
            if (padded[j]) {
                hCur[j] = zeroSlot;
                continue;
            }
            const Snapshot& snap = inputs.augmented[std::size_t(times[j])];
            Tensor h;
            switch (choice.sa) {
                case SaOp::RGCN: h = rgcn_forward(snap, hhat[j], *lp.rgcn); break;
                case SaOp::RGAT: h = rgat_forward(snap, hhat[j], *lp.rgat); break;
                case SaOp::COMPGCN:
                    h = compgcn_forward(snap, hhat[j], relCur, *lp.compgcn, params.relationCount)
                            .first;
                    break;
            }
            if (options.training && cfg.dropout > 0.0)
                h = dropout(h, cfg.dropout, true, *options.dropoutRng);
            hCur[j] = h;
        }

        FeatureWindow window{hCur, times, padded};
        Tensor z;
        switch (choice.ta) {
            case TaOp::GRU: z = gru_aggregate(window, *lp.gru); break;
            case TaOp::SA: z = sa_aggregate(window, *lp.sa); break;
            case TaOp::IDENTITY: z = identity_aggregate(window); break;
        }
        zPerLayer.push_back(z);

        if (i + 1 < cfg.layerCount) {
            for (std::size_t j = 0; j < slotCount; ++j)
                if (!padded[j]) hhat[j] = lc_apply(choice.lc, hhat[j], hCur[j], lp.lcProj);
            // the relation table advances once per layer, not once per slot
            if (choice.sa == SaOp::COMPGCN) relCur = matmul(relCur, lp.compgcn->wRel);
        }
    }

    return lf_apply(arch.lf, zPerLayer, params.lfProj);
}

// Deep-copies exactly the tensors a descriptor touches into a standalone
// single-path parameter set.
inline SupernetParams extract_submodel(const SupernetParams& params, const ArchDescriptor& arch) {
    if (!params.space.contains(arch))
        throw SpaError("supernet", "config", "descriptor lies outside the supernet space");
    SupernetParams sub = SupernetParams::init(params.entityCount, params.relationCount,
                                              params.config, SearchSpace::singleton(arch),
                                              params.seed);
    std::unordered_map<std::string, Tensor> byName;
    for (auto& [name, t] : params.named_parameters()) byName.emplace(name, t);
    for (auto& [name, t] : sub.named_parameters()) {
        auto it = byName.find(name);
        if (it == byName.end())
            throw SpaError("supernet", "internal", "missing source tensor " + name);
        if (it->second.shape() != t.shape())
            throw SpaError("supernet", "internal", "shape mismatch for " + name);
        t.mutable_values() = it->second.values();
    }
    return sub;
}

// ---------------------------------------------------------------------------
// checkpointing: one-line JSON manifest, then raw 64-bit-real blobs

namespace detail {

inline bool host_little_endian() {
    const std::uint16_t probe = 1;
    return *reinterpret_cast<const unsigned char*>(&probe) == 1;
}

}  // namespace detail

inline void save_checkpoint(const SupernetParams& params, const std::string& path) {
    if (!detail::host_little_endian())
        throw SpaError("supernet", "environment", "checkpoint writer requires a little-endian host");
    auto named = params.named_parameters();

    nlohmann::ordered_json manifest;
    manifest["format"] = "spa-supernet-checkpoint";
    manifest["version"] = 1;
    manifest["endianness"] = "little";
    manifest["entityCount"] = params.entityCount;
    manifest["relationCount"] = params.relationCount;
    manifest["seed"] = params.seed;
    manifest["config"] = params.config.to_json();
    manifest["space"] = params.space.to_json();
    manifest["tensors"] = nlohmann::ordered_json::array();
    std::size_t offset = 0;
    for (auto& [name, t] : named) {
        nlohmann::ordered_json entry;
        entry["name"] = name;
        entry["shape"] = t.shape();
        entry["offset"] = offset;
        entry["count"] = t.numel();
        manifest["tensors"].push_back(entry);
        offset += t.numel();
    }
    manifest["totalCount"] = offset;

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw SpaError("supernet", "io", "cannot write checkpoint " + path);
    const std::string header = manifest.dump();
    out.write(header.data(), std::streamsize(header.size()));
    out.put('\n');
    for (auto& [name, t] : named) {
        const auto& v = t.values();
        out.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * sizeof(double)));
    }
    out.flush();
    if (!out) throw SpaError("supernet", "io", "short write on checkpoint " + path);
}

inline SupernetParams load_checkpoint(const std::string& path) {
    if (!detail::host_little_endian())
        throw SpaError("supernet", "load", "checkpoint reader requires a little-endian host");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SpaError("supernet", "load", "cannot open checkpoint " + path);
    std::string header;
    if (!std::getline(in, header))
        throw SpaError("supernet", "load", "checkpoint has no manifest line");
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception&) {
        throw SpaError("supernet", "load", path + " is not a checkpoint (bad manifest)");
    }
    if (!manifest.is_object() || manifest.value("format", "") != "spa-supernet-checkpoint")
        throw SpaError("supernet", "load", path + " is not a supernet checkpoint");
    if (manifest.value("version", -1) != 1)
        throw SpaError("supernet", "load",
                       "unsupported checkpoint version " + manifest["version"].dump());
    if (manifest.value("endianness", "") != "little")
        throw SpaError("supernet", "load", "checkpoint data is not little-endian");

    const ModelConfig config = ModelConfig::from_json(manifest.at("config"));
    const SearchSpace space = SearchSpace::from_json(manifest.at("space"));
    SupernetParams params = SupernetParams::init(manifest.at("entityCount").get<std::size_t>(),
                                                 manifest.at("relationCount").get<std::size_t>(),
                                                 config, space,
                                                 manifest.at("seed").get<std::uint64_t>());

    std::unordered_map<std::string, Tensor> byName;
    for (auto& [name, t] : params.named_parameters()) byName.emplace(name, t);

    const std::size_t totalCount = manifest.at("totalCount").get<std::size_t>();
    std::vector<double> blob(totalCount);
    in.read(reinterpret_cast<char*>(blob.data()), std::streamsize(totalCount * sizeof(double)));
    if (std::size_t(in.gcount()) != totalCount * sizeof(double))
        throw SpaError("supernet", "load", "checkpoint data blob is shorter than its manifest");

    std::size_t filled = 0;
    for (const auto& entry : manifest.at("tensors")) {
        const std::string name = entry.at("name").get<std::string>();
        auto it = byName.find(name);
        if (it == byName.end())
            throw SpaError("supernet", "load", "checkpoint tensor " + name + " has no slot");
        const std::size_t offset = entry.at("offset").get<std::size_t>();
        const std::size_t count = entry.at("count").get<std::size_t>();
        if (offset + count > totalCount)
            throw SpaError("supernet", "load", "tensor " + name + " overruns the data blob");
        Tensor t = it->second;
        if (t.numel() != count)
            throw SpaError("supernet", "load", "tensor " + name + " count differs from structure");
        Shape expected = t.shape();
        Shape declared = entry.at("shape").get<Shape>();
        if (declared != expected)
            throw SpaError("supernet", "load", "tensor " + name + " shape differs from structure");
        std::copy(blob.begin() + std::ptrdiff_t(offset), blob.begin() + std::ptrdiff_t(offset + count),
                  t.mutable_values().begin());
        ++filled;
    }
    if (filled != byName.size())
        throw SpaError("supernet", "load", "checkpoint is missing tensors for this structure");
    return params;
}

}  // namespace spa
