#pragma once

// Architecture descriptors and the search space over them: per layer a
// spatial aggregator, temporal aggregator, and layer-connection choice, plus
// one global layer-fusion choice.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "spa/common.hpp"

namespace spa {

enum class SaOp { RGCN, RGAT, COMPGCN };
enum class TaOp { GRU, SA, IDENTITY };
enum class LcOp { LC_SKIP, LC_SUM, LC_CONCAT };
enum class LfOp { LF_MAX, LF_CONCAT, LF_SKIP, LF_MEAN };

inline const std::array<SaOp, 3>& all_sa_ops() {
    static const std::array<SaOp, 3> v = {SaOp::RGCN, SaOp::RGAT, SaOp::COMPGCN};
    return v;
}
inline const std::array<TaOp, 3>& all_ta_ops() {
    static const std::array<TaOp, 3> v = {TaOp::GRU, TaOp::SA, TaOp::IDENTITY};
    return v;
}
inline const std::array<LcOp, 3>& all_lc_ops() {
    static const std::array<LcOp, 3> v = {LcOp::LC_SKIP, LcOp::LC_SUM, LcOp::LC_CONCAT};
    return v;
}
inline const std::array<LfOp, 4>& all_lf_ops() {
    static const std::array<LfOp, 4> v = {LfOp::LF_MAX, LfOp::LF_CONCAT, LfOp::LF_SKIP,
                                          LfOp::LF_MEAN};
    return v;
}

inline const char* op_name(SaOp op) {
    switch (op) {
        case SaOp::RGCN: return "RGCN";
        case SaOp::RGAT: return "RGAT";
        case SaOp::COMPGCN: return "COMPGCN";
    }
    return "?";
}
inline const char* op_name(TaOp op) {
    switch (op) {
        case TaOp::GRU: return "GRU";
        case TaOp::SA: return "SA";
        case TaOp::IDENTITY: return "IDENTITY";
    }
    return "?";
}
inline const char* op_name(LcOp op) {
    switch (op) {
        case LcOp::LC_SKIP: return "LC_SKIP";
        case LcOp::LC_SUM: return "LC_SUM";
        case LcOp::LC_CONCAT: return "LC_CONCAT";
    }
    return "?";
}
inline const char* op_name(LfOp op) {
    switch (op) {
        case LfOp::LF_MAX: return "LF_MAX";
        case LfOp::LF_CONCAT: return "LF_CONCAT";
        case LfOp::LF_SKIP: return "LF_SKIP";
        case LfOp::LF_MEAN: return "LF_MEAN";
    }
    return "?";
}

template <typename Op, typename Arr>
Op op_from_name(const std::string& name, const Arr& all, const char* slot) {
    for (Op op : all)
        if (name == op_name(op)) return op;
    throw SpaError("arch", "config", std::string("unknown ") + slot + " operation '" + name + "'");
}

struct LayerChoice {
    SaOp sa = SaOp::RGCN;
    TaOp ta = TaOp::GRU;
    LcOp lc = LcOp::LC_SKIP;
    friend bool operator==(const LayerChoice& a, const LayerChoice& b) {
        return a.sa == b.sa && a.ta == b.ta && a.lc == b.lc;
    }
};

struct ArchDescriptor {
    std::vector<LayerChoice> layers;
    LfOp lf = LfOp::LF_MEAN;

    friend bool operator==(const ArchDescriptor& a, const ArchDescriptor& b) {
        return a.layers == b.layers && a.lf == b.lf;
    }

    std::string canonical() const {
        std::string s;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            if (i) s += "|";
            s += op_name(layers[i].sa);
            s += "-";
            s += op_name(layers[i].ta);
            s += "-";
            s += op_name(layers[i].lc);
        }
        s += "#";
        s += op_name(lf);
        return s;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["layers"] = nlohmann::ordered_json::array();
        for (const auto& l : layers) {
            nlohmann::ordered_json jl;
            jl["sa"] = op_name(l.sa);
            jl["ta"] = op_name(l.ta);
            jl["lc"] = op_name(l.lc);
            j["layers"].push_back(jl);
        }
        j["lf"] = op_name(lf);
        return j;
    }

    static ArchDescriptor from_json(const nlohmann::json& j) {
        if (!j.is_object() || !j.contains("layers") || !j.contains("lf") || !j["layers"].is_array() ||
            j["layers"].empty())
            throw SpaError("arch", "config", "descriptor needs a non-empty layers array and lf");
        ArchDescriptor d;
        for (const auto& jl : j["layers"]) {
            if (!jl.contains("sa") || !jl.contains("ta") || !jl.contains("lc"))
                throw SpaError("arch", "config", "layer entry needs sa/ta/lc");
            LayerChoice l;
            l.sa = op_from_name<SaOp>(jl["sa"].get<std::string>(), all_sa_ops(), "spatial");
            l.ta = op_from_name<TaOp>(jl["ta"].get<std::string>(), all_ta_ops(), "temporal");
            l.lc = op_from_name<LcOp>(jl["lc"].get<std::string>(), all_lc_ops(), "layer-connection");
            d.layers.push_back(l);
        }
        d.lf = op_from_name<LfOp>(j["lf"].get<std::string>(), all_lf_ops(), "fusion");
        return d;
    }
};

// Per-layer allowed candidate sets plus the global fusion set. The default
// is the full space; restrictions model ablations and forced (singleton)
// choices.
struct SearchSpace {
    std::vector<std::vector<SaOp>> sa;  // one set per layer
    std::vector<std::vector<TaOp>> ta;
    std::vector<std::vector<LcOp>> lc;
    std::vector<LfOp> lf;

    static SearchSpace full(std::size_t layerCount) {
        if (layerCount < 1) throw SpaError("arch", "config", "need at least one layer");
        SearchSpace s;
        s.sa.assign(layerCount, {all_sa_ops().begin(), all_sa_ops().end()});
        s.ta.assign(layerCount, {all_ta_ops().begin(), all_ta_ops().end()});
        s.lc.assign(layerCount, {all_lc_ops().begin(), all_lc_ops().end()});
        s.lf.assign(all_lf_ops().begin(), all_lf_ops().end());
        return s;
    }

    static SearchSpace singleton(const ArchDescriptor& arch) {
        SearchSpace s;
        for (const auto& l : arch.layers) {
            s.sa.push_back({l.sa});
            s.ta.push_back({l.ta});
            s.lc.push_back({l.lc});
        }
        s.lf = {arch.lf};
        return s;
    }

    std::size_t layer_count() const { return sa.size(); }

    void validate() const {
        const std::size_t L = sa.size();
        if (L < 1 || ta.size() != L || lc.size() != L)
            throw SpaError("arch", "config", "per-layer candidate lists must align, L >= 1");
        for (std::size_t i = 0; i < L; ++i)
            if (sa[i].empty() || ta[i].empty() || lc[i].empty())
                throw SpaError("arch", "config", "empty candidate set at layer " + std::to_string(i));
        if (lf.empty()) throw SpaError("arch", "config", "empty fusion candidate set");
    }

    std::uint64_t cardinality() const {
        validate();
        std::uint64_t n = 1;
        for (std::size_t i = 0; i < layer_count(); ++i)
            n *= std::uint64_t(sa[i].size()) * ta[i].size() * lc[i].size();
        return n * lf.size();
    }

    bool contains(const ArchDescriptor& d) const {
        if (d.layers.size() != layer_count()) return false;
        auto in = [](const auto& set, auto v) {
            for (auto x : set)
                if (x == v) return true;
            return false;
        };
        for (std::size_t i = 0; i < layer_count(); ++i)
            if (!in(sa[i], d.layers[i].sa) || !in(ta[i], d.layers[i].ta) || !in(lc[i], d.layers[i].lc))
                return false;
        return in(lf, d.lf);
    }

    // One uniform draw per slot in layer order then fusion; singleton slots
    // consume no randomness, so restricted spaces stay stream-compatible.
    ArchDescriptor sample(Rng& rng) const {
        validate();
        ArchDescriptor d;
        for (std::size_t i = 0; i < layer_count(); ++i) {
            LayerChoice l;
            l.sa = sa[i][rng.below(sa[i].size())];
            l.ta = ta[i][rng.below(ta[i].size())];
            l.lc = lc[i][rng.below(lc[i].size())];
            d.layers.push_back(l);
        }
        d.lf = lf[rng.below(lf.size())];
        return d;
    }

    // Visits every descriptor exactly once (odometer order, fusion wheel
    // fastest). The callback returns false to stop early.
    template <typename F>
    void for_each(F&& fn) const {
        validate();
        const std::size_t L = layer_count();
        std::vector<std::size_t> radia;
        for (std::size_t i = 0; i < L; ++i) {
            radia.push_back(sa[i].size());
            radia.push_back(ta[i].size());
            radia.push_back(lc[i].size());
        }
        radia.push_back(lf.size());
        std::vector<std::size_t> idx(radia.size(), 0);
        while (true) {
            ArchDescriptor d;
            for (std::size_t i = 0; i < L; ++i) {
                LayerChoice l;
                l.sa = sa[i][idx[3 * i]];
                l.ta = ta[i][idx[3 * i + 1]];
                l.lc = lc[i][idx[3 * i + 2]];
                d.layers.push_back(l);
            }
            d.lf = lf[idx.back()];
            if (!fn(static_cast<const ArchDescriptor&>(d))) return;
            std::size_t wheel = idx.size();
            while (wheel > 0) {
                --wheel;
                if (++idx[wheel] < radia[wheel]) break;
                idx[wheel] = 0;
                if (wheel == 0) return;
            }
        }
    }

    std::vector<ArchDescriptor> enumerate() const {
        std::vector<ArchDescriptor> out;
        out.reserve(std::size_t(std::min<std::uint64_t>(cardinality(), 1u << 20)));
        for_each([&](const ArchDescriptor& d) {
            out.push_back(d);
            return true;
        });
        return out;
    }

    nlohmann::ordered_json to_json() const {
        validate();
        nlohmann::ordered_json j;
        j["layers"] = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < layer_count(); ++i) {
            nlohmann::ordered_json jl;
            jl["sa"] = nlohmann::ordered_json::array();
            for (auto op : sa[i]) jl["sa"].push_back(op_name(op));
            jl["ta"] = nlohmann::ordered_json::array();
            for (auto op : ta[i]) jl["ta"].push_back(op_name(op));
            jl["lc"] = nlohmann::ordered_json::array();
            for (auto op : lc[i]) jl["lc"].push_back(op_name(op));
            j["layers"].push_back(jl);
        }
        j["lf"] = nlohmann::ordered_json::array();
        for (auto op : lf) j["lf"].push_back(op_name(op));
        return j;
    }

    static SearchSpace from_json(const nlohmann::json& j) {
        if (!j.is_object() || !j.contains("layers") || !j.contains("lf"))
            throw SpaError("arch", "config", "search space needs layers and lf");
        SearchSpace s;
        for (const auto& jl : j["layers"]) {
            std::vector<SaOp> vs;
            std::vector<TaOp> vt;
            std::vector<LcOp> vl;
            for (const auto& n : jl.at("sa"))
                vs.push_back(op_from_name<SaOp>(n.get<std::string>(), all_sa_ops(), "spatial"));
            for (const auto& n : jl.at("ta"))
                vt.push_back(op_from_name<TaOp>(n.get<std::string>(), all_ta_ops(), "temporal"));
            for (const auto& n : jl.at("lc"))
                vl.push_back(op_from_name<LcOp>(n.get<std::string>(), all_lc_ops(), "layer-connection"));
            s.sa.push_back(std::move(vs));
            s.ta.push_back(std::move(vt));
            s.lc.push_back(std::move(vl));
        }
        for (const auto& n : j["lf"])
            s.lf.push_back(op_from_name<LfOp>(n.get<std::string>(), all_lf_ops(), "fusion"));
        s.validate();
        return s;
    }
};

}  // namespace spa
