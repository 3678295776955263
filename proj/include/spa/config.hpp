#pragma once

// Run configuration for the command-line driver: strict JSON (unknown keys
// rejected at every level), a dataset source (files on disk or the synthetic
// generator), and fully-resolved settings for training, search, fine-tuning,
// and the rank-correlation study. resolved() emits a snapshot that parses
// back to the identical configuration.

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "spa/arch.hpp"
#include "spa/data.hpp"
#include "spa/search.hpp"
#include "spa/supernet.hpp"

namespace spa {

namespace detail {

inline void expect_object(const nlohmann::json& j, const std::string& where) {
    if (!j.is_object()) throw SpaError("cli", "config", where + " must be a JSON object");
}

inline void expect_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                        const std::string& where) {
    expect_object(j, where);
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : allowed) known = known || it.key() == k;
        if (!known)
            throw SpaError("cli", "config", where + ": unknown key '" + it.key() + "'");
    }
}

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& slot) {
    if (j.contains(key)) {
        try {
            slot = j.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw SpaError("cli", "config", std::string("bad value for '") + key + "'");
        }
    }
}

// layers/sa/ta/lc/lf shape shared by arch descriptors and search spaces
inline void check_arch_shape(const nlohmann::json& j, const std::string& where) {
    expect_keys(j, {"layers", "lf"}, where);
    if (!j.contains("layers") || !j.at("layers").is_array())
        throw SpaError("cli", "config", where + " needs a 'layers' array");
    std::size_t i = 0;
    for (const auto& layer : j.at("layers"))
        expect_keys(layer, {"sa", "ta", "lc"}, where + ".layers[" + std::to_string(i++) + "]");
}

}  // namespace detail

struct DatasetFiles {
    std::string train, valid, test;
};

struct RunConfig {
    std::optional<DatasetFiles> files;          // exactly one of files / synthetic
    std::optional<SyntheticConfig> synthetic;
    SearchConfig search;                        // includes model + space
    std::optional<ArchDescriptor> arch;         // finetune / evaluate target
    FinetuneSpace finetune;
    std::size_t rankCorrSamples = 20;
    std::size_t rankCorrStandaloneEpochs = 10;

    TemporalKG load_kg() const {
        if (files) return load_dataset(files->train, files->valid, files->test);
        return generate_synthetic(*synthetic);
    }

    nlohmann::ordered_json resolved() const {
        nlohmann::ordered_json j;
        nlohmann::ordered_json ds;
        if (files) {
            nlohmann::ordered_json f;
            f["train"] = files->train;
            f["valid"] = files->valid;
            f["test"] = files->test;
            ds["files"] = f;
        } else {
            nlohmann::ordered_json s;
            s["entityCount"] = synthetic->entityCount;
            s["relationCount"] = synthetic->relationCount;
            s["timestepCount"] = synthetic->timestepCount;
            s["patternPeriod"] = synthetic->patternPeriod;
            s["patternFraction"] = synthetic->patternFraction;
            s["noiseFraction"] = synthetic->noiseFraction;
            s["seed"] = synthetic->seed;
            ds["synthetic"] = s;
        }
        j["dataset"] = ds;
        j["model"] = search.model.to_json();
        j["space"] = search.space.to_json();
        nlohmann::ordered_json s;
        s["batchSize"] = search.batchSize;
        s["negativeRatio"] = search.negativeRatio;
        s["epochsT1"] = search.epochsT1;
        s["searchIterationsT2"] = search.searchIterationsT2;
        s["selectionMetric"] = metric_name(search.selectionMetric);
        s["seed"] = search.seed;
        s["lr"] = search.optimizer.lr;
        s["beta1"] = search.optimizer.beta1;
        s["beta2"] = search.optimizer.beta2;
        s["eps"] = search.optimizer.eps;
        s["weightDecay"] = search.optimizer.weight_decay;
        s["gradClip"] = search.gradClip;
        s["usePlateau"] = search.usePlateau;
        s["plateauFactor"] = search.plateauFactor;
        s["plateauPatience"] = search.plateauPatience;
        s["plateauMinLR"] = search.plateauMinLR;
        s["validSubsample"] = search.validSubsample;
        s["workers"] = search.workers;
        j["search"] = s;
        if (arch) j["arch"] = arch->to_json();
        nlohmann::ordered_json f;
        f["spatialHeadChoices"] = finetune.spatialHeadChoices;
        f["temporalHeadChoices"] = finetune.temporalHeadChoices;
        f["weightDecayMin"] = finetune.weightDecayMin;
        f["weightDecayMax"] = finetune.weightDecayMax;
        f["trialCount"] = finetune.trialCount;
        j["finetune"] = f;
        nlohmann::ordered_json rc;
        rc["sampleCount"] = rankCorrSamples;
        rc["standaloneEpochs"] = rankCorrStandaloneEpochs;
        j["rankCorr"] = rc;
        return j;
    }

    static RunConfig from_json(const nlohmann::json& j) {
        detail::expect_keys(j, {"dataset", "model", "space", "restrict", "search", "arch",
                                "finetune", "rankCorr"},
                            "config");
        RunConfig cfg;

        if (!j.contains("dataset"))
            throw SpaError("cli", "config", "config needs a 'dataset' section");
        const auto& ds = j.at("dataset");
        detail::expect_keys(ds, {"files", "synthetic"}, "dataset");
        if (ds.contains("files") == ds.contains("synthetic"))
            throw SpaError("cli", "config", "dataset needs exactly one of 'files'/'synthetic'");
        if (ds.contains("files")) {
            const auto& f = ds.at("files");
            detail::expect_keys(f, {"train", "valid", "test"}, "dataset.files");
            DatasetFiles df;
            for (const char* k : {"train", "valid", "test"})
                if (!f.contains(k))
                    throw SpaError("cli", "config",
                                   std::string("dataset.files needs '") + k + "'");
            df.train = f.at("train").get<std::string>();
            df.valid = f.at("valid").get<std::string>();
            df.test = f.at("test").get<std::string>();
            cfg.files = df;
        } else {
            const auto& s = ds.at("synthetic");
            detail::expect_keys(s,
                                {"entityCount", "relationCount", "timestepCount", "patternPeriod",
                                 "patternFraction", "noiseFraction", "seed"},
                                "dataset.synthetic");
            SyntheticConfig sc;
            for (const char* k : {"entityCount", "relationCount", "timestepCount", "patternPeriod"})
                if (!s.contains(k))
                    throw SpaError("cli", "config",
                                   std::string("dataset.synthetic needs '") + k + "'");
            sc.entityCount = s.at("entityCount").get<std::size_t>();
            sc.relationCount = s.at("relationCount").get<std::size_t>();
            sc.timestepCount = s.at("timestepCount").get<std::size_t>();
            sc.patternPeriod = s.at("patternPeriod").get<std::size_t>();
            detail::maybe(s, "patternFraction", sc.patternFraction);
            detail::maybe(s, "noiseFraction", sc.noiseFraction);
            detail::maybe(s, "seed", sc.seed);
            cfg.synthetic = sc;
        }

        if (j.contains("model")) {
            const auto& m = j.at("model");
            detail::expect_keys(m,
                                {"dim", "layerCount", "window", "saHeads", "taHeads", "dropout",
                                 "leakySlope", "subtractCompose", "positionEncoding"},
                                "model");
            detail::maybe(m, "dim", cfg.search.model.dim);
            detail::maybe(m, "layerCount", cfg.search.model.layerCount);
            detail::maybe(m, "window", cfg.search.model.window);
            detail::maybe(m, "saHeads", cfg.search.model.saHeads);
            detail::maybe(m, "taHeads", cfg.search.model.taHeads);
            detail::maybe(m, "dropout", cfg.search.model.dropout);
            detail::maybe(m, "leakySlope", cfg.search.model.leakySlope);
            detail::maybe(m, "subtractCompose", cfg.search.model.subtractCompose);
            detail::maybe(m, "positionEncoding", cfg.search.model.positionEncoding);
        }

        if (j.contains("space")) {
            detail::check_arch_shape(j.at("space"), "space");
            cfg.search.space = SearchSpace::from_json(j.at("space"));
        } else {
            cfg.search.space = SearchSpace::full(cfg.search.model.layerCount);
        }

        if (j.contains("restrict")) {
            const auto& r = j.at("restrict");
            detail::expect_keys(r, {"sa", "ta", "lc", "lf"}, "restrict");
            SlotFixes fixes;
            if (r.contains("sa"))
                fixes.sa = op_from_name<SaOp>(r.at("sa").get<std::string>(), all_sa_ops(), "sa");
            if (r.contains("ta"))
                fixes.ta = op_from_name<TaOp>(r.at("ta").get<std::string>(), all_ta_ops(), "ta");
            if (r.contains("lc"))
                fixes.lc = op_from_name<LcOp>(r.at("lc").get<std::string>(), all_lc_ops(), "lc");
            if (r.contains("lf"))
                fixes.lf = op_from_name<LfOp>(r.at("lf").get<std::string>(), all_lf_ops(), "lf");
            cfg.search.space = restrict_space(cfg.search.space, fixes);
        }

        if (j.contains("search")) {
            const auto& s = j.at("search");
            detail::expect_keys(s,
                                {"batchSize", "negativeRatio", "epochsT1", "searchIterationsT2",
                                 "selectionMetric", "seed", "lr", "beta1", "beta2", "eps",
                                 "weightDecay", "gradClip", "usePlateau", "plateauFactor",
                                 "plateauPatience", "plateauMinLR", "validSubsample", "workers"},
                                "search");
            detail::maybe(s, "batchSize", cfg.search.batchSize);
            detail::maybe(s, "negativeRatio", cfg.search.negativeRatio);
            detail::maybe(s, "epochsT1", cfg.search.epochsT1);
            detail::maybe(s, "searchIterationsT2", cfg.search.searchIterationsT2);
            if (s.contains("selectionMetric"))
                cfg.search.selectionMetric =
                    metric_from_name(s.at("selectionMetric").get<std::string>());
            detail::maybe(s, "seed", cfg.search.seed);
            detail::maybe(s, "lr", cfg.search.optimizer.lr);
            detail::maybe(s, "beta1", cfg.search.optimizer.beta1);
            detail::maybe(s, "beta2", cfg.search.optimizer.beta2);
            detail::maybe(s, "eps", cfg.search.optimizer.eps);
            detail::maybe(s, "weightDecay", cfg.search.optimizer.weight_decay);
            detail::maybe(s, "gradClip", cfg.search.gradClip);
            detail::maybe(s, "usePlateau", cfg.search.usePlateau);
            detail::maybe(s, "plateauFactor", cfg.search.plateauFactor);
            detail::maybe(s, "plateauPatience", cfg.search.plateauPatience);
            detail::maybe(s, "plateauMinLR", cfg.search.plateauMinLR);
            detail::maybe(s, "validSubsample", cfg.search.validSubsample);
            detail::maybe(s, "workers", cfg.search.workers);
        }

        if (j.contains("arch")) {
            detail::check_arch_shape(j.at("arch"), "arch");
            cfg.arch = ArchDescriptor::from_json(j.at("arch"));
        }

        if (j.contains("finetune")) {
            const auto& f = j.at("finetune");
            detail::expect_keys(f,
                                {"spatialHeadChoices", "temporalHeadChoices", "weightDecayMin",
                                 "weightDecayMax", "trialCount"},
                                "finetune");
            detail::maybe(f, "spatialHeadChoices", cfg.finetune.spatialHeadChoices);
            detail::maybe(f, "temporalHeadChoices", cfg.finetune.temporalHeadChoices);
            detail::maybe(f, "weightDecayMin", cfg.finetune.weightDecayMin);
            detail::maybe(f, "weightDecayMax", cfg.finetune.weightDecayMax);
            detail::maybe(f, "trialCount", cfg.finetune.trialCount);
        }

        if (j.contains("rankCorr")) {
            const auto& rc = j.at("rankCorr");
            detail::expect_keys(rc, {"sampleCount", "standaloneEpochs"}, "rankCorr");
            detail::maybe(rc, "sampleCount", cfg.rankCorrSamples);
            detail::maybe(rc, "standaloneEpochs", cfg.rankCorrStandaloneEpochs);
        }

        cfg.search.validate();
        return cfg;
    }

    static RunConfig from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw SpaError("cli", "config", "cannot open config file " + path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw SpaError("cli", "config", path + " is not valid JSON: " + e.what());
        }
        return from_json(j);
    }
};

}  // namespace spa
