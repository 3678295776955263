#pragma once

// End-to-end pipeline: single-path supernet training, random architecture
// search with inherited weights, fine-tuning of a winner by seeded random
// hyperparameter search, space restriction for ablations, and the
// inherited-vs-standalone rank-correlation study.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"
#include "spa/arch.hpp"
#include "spa/data.hpp"
#include "spa/objective.hpp"
#include "spa/optim.hpp"
#include "spa/supernet.hpp"

namespace spa {

enum class SelectionMetric { ValidMRR, ValidLoss, TrainLoss };

inline const char* metric_name(SelectionMetric m) {
    switch (m) {
        case SelectionMetric::ValidMRR: return "validMRR";
        case SelectionMetric::ValidLoss: return "validLoss";
        case SelectionMetric::TrainLoss: return "trainLoss";
    }
    return "?";
}

inline SelectionMetric metric_from_name(const std::string& name) {
    for (SelectionMetric m : {SelectionMetric::ValidMRR, SelectionMetric::ValidLoss,
                              SelectionMetric::TrainLoss})
        if (name == metric_name(m)) return m;
    throw SpaError("search", "config", "unknown selection metric '" + name + "'");
}

// Higher is better for MRR, lower for the loss metrics.
inline bool metric_improves(SelectionMetric kind, double candidate, double incumbent) {
    return kind == SelectionMetric::ValidMRR ? candidate > incumbent : candidate < incumbent;
}

struct SearchConfig {
    SearchSpace space;
    ModelConfig model;
    std::size_t batchSize = 8;
    std::size_t negativeRatio = 500;
    std::size_t epochsT1 = 800;
    std::size_t searchIterationsT2 = 1000;
    SelectionMetric selectionMetric = SelectionMetric::ValidMRR;
    std::uint64_t seed = 0;
    AdamConfig optimizer;
    double gradClip = 1.0;
    bool usePlateau = false;  // epoch-level scheduling on a sampled path's valid MRR
    double plateauFactor = 0.5;
    int plateauPatience = 10;
    double plateauMinLR = 1e-5;
    std::size_t validSubsample = 0;  // 0 = score search candidates on the full valid split
    std::size_t workers = 1;         // threads for candidate evaluation during search

    void validate() const {
        model.validate();
        space.validate();
        if (space.layer_count() != model.layerCount)
            throw SpaError("search", "config", "space depth differs from model layerCount");
        if (batchSize < 1 || negativeRatio < 1 || epochsT1 < 1 || searchIterationsT2 < 1)
            throw SpaError("search", "config", "counts must be positive");
        if (gradClip <= 0.0) throw SpaError("search", "config", "gradClip must be positive");
        if (workers < 1) throw SpaError("search", "config", "workers must be >= 1");
    }
};

struct EpochLog {
    std::size_t epoch = 0;
    double meanLoss = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    SupernetParams params;
    std::vector<EpochLog> log;
};

struct SearchRecord {
    ArchDescriptor descriptor;
    double metricValue = 0.0;
    SelectionMetric metricKind = SelectionMetric::ValidMRR;
    double wallClockSeconds = 0.0;
    std::size_t iterationIndex = 0;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["iteration"] = iterationIndex;
        j["descriptor"] = descriptor.to_json();
        j["metric"] = metric_name(metricKind);
        j["value"] = metricValue;
        j["wallClockSeconds"] = wallClockSeconds;
        return j;
    }
};

namespace detail {

template <typename T>
void shuffle_vec(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

inline std::map<TimeIndex, std::vector<Quadruple>> group_by_time(const std::vector<Quadruple>& quads) {
    std::map<TimeIndex, std::vector<Quadruple>> byTime;
    for (const Quadruple& q : quads) byTime[q.time].push_back(q);
    return byTime;
}

// Negatives for a set of quadruples, drawn in quad order, object side first.
inline std::vector<QuadNegatives> draw_negatives(const std::vector<Quadruple>& quads,
                                                 std::size_t k, const TruthSet& truth,
                                                 std::size_t entityCount, Rng& rng) {
    std::vector<QuadNegatives> out;
    out.reserve(quads.size());
    for (const Quadruple& q : quads) {
        QuadNegatives n;
        n.object = sample_negatives(q, CorruptSide::Object, k, truth, entityCount, rng);
        n.subject = sample_negatives(q, CorruptSide::Subject, k, truth, entityCount, rng);
        out.push_back(std::move(n));
    }
    return out;
}

// The current snapshot contains the very edges a training batch is asked to
// predict; left visible they make copying the answer trivial and nothing
// generalizable is learned. Hide the batch's forward and inverse edges from
// its own snapshot — recurrences at earlier window slots stay visible.
inline Snapshot hide_batch_edges(const Snapshot& augmented, const std::vector<Quadruple>& batch,
                                 std::size_t entityCount, std::size_t relationCount) {
    const std::uint64_t raug = 2 * relationCount + 1;
    auto key = [&](std::size_t s, std::size_t r, std::size_t o) {
        return (std::uint64_t(s) * raug + r) * entityCount + o;
    };
    std::unordered_set<std::uint64_t> hidden;
    for (const Quadruple& q : batch) {
        if (q.time != augmented.time) continue;
        hidden.insert(key(q.subject, q.relation, q.object));
        hidden.insert(key(q.object, q.relation + relationCount, q.subject));
    }
    Snapshot out;
    out.time = augmented.time;
    out.augmented = augmented.augmented;
    out.edges.reserve(augmented.edges.size());
    for (const Edge& e : augmented.edges)
        if (!hidden.count(key(e.subject, e.relation, e.object))) out.edges.push_back(e);
    return out;
}

// Seeded, order-stable subsample used wherever valid MRR is probed
// repeatedly (search screening, plateau probes). want = 0 means "all".
inline std::vector<Quadruple> seeded_subsample(const std::vector<Quadruple>& full,
                                               std::size_t want, std::uint64_t seed) {
    if (want == 0 || want >= full.size()) return full;
    Rng pick(seed);
    std::vector<std::size_t> idx(full.size());
    std::iota(idx.begin(), idx.end(), std::size_t(0));
    for (std::size_t i = 0; i < want; ++i)
        std::swap(idx[i], idx[i + pick.below(idx.size() - i)]);
    idx.resize(want);
    std::vector<Quadruple> subset;
    subset.reserve(idx.size());
    for (std::size_t k : idx) subset.push_back(full[k]);
    std::sort(subset.begin(), subset.end());
    return subset;
}

// Mean two-sided cross-entropy of a quad set under frozen weights.
inline double frozen_loss(const EncoderInputs& inputs, const std::vector<Quadruple>& quads,
                          const ArchDescriptor& arch, const SupernetParams& params,
                          const std::vector<QuadNegatives>& negatives) {
    NoGradGuard guard;
    std::unordered_map<TimeIndex, Tensor> encodings;
    for (const Quadruple& q : quads)
        if (!encodings.count(q.time))
            encodings.emplace(q.time, supernet_forward(inputs, q.time, arch, params));
    return batch_loss(quads, encodings, params.relation_features(), negatives).value();
}

}  // namespace detail

// Filtered ranking under the training view: each scored quadruple's own
// forward and inverse edges are hidden from its snapshot while its features
// are computed, matching what the masked loss optimized. Train-split ranks
// are meaningless without this (the answer would sit in the input); on
// valid and test splits, whose facts are never message edges, the hiding is
// a no-op and the result equals evaluate().
inline EvalResult evaluate_heldout(const EncoderInputs& inputs,
                                   const std::vector<Quadruple>& split,
                                   const ArchDescriptor& arch, const SupernetParams& params) {
    NoGradGuard guard;
    const TemporalKG& kg = *inputs.kg;
    EncoderInputs view = inputs;  // private copy: snapshots get swapped per quad
    std::vector<std::size_t> allEntities(kg.entityCount);
    std::iota(allEntities.begin(), allEntities.end(), std::size_t(0));
    Tensor relEmb = params.relation_features();
    Tensor z;  // features for the quad being scored; object side computes, subject side reuses
    return evaluate_with_scorer(kg, split, [&](const Quadruple& q, CorruptSide side) {
        if (side == CorruptSide::Object) {
            Snapshot masked = detail::hide_batch_edges(view.augmented[std::size_t(q.time)], {q},
                                                       kg.entityCount, kg.relationCount);
            std::swap(view.augmented[std::size_t(q.time)], masked);
            try {
                z = supernet_forward(view, q.time, arch, params);
            } catch (...) {
                std::swap(view.augmented[std::size_t(q.time)], masked);
                throw;
            }
            std::swap(view.augmented[std::size_t(q.time)], masked);
        }
        Tensor logits = side == CorruptSide::Object
                            ? object_side_scores(z, q.subject, q.relation, allEntities, relEmb)
                            : subject_side_scores(z, q.object, q.relation, allEntities, relEmb);
        return logits.values();
    });
}

// ---------------------------------------------------------------------------
// supernet training (single-path, uniformly sampled)

template <typename EpochFn>
TrainResult train_supernet(const TemporalKG& kg, const SearchConfig& cfg, EpochFn&& onEpoch) {
    cfg.validate();
    if (kg.train.empty()) throw SpaError("search", "config", "empty train split");
    if (cfg.usePlateau && kg.valid.empty())
        throw SpaError("search", "config", "plateau scheduling needs a valid split");

    EncoderInputs inputs = EncoderInputs::build(kg);
    SupernetParams params = SupernetParams::init(kg.entityCount, kg.relationCount, cfg.model,
                                                 cfg.space, derive_seed(cfg.seed, "init"));
    const TruthSet truth = truth_set(kg);
    const auto byTime = detail::group_by_time(kg.train);
    std::vector<TimeIndex> baseTimes;
    for (const auto& [t, quads] : byTime) baseTimes.push_back(t);

    Rng pathRng(derive_seed(cfg.seed, "train-path"));
    Rng dataRng(derive_seed(cfg.seed, "train-data"));
    Rng dropRng(derive_seed(cfg.seed, "train-dropout"));
    Rng negRng(derive_seed(cfg.seed, "train-negatives"));
    Rng plateauRng(derive_seed(cfg.seed, "train-plateau-path"));

    Adam adam(cfg.optimizer);
    PlateauScheduler scheduler(cfg.plateauFactor, cfg.plateauPatience, cfg.plateauMinLR,
                               PlateauScheduler::Mode::Maximize);
    std::vector<Quadruple> plateauSet;
    if (cfg.usePlateau)
        plateauSet = detail::seeded_subsample(kg.valid, cfg.validSubsample,
                                              derive_seed(cfg.seed, "train-plateau-valsubset"));

    TrainResult result;
    for (std::size_t epoch = 0; epoch < cfg.epochsT1; ++epoch) {
        std::vector<TimeIndex> times = baseTimes;
        detail::shuffle_vec(times, dataRng);
        double lossSum = 0.0;
        std::size_t batchCount = 0;
        for (TimeIndex t : times) {
            std::vector<Quadruple> quads = byTime.at(t);
            detail::shuffle_vec(quads, dataRng);
            for (std::size_t start = 0; start < quads.size(); start += cfg.batchSize) {
                const std::size_t end = std::min(quads.size(), start + cfg.batchSize);
                std::vector<Quadruple> batch(quads.begin() + std::ptrdiff_t(start),
                                             quads.begin() + std::ptrdiff_t(end));
                ArchDescriptor arch = cfg.space.sample(pathRng);
                try {
                    ForwardOptions opts{true, &dropRng};
                    Snapshot masked = detail::hide_batch_edges(
                        inputs.augmented[std::size_t(t)], batch, kg.entityCount, kg.relationCount);
                    std::swap(inputs.augmented[std::size_t(t)], masked);
                    Tensor z;
                    try {
                        z = supernet_forward(inputs, t, arch, params, opts);
                    } catch (...) {
                        std::swap(inputs.augmented[std::size_t(t)], masked);
                        throw;
                    }
                    std::swap(inputs.augmented[std::size_t(t)], masked);
                    auto negatives = detail::draw_negatives(batch, cfg.negativeRatio, truth,
                                                            kg.entityCount, negRng);
                    Tensor loss = batch_loss(batch, {{t, z}}, params.relation_features(), negatives);
                    if (!std::isfinite(loss.value()))
                        throw SpaError("objective", "numeric", "non-finite batch loss");
                    backward(loss);
                    auto pathParams = params.path_parameters(arch);
                    clip_gradients(pathParams, cfg.gradClip);
                    adam.step(pathParams);
                    for (auto& p : pathParams) p.zero_grad();
                    lossSum += loss.value();
                } catch (const SpaError& e) {
                    if (e.kind() != std::string("numeric")) throw;
                    throw SpaError("search", "numeric",
                                   "diverged at epoch " + std::to_string(epoch) + " batch " +
                                       std::to_string(batchCount) + ": " + e.what());
                }
                ++batchCount;
            }
        }
        if (cfg.usePlateau) {
            ArchDescriptor probe = cfg.space.sample(plateauRng);
            const double mrr = evaluate(inputs, plateauSet, probe, params).mrr;
            adam.set_lr(scheduler.observe(mrr, adam.lr()));
        }
        result.log.push_back({epoch, batchCount ? lossSum / double(batchCount) : 0.0, adam.lr()});
        onEpoch(result.log.back());
    }
    result.params = std::move(params);
    return result;
}

inline TrainResult train_supernet(const TemporalKG& kg, const SearchConfig& cfg) {
    return train_supernet(kg, cfg, [](const EpochLog&) {});
}

// Training one fixed architecture from scratch is supernet training over the
// singleton space holding it.
inline TrainResult train_standalone(const TemporalKG& kg, const ArchDescriptor& arch,
                                    const SearchConfig& cfg) {
    SearchConfig solo = cfg;
    solo.space = SearchSpace::singleton(arch);
    return train_supernet(kg, solo);
}

// ---------------------------------------------------------------------------
// architecture search with inherited weights

inline std::vector<SearchRecord> search_architectures(const TemporalKG& kg,
                                                      const SupernetParams& supernet,
                                                      const SearchConfig& cfg) {
    cfg.validate();
    const bool usesValid = cfg.selectionMetric != SelectionMetric::TrainLoss;
    if (usesValid && kg.valid.empty())
        throw SpaError("search", "config",
                       std::string(metric_name(cfg.selectionMetric)) + " needs a valid split");
    if (!usesValid && kg.train.empty())
        throw SpaError("search", "config", "trainLoss needs a train split");

    EncoderInputs inputs = EncoderInputs::build(kg);
    const TruthSet truth = truth_set(kg);

    // fixed evaluation set: optionally a seeded subsample of valid
    std::vector<Quadruple> evalSet = usesValid ? kg.valid : kg.train;
    const bool subsampled = usesValid && cfg.validSubsample > 0 &&
                            cfg.validSubsample < evalSet.size();
    if (subsampled)
        evalSet = detail::seeded_subsample(evalSet, cfg.validSubsample,
                                           derive_seed(cfg.seed, "search-valsubset"));

    // loss metrics share one fixed draw of negatives across all candidates
    std::vector<QuadNegatives> lossNegatives;
    if (cfg.selectionMetric != SelectionMetric::ValidMRR) {
        Rng negRng(derive_seed(cfg.seed, "search-negatives"));
        lossNegatives = detail::draw_negatives(evalSet, cfg.negativeRatio, truth, kg.entityCount,
                                               negRng);
    }

    auto score = [&](const ArchDescriptor& arch, const std::vector<Quadruple>& quads,
                     const std::vector<QuadNegatives>& negatives) {
        if (cfg.selectionMetric == SelectionMetric::ValidMRR)
            return evaluate(inputs, quads, arch, supernet).mrr;
        return detail::frozen_loss(inputs, quads, arch, supernet, negatives);
    };

    // sampling and deduplication are sequential so the candidate list (and
    // hence every result) is identical for any worker count
    Rng pathRng(derive_seed(cfg.seed, "search-path"));
    std::set<std::string> seen;
    std::vector<std::pair<ArchDescriptor, std::size_t>> pending;
    for (std::size_t iter = 0; iter < cfg.searchIterationsT2; ++iter) {
        ArchDescriptor arch = cfg.space.sample(pathRng);
        if (!seen.insert(arch.canonical()).second) continue;  // deterministic: keep first
        pending.emplace_back(std::move(arch), iter);
    }

    std::vector<SearchRecord> records(pending.size());
    auto evalOne = [&](std::size_t i) {
        const auto t0 = std::chrono::steady_clock::now();
        const double value = score(pending[i].first, evalSet, lossNegatives);
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                                .count();
        records[i] = {pending[i].first, value, cfg.selectionMetric, wall, pending[i].second};
    };
    const std::size_t workerCount =
        std::max<std::size_t>(1, std::min(cfg.workers, pending.size()));
    if (workerCount == 1) {
        for (std::size_t i = 0; i < pending.size(); ++i) evalOne(i);
    } else {
        // independent read-only evaluations against the frozen supernet
        std::atomic<std::size_t> cursor{0};
        std::vector<std::exception_ptr> failures(workerCount);
        std::vector<std::thread> pool;
        pool.reserve(workerCount);
        for (std::size_t w = 0; w < workerCount; ++w)
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = cursor.fetch_add(1); i < pending.size();
                         i = cursor.fetch_add(1))
                        evalOne(i);
                } catch (...) {
                    failures[w] = std::current_exception();
                }
            });
        for (auto& th : pool) th.join();
        for (auto& f : failures)
            if (f) std::rethrow_exception(f);
    }

    auto better = [&](const SearchRecord& a, const SearchRecord& b) {
        if (a.metricValue != b.metricValue)
            return metric_improves(cfg.selectionMetric, a.metricValue, b.metricValue);
        return a.descriptor.canonical() < b.descriptor.canonical();
    };
    std::sort(records.begin(), records.end(), better);

    // subsampled scores are only a screen: the finalists get the full split
    if (subsampled) {
        std::vector<QuadNegatives> fullNegatives;
        if (cfg.selectionMetric == SelectionMetric::ValidLoss) {
            Rng negRng(derive_seed(cfg.seed, "search-negatives-full"));
            fullNegatives = detail::draw_negatives(kg.valid, cfg.negativeRatio, truth,
                                                   kg.entityCount, negRng);
        }
        const std::size_t finalists = std::min<std::size_t>(5, records.size());
        for (std::size_t k = 0; k < finalists; ++k)
            records[k].metricValue = score(records[k].descriptor, kg.valid, fullNegatives);
        std::sort(records.begin(), records.begin() + std::ptrdiff_t(finalists), better);
    }
    return records;
}

// ---------------------------------------------------------------------------
// fine-tuning by seeded random hyperparameter search

struct FinetuneSpace {
    std::vector<std::size_t> spatialHeadChoices = {2, 4, 8};
    std::vector<std::size_t> temporalHeadChoices = {2, 4, 8};
    double weightDecayMin = 1e-5;
    double weightDecayMax = 1e-3;
    std::size_t trialCount = 30;

    void validate(std::size_t dim) const {
        if (trialCount < 1) throw SpaError("search", "config", "trialCount must be >= 1");
        if (weightDecayMin <= 0.0 || weightDecayMax < weightDecayMin)
            throw SpaError("search", "config", "weight decay range must be positive and ordered");
        if (spatialHeadChoices.empty() || temporalHeadChoices.empty())
            throw SpaError("search", "config", "head choice lists must be non-empty");
        for (std::size_t h : spatialHeadChoices)
            if (h == 0 || dim % h) throw SpaError("search", "config", "dim must allow every head choice");
        for (std::size_t h : temporalHeadChoices)
            if (h == 0 || dim % h) throw SpaError("search", "config", "dim must allow every head choice");
    }
};

struct FinetuneTrial {
    std::size_t index = 0;
    std::size_t saHeads = 0, taHeads = 0;
    double weightDecay = 0.0;
    double validMRR = 0.0;
    bool diverged = false;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["trial"] = index;
        j["saHeads"] = saHeads;
        j["taHeads"] = taHeads;
        j["weightDecay"] = weightDecay;
        j["validMRR"] = validMRR;
        j["diverged"] = diverged;
        return j;
    }
};

struct FinetuneResult {
    SupernetParams params;  // best trial's trained weights
    EvalResult test;        // test metrics of the valid-selected winner
    FinetuneTrial best;
    std::vector<FinetuneTrial> trials;
};

inline FinetuneResult finetune(const TemporalKG& kg, const ArchDescriptor& arch,
                               const FinetuneSpace& space, const SearchConfig& cfg) {
    cfg.validate();
    space.validate(cfg.model.dim);
    if (kg.valid.empty() || kg.test.empty())
        throw SpaError("search", "config", "fine-tuning needs valid and test splits");

    Rng rng(derive_seed(cfg.seed, "finetune"));
    EncoderInputs inputs = EncoderInputs::build(kg);

    FinetuneResult result;
    std::optional<std::size_t> bestIdx;
    std::optional<SupernetParams> bestParams;
    for (std::size_t i = 0; i < space.trialCount; ++i) {
        FinetuneTrial trial;
        trial.index = i;
        trial.saHeads = space.spatialHeadChoices[rng.below(space.spatialHeadChoices.size())];
        trial.taHeads = space.temporalHeadChoices[rng.below(space.temporalHeadChoices.size())];
        const double logMin = std::log(space.weightDecayMin);
        const double logMax = std::log(space.weightDecayMax);
        trial.weightDecay = std::exp(logMin + rng.unit() * (logMax - logMin));

        SearchConfig trialCfg = cfg;
        trialCfg.model.saHeads = trial.saHeads;
        trialCfg.model.taHeads = trial.taHeads;
        trialCfg.optimizer.weight_decay = trial.weightDecay;
        trialCfg.usePlateau = true;
        trialCfg.seed = derive_seed(cfg.seed, "finetune-trial", i);
        trialCfg.space = SearchSpace::singleton(arch);

        try {
            TrainResult trained = train_supernet(kg, trialCfg);
            trial.validMRR = evaluate(inputs, kg.valid, arch, trained.params).mrr;
            if (!bestIdx || trial.validMRR > result.trials[*bestIdx].validMRR) {
                bestIdx = i;
                bestParams = std::move(trained.params);
            }
        } catch (const SpaError& e) {
            if (e.kind() != std::string("numeric")) throw;
            trial.diverged = true;
        }
        result.trials.push_back(trial);
    }
    if (!bestIdx) {
        std::string detail;
        for (const auto& t : result.trials) detail += " trial" + std::to_string(t.index);
        throw SpaError("search", "numeric", "all fine-tune trials diverged:" + detail);
    }
    result.best = result.trials[*bestIdx];
    result.params = std::move(*bestParams);
    result.test = evaluate(inputs, kg.test, arch, result.params);
    return result;
}

// ---------------------------------------------------------------------------
// space restriction (ablations)

struct SlotFixes {
    std::optional<SaOp> sa;
    std::optional<TaOp> ta;
    std::optional<LcOp> lc;
    std::optional<LfOp> lf;
};

// Reduces the named slots to singletons across every layer.
inline SearchSpace restrict_space(const SearchSpace& base, const SlotFixes& fixes) {
    base.validate();
    SearchSpace out = base;
    auto keep = [](auto& sets, auto op, const char* slot) {
        for (auto& set : sets) {
            bool present = false;
            for (auto x : set) present = present || x == op;
            if (!present)
                throw SpaError("search", "config",
                               std::string("fixed ") + slot + " op " + op_name(op) +
                                   " is not available in the base space");
            set = {op};
        }
    };
    if (fixes.sa) keep(out.sa, *fixes.sa, "spatial");
    if (fixes.ta) keep(out.ta, *fixes.ta, "temporal");
    if (fixes.lc) keep(out.lc, *fixes.lc, "layer-connection");
    if (fixes.lf) {
        bool present = false;
        for (auto x : out.lf) present = present || x == *fixes.lf;
        if (!present)
            throw SpaError("search", "config", "fixed fusion op is not available in the base space");
        out.lf = {*fixes.lf};
    }
    return out;
}

// ---------------------------------------------------------------------------
// rank correlation between inherited and standalone scores

namespace detail {

// ascending average ranks; ties share the mean of their positions
inline std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t(0));
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = (double(i + 1) + double(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

}  // namespace detail

// Spearman correlation via average ranks; degenerate (constant) inputs give
// 0 by convention, since no monotone association is measurable.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw SpaError("search", "usage", "spearman needs two equal-length vectors of size >= 2");
    const std::vector<double> ra = detail::average_ranks(a);
    const std::vector<double> rb = detail::average_ranks(b);
    const double n = double(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (va == 0.0 || vb == 0.0) return 0.0;
    return cov / std::sqrt(va * vb);
}

struct RankPair {
    ArchDescriptor descriptor;
    double inherited = 0.0;
    double standalone = 0.0;
};

struct RankCorrelationResult {
    double spearman = 0.0;
    std::vector<RankPair> pairs;
};

inline RankCorrelationResult rank_correlation_study(const TemporalKG& kg,
                                                    const SupernetParams& supernet, std::size_t n,
                                                    std::size_t standaloneEpochs,
                                                    const SearchConfig& cfg) {
    cfg.validate();
    if (n < 3) throw SpaError("search", "usage", "need at least 3 sampled architectures");
    if (cfg.space.cardinality() < n)
        throw SpaError("search", "size", "space holds fewer than n distinct descriptors");
    if (kg.valid.empty()) throw SpaError("search", "config", "rank correlation needs a valid split");

    Rng rng(derive_seed(cfg.seed, "rankcorr-path"));
    std::set<std::string> seen;
    std::vector<ArchDescriptor> archs;
    while (archs.size() < n) {
        ArchDescriptor arch = cfg.space.sample(rng);
        if (seen.insert(arch.canonical()).second) archs.push_back(arch);
    }

    EncoderInputs inputs = EncoderInputs::build(kg);
    RankCorrelationResult result;
    std::vector<double> inherited, standalone;
    for (std::size_t i = 0; i < archs.size(); ++i) {
        const double inh = evaluate(inputs, kg.valid, archs[i], supernet).mrr;
        SearchConfig solo = cfg;
        solo.epochsT1 = standaloneEpochs;
        solo.seed = derive_seed(cfg.seed, "rankcorr-trial", i);
        TrainResult trained = train_standalone(kg, archs[i], solo);
        const double alone = evaluate(inputs, kg.valid, archs[i], trained.params).mrr;
        inherited.push_back(inh);
        standalone.push_back(alone);
        result.pairs.push_back({archs[i], inh, alone});
    }
    result.spearman = spearman(inherited, standalone);
    return result;
}

}  // namespace spa
