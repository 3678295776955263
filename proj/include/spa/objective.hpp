#pragma once

// Decoder and evaluation: bilinear complex score over feature halves, the
// two-sided sampled cross-entropy loss, and filtered ranking metrics.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "spa/data.hpp"
#include "spa/supernet.hpp"
#include "spa/tensor.hpp"

namespace spa {

namespace detail {

inline void require_even(std::size_t d) {
    if (d == 0 || d % 2 != 0)
        throw SpaError("objective", "config", "decoder features need a positive even dim");
}

struct Halves {
    Tensor re, im;
};

inline Halves halves(const Tensor& rowVec) {
    const std::size_t d = rowVec.shape()[1];
    auto parts = split(rowVec, 1, {d / 2, d / 2});
    return {parts[0], parts[1]};
}

}  // namespace detail

// Score of one (subject, relation, object) triple from d-dimensional feature
// rows whose first half is the real part and second half the imaginary part:
// Re(sum_j s_j * r_j * conj(o_j)).
inline Tensor complex_score(const Tensor& zs, const Tensor& hr, const Tensor& zo) {
    const std::size_t d = zs.numel();
    detail::require_even(d);
    if (hr.numel() != d || zo.numel() != d)
        throw SpaError("objective", "shape", "score inputs must share one feature dim");
    Tensor s = reshape(zs, {1, d});
    Tensor r = reshape(hr, {1, d});
    Tensor o = reshape(zo, {1, d});
    auto [sRe, sIm] = detail::halves(s);
    auto [rRe, rIm] = detail::halves(r);
    Tensor u = sub(mul(sRe, rRe), mul(sIm, rIm));
    Tensor v = add(mul(sIm, rRe), mul(sRe, rIm));
    return sum(mul(concat({u, v}, 1), o));
}

// Scores of every candidate object for a fixed (subject, relation): one row
// of logits per candidate, differentiable through z and relEmb.
inline Tensor object_side_scores(const Tensor& z, std::size_t subject, std::size_t relation,
                                 const std::vector<std::size_t>& candidates, const Tensor& relEmb) {
    const std::size_t d = z.shape()[1];
    detail::require_even(d);
    if (candidates.empty()) throw SpaError("objective", "usage", "need at least one candidate");
    Tensor s = gather(z, {subject});
    Tensor r = gather(relEmb, {relation});
    auto [sRe, sIm] = detail::halves(s);
    auto [rRe, rIm] = detail::halves(r);
    Tensor u = sub(mul(sRe, rRe), mul(sIm, rIm));
    Tensor v = add(mul(sIm, rRe), mul(sRe, rIm));
    Tensor w = reshape(concat({u, v}, 1), {d, 1});
    return matmul(gather(z, candidates), w);  // candidates x 1
}

// Scores of every candidate subject for a fixed (relation, object).
inline Tensor subject_side_scores(const Tensor& z, std::size_t object, std::size_t relation,
                                  const std::vector<std::size_t>& candidates, const Tensor& relEmb) {
    const std::size_t d = z.shape()[1];
    detail::require_even(d);
    if (candidates.empty()) throw SpaError("objective", "usage", "need at least one candidate");
    Tensor o = gather(z, {object});
    Tensor r = gather(relEmb, {relation});
    auto [oRe, oIm] = detail::halves(o);
    auto [rRe, rIm] = detail::halves(r);
    Tensor a = add(mul(rRe, oRe), mul(rIm, oIm));
    Tensor b = sub(mul(rRe, oIm), mul(rIm, oRe));
    Tensor w = reshape(concat({a, b}, 1), {d, 1});
    return matmul(gather(z, candidates), w);
}

// Negative log-probability of row 0 under a softmax over the logits column,
// computed with a detached max shift for stability.
inline Tensor side_nll(const Tensor& logits) {
    if (logits.shape().size() != 2 || logits.shape()[1] != 1)
        throw SpaError("objective", "shape", "logits must be a column");
    double m = -std::numeric_limits<double>::infinity();
    for (double v : logits.values()) m = std::max(m, v);
    Tensor shifted = sub(logits, Tensor::full(logits.shape(), m));
    Tensor lse = log_t(sum(exp_t(shifted)));
    Tensor picked = reshape(gather(shifted, {0}), {1});
    return sub(lse, picked);
}

struct QuadNegatives {
    std::vector<std::size_t> object, subject;
};

// Mean over the batch of (object-side + subject-side) sampled cross-entropy.
// encodings maps each batch time to that time's entity features.
inline Tensor batch_loss(const std::vector<Quadruple>& batch,
                         const std::unordered_map<TimeIndex, Tensor>& encodings,
                         const Tensor& relEmb, const std::vector<QuadNegatives>& negatives) {
    if (batch.empty()) throw SpaError("objective", "usage", "empty batch");
    if (negatives.size() != batch.size())
        throw SpaError("objective", "usage", "one negative set per batch quadruple required");

    auto describe = [](const Quadruple& q) {
        return "(" + std::to_string(q.subject) + "," + std::to_string(q.relation) + "," +
               std::to_string(q.object) + ",t=" + std::to_string(q.time) + ")";
    };
    auto check_finite = [&](const Tensor& logits, const Quadruple& q) {
        for (double v : logits.values())
            if (!std::isfinite(v))
                throw SpaError("objective", "numeric", "non-finite score for quadruple " + describe(q));
    };

    Tensor acc;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Quadruple& q = batch[i];
        auto it = encodings.find(q.time);
        if (it == encodings.end())
            throw SpaError("objective", "usage", "no encoding for time " + std::to_string(q.time));
        const Tensor& z = it->second;

        std::vector<std::size_t> objCands = {q.object};
        objCands.insert(objCands.end(), negatives[i].object.begin(), negatives[i].object.end());
        Tensor objLogits = object_side_scores(z, q.subject, q.relation, objCands, relEmb);
        check_finite(objLogits, q);

        std::vector<std::size_t> subjCands = {q.subject};
        subjCands.insert(subjCands.end(), negatives[i].subject.begin(), negatives[i].subject.end());
        Tensor subjLogits = subject_side_scores(z, q.object, q.relation, subjCands, relEmb);
        check_finite(subjLogits, q);

        Tensor quadLoss = add(side_nll(objLogits), side_nll(subjLogits));
        acc = acc.defined() ? add(acc, quadLoss) : quadLoss;
    }
    return smul(acc, 1.0 / double(batch.size()));
}

// ---------------------------------------------------------------------------
// filtered ranking

struct ScoreQuery {
    Quadruple quadruple;
    CorruptSide side = CorruptSide::Object;
    std::vector<std::size_t> candidates;
};

// Rank of the true answer after dropping candidates that form other true
// facts; exact ties contribute half their count, rounded up.
inline std::size_t filtered_rank(const ScoreQuery& query, const std::vector<double>& scores,
                                 const TruthSet& truth) {
    if (scores.size() != query.candidates.size())
        throw SpaError("objective", "shape", "one score per candidate required");
    const Quadruple& q = query.quadruple;
    const std::size_t answer = query.side == CorruptSide::Object ? q.object : q.subject;
    std::size_t answerIdx = scores.size();
    for (std::size_t k = 0; k < query.candidates.size(); ++k)
        if (query.candidates[k] == answer) {
            answerIdx = k;
            break;
        }
    if (answerIdx == scores.size())
        throw SpaError("objective", "protocol", "true answer missing from candidates");
    const double trueScore = scores[answerIdx];

    std::size_t greater = 0, ties = 0;
    for (std::size_t k = 0; k < query.candidates.size(); ++k) {
        if (k == answerIdx) continue;
        Quadruple alt = q;
        (query.side == CorruptSide::Object ? alt.object : alt.subject) = query.candidates[k];
        if (truth.count(alt)) continue;  // another true fact: filtered out
        if (scores[k] > trueScore)
            ++greater;
        else if (scores[k] == trueScore)
            ++ties;
    }
    return 1 + greater + (ties + 1) / 2;
}

struct RankRecord {
    Quadruple quadruple;
    CorruptSide side = CorruptSide::Object;
    std::size_t rank = 0;
};

struct EvalResult {
    double mrr = 0.0;
    double hitsAt1 = 0.0, hitsAt3 = 0.0, hitsAt10 = 0.0;
    std::vector<RankRecord> records;
    std::size_t queryCount = 0;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["mrr"] = mrr;
        j["hitsAt1"] = hitsAt1;
        j["hitsAt3"] = hitsAt3;
        j["hitsAt10"] = hitsAt10;
        j["queryCount"] = queryCount;
        return j;
    }
};

inline EvalResult aggregate_ranks(std::vector<RankRecord> records) {
    if (records.empty()) throw SpaError("objective", "protocol", "no ranks to aggregate");
    EvalResult r;
    r.queryCount = records.size();
    std::size_t h1 = 0, h3 = 0, h10 = 0;
    double rrSum = 0.0;
    for (const auto& rec : records) {
        rrSum += 1.0 / double(rec.rank);
        h1 += rec.rank <= 1;
        h3 += rec.rank <= 3;
        h10 += rec.rank <= 10;
    }
    r.mrr = rrSum / double(records.size());
    r.hitsAt1 = double(h1) / double(records.size());
    r.hitsAt3 = double(h3) / double(records.size());
    r.hitsAt10 = double(h10) / double(records.size());
    r.records = std::move(records);
    return r;
}

// One line per query: subject, relation, object, time, corrupted side, rank.
inline void write_ranks_tsv(const EvalResult& result, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw SpaError("objective", "io", "cannot write " + path);
    for (const auto& rec : result.records)
        out << rec.quadruple.subject << '\t' << rec.quadruple.relation << '\t'
            << rec.quadruple.object << '\t' << rec.quadruple.time << '\t'
            << (rec.side == CorruptSide::Object ? "object" : "subject") << '\t' << rec.rank << '\n';
    if (!out) throw SpaError("objective", "io", "short write on " + path);
}

// Filtered evaluation of a split against an arbitrary scorer; per quadruple
// the object side is ranked first, then the subject side. scorer(q, side)
// returns one score per entity id.
template <typename Scorer>
EvalResult evaluate_with_scorer(const TemporalKG& kg, const std::vector<Quadruple>& split,
                                Scorer&& scorer) {
    if (split.empty()) throw SpaError("objective", "protocol", "empty evaluation split");
    const TruthSet truth = truth_set(kg);
    std::vector<std::size_t> allEntities(kg.entityCount);
    std::iota(allEntities.begin(), allEntities.end(), std::size_t(0));
    std::vector<RankRecord> records;
    records.reserve(split.size() * 2);
    for (const Quadruple& q : split) {
        for (CorruptSide side : {CorruptSide::Object, CorruptSide::Subject}) {
            ScoreQuery query{q, side, allEntities};
            const std::vector<double> scores = scorer(q, side);
            records.push_back({q, side, filtered_rank(query, scores, truth)});
        }
    }
    return aggregate_ranks(std::move(records));
}

// Full filtered evaluation of one architecture: entity features computed
// once per distinct split time, then both-side ranks against all entities.
inline EvalResult evaluate(const EncoderInputs& inputs, const std::vector<Quadruple>& split,
                           const ArchDescriptor& arch, const SupernetParams& params) {
    NoGradGuard guard;
    const TemporalKG& kg = *inputs.kg;
    std::vector<std::size_t> allEntities(kg.entityCount);
    std::iota(allEntities.begin(), allEntities.end(), std::size_t(0));
    Tensor relEmb = params.relation_features();
    std::unordered_map<TimeIndex, Tensor> zByTime;
    auto features = [&](TimeIndex t) -> const Tensor& {
        auto it = zByTime.find(t);
        if (it == zByTime.end())
            it = zByTime.emplace(t, supernet_forward(inputs, t, arch, params)).first;
        return it->second;
    };
    return evaluate_with_scorer(kg, split, [&](const Quadruple& q, CorruptSide side) {
        const Tensor& z = features(q.time);
        Tensor logits = side == CorruptSide::Object
                            ? object_side_scores(z, q.subject, q.relation, allEntities, relEmb)
                            : subject_side_scores(z, q.object, q.relation, allEntities, relEmb);
        return logits.values();
    });
}

}  // namespace spa
