#pragma once

// Temporal knowledge-graph ingestion: TSV quadruple parsing, snapshot
// discretization, inverse/self-loop augmentation, filtered negative
// sampling, activity statistics, and a seeded synthetic generator whose
// facts recur periodically so held-out queries are predictable from history.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "spa/common.hpp"

namespace spa {

using TimeIndex = std::size_t;

struct Quadruple {
    std::size_t subject = 0;
    std::size_t relation = 0;
    std::size_t object = 0;
    TimeIndex time = 0;

    friend bool operator==(const Quadruple& a, const Quadruple& b) {
        return a.subject == b.subject && a.relation == b.relation && a.object == b.object &&
               a.time == b.time;
    }
    friend bool operator<(const Quadruple& a, const Quadruple& b) {
        if (a.time != b.time) return a.time < b.time;
        if (a.subject != b.subject) return a.subject < b.subject;
        if (a.relation != b.relation) return a.relation < b.relation;
        return a.object < b.object;
    }
};

struct QuadrupleHash {
    std::size_t operator()(const Quadruple& q) const {
        std::uint64_t h = splitmix64(q.subject + 0x9e3779b97f4a7c15ULL);
        h = splitmix64(h ^ q.relation);
        h = splitmix64(h ^ q.object);
        h = splitmix64(h ^ q.time);
        return std::size_t(h);
    }
};

using TruthSet = std::unordered_set<Quadruple, QuadrupleHash>;

struct Edge {
    std::size_t subject = 0;
    std::size_t relation = 0;
    std::size_t object = 0;
};

struct Snapshot {
    TimeIndex time = 0;
    std::vector<Edge> edges;
    bool augmented = false;
};

struct TemporalKG {
    std::size_t entityCount = 0;
    std::size_t relationCount = 0;  // original, before augmentation
    std::size_t timestepCount = 0;
    std::vector<Snapshot> snapshots;  // train facts only, unaugmented
    std::vector<Quadruple> train, valid, test;
    std::vector<std::string> entityNames, relationNames;
    std::int64_t epochDay = 0;  // civil day number of TimeIndex 0
};

// ---------------------------------------------------------------------------
// calendar arithmetic (proleptic Gregorian, civil-day algorithms)
// ---------------------------------------------------------------------------

inline std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = unsigned(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + std::int64_t(doe) - 719468;
}

inline void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = unsigned(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    y = std::int64_t(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp < 10 ? mp + 3 : mp - 9;
    y += m <= 2;
}

inline std::int64_t parse_iso_date(const std::string& s, const std::string& where) {
    auto fail = [&] {
        throw SpaError("data", "parse", where + ": bad date '" + s + "' (want yyyy-mm-dd)");
    };
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') fail();
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
        if (s[i] < '0' || s[i] > '9') fail();
    const int y = std::stoi(s.substr(0, 4));
    const unsigned m = unsigned(std::stoi(s.substr(5, 2)));
    const unsigned d = unsigned(std::stoi(s.substr(8, 2)));
    if (m < 1 || m > 12 || d < 1 || d > 31) fail();
    return days_from_civil(y, m, d);
}

inline std::string format_iso_date(std::int64_t day) {
    std::int64_t y;
    unsigned m, d;
    civil_from_days(day, y, m, d);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04lld-%02u-%02u", static_cast<long long>(y), m, d);
    return buf;
}

// ---------------------------------------------------------------------------
// parsing
// ---------------------------------------------------------------------------

namespace detail {

struct RawFact {
    std::size_t subject, relation, object;
    std::int64_t day;
};

struct Interner {
    std::unordered_map<std::string, std::size_t> ids;
    std::vector<std::string> names;
    std::size_t intern(const std::string& s) {
        auto [it, inserted] = ids.emplace(s, names.size());
        if (inserted) names.push_back(s);
        return it->second;
    }
};

inline std::vector<RawFact> parse_tsv_file(const std::string& path, Interner& entities,
                                           Interner& relations) {
    std::ifstream in(path);
    if (!in) throw SpaError("data", "io", "cannot open " + path);
    std::vector<RawFact> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t tab = line.find('\t', start);
            if (tab == std::string::npos) {
                fields.push_back(line.substr(start));
                break;
            }
            fields.push_back(line.substr(start, tab - start));
            start = tab + 1;
        }
        if (fields.size() != 4)
            throw SpaError("data", "parse",
                           where + ": expected 4 tab-separated fields, got " +
                               std::to_string(fields.size()));
        for (int i = 0; i < 3; ++i)
            if (fields[i].empty()) throw SpaError("data", "parse", where + ": empty field");
        RawFact f;
        f.subject = entities.intern(fields[0]);
        f.relation = relations.intern(fields[1]);
        f.object = entities.intern(fields[2]);
        f.day = parse_iso_date(fields[3], where);
        out.push_back(f);
    }
    if (out.empty()) throw SpaError("data", "empty", path + ": no facts");
    return out;
}

}  // namespace detail

inline std::vector<Snapshot> build_snapshots(const std::vector<Quadruple>& train,
                                             std::size_t entityCount, std::size_t relationCount,
                                             std::size_t timestepCount) {
    std::vector<Snapshot> snaps(timestepCount);
    for (std::size_t t = 0; t < timestepCount; ++t) snaps[t].time = t;
    for (const auto& q : train) {
        if (q.subject >= entityCount || q.object >= entityCount)
            throw SpaError("data", "bounds", "entity id out of range");
        if (q.relation >= relationCount) throw SpaError("data", "bounds", "relation id out of range");
        if (q.time >= timestepCount) throw SpaError("data", "bounds", "time index out of range");
        snaps[q.time].edges.push_back({q.subject, q.relation, q.object});
    }
    return snaps;
}

// Parses a train/valid/test file triple sharing one vocabulary. Ids are
// assigned in first-appearance order across the files in the order given;
// TimeIndex 0 is the earliest date seen anywhere in the set.
inline TemporalKG load_dataset(const std::string& trainPath, const std::string& validPath,
                               const std::string& testPath) {
    detail::Interner entities, relations;
    auto rawTrain = detail::parse_tsv_file(trainPath, entities, relations);
    auto rawValid = detail::parse_tsv_file(validPath, entities, relations);
    auto rawTest = detail::parse_tsv_file(testPath, entities, relations);

    std::int64_t minDay = rawTrain[0].day, maxDay = rawTrain[0].day;
    for (const auto* part : {&rawTrain, &rawValid, &rawTest})
        for (const auto& f : *part) {
            minDay = std::min(minDay, f.day);
            maxDay = std::max(maxDay, f.day);
        }

    TemporalKG kg;
    kg.entityCount = entities.names.size();
    kg.relationCount = relations.names.size();
    kg.timestepCount = std::size_t(maxDay - minDay + 1);
    kg.entityNames = std::move(entities.names);
    kg.relationNames = std::move(relations.names);
    kg.epochDay = minDay;

    auto convert = [&](const std::vector<detail::RawFact>& raw) {
        std::vector<Quadruple> out;
        out.reserve(raw.size());
        for (const auto& f : raw)
            out.push_back({f.subject, f.relation, f.object, TimeIndex(f.day - minDay)});
        return out;
    };
    kg.train = convert(rawTrain);
    kg.valid = convert(rawValid);
    kg.test = convert(rawTest);

    TruthSet seen;
    for (const auto* split : {&kg.train, &kg.valid, &kg.test})
        for (const auto& q : *split)
            if (!seen.insert(q).second)
                throw SpaError("data", "invalid", "duplicate quadruple across splits");

    kg.snapshots = build_snapshots(kg.train, kg.entityCount, kg.relationCount, kg.timestepCount);
    return kg;
}

// Writes the three split files back out using the name tables; facts keep
// their stored order so a re-parse reproduces the same id assignment.
inline void write_dataset(const TemporalKG& kg, const std::string& trainPath,
                          const std::string& validPath, const std::string& testPath) {
    if (kg.entityNames.size() != kg.entityCount || kg.relationNames.size() != kg.relationCount)
        throw SpaError("data", "usage", "write_dataset needs complete name tables");
    auto write = [&](const std::string& path, const std::vector<Quadruple>& quads) {
        std::ofstream out(path);
        if (!out) throw SpaError("data", "io", "cannot write " + path);
        for (const auto& q : quads)
            out << kg.entityNames[q.subject] << '\t' << kg.relationNames[q.relation] << '\t'
                << kg.entityNames[q.object] << '\t'
                << format_iso_date(kg.epochDay + std::int64_t(q.time)) << '\n';
    };
    write(trainPath, kg.train);
    write(validPath, kg.valid);
    write(testPath, kg.test);
}

// ---------------------------------------------------------------------------
// augmentation
// ---------------------------------------------------------------------------

// Adds (o, r+R, s) for every edge and one (e, 2R, e) loop per entity, in
// that order. Edge order is append-only so per-destination accumulation
// order is stable under unrelated additions.
inline Snapshot augment_snapshot(const Snapshot& s, std::size_t entityCount,
                                 std::size_t relationCount) {
    if (s.augmented) throw SpaError("data", "usage", "snapshot already augmented");
    Snapshot out;
    out.time = s.time;
    out.augmented = true;
    out.edges.reserve(s.edges.size() * 2 + entityCount);
    out.edges = s.edges;
    for (const auto& e : s.edges)
        out.edges.push_back({e.object, e.relation + relationCount, e.subject});
    for (std::size_t ent = 0; ent < entityCount; ++ent)
        out.edges.push_back({ent, 2 * relationCount, ent});
    return out;
}

// ---------------------------------------------------------------------------
// negatives
// ---------------------------------------------------------------------------

enum class CorruptSide { Subject, Object };

inline TruthSet truth_set(const TemporalKG& kg) {
    TruthSet truth;
    for (const auto* split : {&kg.train, &kg.valid, &kg.test})
        for (const auto& q : *split) truth.insert(q);
    return truth;
}

// Uniform corruptions of one side of q that contradict every known fact
// (not just q itself). Without replacement when the eligible pool is large
// enough, with replacement otherwise.
inline std::vector<std::size_t> sample_negatives(const Quadruple& q, CorruptSide side,
                                                 std::size_t k, const TruthSet& truth,
                                                 std::size_t entityCount, Rng& rng) {
    if (k < 1) throw SpaError("data", "config", "need k >= 1 negatives");
    std::vector<std::size_t> pool;
    pool.reserve(entityCount);
    const std::size_t held = side == CorruptSide::Object ? q.object : q.subject;
    for (std::size_t e = 0; e < entityCount; ++e) {
        if (e == held) continue;
        Quadruple cand = q;
        (side == CorruptSide::Object ? cand.object : cand.subject) = e;
        if (!truth.count(cand)) pool.push_back(e);
    }
    if (pool.empty())
        throw SpaError("data", "degenerate",
                       "every candidate entity forms a true fact for this query");
    std::vector<std::size_t> out;
    out.reserve(k);
    if (pool.size() >= k) {
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = i + rng.below(pool.size() - i);
            std::swap(pool[i], pool[j]);
            out.push_back(pool[i]);
        }
    } else {
        for (std::size_t i = 0; i < k; ++i) out.push_back(pool[rng.below(pool.size())]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// statistics
// ---------------------------------------------------------------------------

// fraction of timesteps at which each entity touches at least one train edge
inline std::vector<double> activity_histogram(const TemporalKG& kg) {
    std::vector<double> fraction(kg.entityCount, 0.0);
    std::vector<std::size_t> lastSeen(kg.entityCount, SIZE_MAX);
    std::vector<std::size_t> activeCount(kg.entityCount, 0);
    for (const auto& snap : kg.snapshots) {
        for (const auto& e : snap.edges) {
            for (std::size_t ent : {e.subject, e.object}) {
                if (lastSeen[ent] != snap.time) {
                    lastSeen[ent] = snap.time;
                    ++activeCount[ent];
                }
            }
        }
    }
    for (std::size_t e = 0; e < kg.entityCount; ++e)
        fraction[e] = kg.timestepCount ? double(activeCount[e]) / double(kg.timestepCount) : 0.0;
    return fraction;
}

inline nlohmann::ordered_json stats_json(const TemporalKG& kg) {
    auto activity = activity_histogram(kg);
    std::vector<double> sorted = activity;
    std::sort(sorted.begin(), sorted.end());
    nlohmann::ordered_json deciles = nlohmann::ordered_json::array();
    for (int q = 0; q <= 10; ++q) {
        if (sorted.empty()) {
            deciles.push_back(0.0);
            continue;
        }
        const double pos = double(q) / 10.0 * double(sorted.size() - 1);
        const std::size_t lo = std::size_t(pos);
        const double frac = pos - double(lo);
        const double v = lo + 1 < sorted.size() ? sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
                                                : sorted[lo];
        deciles.push_back(v);
    }
    double meanActivity = 0.0;
    for (double a : activity) meanActivity += a;
    if (!activity.empty()) meanActivity /= double(activity.size());

    nlohmann::ordered_json j;
    j["entityCount"] = kg.entityCount;
    j["relationCount"] = kg.relationCount;
    j["timestepCount"] = kg.timestepCount;
    j["splitSizes"] = {{"train", kg.train.size()}, {"valid", kg.valid.size()}, {"test", kg.test.size()}};
    j["activity"] = {{"mean", meanActivity}, {"deciles", deciles}};
    return j;
}

// ---------------------------------------------------------------------------
// synthetic generation
// ---------------------------------------------------------------------------

struct SyntheticConfig {
    std::size_t entityCount = 0;
    std::size_t relationCount = 0;
    std::size_t timestepCount = 0;
    std::size_t patternPeriod = 0;
    double patternFraction = 1.0;
    double noiseFraction = 0.0;
    std::uint64_t seed = 0;
};

// Facts come from (subject, relation) "conflict pairs": two templates share
// (s, r) but carry different objects active at different phases mod
// patternPeriod, so the right object at a held-out time is readable from the
// occurrence one period earlier and from nothing static. Uniform noise facts
// are mixed in per noiseFraction. Deterministic per seed.
inline TemporalKG generate_synthetic(const SyntheticConfig& cfg) {
    if (cfg.entityCount < 2 || cfg.relationCount < 1 || cfg.timestepCount < 2)
        throw SpaError("data", "config", "synthetic generator needs >=2 entities, >=1 relation, >=2 timesteps");
    if (cfg.patternPeriod < 2 || cfg.patternPeriod >= cfg.timestepCount)
        throw SpaError("data", "config", "patternPeriod must be in [2, timestepCount)");
    if (cfg.patternFraction <= 0.0 || cfg.patternFraction > 1.0)
        throw SpaError("data", "config", "patternFraction must be in (0,1]");
    if (cfg.noiseFraction < 0.0 || cfg.noiseFraction >= 1.0)
        throw SpaError("data", "config", "noiseFraction must be in [0,1)");

    const std::size_t E = cfg.entityCount, R = cfg.relationCount, T = cfg.timestepCount;
    const std::size_t P = cfg.patternPeriod;
    Rng rng(cfg.seed);

    struct Fact {
        Quadruple q;
        bool pattern = false;
        bool forcedTrain = false;
    };
    std::vector<Fact> facts;
    TruthSet seen;
    auto try_add = [&](Quadruple q, bool pattern, bool forced) {
        if (!seen.insert(q).second) return false;
        facts.push_back({q, pattern, forced});
        return true;
    };

    // conflict pairs with distinct (s, r)
    const std::size_t pairCount = std::max<std::size_t>(4, E / 2);
    std::unordered_set<std::uint64_t> usedSR;
    struct Pair {
        std::size_t s, r, o1, o2, p1, p2;
    };
    std::vector<Pair> pairs;
    for (std::size_t i = 0; i < pairCount; ++i) {
        Pair pr{};
        bool placed = false;
        for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
            pr.s = rng.below(E);
            pr.r = rng.below(R);
            placed = usedSR.insert(pr.s * R + pr.r).second;
        }
        if (!placed) break;  // vocabulary too small for more distinct pairs
        pr.o1 = rng.below(E);
        pr.o2 = (pr.o1 + 1 + rng.below(E - 1)) % E;
        pr.p1 = rng.below(P);
        pr.p2 = (pr.p1 + 1 + rng.below(P - 1)) % P;
        pairs.push_back(pr);
    }
    if (pairs.empty()) throw SpaError("data", "generation", "could not place any template pair");

    const std::size_t periodicCount =
        std::min(pairs.size(), std::max<std::size_t>(1, std::size_t(std::llround(
                                                            cfg.patternFraction * double(pairs.size())))));
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const Pair& pr = pairs[i];
        if (i < periodicCount) {
            for (std::size_t t = 0; t < T; ++t) {
                if (t % P == pr.p1) try_add({pr.s, pr.r, pr.o1, t}, true, false);
                if (t % P == pr.p2) try_add({pr.s, pr.r, pr.o2, t}, true, false);
            }
        } else {
            try_add({pr.s, pr.r, pr.o1, rng.below(T)}, false, false);
            try_add({pr.s, pr.r, pr.o2, rng.below(T)}, false, false);
        }
    }

    // noise such that noise/(noise+pattern) ~= noiseFraction
    const std::size_t baseCount = facts.size();
    const std::size_t noiseTarget =
        std::size_t(double(baseCount) * cfg.noiseFraction / (1.0 - cfg.noiseFraction));
    std::size_t added = 0;
    for (std::size_t attempt = 0; attempt < 20 * noiseTarget + 20 && added < noiseTarget; ++attempt) {
        Quadruple q{rng.below(E), rng.below(R), rng.below(E), rng.below(T)};
        if (try_add(q, false, false)) ++added;
    }

    // every entity and relation must reach the train split; synthesize
    // coverage templates for ids no fact mentions, pinned to train. These
    // recur with the same period so a pure-pattern KG stays purely periodic.
    std::vector<bool> entSeen(E, false), relSeen(R, false);
    for (const auto& f : facts) {
        entSeen[f.q.subject] = entSeen[f.q.object] = true;
        relSeen[f.q.relation] = true;
    }
    auto add_coverage = [&](Quadruple base) {
        const std::size_t phase = base.time % P;
        bool any = false;
        for (std::size_t t = phase; t < T; t += P) {
            Quadruple q = base;
            q.time = t;
            any = try_add(q, true, true) || any;
        }
        return any;
    };
    for (std::size_t e = 0; e < E; ++e) {
        if (entSeen[e]) continue;
        for (int attempt = 0; attempt < 100; ++attempt)
            if (add_coverage({e, rng.below(R), rng.below(E), rng.below(P)})) break;
    }
    for (std::size_t r = 0; r < R; ++r) {
        if (relSeen[r]) continue;
        for (int attempt = 0; attempt < 100; ++attempt)
            if (add_coverage({rng.below(E), r, rng.below(E), rng.below(P)})) break;
    }

    // 80/10/10 split; first claim facts that cover not-yet-covered train ids
    const std::size_t N = facts.size();
    std::vector<std::size_t> order(N);
    for (std::size_t i = 0; i < N; ++i) order[i] = i;
    for (std::size_t i = 0; i + 1 < N; ++i) {
        const std::size_t j = i + rng.below(N - i);
        std::swap(order[i], order[j]);
    }
    const std::size_t trainN = std::max<std::size_t>(1, (N * 8) / 10);
    const std::size_t validN = std::max<std::size_t>(1, N / 10);
    enum { Unassigned = -1, Train = 0, Valid = 1, Test = 2 };
    std::vector<int> assign(N, Unassigned);
    std::vector<bool> entTrain(E, false), relTrain(R, false);
    std::size_t trainCount = 0;
    auto to_train = [&](std::size_t i) {
        assign[i] = Train;
        ++trainCount;
        entTrain[facts[i].q.subject] = entTrain[facts[i].q.object] = true;
        relTrain[facts[i].q.relation] = true;
    };
    for (std::size_t i = 0; i < N; ++i)
        if (facts[i].forcedTrain) to_train(i);
    for (std::size_t idx : order) {
        if (assign[idx] != Unassigned) continue;
        const auto& q = facts[idx].q;
        if (!entTrain[q.subject] || !entTrain[q.object] || !relTrain[q.relation]) to_train(idx);
    }
    std::size_t validCount = 0;
    for (std::size_t idx : order) {
        if (assign[idx] != Unassigned) continue;
        if (trainCount < trainN) {
            to_train(idx);
        } else if (validCount < validN) {
            assign[idx] = Valid;
            ++validCount;
        } else {
            assign[idx] = Test;
        }
    }

    // held-out pattern facts must have their template in train, otherwise
    // the query is unanswerable from history; pull violators into train
    std::unordered_set<std::uint64_t> trainTemplates;
    auto template_key = [&](const Quadruple& q) {
        return (q.subject * R + q.relation) * E + q.object;
    };
    for (std::size_t i = 0; i < N; ++i)
        if (assign[i] == Train) trainTemplates.insert(template_key(facts[i].q));
    for (std::size_t i = 0; i < N; ++i) {
        if (assign[i] == Unassigned || assign[i] == Train || !facts[i].pattern) continue;
        if (!trainTemplates.count(template_key(facts[i].q))) {
            if (assign[i] == Valid) --validCount;
            to_train(i);
            trainTemplates.insert(template_key(facts[i].q));
        }
    }

    TemporalKG kg;
    kg.entityCount = E;
    kg.relationCount = R;
    kg.timestepCount = T;
    kg.epochDay = days_from_civil(2014, 1, 1);
    for (std::size_t i = 0; i < N; ++i) {
        if (assign[i] == Train) kg.train.push_back(facts[i].q);
        else if (assign[i] == Valid) kg.valid.push_back(facts[i].q);
        else kg.test.push_back(facts[i].q);
    }
    if (kg.train.empty() || kg.valid.empty() || kg.test.empty())
        throw SpaError("data", "generation", "parameters yield an empty split");
    std::sort(kg.train.begin(), kg.train.end());
    std::sort(kg.valid.begin(), kg.valid.end());
    std::sort(kg.test.begin(), kg.test.end());
    kg.entityNames.reserve(E);
    for (std::size_t e = 0; e < E; ++e) kg.entityNames.push_back("E" + std::to_string(e));
    for (std::size_t r = 0; r < R; ++r) kg.relationNames.push_back("R" + std::to_string(r));
    kg.snapshots = build_snapshots(kg.train, E, R, T);
    return kg;
}

}  // namespace spa
