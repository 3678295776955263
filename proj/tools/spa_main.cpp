// Command-line driver: wires JSON run configurations to the library
// pipeline. Machine-readable progress goes to stdout as JSON lines; human
// summaries go to stderr. Exit codes: 0 success, 1 usage error, 2 runtime
// error (single-line "ERROR:<module>:<kind>: <message>" on stderr).

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spa/config.hpp"
#include "spa/search.hpp"

namespace {

using nlohmann::ordered_json;

struct CommonFlags {
    std::string configPath;
    std::string outDir;
    std::string supernetPath;
    std::optional<std::uint64_t> seedOverride;
    std::optional<std::size_t> workersOverride;
};

spa::RunConfig load_config(const CommonFlags& f, bool synthCommand = false) {
    spa::RunConfig cfg = spa::RunConfig::from_file(f.configPath);
    if (f.seedOverride) {
        cfg.search.seed = *f.seedOverride;
        if (synthCommand && cfg.synthetic) cfg.synthetic->seed = *f.seedOverride;
    }
    if (f.workersOverride) cfg.search.workers = *f.workersOverride;
    cfg.search.validate();
    return cfg;
}

std::filesystem::path prepare_out(const std::string& outDir, const spa::RunConfig& cfg) {
    std::filesystem::path out(outDir);
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    if (ec) throw spa::SpaError("cli", "io", "cannot create output directory " + outDir);
    std::ofstream snap(out / "config.resolved.json");
    if (!snap) throw spa::SpaError("cli", "io", "cannot write config snapshot in " + outDir);
    snap << cfg.resolved().dump(2) << "\n";
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw spa::SpaError("cli", "io", "cannot write " + path.string());
    out << text;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int cmd_stats(const std::string& train, const std::string& valid, const std::string& test) {
    spa::TemporalKG kg = spa::load_dataset(train, valid, test);
    ordered_json j;
    j["entityCount"] = kg.entityCount;
    j["relationCount"] = kg.relationCount;
    j["timestepCount"] = kg.timestepCount;
    j["trainCount"] = kg.train.size();
    j["validCount"] = kg.valid.size();
    j["testCount"] = kg.test.size();
    std::cout << j.dump() << "\n";
    return 0;
}

int cmd_synth(const CommonFlags& f) {
    spa::RunConfig cfg = load_config(f, true);
    if (!cfg.synthetic)
        throw spa::SpaError("cli", "config", "synth needs a dataset.synthetic section");
    const auto out = prepare_out(f.outDir, cfg);
    spa::TemporalKG kg = cfg.load_kg();
    spa::write_dataset(kg, (out / "train.txt").string(), (out / "valid.txt").string(),
                       (out / "test.txt").string());
    ordered_json j;
    j["train"] = kg.train.size();
    j["valid"] = kg.valid.size();
    j["test"] = kg.test.size();
    std::cout << j.dump() << "\n";
    std::cerr << "wrote " << kg.train.size() << "/" << kg.valid.size() << "/" << kg.test.size()
              << " train/valid/test quadruples to " << out.string() << "\n";
    return 0;
}

int cmd_train_supernet(const CommonFlags& f) {
    const auto t0 = std::chrono::steady_clock::now();
    spa::RunConfig cfg = load_config(f);
    const auto out = prepare_out(f.outDir, cfg);
    spa::TemporalKG kg = cfg.load_kg();

    std::ofstream log(out / "train_log.jsonl");
    if (!log) throw spa::SpaError("cli", "io", "cannot write train log");
    spa::TrainResult result = spa::train_supernet(kg, cfg.search, [&](const spa::EpochLog& e) {
        ordered_json j;
        j["epoch"] = e.epoch;
        j["meanLoss"] = e.meanLoss;
        j["lr"] = e.lr;
        const std::string line = j.dump();
        std::cout << line << "\n" << std::flush;
        log << line << "\n";
    });
    spa::save_checkpoint(result.params, (out / "supernet.ckpt").string());

    ordered_json report;
    report["epochs"] = result.log.size();
    report["finalMeanLoss"] = result.log.empty() ? 0.0 : result.log.back().meanLoss;
    report["checkpoint"] = (out / "supernet.ckpt").string();
    report["config"] = cfg.resolved();
    report["wallClockSeconds"] = seconds_since(t0);
    write_text(out / "train_report.json", report.dump(2) + "\n");
    std::cerr << "trained " << result.log.size() << " epochs; final mean loss "
              << (result.log.empty() ? 0.0 : result.log.back().meanLoss) << "; checkpoint "
              << (out / "supernet.ckpt").string() << "\n";
    return 0;
}

int cmd_search(const CommonFlags& f) {
    const auto t0 = std::chrono::steady_clock::now();
    spa::RunConfig cfg = load_config(f);
    const auto out = prepare_out(f.outDir, cfg);
    spa::TemporalKG kg = cfg.load_kg();
    spa::SupernetParams params = spa::load_checkpoint(f.supernetPath);

    std::vector<spa::SearchRecord> records = spa::search_architectures(kg, params, cfg.search);
    if (records.empty()) throw spa::SpaError("cli", "internal", "search produced no records");
    const spa::SearchRecord best = records.front();

    std::vector<spa::SearchRecord> chronological = records;
    std::sort(chronological.begin(), chronological.end(),
              [](const auto& a, const auto& b) { return a.iterationIndex < b.iterationIndex; });
    std::string logText;
    for (const auto& r : chronological) {
        const std::string line = r.to_json().dump();
        std::cout << line << "\n";
        logText += line + "\n";
    }
    write_text(out / "search_log.jsonl", logText);

    spa::EncoderInputs inputs = spa::EncoderInputs::build(kg);
    spa::SupernetParams sub = spa::extract_submodel(params, best.descriptor);
    spa::EvalResult valid = spa::evaluate(inputs, kg.valid, best.descriptor, sub);
    spa::EvalResult test = spa::evaluate(inputs, kg.test, best.descriptor, sub);

    ordered_json report;
    report["best"] = best.descriptor.to_json();
    report["metric"] = spa::metric_name(best.metricKind);
    report["metricValue"] = best.metricValue;
    report["evaluatedCount"] = records.size();
    report["valid"] = valid.to_json();
    report["test"] = test.to_json();
    report["config"] = cfg.resolved();
    report["wallClockSeconds"] = seconds_since(t0);
    write_text(out / "search_report.json", report.dump(2) + "\n");
    std::cerr << "evaluated " << records.size() << " architectures; best "
              << best.descriptor.canonical() << " (" << spa::metric_name(best.metricKind) << " "
              << best.metricValue << "); test MRR " << test.mrr << "\n";
    return 0;
}

int cmd_finetune(const CommonFlags& f) {
    const auto t0 = std::chrono::steady_clock::now();
    spa::RunConfig cfg = load_config(f);
    if (!cfg.arch) throw spa::SpaError("cli", "config", "finetune needs an 'arch' section");
    const auto out = prepare_out(f.outDir, cfg);
    spa::TemporalKG kg = cfg.load_kg();

    spa::FinetuneResult result = spa::finetune(kg, *cfg.arch, cfg.finetune, cfg.search);
    std::string logText;
    for (const auto& t : result.trials) {
        const std::string line = t.to_json().dump();
        std::cout << line << "\n";
        logText += line + "\n";
    }
    write_text(out / "finetune_trials.jsonl", logText);
    spa::save_checkpoint(result.params, (out / "finetuned.ckpt").string());

    ordered_json report;
    report["arch"] = cfg.arch->to_json();
    report["best"] = result.best.to_json();
    report["test"] = result.test.to_json();
    report["checkpoint"] = (out / "finetuned.ckpt").string();
    report["config"] = cfg.resolved();
    report["wallClockSeconds"] = seconds_since(t0);
    write_text(out / "finetune_report.json", report.dump(2) + "\n");
    std::cerr << "best trial " << result.best.index << " (valid MRR " << result.best.validMRR
              << "); test MRR " << result.test.mrr << "\n";
    return 0;
}

int cmd_evaluate(const CommonFlags& f) {
    const auto t0 = std::chrono::steady_clock::now();
    spa::RunConfig cfg = load_config(f);
    if (!cfg.arch) throw spa::SpaError("cli", "config", "evaluate needs an 'arch' section");
    const auto out = prepare_out(f.outDir, cfg);
    spa::TemporalKG kg = cfg.load_kg();
    spa::SupernetParams params = spa::load_checkpoint(f.supernetPath);

    spa::EncoderInputs inputs = spa::EncoderInputs::build(kg);
    spa::EvalResult valid = spa::evaluate(inputs, kg.valid, *cfg.arch, params);
    spa::EvalResult test = spa::evaluate(inputs, kg.test, *cfg.arch, params);
    spa::write_ranks_tsv(valid, (out / "valid_ranks.tsv").string());
    spa::write_ranks_tsv(test, (out / "test_ranks.tsv").string());
    std::cout << ordered_json{{"split", "valid"}, {"result", valid.to_json()}}.dump() << "\n";
    std::cout << ordered_json{{"split", "test"}, {"result", test.to_json()}}.dump() << "\n";

    ordered_json report;
    report["arch"] = cfg.arch->to_json();
    report["valid"] = valid.to_json();
    report["test"] = test.to_json();
    report["config"] = cfg.resolved();
    report["wallClockSeconds"] = seconds_since(t0);
    write_text(out / "eval_report.json", report.dump(2) + "\n");
    std::cerr << "valid MRR " << valid.mrr << "; test MRR " << test.mrr << "\n";
    return 0;
}

int cmd_rank_corr(const CommonFlags& f) {
    const auto t0 = std::chrono::steady_clock::now();
    spa::RunConfig cfg = load_config(f);
    const auto out = prepare_out(f.outDir, cfg);
    spa::TemporalKG kg = cfg.load_kg();
    spa::SupernetParams params = spa::load_checkpoint(f.supernetPath);

    spa::RankCorrelationResult result = spa::rank_correlation_study(
        kg, params, cfg.rankCorrSamples, cfg.rankCorrStandaloneEpochs, cfg.search);
    ordered_json pairs = ordered_json::array();
    for (const auto& p : result.pairs) {
        ordered_json j;
        j["descriptor"] = p.descriptor.to_json();
        j["inherited"] = p.inherited;
        j["standalone"] = p.standalone;
        std::cout << j.dump() << "\n";
        pairs.push_back(j);
    }

    ordered_json report;
    report["spearman"] = result.spearman;
    report["pairs"] = pairs;
    report["config"] = cfg.resolved();
    report["wallClockSeconds"] = seconds_since(t0);
    write_text(out / "rankcorr_report.json", report.dump(2) + "\n");
    std::cerr << "spearman " << result.spearman << " over " << result.pairs.size()
              << " architectures\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"architecture search for temporal knowledge-graph completion"};
    app.require_subcommand(1);

    std::string statsTrain, statsValid, statsTest;
    auto* stats = app.add_subcommand("stats", "dataset statistics from split files");
    stats->add_option("--train", statsTrain, "train split file")->required();
    stats->add_option("--valid", statsValid, "valid split file")->required();
    stats->add_option("--test", statsTest, "test split file")->required();

    CommonFlags flags;
    auto add_common = [&](CLI::App* cmd, bool needsSupernet) {
        cmd->add_option("--config", flags.configPath, "JSON run configuration")->required();
        cmd->add_option("--out", flags.outDir, "output directory")->required();
        cmd->add_option_function<std::uint64_t>(
            "--seed", [&](const std::uint64_t& v) { flags.seedOverride = v; },
            "override the config seed");
        cmd->add_option_function<std::size_t>(
            "--workers", [&](const std::size_t& v) { flags.workersOverride = v; },
            "evaluation worker threads");
        if (needsSupernet)
            cmd->add_option("--supernet", flags.supernetPath, "supernet checkpoint")->required();
    };

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    add_common(synth, false);
    auto* train = app.add_subcommand("train-supernet", "train the weight-sharing supernet");
    add_common(train, false);
    auto* search = app.add_subcommand("search", "search architectures with inherited weights");
    add_common(search, true);
    auto* finetune = app.add_subcommand("finetune", "re-train one architecture from scratch");
    add_common(finetune, false);
    auto* evaluate = app.add_subcommand("evaluate", "filtered ranking metrics for one architecture");
    add_common(evaluate, true);
    auto* rankCorr = app.add_subcommand("rank-corr", "inherited vs standalone rank correlation");
    add_common(rankCorr, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        std::cerr << "usage: spa {stats|synth|train-supernet|search|finetune|evaluate|rank-corr} "
                     "[--config FILE] [--out DIR] [options]\n";
        return 1;
    }

    try {
        if (stats->parsed()) return cmd_stats(statsTrain, statsValid, statsTest);
        if (synth->parsed()) return cmd_synth(flags);
        if (train->parsed()) return cmd_train_supernet(flags);
        if (search->parsed()) return cmd_search(flags);
        if (finetune->parsed()) return cmd_finetune(flags);
        if (evaluate->parsed()) return cmd_evaluate(flags);
        if (rankCorr->parsed()) return cmd_rank_corr(flags);
        std::cerr << "no command selected\n";
        return 1;
    } catch (const spa::SpaError& e) {
        std::cerr << "ERROR:" << e.module() << ":" << e.kind() << ": " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "ERROR:cli:internal: " << e.what() << "\n";
        return 2;
    }
}
