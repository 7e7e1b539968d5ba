#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "expertgen/config.hpp"
#include "expertgen/errors.hpp"
#include "expertgen/stages.hpp"

namespace {

using expertgen::RunConfig;

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
};

// Flags shared by every subcommand; direct flags are sugar for --set paths.
void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("-c,--config", args.config_path, "Config JSON file");
    cmd->add_option("--set", args.overrides,
                    "Override a config key, e.g. --set dedup.threshold=0.25");
    cmd->add_option_function<std::string>(
        "--workdir", [&args](const std::string& v) { args.overrides.push_back("io.workdir=" + v); },
        "Working directory for stage artifacts");
    cmd->add_option_function<std::uint64_t>(
        "--seed",
        [&args](std::uint64_t v) { args.overrides.push_back("seed=" + std::to_string(v)); },
        "Global seed threaded to all stochastic components");
}

RunConfig resolve_config(const CommonArgs& args) {
    if (!args.config_path.empty()) {
        return expertgen::load_run_config(args.config_path, args.overrides);
    }
    return expertgen::parse_run_config(nlohmann::json::object(), args.overrides);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"expertgen: expert-imitating question generation and retrieval evaluation"};
    app.require_subcommand(1);

    CommonArgs args;

    auto* ingest = app.add_subcommand("ingest", "Validate and normalize chunks and expert pool");
    add_common(ingest, args);
    ingest->add_option_function<std::string>(
        "--chunks", [&](const std::string& v) { args.overrides.push_back("io.chunks=" + v); },
        "Input chunks.jsonl ({doc_id, seq, text} per line)");
    ingest->add_option_function<std::string>(
        "--expert-pool",
        [&](const std::string& v) { args.overrides.push_back("io.expert_pool=" + v); },
        "Input expert_qa.jsonl");

    auto* generate = app.add_subcommand("generate", "Run a question-generation pipeline");
    add_common(generate, args);
    generate->add_option_function<std::string>(
        "--pipeline",
        [&](const std::string& v) { args.overrides.push_back("generation.pipeline=" + v); },
        "expertgenqa | fewshot | template");
    generate->add_option_function<int>(
        "--k", [&](int v) { args.overrides.push_back("generation.k=" + std::to_string(v)); },
        "Few-shot combinations per style (attempts/draws for baselines)");
    generate->add_option_function<int>(
        "--n", [&](int v) { args.overrides.push_back("generation.n=" + std::to_string(v)); },
        "Few-shot examples per combination");
    generate->add_option_function<int>(
        "--n-samples",
        [&](int v) { args.overrides.push_back("generation.n_samples=" + std::to_string(v)); },
        "Completions sampled per generation call");

    auto* dedup = app.add_subcommand("dedup", "Remove near-duplicate questions");
    add_common(dedup, args);
    dedup->add_option_function<double>(
        "--dedup-threshold",
        [&](double v) { args.overrides.push_back("dedup.threshold=" + std::to_string(v)); },
        "Bigram-overlap threshold (default 0.3)");
    dedup->add_option_function<std::string>(
        "--overlap", [&](const std::string& v) { args.overrides.push_back("dedup.mode=" + v); },
        "containment | jaccard");

    auto* metrics = app.add_subcommand("metrics", "Compute efficiency, coverage and quality metrics");
    add_common(metrics, args);

    auto* train = app.add_subcommand("train", "Train the linear retrieval adapter");
    add_common(train, args);
    train->add_option_function<int>(
        "--epochs",
        [&](int v) { args.overrides.push_back("retrieval.epochs=" + std::to_string(v)); },
        "Training epochs");
    train->add_option_function<double>(
        "--lr",
        [&](double v) { args.overrides.push_back("retrieval.learning_rate=" + std::to_string(v)); },
        "Learning rate");
    train->add_option_function<int>(
        "--batch-size",
        [&](int v) { args.overrides.push_back("retrieval.batch_size=" + std::to_string(v)); },
        "Batch size (>= 2)");

    auto* eval = app.add_subcommand("eval", "Evaluate top-k retrieval accuracy");
    add_common(eval, args);

    auto* report = app.add_subcommand("report", "Merge stage outputs into report.json");
    add_common(report, args);

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig config = resolve_config(args);
        if (ingest->parsed()) expertgen::cmd_ingest(config);
        if (generate->parsed()) expertgen::cmd_generate(config);
        if (dedup->parsed()) expertgen::cmd_dedup(config);
        if (metrics->parsed()) expertgen::cmd_metrics(config);
        if (train->parsed()) expertgen::cmd_train(config);
        if (eval->parsed()) expertgen::cmd_eval(config);
        if (report->parsed()) expertgen::cmd_report(config);
    } catch (const expertgen::Error& e) {
        std::cerr << "error: " << e.code() << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
