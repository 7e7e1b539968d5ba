#include "expertgen/stages.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "expertgen/errors.hpp"
#include "expertgen/providers.hpp"
#include "expertgen/util.hpp"

namespace expertgen {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

void require_artifact(const std::filesystem::path& path, const std::string& producer) {
    if (!std::filesystem::exists(path)) {
        throw DependencyError("missing " + path.string() + "; run `expertgen " + producer +
                              "` first");
    }
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open file: " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ParseError("malformed JSON: " + path.string());
    return j;
}

void write_json_file(const std::filesystem::path& path, const ordered_json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ParseError("cannot write file: " + path.string());
    out << j.dump(2) << "\n";
}

std::vector<ExpertQA> test_reference(const RunConfig& config, const StagePaths& paths) {
    auto pool = load_expert_pool(paths.expert_pool(), config.generation.styles);
    if (pool.empty()) return {};
    return split_pool(pool, config.retrieval.test_fraction, config.seed).test;
}

}  // namespace

std::shared_ptr<Provider> make_provider(const RunConfig& config) {
    if (config.provider.kind == "mock") {
        MockOptions options;
        options.seed = config.seed;
        options.embedding_dim = config.provider.embedding_dim;
        options.duplicate_rate = config.provider.duplicate_rate;
        return std::make_shared<MockProvider>(options);
    }
    HttpProviderOptions options;
    options.base_url = config.provider.base_url;
    options.chat_model = config.provider.chat_model;
    options.embedding_model = config.provider.embedding_model;
    options.reward_model = config.provider.reward_model;
    options.reward_url = config.provider.reward_url;
    if (const char* key = std::getenv(config.provider.api_key_env.c_str())) {
        options.api_key = key;
    }
    return std::make_shared<HttpProvider>(options);
}

Gateway make_gateway(const RunConfig& config, std::shared_ptr<Provider> provider) {
    if (!provider) provider = make_provider(config);
    StagePaths paths(config.io.workdir);
    std::optional<std::filesystem::path> cache;
    if (config.provider.cache) cache = paths.cache();
    return Gateway(std::move(provider), config.provider.retry, cache, config.seed);
}

void cmd_ingest(const RunConfig& config) {
    StagePaths paths(config.io.workdir);
    std::filesystem::create_directories(paths.root);

    if (!std::filesystem::exists(config.io.chunks)) {
        throw DependencyError("input chunk file not found: " + config.io.chunks.string());
    }
    auto chunks = load_corpus(config.io.chunks);
    std::unordered_set<std::string> chunk_ids;
    for (const auto& c : chunks) chunk_ids.insert(c.id);

    if (!std::filesystem::exists(config.io.expert_pool)) {
        throw DependencyError("expert pool file not found: " + config.io.expert_pool.string());
    }
    auto pool = load_expert_pool(config.io.expert_pool, config.generation.styles, &chunk_ids);

    save_corpus(paths.chunks(), chunks);
    save_expert_pool(paths.expert_pool(), pool);
    std::cout << "ingested " << chunks.size() << " chunks, " << pool.size()
              << " expert QA pairs\n";
}

void cmd_generate(const RunConfig& config) {
    StagePaths paths(config.io.workdir);
    require_artifact(paths.chunks(), "ingest");
    auto chunks = load_corpus(paths.chunks());

    std::vector<ExpertQA> pool;
    if (config.generation.pipeline != Pipeline::template_bank) {
        require_artifact(paths.expert_pool(), "ingest");
        pool = load_expert_pool(paths.expert_pool(), config.generation.styles);
    }

    Gateway gateway = make_gateway(config);
    TopicStore topic_store(paths.topics());

    GenerationConfig gen;
    gen.combos_per_style = config.generation.k;
    gen.fewshot_n = config.generation.n;
    gen.n_samples = config.generation.n_samples;
    gen.temperature = config.generation.temperature;
    gen.max_tokens = config.generation.max_tokens;
    gen.styles = config.generation.styles;
    gen.strict_styles = config.generation.strict_styles;
    gen.template_bank = TemplateBank::cross(config.generation.template_question_types,
                                            config.generation.template_answer_lengths,
                                            config.generation.template_style_directives);
    gen.seed = config.seed;
    gen.max_in_flight = config.provider.max_in_flight;

    Generator generator(gateway, gen, &topic_store);
    RunReport report;
    std::vector<GeneratedQA> records;
    switch (config.generation.pipeline) {
        case Pipeline::expertgenqa:
            records = generator.run_expertgenqa(chunks, pool, report);
            break;
        case Pipeline::fewshot:
            records = generator.run_fewshot_baseline(chunks, pool, report);
            break;
        case Pipeline::template_bank:
            records = generator.run_template_baseline(chunks, report);
            break;
    }

    save_generated(paths.generated(), records);
    save_run_report(paths.run_report(), report, gateway.stats());
    std::cout << "generated " << records.size() << " records from " << report.calls_attempted
              << " calls (" << report.calls_failed << " failed, " << report.chunks_skipped
              << " chunks skipped)\n";
}

void cmd_dedup(const RunConfig& config) {
    StagePaths paths(config.io.workdir);
    require_artifact(paths.generated(), "generate");
    require_artifact(paths.expert_pool(), "ingest");

    auto records = load_generated(paths.generated());
    std::vector<std::string> questions;
    questions.reserve(records.size());
    for (const auto& r : records) questions.push_back(r.question);

    auto kept_within = dedup_within_indices(questions, config.dedup.threshold, config.dedup.mode);

    auto reference_pool = test_reference(config, paths);
    std::vector<std::string> reference;
    reference.reserve(reference_pool.size());
    for (const auto& qa : reference_pool) reference.push_back(qa.question);

    std::vector<std::string> survivors;
    survivors.reserve(kept_within.size());
    for (std::size_t idx : kept_within) survivors.push_back(questions[idx]);
    auto kept_against =
        dedup_against_indices(survivors, reference, config.dedup.threshold, config.dedup.mode);

    std::vector<GeneratedQA> kept;
    kept.reserve(kept_against.size());
    for (std::size_t idx : kept_against) kept.push_back(records[kept_within[idx]]);

    save_generated(paths.deduped(), kept);
    ordered_json stats;
    stats["input"] = records.size();
    stats["kept_within"] = kept_within.size();
    stats["kept"] = kept.size();
    stats["reference_size"] = reference.size();
    stats["threshold"] = config.dedup.threshold;
    stats["mode"] = to_string(config.dedup.mode);
    write_json_file(paths.dedup_stats(), stats);
    std::cout << "dedup kept " << kept.size() << " of " << records.size() << " questions\n";
}

void cmd_metrics(const RunConfig& config) {
    StagePaths paths(config.io.workdir);
    require_artifact(paths.deduped(), "dedup");
    require_artifact(paths.run_report(), "generate");
    require_artifact(paths.chunks(), "ingest");

    auto kept = load_generated(paths.deduped());
    auto chunks = load_corpus(paths.chunks());
    const json run = read_json_file(paths.run_report());

    MetricsReport report;
    report.config_echo = config.echo();

    const auto raw_generations = run.at("records_emitted").get<std::size_t>();
    if (raw_generations > 0) {
        report.efficiency = efficiency(raw_generations, kept.size(),
                                       to_string(config.generation.pipeline), config.generation.n);
    }

    // Topic lists live in the topic store, filled during generation.
    TopicStore topic_store(paths.topics());
    bool any_topics = false;
    for (auto& chunk : chunks) {
        if (auto topics = topic_store.lookup(chunk.id)) {
            chunk.topics = *topics;
            if (!chunk.topics.empty()) any_topics = true;
        }
    }
    if (any_topics) {
        report.coverage = topic_coverage(chunks, kept);
    }

    Gateway gateway = make_gateway(config);

    if (config.metrics.bloom) {
        std::vector<BloomLabel> labels;
        labels.reserve(kept.size());
        for (const auto& qa : kept) {
            labels.push_back(classify_bloom(gateway, qa.id, qa.question));
        }
        report.bloom = bloom_histogram(labels);
        write_bloom_csv(paths.bloom_csv(), labels);
    }

    if (config.metrics.preference) {
        std::unordered_map<std::string, const DocumentChunk*> by_id;
        for (const auto& chunk : chunks) by_id[chunk.id] = &chunk;
        PreferenceOptions options;
        options.n_responses = config.metrics.preference_n;
        options.length_unit = config.metrics.len_unit;
        options.length_includes_context = config.metrics.len_includes_context;
        std::vector<PreferenceStat> stats;
        for (const auto& qa : kept) {
            if (config.metrics.preference_limit > 0 &&
                stats.size() >= config.metrics.preference_limit) {
                break;
            }
            auto it = by_id.find(qa.source_chunk_id);
            const std::string context = it == by_id.end() ? "" : it->second->text;
            stats.push_back(preference_metrics(gateway, qa.id, context, qa.question, options));
        }
        report.preference = aggregate_preferences(stats);
        write_preference_csv(paths.preference_csv(), stats);
    }

    write_json_file(paths.metrics(), aggregate_report(report));
    std::cout << "metrics written to " << paths.metrics().string() << "\n";
}

void cmd_train(const RunConfig& config) {
    StagePaths paths(config.io.workdir);
    require_artifact(paths.deduped(), "dedup");
    require_artifact(paths.chunks(), "ingest");

    auto kept = load_generated(paths.deduped());
    if (kept.empty()) {
        throw DependencyError("deduped.jsonl holds no questions; nothing to train on");
    }
    auto chunks = load_corpus(paths.chunks());

    Gateway gateway = make_gateway(config);

    // Embed every chunk and every surviving question. Chunk order gives the
    // stable candidate list reused by eval.
    std::vector<std::string> ids;
    std::vector<std::string> texts;
    for (const auto& chunk : chunks) {
        ids.push_back(chunk.id);
        texts.push_back(chunk.text);
    }
    for (const auto& qa : kept) {
        ids.push_back(qa.id);
        texts.push_back(qa.question);
    }
    auto records = gateway.embed(ids, texts);
    save_embeddings(paths.embeddings(), records);

    std::vector<std::pair<std::string, std::string>> pairs;
    pairs.reserve(kept.size());
    for (const auto& qa : kept) {
        pairs.emplace_back(qa.id, qa.source_chunk_id);
    }
    save_pairs(paths.pairs(), pairs);

    TrainConfig train_config;
    train_config.batch_size = config.retrieval.batch_size;
    train_config.learning_rate = config.retrieval.learning_rate;
    train_config.epochs = config.retrieval.epochs;
    train_config.temperature = config.retrieval.temperature;
    train_config.seed = config.seed;

    auto result = train_adapter(pairs, index_embeddings(records), train_config);
    save_adapter(paths.adapter(), result.adapter, train_config, result.loss_curve);
    std::cout << "trained adapter over " << pairs.size() << " pairs, " << result.loss_curve.size()
              << " epochs";
    if (!result.loss_curve.empty()) {
        std::cout << " (loss " << result.loss_curve.front() << " -> " << result.loss_curve.back()
                  << ")";
    }
    std::cout << "\n";
}

void cmd_eval(const RunConfig& config) {
    StagePaths paths(config.io.workdir);
    require_artifact(paths.adapter(), "train");
    require_artifact(paths.embeddings(), "train");
    require_artifact(paths.expert_pool(), "ingest");
    require_artifact(paths.chunks(), "ingest");

    AdapterModel adapter = load_adapter(paths.adapter());
    auto stored = load_embeddings(paths.embeddings());
    auto chunks = load_corpus(paths.chunks());

    std::unordered_set<std::string> chunk_ids;
    for (const auto& chunk : chunks) chunk_ids.insert(chunk.id);
    std::vector<EmbeddingRecord> chunk_embeddings;
    for (const auto& record : stored) {
        if (chunk_ids.count(record.owner_id)) chunk_embeddings.push_back(record);
    }

    auto test_pool = test_reference(config, paths);
    if (test_pool.empty()) {
        throw DependencyError("test split is empty; raise retrieval.test_fraction");
    }

    Gateway gateway = make_gateway(config);
    std::vector<std::string> query_ids;
    std::vector<std::string> query_texts;
    std::vector<std::pair<std::string, std::string>> test_queries;
    for (const auto& qa : test_pool) {
        if (qa.source_chunk_ids.empty()) continue;  // no gold chunk to rank
        query_ids.push_back(qa.id);
        query_texts.push_back(qa.question);
        test_queries.emplace_back(qa.id, qa.source_chunk_ids.front());
    }
    if (test_queries.empty()) {
        throw DependencyError("no test query carries a source_chunk_id; cannot evaluate");
    }
    auto query_records = gateway.embed(query_ids, query_texts);
    EmbeddingIndex query_index = index_embeddings(query_records);

    auto result = evaluate_topk(adapter, test_queries, query_index, chunk_embeddings,
                                config.retrieval.ks);
    // Identity baseline over the same pool for the improvement column.
    AdapterModel identity = AdapterModel::identity(adapter.W.cols(), adapter.temperature);
    auto baseline = evaluate_topk(identity, test_queries, query_index, chunk_embeddings,
                                  config.retrieval.ks);

    ordered_json out;
    out["ks"] = config.retrieval.ks;
    ordered_json accuracy = ordered_json::object();
    for (const auto& [k, acc] : result.top_k_accuracy) accuracy[std::to_string(k)] = acc;
    out["top_k_accuracy"] = accuracy;
    ordered_json baseline_accuracy = ordered_json::object();
    for (const auto& [k, acc] : baseline.top_k_accuracy) {
        baseline_accuracy[std::to_string(k)] = acc;
    }
    out["baseline_top_k_accuracy"] = baseline_accuracy;
    ordered_json ranks = ordered_json::object();
    for (const auto& [query_id, rank] : result.per_query_rank) ranks[query_id] = rank;
    out["per_query_rank"] = ranks;
    out["excluded"] = result.errors;
    out["queries_evaluated"] = result.per_query_rank.size();
    write_json_file(paths.retrieval(), out);

    std::cout << "adapter:\n" << format_topk_table(result);
    std::cout << "identity baseline:\n" << format_topk_table(baseline);
}

void cmd_report(const RunConfig& config) {
    StagePaths paths(config.io.workdir);
    require_artifact(paths.metrics(), "metrics");

    json metrics = read_json_file(paths.metrics());
    ordered_json report;
    report["config"] = config.echo();
    for (const char* key : {"efficiency", "topic_coverage", "bloom", "preference"}) {
        if (metrics.contains(key)) report[key] = metrics.at(key);
    }
    if (std::filesystem::exists(paths.retrieval())) {
        json retrieval = read_json_file(paths.retrieval());
        ordered_json section;
        section["top_k_accuracy"] = retrieval.at("top_k_accuracy");
        section["baseline_top_k_accuracy"] = retrieval.at("baseline_top_k_accuracy");
        section["queries_evaluated"] = retrieval.at("queries_evaluated");
        section["epochs"] = config.retrieval.epochs;
        report["retrieval"] = section;
    }
    validate_report_schema(report);
    write_json_file(paths.report(), report);
    std::cout << "report written to " << paths.report().string() << "\n";
}

}  // namespace expertgen
