#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "expertgen/corpus.hpp"
#include "expertgen/dedup.hpp"
#include "expertgen/generator.hpp"
#include "expertgen/metrics.hpp"
#include "expertgen/retrieval.hpp"

namespace expertgen {

struct ProviderConfig {
    std::string kind = "mock";  // "mock" | "openai"
    std::string base_url;
    std::string chat_model = "gpt-4o";
    std::string reward_model;
    std::string reward_url;
    std::string embedding_model;
    std::string api_key_env = "EXPERTGEN_API_KEY";
    std::size_t embedding_dim = 64;   // mock only
    double duplicate_rate = 0.25;     // mock only
    std::size_t max_in_flight = 8;
    bool cache = true;
    RetryPolicy retry;
};

struct GenerationBlock {
    Pipeline pipeline = Pipeline::expertgenqa;
    int k = 1;
    int n = 0;
    int n_samples = 5;
    double temperature = 1.0;
    int max_tokens = 512;
    std::vector<StyleName> styles = default_styles();
    bool strict_styles = false;
    std::vector<std::string> template_question_types = {"summarization", "inference", "factual"};
    std::vector<std::string> template_answer_lengths = {"short", "detailed"};
    std::vector<std::string> template_style_directives = {"declarative", "imperative"};
};

struct DedupBlock {
    double threshold = 0.3;
    OverlapMode mode = OverlapMode::containment;
};

struct MetricsBlock {
    bool bloom = true;
    bool preference = false;
    int preference_n = 10;
    std::size_t preference_limit = 16;  // 0 = no limit
    LengthUnit len_unit = LengthUnit::tokens;
    bool len_includes_context = true;
};

struct RetrievalBlock {
    int batch_size = 64;
    double learning_rate = 1e-3;
    int epochs = 3;
    double temperature = 0.1;
    std::vector<int> ks = {1, 5};
    double test_fraction = 1.0;
};

struct IoBlock {
    std::filesystem::path workdir = "work";
    std::filesystem::path chunks = "chunks.jsonl";
    std::filesystem::path expert_pool = "expert_qa.jsonl";
};

struct RunConfig {
    std::uint64_t seed = 42;
    ProviderConfig provider;
    GenerationBlock generation;
    DedupBlock dedup;
    MetricsBlock metrics;
    RetrievalBlock retrieval;
    IoBlock io;

    // Fully-resolved config embedded in reports for provenance.
    nlohmann::ordered_json echo() const;
};

// Parses and validates a config JSON; unknown keys are rejected. Overrides
// are dotted "key.path=value" strings applied before validation, the value
// parsed as JSON when possible and as a bare string otherwise.
RunConfig parse_run_config(const nlohmann::json& root,
                           const std::vector<std::string>& overrides = {});

RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides = {});

}  // namespace expertgen
