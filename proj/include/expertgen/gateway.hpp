#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "expertgen/corpus.hpp"

namespace expertgen {

struct ChatMessage {
    std::string role;  // "system" | "user" | "assistant"
    std::string content;
};

struct ChatRequest {
    std::optional<std::string> system;
    std::vector<ChatMessage> messages;  // non-empty
    double temperature = 1.0;
    int n_samples = 1;   // >= 1
    int max_tokens = 512;

    // Canonical serialization; the mock provider and the cache key are pure
    // functions of this string.
    std::string canonical() const;
};

// Transcript to be scored; the last turn must be an assistant turn.
struct RewardRequest {
    std::vector<ChatMessage> transcript;

    std::string canonical() const;
};

struct EmbeddingRecord {
    std::string owner_id;
    std::vector<double> vector;
};

// --- Prompt templates -------------------------------------------------------

// Topic-extraction prompt: embeds the passage and demands a JSON object
// {"topics": [...]}. One sample, deterministic decoding.
ChatRequest render_topic_prompt(const DocumentChunk& chunk);

struct GenerationPromptOptions {
    double temperature = 1.0;
    int n_samples = 5;
    int max_tokens = 512;
};

// Question-generation prompt. Few-shot examples are serialized before the
// passage/topic block, so every prompt of one (style, combo) shares an
// identical prefix through the examples block regardless of topic.
ChatRequest render_generation_prompt(const DocumentChunk& chunk,
                                     const std::vector<Topic>& topics,
                                     const Topic& selected,
                                     const std::vector<ExpertQA>& fewshot,
                                     const GenerationPromptOptions& options = {});

// Rewrites a question to match the style of the given examples (>= 1).
ChatRequest render_paraphrase_prompt(const std::string& question,
                                     const std::vector<ExpertQA>& examples);

// Instruction-quality transcript: passage as the user turn, the question as
// the assistant turn to be scored.
RewardRequest render_reward_transcript(const std::string& passage,
                                       const std::string& question);

// Forced-choice classification over the six Bloom levels.
ChatRequest render_bloom_prompt(const std::string& question);

// Extracts the {"topics": [...]} object from a completion, tolerating
// surrounding prose, code fences and single-quoted pseudo-JSON. Labels are
// lowercased and deduplicated, preserving first occurrence order.
std::vector<Topic> parse_topics(const std::string& completion);

// --- Provider contract ------------------------------------------------------

struct ProviderUsage {
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
};

class Provider {
public:
    virtual ~Provider() = default;
    virtual std::vector<std::string> chat(const ChatRequest& request, ProviderUsage& usage) = 0;
    virtual double score(const RewardRequest& request, ProviderUsage& usage) = 0;
    virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts,
                                                   ProviderUsage& usage) = 0;
    virtual std::string name() const = 0;
};

struct RetryPolicy {
    int attempts = 3;
    int base_delay_ms = 250;
    bool jitter = true;
};

struct GatewayStats {
    std::size_t chat_calls = 0;
    std::size_t score_calls = 0;
    std::size_t embed_calls = 0;
    std::size_t cache_hits = 0;
    std::size_t retries = 0;
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
};

// Single entry point for all model calls. Wraps a Provider with retry,
// an optional on-disk response cache (JSONL keyed by request hash) and call
// accounting. Thread-safe; calls from worker threads may run concurrently.
class Gateway {
public:
    Gateway(std::shared_ptr<Provider> provider, RetryPolicy retry = {},
            std::optional<std::filesystem::path> cache_path = std::nullopt,
            std::uint64_t seed = 0);

    // Returns exactly request.n_samples completions.
    std::vector<std::string> chat(const ChatRequest& request);

    double score(const RewardRequest& request);

    // One record per input text; all vectors share the provider dimension.
    std::vector<EmbeddingRecord> embed(const std::vector<std::string>& owner_ids,
                                       const std::vector<std::string>& texts);
    std::vector<EmbeddingRecord> embed(const std::vector<std::string>& texts);

    GatewayStats stats() const;
    std::string provider_name() const { return provider_->name(); }

private:
    std::string cached_lookup(const std::string& key);
    void cache_store(const std::string& key, const std::string& kind,
                     const std::string& payload);
    void sleep_backoff(int attempt);

    template <typename Fn>
    auto with_retry(const char* what, Fn&& fn) -> decltype(fn());

    std::shared_ptr<Provider> provider_;
    RetryPolicy retry_;
    std::optional<std::filesystem::path> cache_path_;
    std::unordered_map<std::string, std::string> cache_;
    mutable std::mutex mutex_;
    GatewayStats stats_;
    std::uint64_t seed_;
    std::size_t embed_dim_ = 0;  // pinned on first embed; later calls must match
};

// Runs fn(i) for i in [0, count) on up to max_in_flight worker threads.
// Rethrows the first exception after all workers finish.
void parallel_for(std::size_t count, std::size_t max_in_flight,
                  const std::function<void(std::size_t)>& fn);

}  // namespace expertgen
