#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "expertgen/gateway.hpp"

namespace expertgen {

struct MockOptions {
    std::uint64_t seed = 0;
    std::size_t embedding_dim = 64;
    // Probability that a generated question is drawn from a small pool of
    // near-duplicate stock questions instead of a fresh one. Gives dedup
    // something to chew on in offline runs.
    double duplicate_rate = 0.25;
};

// Deterministic offline provider: every response is a pure function of the
// request content and the global seed. Recognizes the library's own prompt
// templates so the full pipeline can run without a live endpoint:
//   - topic prompts yield a JSON topic list (a "topics=N" marker in the
//     passage forces exactly N topics, otherwise the count is hash-derived);
//   - generation prompts yield questions synthesized from the chunk text,
//     selected topic and request hash;
//   - Bloom prompts are answered by a keyword heuristic over the question;
//   - paraphrase prompts echo a reworded target question;
//   - anything else gets a deterministic synthetic answer.
class MockProvider : public Provider {
public:
    explicit MockProvider(MockOptions options = {});

    std::vector<std::string> chat(const ChatRequest& request, ProviderUsage& usage) override;
    double score(const RewardRequest& request, ProviderUsage& usage) override;
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts,
                                           ProviderUsage& usage) override;
    std::string name() const override { return "mock"; }

private:
    std::string make_topics_reply(const std::string& prompt, std::uint64_t request_hash) const;
    std::string make_question(const std::string& prompt, std::uint64_t request_hash,
                              int sample_idx) const;
    std::string make_answer(std::uint64_t request_hash, int sample_idx) const;

    MockOptions options_;
};

// Keyword heuristic used by the mock to answer Bloom classification prompts.
// Exposed so tests can pin its behaviour against a hand-labeled fixture.
std::string bloom_keyword_heuristic(const std::string& question);

struct HttpProviderOptions {
    std::string base_url;        // e.g. https://api.openai.com
    std::string chat_model;
    std::string embedding_model;
    std::string reward_model;
    std::string reward_url;      // defaults to base_url when empty
    std::string api_key;
    int timeout_seconds = 120;
};

// OpenAI-compatible endpoints: POST /v1/chat/completions (n = n_samples),
// POST /v1/embeddings, and a reward contract POST /v1/score that accepts
// {model, messages} and returns {score}. Transport failures surface as
// ProviderError; the gateway drives retries.
class HttpProvider : public Provider {
public:
    explicit HttpProvider(HttpProviderOptions options);

    std::vector<std::string> chat(const ChatRequest& request, ProviderUsage& usage) override;
    double score(const RewardRequest& request, ProviderUsage& usage) override;
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts,
                                           ProviderUsage& usage) override;
    std::string name() const override { return "openai"; }

private:
    std::string post_json(const std::string& url_base, const std::string& path,
                          const std::string& body) const;

    HttpProviderOptions options_;
};

}  // namespace expertgen
