#include "expertgen/gateway.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "expertgen/errors.hpp"
#include "expertgen/util.hpp"

namespace expertgen {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string ChatRequest::canonical() const {
    ordered_json j;
    j["system"] = system.has_value() ? json(*system) : json(nullptr);
    json msgs = json::array();
    for (const auto& m : messages) {
        msgs.push_back({{"role", m.role}, {"content", m.content}});
    }
    j["messages"] = msgs;
    j["temperature"] = temperature;
    j["n_samples"] = n_samples;
    j["max_tokens"] = max_tokens;
    return j.dump();
}

std::string RewardRequest::canonical() const {
    json msgs = json::array();
    for (const auto& m : transcript) {
        msgs.push_back({{"role", m.role}, {"content", m.content}});
    }
    ordered_json j;
    j["transcript"] = msgs;
    return j.dump();
}

// --- Templates ---------------------------------------------------------------

namespace {

constexpr const char* kTopicInstruction =
    "Please analyze the given passage and identify its main topics. Provide your "
    "response in JSON format where the key is 'topics' and its value is an array "
    "of the main topic names. For example:\n\n{\n'topics': ['topic1', 'topic2', "
    "'topic3']\n}";

std::string fewshot_block(const std::vector<ExpertQA>& fewshot) {
    std::string out;
    for (const auto& qa : fewshot) {
        out += "Question: " + qa.question + "\n";
        out += "Answer: " + qa.answer + "\n\n";
    }
    return out;
}

}  // namespace

ChatRequest render_topic_prompt(const DocumentChunk& chunk) {
    if (chunk.text.empty()) {
        throw ContractError("render_topic_prompt: chunk text must be non-empty");
    }
    ChatRequest request;
    std::string content = "Passage: " + chunk.text + "\n\n-----\n\n" + kTopicInstruction;
    request.messages.push_back({"user", std::move(content)});
    request.temperature = 0.0;
    request.n_samples = 1;
    return request;
}

ChatRequest render_generation_prompt(const DocumentChunk& chunk,
                                     const std::vector<Topic>& topics,
                                     const Topic& selected,
                                     const std::vector<ExpertQA>& fewshot,
                                     const GenerationPromptOptions& options) {
    if (std::find(topics.begin(), topics.end(), selected) == topics.end()) {
        throw ContractError("render_generation_prompt: selected topic '" + selected +
                            "' is not among the chunk's topics");
    }
    std::string topic_lines;
    for (const auto& t : topics) {
        topic_lines += "- " + t + "\n";
    }
    // Examples first: the prompt prefix through the examples block is shared
    // across every topic of one combo, which is what makes provider-side
    // prefix caching effective over the innermost topic loop.
    std::string content = fewshot_block(fewshot);
    content += "Passage: " + chunk.text + "\n\n-----\n\n";
    content += "The passage above covers the following topics:\n" + topic_lines + "\n";
    content += "Generate a question from the passage related to '" + selected + "'.";

    ChatRequest request;
    request.messages.push_back({"user", std::move(content)});
    request.temperature = options.temperature;
    request.n_samples = options.n_samples;
    request.max_tokens = options.max_tokens;
    return request;
}

ChatRequest render_paraphrase_prompt(const std::string& question,
                                     const std::vector<ExpertQA>& examples) {
    if (examples.empty()) {
        throw ContractError("render_paraphrase_prompt: at least one example required");
    }
    std::string example_lines;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        if (i > 0) example_lines += "\n\n";
        example_lines += examples[i].question;
    }
    std::string content = "<target_question>\n" + question + "\n</target_question>\n\n";
    content += "<examples>\n" + example_lines + "\n</examples>\n\n";
    content +=
        "Please paraphrase the target question to match the style of the examples. "
        "Do not make any changes that would alter the meaning and change its answer. "
        "Do not answer the question. Respond with only the rephrased question "
        "(without any tags).";
    ChatRequest request;
    request.messages.push_back({"user", std::move(content)});
    request.temperature = 0.0;
    request.n_samples = 1;
    return request;
}

RewardRequest render_reward_transcript(const std::string& passage,
                                       const std::string& question) {
    RewardRequest request;
    request.transcript.push_back(
        {"system",
         "A chat between a curious user and an artificial intelligence assistant. The "
         "assistant gives helpful, detailed, and polite answers to the user's questions."});
    request.transcript.push_back(
        {"user", "Passage: " + passage + "\n-----\nPlease generate a question from the passage above."});
    request.transcript.push_back({"assistant", question});
    return request;
}

ChatRequest render_bloom_prompt(const std::string& question) {
    if (question.empty()) {
        throw ContractError("render_bloom_prompt: question must be non-empty");
    }
    std::string content = "Question: " + question + "\n\n";
    content +=
        "Classify the question above into exactly one level of Bloom's Revised "
        "Taxonomy. Respond with only one word from: Remember, Understand, Apply, "
        "Analyze, Evaluate, Create.";
    ChatRequest request;
    request.messages.push_back({"user", std::move(content)});
    request.temperature = 0.0;
    request.n_samples = 1;
    request.max_tokens = 8;
    return request;
}

// --- Topic parsing -----------------------------------------------------------

namespace {

std::optional<std::vector<Topic>> topics_from_json(const json& value) {
    if (!value.is_object() || !value.contains("topics")) return std::nullopt;
    const json& arr = value.at("topics");
    if (!arr.is_array()) return std::nullopt;
    std::vector<Topic> out;
    for (const auto& item : arr) {
        if (!item.is_string()) return std::nullopt;
        std::string label = normalize_label(item.get<std::string>());
        if (label.empty()) continue;
        if (std::find(out.begin(), out.end(), label) == out.end()) {
            out.push_back(std::move(label));
        }
    }
    return out;
}

// Tries every balanced {...} substring starting at each '{'.
std::optional<std::vector<Topic>> scan_for_topics(const std::string& text) {
    for (std::size_t start = 0; start < text.size(); ++start) {
        if (text[start] != '{') continue;
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        for (std::size_t i = start; i < text.size(); ++i) {
            char c = text[i];
            if (in_string) {
                if (escaped) {
                    escaped = false;
                } else if (c == '\\') {
                    escaped = true;
                } else if (c == '"') {
                    in_string = false;
                }
                continue;
            }
            if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}') {
                --depth;
                if (depth == 0) {
                    json candidate = json::parse(text.substr(start, i - start + 1), nullptr, false);
                    if (!candidate.is_discarded()) {
                        if (auto topics = topics_from_json(candidate)) return topics;
                    }
                    break;
                }
            }
        }
    }
    return std::nullopt;
}

}  // namespace

std::vector<Topic> parse_topics(const std::string& completion) {
    if (auto topics = scan_for_topics(completion)) {
        return *topics;
    }
    // The template's example uses single quotes; models occasionally echo it.
    if (completion.find('\'') != std::string::npos) {
        std::string swapped = completion;
        std::replace(swapped.begin(), swapped.end(), '\'', '"');
        if (auto topics = scan_for_topics(swapped)) {
            return *topics;
        }
    }
    throw TopicParseError("no JSON object with a 'topics' string array found in completion");
}

// --- Gateway -----------------------------------------------------------------

Gateway::Gateway(std::shared_ptr<Provider> provider, RetryPolicy retry,
                 std::optional<std::filesystem::path> cache_path, std::uint64_t seed)
    : provider_(std::move(provider)),
      retry_(retry),
      cache_path_(std::move(cache_path)),
      seed_(seed) {
    if (retry_.attempts < 1) retry_.attempts = 1;
    if (cache_path_ && std::filesystem::exists(*cache_path_)) {
        std::ifstream in(*cache_path_);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            json record = json::parse(line, nullptr, false);
            if (record.is_discarded() || !record.contains("key") || !record.contains("payload")) {
                continue;  // tolerate a torn trailing line from an interrupted run
            }
            cache_[record.at("key").get<std::string>()] = record.at("payload").dump();
        }
    }
}

std::string Gateway::cached_lookup(const std::string& key) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = cache_.find(key);
    if (it == cache_.end()) return {};
    ++stats_.cache_hits;
    return it->second;
}

void Gateway::cache_store(const std::string& key, const std::string& kind,
                          const std::string& payload) {
    std::lock_guard<std::mutex> lock(mutex_);
    cache_[key] = payload;
    if (cache_path_) {
        std::ofstream out(*cache_path_, std::ios::app);
        ordered_json record;
        record["key"] = key;
        record["kind"] = kind;
        record["payload"] = json::parse(payload);
        out << record.dump() << "\n";
    }
}

void Gateway::sleep_backoff(int attempt) {
    if (retry_.base_delay_ms <= 0) return;
    double delay = retry_.base_delay_ms * std::pow(2.0, attempt);
    if (retry_.jitter) {
        std::uint64_t j;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            seed_ = derive_seed(seed_, "backoff");
            j = seed_;
        }
        delay *= 0.5 + 0.5 * static_cast<double>(j % 1000) / 1000.0;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long>(delay)));
}

template <typename Fn>
auto Gateway::with_retry(const char* what, Fn&& fn) -> decltype(fn()) {
    std::string last_error;
    for (int attempt = 0; attempt < retry_.attempts; ++attempt) {
        if (attempt > 0) {
            {
                std::lock_guard<std::mutex> lock(mutex_);
                ++stats_.retries;
            }
            sleep_backoff(attempt - 1);
        }
        try {
            return fn();
        } catch (const ProviderError& e) {
            last_error = e.what();
        }
    }
    std::ostringstream msg;
    msg << what << " failed after " << retry_.attempts << " attempts: " << last_error;
    throw ProviderError(msg.str());
}

std::vector<std::string> Gateway::chat(const ChatRequest& request) {
    if (request.messages.empty()) {
        throw ContractError("chat: messages must be non-empty");
    }
    if (request.n_samples < 1) {
        throw ContractError("chat: n_samples must be >= 1");
    }
    const std::string key = "chat:" + hex16(fnv1a64(request.canonical()));
    if (std::string hit = cached_lookup(key); !hit.empty()) {
        return json::parse(hit).get<std::vector<std::string>>();
    }
    ProviderUsage usage;
    auto samples = with_retry("chat", [&] { return provider_->chat(request, usage); });
    if (static_cast<int>(samples.size()) != request.n_samples) {
        throw ProviderError("chat: provider returned " + std::to_string(samples.size()) +
                            " samples, expected " + std::to_string(request.n_samples));
    }
    if (usage.prompt_tokens == 0) {
        for (const auto& m : request.messages) usage.prompt_tokens += count_tokens(m.content);
    }
    if (usage.completion_tokens == 0) {
        for (const auto& s : samples) usage.completion_tokens += count_tokens(s);
    }
    {
        std::lock_guard<std::mutex> lock(mutex_);
        ++stats_.chat_calls;
        stats_.prompt_tokens += usage.prompt_tokens;
        stats_.completion_tokens += usage.completion_tokens;
    }
    cache_store(key, "chat", json(samples).dump());
    return samples;
}

double Gateway::score(const RewardRequest& request) {
    if (request.transcript.empty() || request.transcript.back().role != "assistant") {
        throw ContractError("score: transcript must end with an assistant turn");
    }
    const std::string key = "score:" + hex16(fnv1a64(request.canonical()));
    if (std::string hit = cached_lookup(key); !hit.empty()) {
        return json::parse(hit).get<double>();
    }
    ProviderUsage usage;
    double value = with_retry("score", [&] { return provider_->score(request, usage); });
    if (usage.prompt_tokens == 0) {
        for (const auto& m : request.transcript) usage.prompt_tokens += count_tokens(m.content);
    }
    {
        std::lock_guard<std::mutex> lock(mutex_);
        ++stats_.score_calls;
        stats_.prompt_tokens += usage.prompt_tokens;
    }
    cache_store(key, "score", json(value).dump());
    return value;
}

std::vector<EmbeddingRecord> Gateway::embed(const std::vector<std::string>& owner_ids,
                                            const std::vector<std::string>& texts) {
    if (owner_ids.size() != texts.size()) {
        throw ContractError("embed: owner_ids and texts must have equal length");
    }
    const std::string key = "embed:" + hex16(fnv1a64(json(texts).dump()));
    std::vector<std::vector<double>> vectors;
    if (std::string hit = cached_lookup(key); !hit.empty()) {
        vectors = json::parse(hit).get<std::vector<std::vector<double>>>();
    } else {
        ProviderUsage usage;
        vectors = with_retry("embed", [&] { return provider_->embed(texts, usage); });
        if (vectors.size() != texts.size()) {
            throw ProviderError("embed: provider returned " + std::to_string(vectors.size()) +
                                " vectors, expected " + std::to_string(texts.size()));
        }
        for (std::size_t i = 1; i < vectors.size(); ++i) {
            if (vectors[i].size() != vectors[0].size()) {
                throw ProviderError("embed: provider returned mixed dimensions");
            }
        }
        if (!vectors.empty()) {
            std::lock_guard<std::mutex> lock(mutex_);
            if (embed_dim_ == 0) {
                embed_dim_ = vectors[0].size();
            } else if (vectors[0].size() != embed_dim_) {
                throw ProviderError("embed: dimension " + std::to_string(vectors[0].size()) +
                                    " does not match this session's dimension " +
                                    std::to_string(embed_dim_));
            }
        }
        if (usage.prompt_tokens == 0) {
            for (const auto& t : texts) usage.prompt_tokens += count_tokens(t);
        }
        {
            std::lock_guard<std::mutex> lock(mutex_);
            ++stats_.embed_calls;
            stats_.prompt_tokens += usage.prompt_tokens;
        }
        cache_store(key, "embed", json(vectors).dump());
    }
    std::vector<EmbeddingRecord> records;
    records.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        records.push_back({owner_ids[i], vectors[i]});
    }
    return records;
}

std::vector<EmbeddingRecord> Gateway::embed(const std::vector<std::string>& texts) {
    std::vector<std::string> ids;
    ids.reserve(texts.size());
    for (const auto& t : texts) ids.push_back(hex16(fnv1a64(t)));
    return embed(ids, texts);
}

GatewayStats Gateway::stats() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return stats_;
}

void parallel_for(std::size_t count, std::size_t max_in_flight,
                  const std::function<void(std::size_t)>& fn) {
    if (count == 0) return;
    std::size_t workers = std::min<std::size_t>(std::max<std::size_t>(max_in_flight, 1), count);
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&] {
            while (true) {
                std::size_t i = next.fetch_add(1);
                if (i >= count) break;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace expertgen
