#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "expertgen/corpus.hpp"
#include "expertgen/gateway.hpp"

namespace expertgen {

enum class Pipeline { expertgenqa, fewshot, template_bank };

std::string to_string(Pipeline pipeline);
Pipeline pipeline_from_string(const std::string& name);

struct GeneratedQA {
    std::string id;
    std::string question;
    std::optional<std::string> answer;
    std::string source_chunk_id;
    std::optional<StyleName> style;   // set for expertgenqa
    std::optional<Topic> topic;       // set for expertgenqa
    int combo_id = 0;                 // few-shot combo / attempt / template id (1-based)
    int sample_idx = 0;               // in [0, n_samples)
    Pipeline pipeline = Pipeline::expertgenqa;
};

// One prompt variant of the template baseline: a question type crossed with
// an answer-length and style directive.
struct PromptTemplate {
    std::string question_type;
    std::string answer_length;
    std::string style_directive;

    std::string render_instruction() const;
};

struct TemplateBank {
    std::vector<PromptTemplate> templates;

    static TemplateBank cross(const std::vector<std::string>& question_types,
                              const std::vector<std::string>& answer_lengths,
                              const std::vector<std::string>& style_directives);
    static TemplateBank default_bank();
};

struct GenerationConfig {
    int combos_per_style = 1;      // K of the protocol; attempts/draws for baselines
    int fewshot_n = 0;             // n: examples per combination
    int n_samples = 5;
    double temperature = 1.0;
    int max_tokens = 512;
    std::vector<StyleName> styles = default_styles();
    // When false, a style with fewer than fewshot_n expert examples is dropped
    // with a warning instead of failing the run.
    bool strict_styles = false;
    TemplateBank template_bank = TemplateBank::default_bank();
    std::uint64_t seed = 0;
    std::size_t max_in_flight = 8;
};

struct RunReport {
    std::size_t calls_attempted = 0;
    std::size_t calls_failed = 0;
    std::size_t records_emitted = 0;
    std::size_t chunks_skipped = 0;
    std::vector<std::string> warnings;
    double wall_time_seconds = 0.0;
};

// On-disk topic cache (topics.jsonl: {chunk_id, topics} per line) so topic
// extraction cost is paid once per corpus.
class TopicStore {
public:
    TopicStore() = default;
    explicit TopicStore(std::filesystem::path path);

    std::optional<std::vector<Topic>> lookup(const std::string& chunk_id) const;
    void store(const std::string& chunk_id, const std::vector<Topic>& topics);
    std::size_t size() const { return topics_.size(); }

private:
    std::optional<std::filesystem::path> path_;
    std::map<std::string, std::vector<Topic>> topics_;
};

class Generator {
public:
    Generator(Gateway& gateway, GenerationConfig config, TopicStore* topic_store = nullptr);

    // LLM topic extraction with one retry on unparseable output; cached
    // results short-circuit the call. Throws TopicParseError when both
    // attempts fail.
    std::vector<Topic> extract_topics(const DocumentChunk& chunk);

    // n distinct style-matching examples, deterministic under seed.
    static std::vector<ExpertQA> sample_fewshot(const std::vector<ExpertQA>& pool,
                                                const StyleName& style, int n,
                                                std::uint64_t seed);

    // The K per-style few-shot combinations, sampled once per run so every
    // prompt of one (style, combo) shares its example prefix. Distinct combos
    // of one style must differ as sets; after 20 resample attempts a
    // collision is accepted with a warning.
    std::map<StyleName, std::vector<std::vector<ExpertQA>>> sample_combos(
        const std::vector<ExpertQA>& pool, RunReport& report) const;

    // The dual-categorization loop: for each chunk d, style s, combo k and
    // topic t (innermost), one generation call with n_samples completions.
    std::vector<GeneratedQA> run_expertgenqa(const std::vector<DocumentChunk>& chunks,
                                             const std::vector<ExpertQA>& pool,
                                             RunReport& report);

    // Per chunk and attempt, n examples sampled from the whole pool ignoring
    // style; no topic conditioning. combos_per_style doubles as the number of
    // attempts per chunk.
    std::vector<GeneratedQA> run_fewshot_baseline(const std::vector<DocumentChunk>& chunks,
                                                  const std::vector<ExpertQA>& pool,
                                                  RunReport& report);

    // Per chunk and draw, one sweep of the template bank in seeded order;
    // combo_id records the 1-based template id.
    std::vector<GeneratedQA> run_template_baseline(const std::vector<DocumentChunk>& chunks,
                                                   RunReport& report);

    const GenerationConfig& config() const { return config_; }

private:
    std::vector<Topic> extract_topics_inner(const DocumentChunk& chunk);

    Gateway& gateway_;
    GenerationConfig config_;
    TopicStore* topic_store_;
};

// Canonical order: (doc_id, seq, style, combo_id, topic, sample_idx); output
// is deterministic regardless of generation scheduling.
void sort_canonical(std::vector<GeneratedQA>& records,
                    const std::vector<DocumentChunk>& chunks);

void save_generated(const std::filesystem::path& path, const std::vector<GeneratedQA>& records);
std::vector<GeneratedQA> load_generated(const std::filesystem::path& path);

void save_run_report(const std::filesystem::path& path, const RunReport& report,
                     const GatewayStats& stats);

}  // namespace expertgen
