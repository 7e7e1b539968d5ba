#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "expertgen/corpus.hpp"
#include "expertgen/gateway.hpp"
#include "expertgen/generator.hpp"

namespace expertgen {

struct EfficiencyStat {
    std::string pipeline;
    int n_shots = 0;
    std::size_t llm_calls = 0;          // total sampled generations
    std::size_t unique_after_dedup = 0;
    double efficiency = 0.0;            // unique / calls
};

// calls > 0, 0 <= unique <= calls. Exact division; serialization reports the
// ratio to 4 decimal places.
EfficiencyStat efficiency(std::size_t calls, std::size_t unique, const std::string& pipeline = "",
                          int n_shots = 0);

struct DocCoverage {
    std::size_t covered = 0;
    std::size_t total = 0;
};

struct CoverageStat {
    std::map<std::string, DocCoverage> per_doc;  // doc_id -> counts
    double tc = 0.0;                             // mean over docs of covered/total
    std::vector<std::string> warnings;           // zero-topic docs excluded from the mean
    std::string attribution;                     // "provenance" or "substring"
};

// TC over documents: a doc's topic set is the union of its chunks' topics;
// a topic counts as covered when at least one surviving question touches it.
// Questions with topic provenance use it directly; records without provenance
// (the baselines) fall back to case-insensitive substring attribution of the
// topic label against the question text.
CoverageStat topic_coverage(const std::vector<DocumentChunk>& chunks_with_topics,
                            const std::vector<GeneratedQA>& generated);

enum class BloomLevel { remember, understand, apply, analyze, evaluate, create };

constexpr std::array<BloomLevel, 6> kBloomLevels = {
    BloomLevel::remember, BloomLevel::understand, BloomLevel::apply,
    BloomLevel::analyze,  BloomLevel::evaluate,   BloomLevel::create,
};

std::string to_string(BloomLevel level);
std::optional<BloomLevel> bloom_level_from_string(const std::string& name);

struct BloomLabel {
    std::string question_id;
    BloomLevel level = BloomLevel::understand;
    // Set when the classifier reply was unparseable after a retry; such rows
    // are excluded from the headline histogram.
    bool uncertain = false;
};

// LLM-backed forced-choice classification (the mock answers with a keyword
// heuristic). One retry on an unparseable label, then understand+uncertain.
BloomLabel classify_bloom(Gateway& gateway, const std::string& question_id,
                          const std::string& question);

struct BloomHistogram {
    std::map<std::string, std::size_t> counts;  // level name -> count, all six present
    std::size_t classified = 0;                 // rows in counts
    std::size_t uncertain = 0;                  // excluded rows
};

BloomHistogram bloom_histogram(const std::vector<BloomLabel>& labels);

struct PreferenceStat {
    std::string question_id;
    std::vector<double> rewards;       // |rewards| = N
    double chosen_reward = 0.0;        // max, ties broken by lowest sample index
    double rejected_reward = 0.0;      // min, same tie rule
    int chosen_idx = 0;
    int rejected_idx = 0;
    double rejected_length_ratio = 0.0;  // len(y_l) / len(x)
    double reward_gap = 0.0;             // chosen - rejected, always >= 0
    bool incomplete = false;             // scoring failed; excluded from aggregates
};

enum class LengthUnit { tokens, characters };

struct PreferenceOptions {
    int n_responses = 10;
    double temperature = 1.0;
    int max_tokens = 512;
    LengthUnit length_unit = LengthUnit::tokens;
    // Whether len(x) covers the context passage as well as the question.
    bool length_includes_context = true;
};

// Pure core: picks chosen/rejected from given rewards and response lengths.
PreferenceStat make_preference_stat(const std::string& question_id,
                                    const std::vector<double>& rewards,
                                    const std::vector<std::size_t>& response_lengths,
                                    std::size_t x_length);

// Samples N responses to the context-question x, scores each with the reward
// endpoint, and reduces via make_preference_stat.
PreferenceStat preference_metrics(Gateway& gateway, const std::string& question_id,
                                  const std::string& context, const std::string& question,
                                  const PreferenceOptions& options = {});

struct PreferenceAggregate {
    std::size_t count = 0;  // complete stats only
    double mean_rejected_reward = 0.0;
    double mean_rejected_length_ratio = 0.0;
    double mean_reward_gap = 0.0;
};

PreferenceAggregate aggregate_preferences(const std::vector<PreferenceStat>& stats);

struct MetricsReport {
    std::optional<EfficiencyStat> efficiency;
    std::optional<CoverageStat> coverage;
    std::optional<BloomHistogram> bloom;
    std::optional<PreferenceAggregate> preference;
    nlohmann::ordered_json retrieval;  // top-k table from the eval stage, may be null
    nlohmann::ordered_json config_echo;
};

// Deterministic field ordering; a pure function of its inputs. At least one
// stat family must be present.
nlohmann::ordered_json aggregate_report(const MetricsReport& report);

// Structural check used by the report stage and the end-to-end smoke test.
void validate_report_schema(const nlohmann::json& report);

void write_bloom_csv(const std::filesystem::path& path, const std::vector<BloomLabel>& labels);
void write_preference_csv(const std::filesystem::path& path,
                          const std::vector<PreferenceStat>& stats);

}  // namespace expertgen
