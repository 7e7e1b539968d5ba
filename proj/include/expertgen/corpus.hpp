#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

namespace expertgen {

// Topic labels are stored normalized (lowercased, trimmed).
using Topic = std::string;

// Style names are plain strings validated against the configured style set.
using StyleName = std::string;

inline const std::vector<StyleName>& default_styles() {
    static const std::vector<StyleName> styles = {
        "policy_application",
        "scenario_based",
        "terminology_clarification",
    };
    return styles;
}

struct DocumentChunk {
    std::string id;      // content-addressed from (doc_id, seq, text)
    std::string doc_id;
    std::uint64_t seq = 0;
    std::string text;    // whitespace-normalized, non-empty
    std::vector<Topic> topics;  // empty until the generator fills them
};

struct ExpertQA {
    std::string id;
    std::string question;
    std::string answer;
    StyleName style;
    std::vector<std::string> source_chunk_ids;
};

std::string chunk_id_for(const std::string& doc_id, std::uint64_t seq,
                         const std::string& normalized_text);

// Reads chunks.jsonl ({doc_id, seq, text} per line), normalizes whitespace
// and returns chunks sorted by (doc_id, seq). Malformed lines raise
// ParseError with the line number; duplicate (doc_id, seq) raises
// IntegrityError.
std::vector<DocumentChunk> load_corpus(const std::filesystem::path& path);

// Reads expert_qa.jsonl. Styles must come from `allowed_styles`. When
// `known_chunk_ids` is given every source_chunk_id must resolve.
std::vector<ExpertQA> load_expert_pool(
    const std::filesystem::path& path,
    const std::vector<StyleName>& allowed_styles,
    const std::unordered_set<std::string>* known_chunk_ids = nullptr);

void save_corpus(const std::filesystem::path& path,
                 const std::vector<DocumentChunk>& chunks);

void save_expert_pool(const std::filesystem::path& path,
                      const std::vector<ExpertQA>& pool);

struct PoolSplit {
    std::vector<ExpertQA> train;
    std::vector<ExpertQA> test;
};

// Disjoint, exhaustive partition; deterministic under seed. test_fraction in
// [0, 1]; 1.0 puts the whole pool in the test side.
PoolSplit split_pool(const std::vector<ExpertQA>& pool, double test_fraction,
                     std::uint64_t seed);

// Convenience splitter for raw document text: breaks at blank-line
// boundaries, packing paragraphs into chunks of at most max_chars.
std::vector<std::string> chunk_text(const std::string& raw_text,
                                    std::size_t max_chars = 4000);

}  // namespace expertgen
