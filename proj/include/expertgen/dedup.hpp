#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace expertgen {

enum class OverlapMode {
    // |A ∩ B| / min(|A|, |B|): strict against a long question subsuming a
    // short one. The default.
    containment,
    // |A ∩ B| / |A ∪ B|, available for ablation.
    jaccard,
};

OverlapMode overlap_mode_from_string(const std::string& name);
std::string to_string(OverlapMode mode);

// Lowercased, punctuation-stripped whitespace tokens. ASCII case folding;
// non-ASCII bytes pass through untouched so multi-byte characters stay intact.
std::vector<std::string> dedup_tokens(std::string_view text);

// Bigrams are hashed token pairs; a question with fewer than two tokens has
// an empty set.
struct BigramSet {
    std::unordered_set<std::uint64_t> bigrams;
    std::string normalized;  // tokens joined by single spaces

    static BigramSet from_text(std::string_view text);
};

// Overlap in [0, 1]. When either bigram set is empty the score is 1 if the
// normalized strings are equal and 0 otherwise.
double bigram_overlap(const BigramSet& a, const BigramSet& b,
                      OverlapMode mode = OverlapMode::containment);
double bigram_overlap(std::string_view a, std::string_view b,
                      OverlapMode mode = OverlapMode::containment);

// Greedy scan in input order: a question is kept iff its overlap with every
// previously kept question is below the threshold. Returns kept indices in
// input order. Uses an inverted bigram index so only candidates sharing at
// least one bigram get compared; results equal the naive pairwise scan.
std::vector<std::size_t> dedup_within_indices(const std::vector<std::string>& questions,
                                              double threshold = 0.3,
                                              OverlapMode mode = OverlapMode::containment);

std::vector<std::string> dedup_within(const std::vector<std::string>& questions,
                                      double threshold = 0.3,
                                      OverlapMode mode = OverlapMode::containment);

// Drops any question whose overlap with ANY reference question reaches the
// threshold; order preserved.
std::vector<std::size_t> dedup_against_indices(const std::vector<std::string>& questions,
                                               const std::vector<std::string>& reference,
                                               double threshold = 0.3,
                                               OverlapMode mode = OverlapMode::containment);

std::vector<std::string> dedup_against(const std::vector<std::string>& questions,
                                       const std::vector<std::string>& reference,
                                       double threshold = 0.3,
                                       OverlapMode mode = OverlapMode::containment);

}  // namespace expertgen
