#include "expertgen/dedup.hpp"

#include <algorithm>
#include <unordered_map>

#include "expertgen/errors.hpp"
#include "expertgen/util.hpp"

namespace expertgen {

OverlapMode overlap_mode_from_string(const std::string& name) {
    if (name == "containment") return OverlapMode::containment;
    if (name == "jaccard") return OverlapMode::jaccard;
    throw ConfigurationError("unknown overlap mode '" + name +
                             "' (expected containment or jaccard)");
}

std::string to_string(OverlapMode mode) {
    return mode == OverlapMode::containment ? "containment" : "jaccard";
}

std::vector<std::string> dedup_tokens(std::string_view text) {
    std::string cleaned;
    cleaned.reserve(text.size());
    for (unsigned char c : text) {
        if (c >= 'A' && c <= 'Z') {
            cleaned.push_back(static_cast<char>(c - 'A' + 'a'));
        } else if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c >= 0x80) {
            cleaned.push_back(static_cast<char>(c));
        } else {
            cleaned.push_back(' ');
        }
    }
    return split_whitespace(cleaned);
}

BigramSet BigramSet::from_text(std::string_view text) {
    BigramSet out;
    const std::vector<std::string> tokens = dedup_tokens(text);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) out.normalized.push_back(' ');
        out.normalized += tokens[i];
    }
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
        out.bigrams.insert(fnv1a64(tokens[i] + "\x1f" + tokens[i + 1]));
    }
    return out;
}

double bigram_overlap(const BigramSet& a, const BigramSet& b, OverlapMode mode) {
    if (a.bigrams.empty() || b.bigrams.empty()) {
        return a.normalized == b.normalized ? 1.0 : 0.0;
    }
    const auto& small = a.bigrams.size() <= b.bigrams.size() ? a.bigrams : b.bigrams;
    const auto& large = a.bigrams.size() <= b.bigrams.size() ? b.bigrams : a.bigrams;
    std::size_t shared = 0;
    for (auto h : small) {
        if (large.count(h)) ++shared;
    }
    if (mode == OverlapMode::containment) {
        return static_cast<double>(shared) / static_cast<double>(small.size());
    }
    const std::size_t unioned = a.bigrams.size() + b.bigrams.size() - shared;
    return static_cast<double>(shared) / static_cast<double>(unioned);
}

double bigram_overlap(std::string_view a, std::string_view b, OverlapMode mode) {
    return bigram_overlap(BigramSet::from_text(a), BigramSet::from_text(b), mode);
}

namespace {

void check_threshold(double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0)) {
        throw ContractError("dedup threshold must be in (0, 1]");
    }
}

// Inverted index over kept questions: bigram hash -> kept slots. Empty-bigram
// questions can never share a bigram, so exact normalized strings are tracked
// separately.
class KeptIndex {
public:
    bool admits(const BigramSet& candidate, double threshold, OverlapMode mode) const {
        if (candidate.bigrams.empty()) {
            // Overlap against any kept item is 1 on an exact normalized match
            // and 0 otherwise, so only the string lookup matters.
            return !normalized_.count(candidate.normalized);
        }
        std::unordered_map<std::size_t, std::size_t> shared_counts;
        for (auto h : candidate.bigrams) {
            auto it = index_.find(h);
            if (it == index_.end()) continue;
            for (std::size_t slot : it->second) ++shared_counts[slot];
        }
        for (const auto& [slot, shared] : shared_counts) {
            const std::size_t kept_size = kept_sizes_[slot];
            double overlap;
            if (mode == OverlapMode::containment) {
                overlap = static_cast<double>(shared) /
                          static_cast<double>(std::min(candidate.bigrams.size(), kept_size));
            } else {
                overlap = static_cast<double>(shared) /
                          static_cast<double>(candidate.bigrams.size() + kept_size - shared);
            }
            if (overlap >= threshold) return false;
        }
        return true;
    }

    void insert(const BigramSet& item) {
        if (item.bigrams.empty()) {
            normalized_.insert(item.normalized);
            return;
        }
        const std::size_t slot = kept_sizes_.size();
        kept_sizes_.push_back(item.bigrams.size());
        for (auto h : item.bigrams) index_[h].push_back(slot);
    }

private:
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> index_;
    std::vector<std::size_t> kept_sizes_;
    std::unordered_set<std::string> normalized_;
};

}  // namespace

std::vector<std::size_t> dedup_within_indices(const std::vector<std::string>& questions,
                                              double threshold, OverlapMode mode) {
    check_threshold(threshold);
    std::vector<std::size_t> kept;
    KeptIndex index;
    for (std::size_t i = 0; i < questions.size(); ++i) {
        BigramSet set = BigramSet::from_text(questions[i]);
        if (index.admits(set, threshold, mode)) {
            index.insert(set);
            kept.push_back(i);
        }
    }
    return kept;
}

std::vector<std::string> dedup_within(const std::vector<std::string>& questions,
                                      double threshold, OverlapMode mode) {
    std::vector<std::string> out;
    for (std::size_t i : dedup_within_indices(questions, threshold, mode)) {
        out.push_back(questions[i]);
    }
    return out;
}

std::vector<std::size_t> dedup_against_indices(const std::vector<std::string>& questions,
                                               const std::vector<std::string>& reference,
                                               double threshold, OverlapMode mode) {
    check_threshold(threshold);
    KeptIndex index;
    for (const auto& ref : reference) {
        index.insert(BigramSet::from_text(ref));
    }
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < questions.size(); ++i) {
        BigramSet set = BigramSet::from_text(questions[i]);
        if (index.admits(set, threshold, mode)) {
            kept.push_back(i);  // reference set stays fixed; survivors are not inserted
        }
    }
    return kept;
}

std::vector<std::string> dedup_against(const std::vector<std::string>& questions,
                                       const std::vector<std::string>& reference,
                                       double threshold, OverlapMode mode) {
    std::vector<std::string> out;
    for (std::size_t i : dedup_against_indices(questions, reference, threshold, mode)) {
        out.push_back(questions[i]);
    }
    return out;
}

}  // namespace expertgen
