#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "expertgen/errors.hpp"
#include "expertgen/providers.hpp"
#include "expertgen/util.hpp"

namespace expertgen {

namespace {

const std::array<const char*, 64> kVocab = {
    "inspection",  "crossing",   "signal",     "brake",      "track",      "reporting",
    "employee",    "incident",   "railcar",    "maintenance", "compliance", "operator",
    "fatigue",     "clearance",  "ballast",    "switch",      "dispatcher", "locomotive",
    "freight",     "passenger",  "yard",       "siding",      "coupler",    "derailment",
    "grade",       "trespasser", "injury",     "illness",     "record",     "form",
    "penalty",     "waiver",     "audit",      "threshold",   "damage",     "equipment",
    "crew",        "shift",      "hours",      "service",     "bridge",     "tunnel",
    "crossing-gate", "horn",     "whistle",    "speed",       "restriction", "zone",
    "inspection-log", "defect",  "repair",     "certification", "training", "qualification",
    "supervisor",  "region",     "district",   "filing",      "deadline",   "amendment",
    "exception",   "definition", "procedure",  "notification",
};

const std::array<const char*, 5> kOpeners = {"what", "how", "when", "which", "where"};

// Stock questions with one jittered slot each; drawing the same template with
// different fills yields near-duplicates that a 0.3 bigram threshold removes.
struct StockTemplate {
    const char* prefix;
    std::array<const char*, 3> fills;
    const char* suffix;
};

const std::array<StockTemplate, 8> kStock = {{
    {"what is the required form for reporting a", {"grade", "rail", "yard"}, "crossing incident"},
    {"how should a railroad document an", {"employee", "operator", "contractor"}, "injury that occurs on duty"},
    {"when must the monthly report be filed after a", {"minor", "major", "serious"}, "equipment accident"},
    {"what does the term", {"reportable", "accountable", "recordable"}, "injury mean under the rule"},
    {"which records must be kept for a", {"signal", "track", "bridge"}, "inspection failure"},
    {"how is the damage threshold calculated for a", {"freight", "passenger", "work"}, "train derailment"},
    {"what notification is required when a", {"crew member", "supervisor", "dispatcher"}, "is removed from service"},
    {"when is a case considered work related for an employee on a", {"rest day", "travel day", "split shift"}, ""},
}};

std::string slice_between(const std::string& text, const std::string& open,
                          const std::string& close) {
    auto start = text.find(open);
    if (start == std::string::npos) return {};
    start += open.size();
    auto end = text.find(close, start);
    if (end == std::string::npos) return text.substr(start);
    return text.substr(start, end - start);
}

std::optional<int> forced_topic_count(const std::string& passage) {
    auto pos = passage.find("topics=");
    if (pos == std::string::npos) return std::nullopt;
    pos += 7;
    int value = 0;
    bool any = false;
    while (pos < passage.size() && passage[pos] >= '0' && passage[pos] <= '9') {
        value = value * 10 + (passage[pos] - '0');
        ++pos;
        any = true;
    }
    if (!any) return std::nullopt;
    return value;
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    return derive_seed(a, hex16(b));
}

}  // namespace

std::string bloom_keyword_heuristic(const std::string& question) {
    const std::string q = lower_ascii(question);
    auto has = [&](const char* needle) { return q.find(needle) != std::string::npos; };

    if (has("create") || has("design") || has("propose") || has("develop") || has("draft") ||
        has("compose")) {
        return "create";
    }
    if (has("evaluate") || has("justify") || has("assess") || has("critique") ||
        has("recommend") || has("argue")) {
        return "evaluate";
    }
    if (has("analyze") || has("analyse") || has("compare") || has("contrast") || has("why ") ||
        has("differentiate") || has("distinguish") || has("difference")) {
        return "analyze";
    }
    if (has("apply") || has("how should") || has("what should") || has("calculate") ||
        has("demonstrate") || has("scenario") || has("how do i") || has("how do we")) {
        return "apply";
    }
    if (has("explain") || has("describe") || has("summarize") || has("interpret") ||
        has("paraphrase") || has("how does")) {
        return "understand";
    }
    if (has("define") || has("what does") || has("what is") || has("what are") ||
        has(" mean") || has("list ") || has("name ") || has("when is") || has("who ")) {
        return "remember";
    }
    return "understand";
}

MockProvider::MockProvider(MockOptions options) : options_(options) {}

std::string MockProvider::make_topics_reply(const std::string& prompt,
                                            std::uint64_t request_hash) const {
    const std::string passage = slice_between(prompt, "Passage: ", "\n\n-----");
    const std::uint64_t passage_hash = fnv1a64(passage);
    int count;
    if (auto forced = forced_topic_count(passage)) {
        count = *forced;
    } else {
        count = 2 + static_cast<int>(passage_hash % 3);
    }
    Rng rng(mix(options_.seed, mix(passage_hash, request_hash)));
    std::ostringstream out;
    out << "{\"topics\": [";
    for (int i = 0; i < count; ++i) {
        if (i > 0) out << ", ";
        const char* word = kVocab[rng.below(kVocab.size())];
        out << "\"" << word << "-" << hex16(passage_hash).substr(0, 4) << i << "\"";
    }
    out << "]}";
    return out.str();
}

std::string MockProvider::make_question(const std::string& prompt, std::uint64_t request_hash,
                                        int sample_idx) const {
    Rng rng(mix(options_.seed, mix(request_hash, static_cast<std::uint64_t>(sample_idx))));
    if (rng.uniform01() < options_.duplicate_rate) {
        const auto& t = kStock[rng.below(kStock.size())];
        std::string q = t.prefix;
        q += " ";
        q += t.fills[rng.below(t.fills.size())];
        if (*t.suffix) {
            q += " ";
            q += t.suffix;
        }
        q += "?";
        return q;
    }
    const std::string topic = slice_between(prompt, "related to '", "'.");
    std::ostringstream out;
    out << kOpeners[rng.below(kOpeners.size())];
    if (!topic.empty()) out << " about " << topic;
    const std::size_t extra = 6 + rng.below(4);
    for (std::size_t i = 0; i < extra; ++i) {
        out << " " << kVocab[rng.below(kVocab.size())];
    }
    out << " " << hex16(request_hash).substr(0, 6) << sample_idx << "?";
    return out.str();
}

std::string MockProvider::make_answer(std::uint64_t request_hash, int sample_idx) const {
    Rng rng(mix(options_.seed, mix(request_hash, 0x5eed + static_cast<std::uint64_t>(sample_idx))));
    const std::size_t words = 8 + rng.below(16);
    std::ostringstream out;
    out << "The rule provides that";
    for (std::size_t i = 0; i < words; ++i) {
        out << " " << kVocab[rng.below(kVocab.size())];
    }
    out << ".";
    return out.str();
}

std::vector<std::string> MockProvider::chat(const ChatRequest& request, ProviderUsage&) {
    const std::uint64_t request_hash = fnv1a64(request.canonical());
    const std::string& prompt = request.messages.back().content;

    std::vector<std::string> samples;
    samples.reserve(static_cast<std::size_t>(request.n_samples));
    for (int i = 0; i < request.n_samples; ++i) {
        if (prompt.find("identify its main topics") != std::string::npos) {
            samples.push_back(make_topics_reply(prompt, request_hash));
        } else if (prompt.find("Generate a question from the passage related to") !=
                   std::string::npos) {
            samples.push_back(make_question(prompt, request_hash, i));
        } else if (prompt.find("Bloom's Revised Taxonomy") != std::string::npos) {
            const std::string question = slice_between(prompt, "Question: ", "\n\n");
            samples.push_back(bloom_keyword_heuristic(question));
        } else if (prompt.find("<target_question>") != std::string::npos) {
            const std::string target = slice_between(prompt, "<target_question>\n", "\n</target_question>");
            samples.push_back("In other words, " + target);
        } else {
            samples.push_back(make_answer(request_hash, i));
        }
    }
    return samples;
}

double MockProvider::score(const RewardRequest& request, ProviderUsage&) {
    Rng rng(mix(options_.seed, fnv1a64(request.canonical())));
    // Mimics the scale reward models tend to produce for middling responses.
    return -12.0 + 14.0 * rng.uniform01();
}

std::vector<std::vector<double>> MockProvider::embed(const std::vector<std::string>& texts,
                                                     ProviderUsage&) {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        Rng rng(mix(options_.seed, fnv1a64(text)));
        std::vector<double> v(options_.embedding_dim);
        double norm_sq = 0.0;
        for (auto& x : v) {
            x = rng.normal();
            norm_sq += x * x;
        }
        const double inv = 1.0 / std::sqrt(std::max(norm_sq, 1e-12));
        for (auto& x : v) x *= inv;
        out.push_back(std::move(v));
    }
    return out;
}

}  // namespace expertgen
