#include "expertgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "expertgen/errors.hpp"
#include "expertgen/util.hpp"

namespace expertgen {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

EfficiencyStat efficiency(std::size_t calls, std::size_t unique, const std::string& pipeline,
                          int n_shots) {
    if (calls == 0) {
        throw ContractError("efficiency: calls must be positive");
    }
    if (unique > calls) {
        throw ContractError("efficiency: unique cannot exceed calls");
    }
    EfficiencyStat stat;
    stat.pipeline = pipeline;
    stat.n_shots = n_shots;
    stat.llm_calls = calls;
    stat.unique_after_dedup = unique;
    stat.efficiency = static_cast<double>(unique) / static_cast<double>(calls);
    return stat;
}

CoverageStat topic_coverage(const std::vector<DocumentChunk>& chunks_with_topics,
                            const std::vector<GeneratedQA>& generated) {
    CoverageStat stat;

    // Doc topic sets = union over that doc's chunks; chunk id -> doc mapping
    // for question attribution.
    std::map<std::string, std::set<Topic>> doc_topics;
    std::unordered_map<std::string, std::string> chunk_doc;
    for (const auto& chunk : chunks_with_topics) {
        auto& topics = doc_topics[chunk.doc_id];
        for (const auto& t : chunk.topics) topics.insert(t);
        chunk_doc[chunk.id] = chunk.doc_id;
    }

    std::map<std::string, std::set<Topic>> covered;
    bool used_substring = false;
    for (const auto& qa : generated) {
        auto doc_it = chunk_doc.find(qa.source_chunk_id);
        if (doc_it == chunk_doc.end()) continue;
        const std::string& doc_id = doc_it->second;
        const auto& topics = doc_topics[doc_id];
        if (qa.topic.has_value()) {
            if (topics.count(*qa.topic)) covered[doc_id].insert(*qa.topic);
        } else {
            // No provenance: attribute by case-insensitive label match in the
            // question text. Imperfect; flagged in the report.
            used_substring = true;
            for (const auto& t : topics) {
                if (contains_ci(qa.question, t)) covered[doc_id].insert(t);
            }
        }
    }

    double sum = 0.0;
    std::size_t counted = 0;
    for (const auto& [doc_id, topics] : doc_topics) {
        if (topics.empty()) {
            stat.warnings.push_back("doc " + doc_id + " has no topics; excluded from TC");
            continue;
        }
        DocCoverage dc;
        dc.total = topics.size();
        auto it = covered.find(doc_id);
        dc.covered = it == covered.end() ? 0 : it->second.size();
        stat.per_doc[doc_id] = dc;
        sum += static_cast<double>(dc.covered) / static_cast<double>(dc.total);
        ++counted;
    }
    stat.tc = counted == 0 ? 0.0 : sum / static_cast<double>(counted);
    stat.attribution = used_substring ? "substring" : "provenance";
    return stat;
}

std::string to_string(BloomLevel level) {
    switch (level) {
        case BloomLevel::remember: return "remember";
        case BloomLevel::understand: return "understand";
        case BloomLevel::apply: return "apply";
        case BloomLevel::analyze: return "analyze";
        case BloomLevel::evaluate: return "evaluate";
        case BloomLevel::create: return "create";
    }
    return "understand";
}

std::optional<BloomLevel> bloom_level_from_string(const std::string& name) {
    const std::string n = lower_ascii(normalize_whitespace(name));
    for (BloomLevel level : kBloomLevels) {
        if (n == to_string(level)) return level;
    }
    return std::nullopt;
}

namespace {

std::optional<BloomLevel> parse_bloom_reply(const std::string& reply) {
    if (auto exact = bloom_level_from_string(reply)) return exact;
    // Tolerate prose like "The level is: Apply." by scanning for the first
    // label mention.
    const std::string lowered = lower_ascii(reply);
    std::size_t best_pos = std::string::npos;
    std::optional<BloomLevel> best;
    for (BloomLevel level : kBloomLevels) {
        std::size_t pos = lowered.find(to_string(level));
        if (pos != std::string::npos && pos < best_pos) {
            best_pos = pos;
            best = level;
        }
    }
    return best;
}

}  // namespace

BloomLabel classify_bloom(Gateway& gateway, const std::string& question_id,
                          const std::string& question) {
    if (question.empty()) {
        throw ContractError("classify_bloom: question must be non-empty");
    }
    BloomLabel label;
    label.question_id = question_id;
    ChatRequest request = render_bloom_prompt(question);
    for (int attempt = 0; attempt < 2; ++attempt) {
        auto samples = gateway.chat(request);
        if (auto level = parse_bloom_reply(samples.at(0))) {
            label.level = *level;
            return label;
        }
    }
    label.level = BloomLevel::understand;
    label.uncertain = true;
    return label;
}

BloomHistogram bloom_histogram(const std::vector<BloomLabel>& labels) {
    BloomHistogram hist;
    for (BloomLevel level : kBloomLevels) hist.counts[to_string(level)] = 0;
    for (const auto& label : labels) {
        if (label.uncertain) {
            ++hist.uncertain;
            continue;
        }
        ++hist.counts[to_string(label.level)];
        ++hist.classified;
    }
    return hist;
}

PreferenceStat make_preference_stat(const std::string& question_id,
                                    const std::vector<double>& rewards,
                                    const std::vector<std::size_t>& response_lengths,
                                    std::size_t x_length) {
    if (rewards.empty() || rewards.size() != response_lengths.size()) {
        throw ContractError("make_preference_stat: need matching non-empty rewards and lengths");
    }
    PreferenceStat stat;
    stat.question_id = question_id;
    stat.rewards = rewards;
    stat.chosen_idx = 0;
    stat.rejected_idx = 0;
    for (std::size_t i = 1; i < rewards.size(); ++i) {
        // Strict comparisons: ties resolve to the lowest sample index.
        if (rewards[i] > rewards[static_cast<std::size_t>(stat.chosen_idx)]) {
            stat.chosen_idx = static_cast<int>(i);
        }
        if (rewards[i] < rewards[static_cast<std::size_t>(stat.rejected_idx)]) {
            stat.rejected_idx = static_cast<int>(i);
        }
    }
    stat.chosen_reward = rewards[static_cast<std::size_t>(stat.chosen_idx)];
    stat.rejected_reward = rewards[static_cast<std::size_t>(stat.rejected_idx)];
    stat.reward_gap = stat.chosen_reward - stat.rejected_reward;
    const double x_len = static_cast<double>(std::max<std::size_t>(x_length, 1));
    stat.rejected_length_ratio =
        static_cast<double>(response_lengths[static_cast<std::size_t>(stat.rejected_idx)]) / x_len;
    return stat;
}

PreferenceStat preference_metrics(Gateway& gateway, const std::string& question_id,
                                  const std::string& context, const std::string& question,
                                  const PreferenceOptions& options) {
    if (options.n_responses < 1) {
        throw ContractError("preference_metrics: n_responses must be >= 1");
    }
    const std::string x_text = context.empty() ? question : context + "\n\n" + question;

    ChatRequest request;
    request.messages.push_back({"user", x_text});
    request.temperature = options.temperature;
    request.n_samples = options.n_responses;
    request.max_tokens = options.max_tokens;

    auto measure = [&](const std::string& text) -> std::size_t {
        return options.length_unit == LengthUnit::tokens ? count_tokens(text) : text.size();
    };
    const std::string length_basis = options.length_includes_context ? x_text : question;

    std::vector<std::string> responses;
    std::vector<double> rewards;
    std::vector<std::size_t> lengths;
    try {
        responses = gateway.chat(request);
        for (const auto& response : responses) {
            RewardRequest reward_request;
            reward_request.transcript.push_back({"user", x_text});
            reward_request.transcript.push_back({"assistant", response});
            rewards.push_back(gateway.score(reward_request));
            lengths.push_back(measure(response));
        }
    } catch (const ProviderError&) {
        PreferenceStat stat;
        stat.question_id = question_id;
        stat.incomplete = true;
        return stat;
    }
    return make_preference_stat(question_id, rewards, lengths, measure(length_basis));
}

PreferenceAggregate aggregate_preferences(const std::vector<PreferenceStat>& stats) {
    PreferenceAggregate agg;
    for (const auto& stat : stats) {
        if (stat.incomplete) continue;
        ++agg.count;
        agg.mean_rejected_reward += stat.rejected_reward;
        agg.mean_rejected_length_ratio += stat.rejected_length_ratio;
        agg.mean_reward_gap += stat.reward_gap;
    }
    if (agg.count > 0) {
        agg.mean_rejected_reward /= static_cast<double>(agg.count);
        agg.mean_rejected_length_ratio /= static_cast<double>(agg.count);
        agg.mean_reward_gap /= static_cast<double>(agg.count);
    }
    return agg;
}

namespace {

double round4(double value) {
    return std::round(value * 1e4) / 1e4;
}

}  // namespace

ordered_json aggregate_report(const MetricsReport& report) {
    if (!report.efficiency && !report.coverage && !report.bloom && !report.preference &&
        report.retrieval.is_null()) {
        throw ContractError("aggregate_report: at least one stat family required");
    }
    ordered_json out;
    out["config"] = report.config_echo.is_null() ? ordered_json::object() : report.config_echo;
    if (report.efficiency) {
        const auto& e = *report.efficiency;
        out["efficiency"] = {{"pipeline", e.pipeline},
                             {"n_shots", e.n_shots},
                             {"llm_calls", e.llm_calls},
                             {"unique_after_dedup", e.unique_after_dedup},
                             {"efficiency", round4(e.efficiency)}};
    }
    if (report.coverage) {
        const auto& c = *report.coverage;
        ordered_json per_doc = ordered_json::object();
        for (const auto& [doc_id, dc] : c.per_doc) {
            per_doc[doc_id] = {{"covered", dc.covered}, {"total", dc.total}};
        }
        out["topic_coverage"] = {{"tc", round4(c.tc)},
                                 {"attribution", c.attribution},
                                 {"per_doc", per_doc},
                                 {"warnings", c.warnings}};
    }
    if (report.bloom) {
        const auto& b = *report.bloom;
        ordered_json counts = ordered_json::object();
        for (BloomLevel level : kBloomLevels) {
            counts[to_string(level)] = b.counts.at(to_string(level));
        }
        out["bloom"] = {{"histogram", counts},
                        {"classified", b.classified},
                        {"uncertain", b.uncertain}};
    }
    if (report.preference) {
        const auto& p = *report.preference;
        out["preference"] = {{"count", p.count},
                             {"mean_rejected_reward", round4(p.mean_rejected_reward)},
                             {"mean_rejected_length_ratio", round4(p.mean_rejected_length_ratio)},
                             {"mean_reward_gap", round4(p.mean_reward_gap)}};
    }
    if (!report.retrieval.is_null()) {
        out["retrieval"] = report.retrieval;
    }
    return out;
}

void validate_report_schema(const json& report) {
    if (!report.is_object()) throw ValidationError("report: not a JSON object");
    if (!report.contains("config") || !report.at("config").is_object()) {
        throw ValidationError("report: missing config object");
    }
    bool any = false;
    if (report.contains("efficiency")) {
        const auto& e = report.at("efficiency");
        for (const char* key : {"pipeline", "llm_calls", "unique_after_dedup", "efficiency"}) {
            if (!e.contains(key)) throw ValidationError(std::string("report.efficiency missing ") + key);
        }
        const double value = e.at("efficiency").get<double>();
        if (value < 0.0 || value > 1.0) throw ValidationError("report.efficiency out of [0,1]");
        any = true;
    }
    if (report.contains("topic_coverage")) {
        const auto& c = report.at("topic_coverage");
        if (!c.contains("tc") || !c.contains("per_doc")) {
            throw ValidationError("report.topic_coverage missing tc/per_doc");
        }
        const double tc = c.at("tc").get<double>();
        if (tc < 0.0 || tc > 1.0) throw ValidationError("report.tc out of [0,1]");
        any = true;
    }
    if (report.contains("bloom")) {
        const auto& b = report.at("bloom");
        if (!b.contains("histogram")) throw ValidationError("report.bloom missing histogram");
        std::size_t total = 0;
        for (const auto& [_, count] : b.at("histogram").items()) {
            total += count.get<std::size_t>();
        }
        if (total != b.at("classified").get<std::size_t>()) {
            throw ValidationError("report.bloom histogram does not sum to classified");
        }
        any = true;
    }
    if (report.contains("preference")) {
        if (report.at("preference").at("mean_reward_gap").get<double>() < 0.0) {
            throw ValidationError("report.preference mean_reward_gap negative");
        }
        any = true;
    }
    if (report.contains("retrieval")) {
        const auto& r = report.at("retrieval");
        if (!r.contains("top_k_accuracy")) {
            throw ValidationError("report.retrieval missing top_k_accuracy");
        }
        std::vector<std::pair<int, double>> accs;  // JSON keys sort lexically; re-sort by k
        for (const auto& [k, acc] : r.at("top_k_accuracy").items()) {
            accs.emplace_back(std::stoi(k), acc.get<double>());
        }
        std::sort(accs.begin(), accs.end());
        double prev = -1.0;
        for (const auto& [k, a] : accs) {
            if (a < 0.0 || a > 1.0) throw ValidationError("report.retrieval accuracy out of [0,1]");
            if (a < prev) throw ValidationError("report.retrieval accuracy not monotone in k");
            prev = a;
        }
        any = true;
    }
    if (!any) throw ValidationError("report: no stat family present");
}

void write_bloom_csv(const std::filesystem::path& path, const std::vector<BloomLabel>& labels) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ParseError("cannot write file: " + path.string());
    out << "question_id,level,uncertain\n";
    for (const auto& label : labels) {
        out << label.question_id << "," << to_string(label.level) << ","
            << (label.uncertain ? 1 : 0) << "\n";
    }
}

void write_preference_csv(const std::filesystem::path& path,
                          const std::vector<PreferenceStat>& stats) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ParseError("cannot write file: " + path.string());
    out << "question_id,n,chosen_reward,rejected_reward,reward_gap,rejected_length_ratio,incomplete\n";
    for (const auto& stat : stats) {
        out << stat.question_id << "," << stat.rewards.size() << "," << stat.chosen_reward << ","
            << stat.rejected_reward << "," << stat.reward_gap << ","
            << stat.rejected_length_ratio << "," << (stat.incomplete ? 1 : 0) << "\n";
    }
}

}  // namespace expertgen
