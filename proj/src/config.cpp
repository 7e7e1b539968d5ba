#include "expertgen/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "expertgen/errors.hpp"

namespace expertgen {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
    if (!obj.is_object()) {
        throw ConfigurationError(where + ": expected a JSON object");
    }
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.count(key)) {
            std::ostringstream msg;
            msg << where << ": unknown key '" << key << "' (allowed:";
            for (const auto& k : allowed) msg << " " << k;
            msg << ")";
            throw ConfigurationError(msg.str());
        }
    }
}

template <typename T>
void read_if(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) {
        try {
            out = obj.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigurationError(std::string("config key '") + key + "' has the wrong type");
        }
    }
}

void apply_override(json& root, const std::string& spec) {
    auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigurationError("override must look like key.path=value: " + spec);
    }
    const std::string path = spec.substr(0, eq);
    const std::string raw_value = spec.substr(eq + 1);
    json value = json::parse(raw_value, nullptr, false);
    if (value.is_discarded()) value = raw_value;  // bare strings are fine

    json* node = &root;
    std::size_t start = 0;
    while (true) {
        auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot - start);
        if (key.empty()) throw ConfigurationError("bad override path: " + spec);
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

}  // namespace

ordered_json RunConfig::echo() const {
    ordered_json j;
    j["seed"] = seed;
    j["provider"] = {{"kind", provider.kind},
                     {"base_url", provider.base_url},
                     {"chat_model", provider.chat_model},
                     {"reward_model", provider.reward_model},
                     {"reward_url", provider.reward_url},
                     {"embedding_model", provider.embedding_model},
                     {"api_key_env", provider.api_key_env},
                     {"embedding_dim", provider.embedding_dim},
                     {"duplicate_rate", provider.duplicate_rate},
                     {"max_in_flight", provider.max_in_flight},
                     {"cache", provider.cache},
                     {"retry",
                      {{"attempts", provider.retry.attempts},
                       {"base_delay_ms", provider.retry.base_delay_ms},
                       {"jitter", provider.retry.jitter}}}};
    j["generation"] = {{"pipeline", to_string(generation.pipeline)},
                       {"k", generation.k},
                       {"n", generation.n},
                       {"n_samples", generation.n_samples},
                       {"temperature", generation.temperature},
                       {"max_tokens", generation.max_tokens},
                       {"styles", generation.styles},
                       {"strict_styles", generation.strict_styles},
                       {"template_bank",
                        {{"question_types", generation.template_question_types},
                         {"answer_lengths", generation.template_answer_lengths},
                         {"style_directives", generation.template_style_directives}}}};
    j["dedup"] = {{"threshold", dedup.threshold}, {"mode", to_string(dedup.mode)}};
    j["metrics"] = {{"bloom", metrics.bloom},
                    {"preference", metrics.preference},
                    {"preference_n", metrics.preference_n},
                    {"preference_limit", metrics.preference_limit},
                    {"len_unit", metrics.len_unit == LengthUnit::tokens ? "tokens" : "characters"},
                    {"len_includes_context", metrics.len_includes_context}};
    j["retrieval"] = {{"batch_size", retrieval.batch_size},
                      {"learning_rate", retrieval.learning_rate},
                      {"epochs", retrieval.epochs},
                      {"temperature", retrieval.temperature},
                      {"ks", retrieval.ks},
                      {"test_fraction", retrieval.test_fraction}};
    j["io"] = {{"workdir", io.workdir.string()},
               {"chunks", io.chunks.string()},
               {"expert_pool", io.expert_pool.string()}};
    return j;
}

RunConfig parse_run_config(const json& root_in, const std::vector<std::string>& overrides) {
    json root = root_in.is_null() ? json::object() : root_in;
    for (const auto& spec : overrides) {
        apply_override(root, spec);
    }
    reject_unknown_keys(root, {"seed", "provider", "generation", "dedup", "metrics",
                               "retrieval", "io"},
                        "config");

    RunConfig config;
    read_if(root, "seed", config.seed);

    if (root.contains("provider")) {
        const json& p = root.at("provider");
        reject_unknown_keys(p,
                            {"kind", "base_url", "chat_model", "reward_model", "reward_url",
                             "embedding_model", "api_key_env", "embedding_dim", "duplicate_rate",
                             "max_in_flight", "cache", "retry"},
                            "config.provider");
        read_if(p, "kind", config.provider.kind);
        read_if(p, "base_url", config.provider.base_url);
        read_if(p, "chat_model", config.provider.chat_model);
        read_if(p, "reward_model", config.provider.reward_model);
        read_if(p, "reward_url", config.provider.reward_url);
        read_if(p, "embedding_model", config.provider.embedding_model);
        read_if(p, "api_key_env", config.provider.api_key_env);
        read_if(p, "embedding_dim", config.provider.embedding_dim);
        read_if(p, "duplicate_rate", config.provider.duplicate_rate);
        read_if(p, "max_in_flight", config.provider.max_in_flight);
        read_if(p, "cache", config.provider.cache);
        if (p.contains("retry")) {
            const json& r = p.at("retry");
            reject_unknown_keys(r, {"attempts", "base_delay_ms", "jitter"},
                                "config.provider.retry");
            read_if(r, "attempts", config.provider.retry.attempts);
            read_if(r, "base_delay_ms", config.provider.retry.base_delay_ms);
            read_if(r, "jitter", config.provider.retry.jitter);
        }
    }
    if (config.provider.kind != "mock" && config.provider.kind != "openai") {
        throw ConfigurationError("provider.kind must be 'mock' or 'openai'");
    }
    if (config.provider.kind == "openai" && config.provider.base_url.empty()) {
        throw ConfigurationError("provider.kind 'openai' requires provider.base_url");
    }
    if (config.provider.embedding_dim < 2) {
        throw ConfigurationError("provider.embedding_dim must be >= 2");
    }
    if (config.provider.duplicate_rate < 0.0 || config.provider.duplicate_rate > 1.0) {
        throw ConfigurationError("provider.duplicate_rate must be in [0, 1]");
    }
    if (config.provider.max_in_flight < 1) {
        throw ConfigurationError("provider.max_in_flight must be >= 1");
    }
    if (config.provider.retry.attempts < 1) {
        throw ConfigurationError("provider.retry.attempts must be >= 1");
    }

    if (root.contains("generation")) {
        const json& g = root.at("generation");
        reject_unknown_keys(g,
                            {"pipeline", "k", "n", "n_samples", "temperature", "max_tokens",
                             "styles", "strict_styles", "template_bank"},
                            "config.generation");
        if (g.contains("pipeline")) {
            config.generation.pipeline = pipeline_from_string(g.at("pipeline").get<std::string>());
        }
        read_if(g, "k", config.generation.k);
        read_if(g, "n", config.generation.n);
        read_if(g, "n_samples", config.generation.n_samples);
        read_if(g, "temperature", config.generation.temperature);
        read_if(g, "max_tokens", config.generation.max_tokens);
        read_if(g, "styles", config.generation.styles);
        read_if(g, "strict_styles", config.generation.strict_styles);
        if (g.contains("template_bank")) {
            const json& t = g.at("template_bank");
            reject_unknown_keys(t, {"question_types", "answer_lengths", "style_directives"},
                                "config.generation.template_bank");
            read_if(t, "question_types", config.generation.template_question_types);
            read_if(t, "answer_lengths", config.generation.template_answer_lengths);
            read_if(t, "style_directives", config.generation.template_style_directives);
        }
    }
    if (config.generation.k < 0 || config.generation.n < 0) {
        throw ConfigurationError("generation.k and generation.n must be non-negative");
    }
    if (config.generation.n_samples < 1) {
        throw ConfigurationError("generation.n_samples must be >= 1");
    }
    if (config.generation.temperature < 0.0) {
        throw ConfigurationError("generation.temperature must be >= 0");
    }
    if (config.generation.styles.empty()) {
        throw ConfigurationError("generation.styles must be non-empty");
    }

    if (root.contains("dedup")) {
        const json& d = root.at("dedup");
        reject_unknown_keys(d, {"threshold", "mode"}, "config.dedup");
        read_if(d, "threshold", config.dedup.threshold);
        if (d.contains("mode")) {
            config.dedup.mode = overlap_mode_from_string(d.at("mode").get<std::string>());
        }
    }
    if (!(config.dedup.threshold > 0.0 && config.dedup.threshold <= 1.0)) {
        throw ConfigurationError("dedup.threshold must be in (0, 1]");
    }

    if (root.contains("metrics")) {
        const json& m = root.at("metrics");
        reject_unknown_keys(m,
                            {"bloom", "preference", "preference_n", "preference_limit",
                             "len_unit", "len_includes_context"},
                            "config.metrics");
        read_if(m, "bloom", config.metrics.bloom);
        read_if(m, "preference", config.metrics.preference);
        read_if(m, "preference_n", config.metrics.preference_n);
        read_if(m, "preference_limit", config.metrics.preference_limit);
        if (m.contains("len_unit")) {
            const std::string unit = m.at("len_unit").get<std::string>();
            if (unit == "tokens") {
                config.metrics.len_unit = LengthUnit::tokens;
            } else if (unit == "characters") {
                config.metrics.len_unit = LengthUnit::characters;
            } else {
                throw ConfigurationError("metrics.len_unit must be 'tokens' or 'characters'");
            }
        }
        read_if(m, "len_includes_context", config.metrics.len_includes_context);
    }
    if (config.metrics.preference_n < 1) {
        throw ConfigurationError("metrics.preference_n must be >= 1");
    }

    if (root.contains("retrieval")) {
        const json& r = root.at("retrieval");
        reject_unknown_keys(r,
                            {"batch_size", "learning_rate", "epochs", "temperature", "ks",
                             "test_fraction"},
                            "config.retrieval");
        read_if(r, "batch_size", config.retrieval.batch_size);
        read_if(r, "learning_rate", config.retrieval.learning_rate);
        read_if(r, "epochs", config.retrieval.epochs);
        read_if(r, "temperature", config.retrieval.temperature);
        read_if(r, "ks", config.retrieval.ks);
        read_if(r, "test_fraction", config.retrieval.test_fraction);
    }
    if (config.retrieval.batch_size < 2) {
        throw ConfigurationError("retrieval.batch_size must be >= 2");
    }
    if (config.retrieval.epochs < 0) {
        throw ConfigurationError("retrieval.epochs must be non-negative");
    }
    if (config.retrieval.temperature <= 0.0) {
        throw ConfigurationError("retrieval.temperature must be positive");
    }
    if (config.retrieval.ks.empty() ||
        !std::is_sorted(config.retrieval.ks.begin(), config.retrieval.ks.end()) ||
        config.retrieval.ks.front() < 1) {
        throw ConfigurationError("retrieval.ks must be sorted ascending and >= 1");
    }
    if (config.retrieval.test_fraction < 0.0 || config.retrieval.test_fraction > 1.0) {
        throw ConfigurationError("retrieval.test_fraction must be in [0, 1]");
    }

    if (root.contains("io")) {
        const json& io = root.at("io");
        reject_unknown_keys(io, {"workdir", "chunks", "expert_pool"}, "config.io");
        if (io.contains("workdir")) config.io.workdir = io.at("workdir").get<std::string>();
        if (io.contains("chunks")) config.io.chunks = io.at("chunks").get<std::string>();
        if (io.contains("expert_pool")) {
            config.io.expert_pool = io.at("expert_pool").get<std::string>();
        }
    }
    return config;
}

RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigurationError("cannot open config file: " + path.string());
    }
    json root = json::parse(in, nullptr, false);
    if (root.is_discarded()) {
        throw ConfigurationError("malformed JSON in config file: " + path.string());
    }
    return parse_run_config(root, overrides);
}

}  // namespace expertgen
