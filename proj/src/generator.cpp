#include "expertgen/generator.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "expertgen/errors.hpp"
#include "expertgen/util.hpp"

namespace expertgen {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string to_string(Pipeline pipeline) {
    switch (pipeline) {
        case Pipeline::expertgenqa: return "expertgenqa";
        case Pipeline::fewshot: return "fewshot";
        case Pipeline::template_bank: return "template";
    }
    return "expertgenqa";
}

Pipeline pipeline_from_string(const std::string& name) {
    if (name == "expertgenqa") return Pipeline::expertgenqa;
    if (name == "fewshot") return Pipeline::fewshot;
    if (name == "template") return Pipeline::template_bank;
    throw ConfigurationError("unknown pipeline '" + name +
                             "' (expected expertgenqa, fewshot or template)");
}

std::string PromptTemplate::render_instruction() const {
    std::ostringstream out;
    out << "Generate a " << question_type << " question about the passage above. "
        << "The question should be " << style_directive << " and call for a "
        << answer_length << " answer.";
    return out.str();
}

TemplateBank TemplateBank::cross(const std::vector<std::string>& question_types,
                                 const std::vector<std::string>& answer_lengths,
                                 const std::vector<std::string>& style_directives) {
    TemplateBank bank;
    for (const auto& qt : question_types) {
        for (const auto& al : answer_lengths) {
            for (const auto& sd : style_directives) {
                bank.templates.push_back({qt, al, sd});
            }
        }
    }
    return bank;
}

TemplateBank TemplateBank::default_bank() {
    return cross({"summarization", "inference", "factual"},
                 {"short", "detailed"},
                 {"declarative", "imperative"});
}

TopicStore::TopicStore(std::filesystem::path path) : path_(std::move(path)) {
    if (!std::filesystem::exists(*path_)) return;
    std::ifstream in(*path_);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json record = json::parse(line, nullptr, false);
        if (record.is_discarded() || !record.contains("chunk_id") || !record.contains("topics")) {
            continue;
        }
        topics_[record.at("chunk_id").get<std::string>()] =
            record.at("topics").get<std::vector<Topic>>();
    }
}

std::optional<std::vector<Topic>> TopicStore::lookup(const std::string& chunk_id) const {
    auto it = topics_.find(chunk_id);
    if (it == topics_.end()) return std::nullopt;
    return it->second;
}

void TopicStore::store(const std::string& chunk_id, const std::vector<Topic>& topics) {
    topics_[chunk_id] = topics;
    if (path_) {
        std::ofstream out(*path_, std::ios::app);
        ordered_json record;
        record["chunk_id"] = chunk_id;
        record["topics"] = topics;
        out << record.dump() << "\n";
    }
}

Generator::Generator(Gateway& gateway, GenerationConfig config, TopicStore* topic_store)
    : gateway_(gateway), config_(std::move(config)), topic_store_(topic_store) {
    if (config_.n_samples < 1) {
        throw ConfigurationError("n_samples must be >= 1");
    }
    if (config_.combos_per_style < 0 || config_.fewshot_n < 0) {
        throw ConfigurationError("combos_per_style and fewshot_n must be non-negative");
    }
}

std::vector<Topic> Generator::extract_topics_inner(const DocumentChunk& chunk) {
    ChatRequest request = render_topic_prompt(chunk);
    auto samples = gateway_.chat(request);
    return parse_topics(samples.at(0));
}

std::vector<Topic> Generator::extract_topics(const DocumentChunk& chunk) {
    if (chunk.text.empty()) {
        throw ContractError("extract_topics: chunk text must be non-empty");
    }
    if (topic_store_) {
        if (auto cached = topic_store_->lookup(chunk.id)) return *cached;
    }
    std::vector<Topic> topics;
    try {
        topics = extract_topics_inner(chunk);
    } catch (const TopicParseError&) {
        topics = extract_topics_inner(chunk);  // one retry, then the error propagates
    }
    if (topic_store_) topic_store_->store(chunk.id, topics);
    return topics;
}

std::vector<ExpertQA> Generator::sample_fewshot(const std::vector<ExpertQA>& pool,
                                                const StyleName& style, int n,
                                                std::uint64_t seed) {
    if (n == 0) return {};
    std::vector<const ExpertQA*> matching;
    for (const auto& qa : pool) {
        if (qa.style == style) matching.push_back(&qa);
    }
    if (static_cast<int>(matching.size()) < n) {
        std::ostringstream msg;
        msg << "style '" << style << "' has only " << matching.size()
            << " expert examples but " << n << " were requested";
        throw ConfigurationError(msg.str());
    }
    Rng rng(seed);
    std::vector<ExpertQA> out;
    for (std::size_t idx : rng.pick_indices(matching.size(), static_cast<std::size_t>(n))) {
        out.push_back(*matching[idx]);
    }
    return out;
}

std::map<StyleName, std::vector<std::vector<ExpertQA>>> Generator::sample_combos(
    const std::vector<ExpertQA>& pool, RunReport& report) const {
    std::map<StyleName, std::vector<std::vector<ExpertQA>>> combos;
    for (const auto& style : config_.styles) {
        std::size_t style_count = 0;
        for (const auto& qa : pool) {
            if (qa.style == style) ++style_count;
        }
        if (config_.fewshot_n > 0 && style_count < static_cast<std::size_t>(config_.fewshot_n)) {
            std::ostringstream msg;
            msg << "style '" << style << "' has " << style_count << " expert examples, need "
                << config_.fewshot_n;
            if (config_.strict_styles) throw ConfigurationError(msg.str());
            report.warnings.push_back(msg.str() + "; style dropped for this run");
            continue;
        }
        std::vector<std::vector<ExpertQA>> style_combos;
        std::set<std::set<std::string>> seen_sets;
        for (int k = 0; k < config_.combos_per_style; ++k) {
            std::vector<ExpertQA> combo;
            std::set<std::string> combo_ids;
            for (int attempt = 0;; ++attempt) {
                std::uint64_t combo_seed = derive_seed(
                    config_.seed, "combo:" + style + ":" + std::to_string(k) + ":" +
                                      std::to_string(attempt));
                combo = sample_fewshot(pool, style, config_.fewshot_n, combo_seed);
                combo_ids.clear();
                for (const auto& qa : combo) combo_ids.insert(qa.id);
                if (config_.fewshot_n == 0 || !seen_sets.count(combo_ids)) break;
                if (attempt >= 20) {
                    report.warnings.push_back("style '" + style + "' combo " +
                                              std::to_string(k + 1) +
                                              " repeats an earlier example set");
                    break;
                }
            }
            seen_sets.insert(combo_ids);
            style_combos.push_back(std::move(combo));
        }
        combos[style] = std::move(style_combos);
    }
    return combos;
}

namespace {

std::string generated_id(Pipeline pipeline, const std::string& chunk_id,
                         const std::string& style, const std::string& topic, int combo_id,
                         int sample_idx, const std::string& question) {
    std::string key = to_string(pipeline);
    for (const auto& part :
         {chunk_id, style, topic, std::to_string(combo_id), std::to_string(sample_idx), question}) {
        key.push_back('\x1f');
        key += part;
    }
    return hex16(fnv1a64(key));
}

struct GenerationTask {
    const DocumentChunk* chunk;
    ChatRequest request;
    std::optional<StyleName> style;
    std::optional<Topic> topic;
    int combo_id;
};

// Runs tasks on the gateway with bounded concurrency, collecting records and
// failure tallies. Scheduling cannot affect output content: each record is a
// pure function of its own task.
std::vector<GeneratedQA> execute_tasks(Gateway& gateway, const std::vector<GenerationTask>& tasks,
                                       Pipeline pipeline, std::size_t max_in_flight,
                                       RunReport& report) {
    std::vector<std::vector<GeneratedQA>> per_task(tasks.size());
    std::mutex report_mutex;
    parallel_for(tasks.size(), max_in_flight, [&](std::size_t i) {
        const GenerationTask& task = tasks[i];
        std::vector<std::string> samples;
        try {
            samples = gateway.chat(task.request);
        } catch (const ProviderError& e) {
            std::lock_guard<std::mutex> lock(report_mutex);
            ++report.calls_failed;
            report.warnings.push_back(std::string("generation call failed: ") + e.what());
            return;
        }
        std::vector<GeneratedQA> records;
        records.reserve(samples.size());
        for (std::size_t s = 0; s < samples.size(); ++s) {
            GeneratedQA qa;
            qa.question = normalize_whitespace(samples[s]);
            if (qa.question.empty()) continue;
            qa.source_chunk_id = task.chunk->id;
            qa.style = task.style;
            qa.topic = task.topic;
            qa.combo_id = task.combo_id;
            qa.sample_idx = static_cast<int>(s);
            qa.pipeline = pipeline;
            qa.id = generated_id(pipeline, qa.source_chunk_id, qa.style.value_or(""),
                                 qa.topic.value_or(""), qa.combo_id, qa.sample_idx, qa.question);
            records.push_back(std::move(qa));
        }
        per_task[i] = std::move(records);
    });
    report.calls_attempted += tasks.size();
    std::vector<GeneratedQA> out;
    for (auto& records : per_task) {
        for (auto& r : records) out.push_back(std::move(r));
    }
    report.records_emitted += out.size();
    return out;
}

}  // namespace

std::vector<GeneratedQA> Generator::run_expertgenqa(const std::vector<DocumentChunk>& chunks,
                                                    const std::vector<ExpertQA>& pool,
                                                    RunReport& report) {
    const auto start = std::chrono::steady_clock::now();
    auto combos = sample_combos(pool, report);

    GenerationPromptOptions options{config_.temperature, config_.n_samples, config_.max_tokens};
    std::vector<GenerationTask> tasks;
    for (const auto& chunk : chunks) {
        std::vector<Topic> topics;
        try {
            topics = extract_topics(chunk);
        } catch (const Error& e) {
            ++report.chunks_skipped;
            report.warnings.push_back("chunk " + chunk.id + " skipped: " + e.what());
            continue;
        }
        if (topics.empty()) {
            ++report.chunks_skipped;
            report.warnings.push_back("chunk " + chunk.id + " skipped: no topics extracted");
            continue;
        }
        for (const auto& style : config_.styles) {
            auto it = combos.find(style);
            if (it == combos.end()) continue;  // style dropped in sample_combos
            for (std::size_t k = 0; k < it->second.size(); ++k) {
                const auto& fewshot = it->second[k];
                for (const auto& topic : topics) {
                    GenerationTask task;
                    task.chunk = &chunk;
                    task.request =
                        render_generation_prompt(chunk, topics, topic, fewshot, options);
                    task.style = style;
                    task.topic = topic;
                    task.combo_id = static_cast<int>(k) + 1;
                    tasks.push_back(std::move(task));
                }
            }
        }
    }

    auto records = execute_tasks(gateway_, tasks, Pipeline::expertgenqa, config_.max_in_flight,
                                 report);
    sort_canonical(records, chunks);
    report.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return records;
}

std::vector<GeneratedQA> Generator::run_fewshot_baseline(const std::vector<DocumentChunk>& chunks,
                                                         const std::vector<ExpertQA>& pool,
                                                         RunReport& report) {
    const auto start = std::chrono::steady_clock::now();
    if (config_.fewshot_n > 0 && pool.size() < static_cast<std::size_t>(config_.fewshot_n)) {
        throw ConfigurationError("expert pool smaller than fewshot_n");
    }
    GenerationPromptOptions options{config_.temperature, config_.n_samples, config_.max_tokens};
    std::vector<GenerationTask> tasks;
    for (const auto& chunk : chunks) {
        for (int attempt = 0; attempt < config_.combos_per_style; ++attempt) {
            // Style-agnostic sampling straight from the whole pool.
            std::vector<ExpertQA> fewshot;
            if (config_.fewshot_n > 0) {
                Rng rng(derive_seed(config_.seed,
                                    "fewshot:" + chunk.id + ":" + std::to_string(attempt)));
                for (std::size_t idx :
                     rng.pick_indices(pool.size(), static_cast<std::size_t>(config_.fewshot_n))) {
                    fewshot.push_back(pool[idx]);
                }
            }
            std::string content = [&] {
                std::string fs;
                for (const auto& qa : fewshot) {
                    fs += "Question: " + qa.question + "\nAnswer: " + qa.answer + "\n\n";
                }
                return fs + "Passage: " + chunk.text +
                       "\n\n-----\n\nPlease generate a question from the passage above.";
            }();
            GenerationTask task;
            task.chunk = &chunk;
            task.request.messages.push_back({"user", std::move(content)});
            task.request.temperature = options.temperature;
            task.request.n_samples = options.n_samples;
            task.request.max_tokens = options.max_tokens;
            task.combo_id = attempt + 1;
            tasks.push_back(std::move(task));
        }
    }
    auto records =
        execute_tasks(gateway_, tasks, Pipeline::fewshot, config_.max_in_flight, report);
    sort_canonical(records, chunks);
    report.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return records;
}

std::vector<GeneratedQA> Generator::run_template_baseline(
    const std::vector<DocumentChunk>& chunks, RunReport& report) {
    const auto start = std::chrono::steady_clock::now();
    const auto& bank = config_.template_bank.templates;
    if (bank.empty()) {
        throw ConfigurationError("template baseline requires a non-empty template bank");
    }
    const int draws = std::max(config_.combos_per_style, 1);
    GenerationPromptOptions options{config_.temperature, config_.n_samples, config_.max_tokens};
    std::vector<GenerationTask> tasks;
    for (const auto& chunk : chunks) {
        for (int draw = 0; draw < draws; ++draw) {
            // One sweep of the bank per draw, in seeded order.
            std::vector<std::size_t> order(bank.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            Rng rng(derive_seed(config_.seed,
                                "template:" + chunk.id + ":" + std::to_string(draw)));
            rng.shuffle(order);
            for (std::size_t idx : order) {
                std::string content = "Passage: " + chunk.text + "\n\n-----\n\n" +
                                      bank[idx].render_instruction();
                GenerationTask task;
                task.chunk = &chunk;
                task.request.messages.push_back({"user", std::move(content)});
                task.request.temperature = options.temperature;
                task.request.n_samples = options.n_samples;
                task.request.max_tokens = options.max_tokens;
                task.combo_id = static_cast<int>(idx) + 1;  // template id
                tasks.push_back(std::move(task));
            }
        }
    }
    auto records =
        execute_tasks(gateway_, tasks, Pipeline::template_bank, config_.max_in_flight, report);
    sort_canonical(records, chunks);
    report.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return records;
}

void sort_canonical(std::vector<GeneratedQA>& records, const std::vector<DocumentChunk>& chunks) {
    std::unordered_map<std::string, std::pair<std::string, std::uint64_t>> chunk_order;
    for (const auto& chunk : chunks) {
        chunk_order[chunk.id] = {chunk.doc_id, chunk.seq};
    }
    auto key = [&](const GeneratedQA& qa) {
        auto it = chunk_order.find(qa.source_chunk_id);
        std::pair<std::string, std::uint64_t> order =
            it != chunk_order.end() ? it->second
                                    : std::make_pair(std::string("\x7f") + qa.source_chunk_id,
                                                     std::uint64_t{0});
        return std::make_tuple(order.first, order.second, qa.style.value_or(""), qa.combo_id,
                               qa.topic.value_or(""), qa.sample_idx);
    };
    std::stable_sort(records.begin(), records.end(),
                     [&](const GeneratedQA& a, const GeneratedQA& b) { return key(a) < key(b); });
}

void save_generated(const std::filesystem::path& path, const std::vector<GeneratedQA>& records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ParseError("cannot write file: " + path.string());
    for (const auto& qa : records) {
        ordered_json record;
        record["id"] = qa.id;
        record["question"] = qa.question;
        record["answer"] = qa.answer.has_value() ? json(*qa.answer) : json(nullptr);
        record["source_chunk_id"] = qa.source_chunk_id;
        record["style"] = qa.style.has_value() ? json(*qa.style) : json(nullptr);
        record["topic"] = qa.topic.has_value() ? json(*qa.topic) : json(nullptr);
        record["combo_id"] = qa.combo_id;
        record["sample_idx"] = qa.sample_idx;
        record["pipeline"] = to_string(qa.pipeline);
        out << record.dump() << "\n";
    }
}

std::vector<GeneratedQA> load_generated(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open file: " + path.string());
    std::vector<GeneratedQA> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json record = json::parse(line, nullptr, false);
        if (record.is_discarded()) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": malformed JSON record");
        }
        GeneratedQA qa;
        qa.id = record.at("id").get<std::string>();
        qa.question = record.at("question").get<std::string>();
        if (record.contains("answer") && !record.at("answer").is_null()) {
            qa.answer = record.at("answer").get<std::string>();
        }
        qa.source_chunk_id = record.at("source_chunk_id").get<std::string>();
        if (record.contains("style") && !record.at("style").is_null()) {
            qa.style = record.at("style").get<std::string>();
        }
        if (record.contains("topic") && !record.at("topic").is_null()) {
            qa.topic = record.at("topic").get<std::string>();
        }
        qa.combo_id = record.at("combo_id").get<int>();
        qa.sample_idx = record.at("sample_idx").get<int>();
        qa.pipeline = pipeline_from_string(record.at("pipeline").get<std::string>());
        records.push_back(std::move(qa));
    }
    return records;
}

void save_run_report(const std::filesystem::path& path, const RunReport& report,
                     const GatewayStats& stats) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ParseError("cannot write file: " + path.string());
    ordered_json j;
    j["calls_attempted"] = report.calls_attempted;
    j["calls_failed"] = report.calls_failed;
    j["records_emitted"] = report.records_emitted;
    j["chunks_skipped"] = report.chunks_skipped;
    j["wall_time"] = report.wall_time_seconds;
    j["warnings"] = report.warnings;
    j["gateway"] = {{"chat_calls", stats.chat_calls},
                    {"score_calls", stats.score_calls},
                    {"embed_calls", stats.embed_calls},
                    {"cache_hits", stats.cache_hits},
                    {"retries", stats.retries},
                    {"prompt_tokens", stats.prompt_tokens},
                    {"completion_tokens", stats.completion_tokens}};
    out << j.dump(2) << "\n";
}

}  // namespace expertgen
