#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "expertgen/errors.hpp"
#include "expertgen/generator.hpp"
#include "expertgen/providers.hpp"
#include "support.hpp"

using namespace expertgen;
using testsupport::TempDir;
using testsupport::make_chunk;
using testsupport::make_expert_qa;

namespace {

Gateway mock_gateway(std::uint64_t seed = 1) {
    MockOptions options;
    options.seed = seed;
    options.embedding_dim = 16;
    options.duplicate_rate = 0.1;
    RetryPolicy retry;
    retry.base_delay_ms = 0;
    return Gateway(std::make_shared<MockProvider>(options), retry);
}

// 3 docs whose chunks force 2, 3 and 4 mock topics.
std::vector<DocumentChunk> marker_chunks() {
    return {
        make_chunk("doc_a", 0, "first passage topics=2 about brakes"),
        make_chunk("doc_b", 0, "second passage topics=3 about signals"),
        make_chunk("doc_c", 0, "third passage topics=4 about crossings"),
    };
}

std::vector<ExpertQA> style_pool(int per_style) {
    std::vector<ExpertQA> pool;
    int serial = 0;
    for (const auto& style : default_styles()) {
        for (int i = 0; i < per_style; ++i) {
            pool.push_back(make_expert_qa(
                "qa" + std::to_string(serial++),
                "Expert question " + std::to_string(serial) + " about " + style + "?",
                "Expert answer " + std::to_string(serial) + ".", style));
        }
    }
    return pool;
}

GenerationConfig basic_config(int k, int n, int n_samples, std::uint64_t seed = 7) {
    GenerationConfig config;
    config.combos_per_style = k;
    config.fewshot_n = n;
    config.n_samples = n_samples;
    config.seed = seed;
    config.max_in_flight = 4;
    return config;
}

}  // namespace

TEST_CASE("extract_topics parses the mock topic list and caches it") {
    Gateway gateway = mock_gateway();
    TopicStore store;
    Generator generator(gateway, basic_config(1, 0, 1), &store);
    auto chunk = make_chunk("d1", 0, "passage with topics=3 marker");

    auto topics = generator.extract_topics(chunk);
    CHECK(topics.size() == 3);
    const auto calls_after_first = gateway.stats().chat_calls;

    auto again = generator.extract_topics(chunk);
    CHECK(again == topics);
    CHECK(gateway.stats().chat_calls == calls_after_first);  // cache hit, no second call
}

TEST_CASE("topic store persists across instances") {
    TempDir dir("topics");
    Gateway gateway = mock_gateway();
    auto chunk = make_chunk("d1", 0, "passage with topics=2 marker");
    std::vector<Topic> first;
    {
        TopicStore store(dir.file("topics.jsonl"));
        Generator generator(gateway, basic_config(1, 0, 1), &store);
        first = generator.extract_topics(chunk);
    }
    {
        TopicStore store(dir.file("topics.jsonl"));
        CHECK(store.lookup(chunk.id).has_value());
        Gateway fresh = mock_gateway();
        Generator generator(fresh, basic_config(1, 0, 1), &store);
        CHECK(generator.extract_topics(chunk) == first);
        CHECK(fresh.stats().chat_calls == 0);  // no LLM call on rerun
    }
}

namespace {

// Answers topic prompts with junk; everything else falls through to the mock.
class BrokenTopicsProvider : public MockProvider {
public:
    using MockProvider::MockProvider;
    std::vector<std::string> chat(const ChatRequest& request, ProviderUsage& usage) override {
        if (request.messages.back().content.find("identify its main topics") !=
            std::string::npos) {
            return std::vector<std::string>(static_cast<std::size_t>(request.n_samples),
                                            "no json here");
        }
        return MockProvider::chat(request, usage);
    }
};

}  // namespace

TEST_CASE("a chunk whose topic extraction fails twice is skipped and tallied") {
    RetryPolicy retry;
    retry.base_delay_ms = 0;
    Gateway gateway(std::make_shared<BrokenTopicsProvider>(MockOptions{}), retry);
    Generator generator(gateway, basic_config(1, 0, 1));

    SUBCASE("extract_topics propagates after one retry") {
        CHECK_THROWS_AS(generator.extract_topics(make_chunk("d1", 0, "text")), TopicParseError);
    }
    SUBCASE("run_expertgenqa skips the chunk and continues") {
        RunReport report;
        auto records = generator.run_expertgenqa(marker_chunks(), style_pool(2), report);
        CHECK(records.empty());
        CHECK(report.chunks_skipped == 3);
        CHECK(report.warnings.size() >= 3);
    }
}

TEST_CASE("sample_fewshot") {
    auto pool = style_pool(3);  // 3 per style

    SUBCASE("n = 0 gives an empty list") {
        CHECK(Generator::sample_fewshot(pool, "scenario_based", 0, 1).empty());
    }
    SUBCASE("n equal to the style population returns all of it") {
        auto picked = Generator::sample_fewshot(pool, "scenario_based", 3, 1);
        REQUIRE(picked.size() == 3);
        std::set<std::string> ids;
        for (const auto& qa : picked) {
            CHECK(qa.style == "scenario_based");
            ids.insert(qa.id);
        }
        CHECK(ids.size() == 3);  // distinct
    }
    SUBCASE("insufficient style examples is a configuration error naming the style") {
        try {
            Generator::sample_fewshot(pool, "policy_application", 5, 1);
            FAIL("expected ConfigurationError");
        } catch (const ConfigurationError& e) {
            CHECK(std::string(e.what()).find("policy_application") != std::string::npos);
        }
    }
    SUBCASE("deterministic under seed") {
        auto a = Generator::sample_fewshot(pool, "terminology_clarification", 2, 42);
        auto b = Generator::sample_fewshot(pool, "terminology_clarification", 2, 42);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].id == b[i].id);
    }
}

TEST_CASE("sample_combos yields K distinct example sets per style") {
    Gateway gateway = mock_gateway();
    auto pool = style_pool(5);
    Generator generator(gateway, basic_config(3, 2, 1));
    RunReport report;
    auto combos = generator.sample_combos(pool, report);
    REQUIRE(combos.size() == 3);
    for (const auto& [style, sets] : combos) {
        REQUIRE(sets.size() == 3);
        std::set<std::set<std::string>> as_sets;
        for (const auto& combo : sets) {
            CHECK(combo.size() == 2);
            std::set<std::string> ids;
            for (const auto& qa : combo) {
                CHECK(qa.style == style);
                ids.insert(qa.id);
            }
            as_sets.insert(ids);
        }
        CHECK(as_sets.size() == 3);  // distinct as sets
    }
    CHECK(report.warnings.empty());
}

TEST_CASE("a style with too few examples is dropped unless strict") {
    Gateway gateway = mock_gateway();
    auto pool = style_pool(2);
    // Starve one style.
    pool.erase(std::remove_if(pool.begin(), pool.end(),
                              [](const ExpertQA& qa) {
                                  return qa.style == "policy_application" && qa.id != "qa0";
                              }),
               pool.end());

    SUBCASE("lenient: dropped with a warning") {
        Generator generator(gateway, basic_config(1, 2, 1));
        RunReport report;
        auto combos = generator.sample_combos(pool, report);
        CHECK(combos.count("policy_application") == 0);
        CHECK(combos.size() == 2);
        REQUIRE(report.warnings.size() == 1);
        CHECK(report.warnings[0].find("policy_application") != std::string::npos);
    }
    SUBCASE("strict: configuration error") {
        auto config = basic_config(1, 2, 1);
        config.strict_styles = true;
        Generator generator(gateway, config);
        RunReport report;
        CHECK_THROWS_AS(generator.sample_combos(pool, report), ConfigurationError);
    }
}

TEST_CASE("run_expertgenqa count law on a small fixture") {
    Gateway gateway = mock_gateway();
    Generator generator(gateway, basic_config(1, 0, 1));
    RunReport report;
    // 1 chunk with 2 topics, 3 styles, K=1, n_samples=1 -> 6 records.
    std::vector<DocumentChunk> one_chunk = {make_chunk("d1", 0, "text topics=2 body")};
    auto records = generator.run_expertgenqa(one_chunk, style_pool(2), report);
    CHECK(records.size() == 6);
    CHECK(report.calls_attempted == 6);
    CHECK(report.calls_failed == 0);
    CHECK(report.records_emitted == 6);
}

TEST_CASE("run_expertgenqa provenance and canonical order") {
    Gateway gateway = mock_gateway();
    Generator generator(gateway, basic_config(2, 2, 3));
    RunReport report;
    auto chunks = marker_chunks();
    auto pool = style_pool(4);
    auto records = generator.run_expertgenqa(chunks, pool, report);

    // Count law: n_samples * |S| * K * sum of topic counts = 3 * 3 * 2 * 9.
    CHECK(records.size() == 3u * 3u * 2u * 9u);

    std::set<std::string> chunk_ids_set;
    for (const auto& chunk : chunks) chunk_ids_set.insert(chunk.id);

    std::set<std::string> ids;
    for (const auto& qa : records) {
        CHECK(!qa.question.empty());
        CHECK(chunk_ids_set.count(qa.source_chunk_id) == 1);
        REQUIRE(qa.style.has_value());
        REQUIRE(qa.topic.has_value());
        CHECK(qa.combo_id >= 1);
        CHECK(qa.combo_id <= 2);
        CHECK(qa.sample_idx >= 0);
        CHECK(qa.sample_idx < 3);
        CHECK(qa.pipeline == Pipeline::expertgenqa);
        ids.insert(qa.id);
    }
    CHECK(ids.size() == records.size());  // content-addressed ids are unique

    // Canonical order is non-decreasing in the sort key within each chunk.
    auto key = [&](const GeneratedQA& qa) {
        return std::make_tuple(qa.source_chunk_id, qa.style.value_or(""), qa.combo_id,
                               qa.topic.value_or(""), qa.sample_idx);
    };
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i - 1].source_chunk_id == records[i].source_chunk_id) {
            CHECK(key(records[i - 1]) <= key(records[i]));
        }
    }
}

TEST_CASE("expertgenqa records resolve to topics actually extracted for the chunk") {
    TempDir dir("gen");
    Gateway gateway = mock_gateway();
    TopicStore store(dir.file("topics.jsonl"));
    Generator generator(gateway, basic_config(1, 1, 2), &store);
    RunReport report;
    auto chunks = marker_chunks();
    auto records = generator.run_expertgenqa(chunks, style_pool(2), report);
    REQUIRE(!records.empty());
    for (const auto& qa : records) {
        auto topics = store.lookup(qa.source_chunk_id);
        REQUIRE(topics.has_value());
        CHECK(std::find(topics->begin(), topics->end(), *qa.topic) != topics->end());
    }
}

TEST_CASE("run_expertgenqa on zero chunks is empty") {
    Gateway gateway = mock_gateway();
    Generator generator(gateway, basic_config(1, 1, 5));
    RunReport report;
    CHECK(generator.run_expertgenqa({}, style_pool(2), report).empty());
    CHECK(report.calls_attempted == 0);
}

TEST_CASE("full output set is byte-identical across runs under one seed") {
    TempDir dir("determinism");
    auto chunks = marker_chunks();
    auto pool = style_pool(3);

    auto run_once = [&](const std::filesystem::path& out) {
        Gateway gateway = mock_gateway(404);
        GenerationConfig config = basic_config(2, 2, 5, 2024);
        Generator generator(gateway, config);
        RunReport report;
        auto records = generator.run_expertgenqa(chunks, pool, report);
        save_generated(out, records);
    };
    run_once(dir.file("a.jsonl"));
    run_once(dir.file("b.jsonl"));
    const std::string a = testsupport::read_file(dir.file("a.jsonl"));
    CHECK(!a.empty());
    CHECK(a == testsupport::read_file(dir.file("b.jsonl")));
}

TEST_CASE("prompts within one (style, combo) share the few-shot prefix across chunks") {
    Gateway gateway = mock_gateway();
    auto pool = style_pool(4);
    Generator generator(gateway, basic_config(2, 3, 1));
    RunReport report;
    auto combos = generator.sample_combos(pool, report);

    auto chunk_a = make_chunk("d1", 0, "first text");
    auto chunk_b = make_chunk("d2", 0, "second text");
    std::vector<Topic> topics_a = {"alpha", "beta"};
    std::vector<Topic> topics_b = {"gamma"};

    for (const auto& [style, sets] : combos) {
        for (const auto& combo : sets) {
            auto pa = render_generation_prompt(chunk_a, topics_a, "alpha", combo);
            auto pb = render_generation_prompt(chunk_b, topics_b, "gamma", combo);
            const std::string& ca = pa.messages[0].content;
            const std::string& cb = pb.messages[0].content;
            const std::size_t cut = ca.find("Passage: ");
            REQUIRE(cut != std::string::npos);
            CHECK(cut > 0);  // combo has examples, so the prefix is non-trivial
            CHECK(ca.substr(0, cut) == cb.substr(0, cut));
        }
    }
}

TEST_CASE("generated records round-trip through jsonl") {
    TempDir dir("roundtrip");
    Gateway gateway = mock_gateway();
    Generator generator(gateway, basic_config(1, 1, 2));
    RunReport report;
    auto records = generator.run_expertgenqa(marker_chunks(), style_pool(2), report);
    save_generated(dir.file("generated.jsonl"), records);
    auto reloaded = load_generated(dir.file("generated.jsonl"));
    REQUIRE(reloaded.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(reloaded[i].id == records[i].id);
        CHECK(reloaded[i].question == records[i].question);
        CHECK(reloaded[i].source_chunk_id == records[i].source_chunk_id);
        CHECK(reloaded[i].style == records[i].style);
        CHECK(reloaded[i].topic == records[i].topic);
        CHECK(reloaded[i].combo_id == records[i].combo_id);
        CHECK(reloaded[i].sample_idx == records[i].sample_idx);
        CHECK(reloaded[i].pipeline == records[i].pipeline);
    }
}

namespace {

// Generation calls always fail; topic calls succeed.
class FailingGenerationProvider : public MockProvider {
public:
    using MockProvider::MockProvider;
    std::vector<std::string> chat(const ChatRequest& request, ProviderUsage& usage) override {
        if (request.messages.back().content.find("Generate a question") != std::string::npos) {
            throw ProviderError("generation endpoint down");
        }
        return MockProvider::chat(request, usage);
    }
};

}  // namespace

TEST_CASE("failed generation calls are skipped and tallied, the run continues") {
    RetryPolicy retry;
    retry.attempts = 2;
    retry.base_delay_ms = 0;
    Gateway gateway(std::make_shared<FailingGenerationProvider>(MockOptions{}), retry);
    Generator generator(gateway, basic_config(1, 0, 1));
    RunReport report;
    auto records = generator.run_expertgenqa(marker_chunks(), style_pool(2), report);
    CHECK(records.empty());
    CHECK(report.calls_attempted == 27);  // (2+3+4) topics * 3 styles * K=1
    CHECK(report.calls_failed == 27);
    CHECK(report.records_emitted == 0);
}

TEST_CASE("run_fewshot_baseline") {
    Gateway gateway = mock_gateway();
    auto pool = style_pool(2);

    SUBCASE("1 chunk, 2 attempts, 5 samples -> 10 records") {
        Generator generator(gateway, basic_config(2, 3, 5));
        RunReport report;
        std::vector<DocumentChunk> one = {make_chunk("d1", 0, "text")};
        auto records = generator.run_fewshot_baseline(one, pool, report);
        CHECK(records.size() == 10);
        CHECK(report.calls_attempted == 2);
        for (const auto& qa : records) {
            CHECK(qa.pipeline == Pipeline::fewshot);
            CHECK(!qa.style.has_value());
            CHECK(!qa.topic.has_value());
            CHECK(qa.combo_id >= 1);
            CHECK(qa.combo_id <= 2);
        }
    }
    SUBCASE("fixed seed reproduces the few-shot selections") {
        TempDir dir("fewshot");
        auto run_once = [&](const std::filesystem::path& out) {
            Gateway fresh = mock_gateway(11);
            Generator generator(fresh, basic_config(3, 2, 2, 99));
            RunReport report;
            auto records = generator.run_fewshot_baseline(marker_chunks(), pool, report);
            save_generated(out, records);
        };
        run_once(dir.file("a.jsonl"));
        run_once(dir.file("b.jsonl"));
        CHECK(testsupport::read_file(dir.file("a.jsonl")) ==
              testsupport::read_file(dir.file("b.jsonl")));
    }
    SUBCASE("n = 0 is the zero-shot baseline") {
        Generator generator(gateway, basic_config(1, 0, 1));
        RunReport report;
        std::vector<DocumentChunk> one = {make_chunk("d1", 0, "text")};
        auto records = generator.run_fewshot_baseline(one, {}, report);
        CHECK(records.size() == 1);
    }
}

TEST_CASE("run_template_baseline") {
    Gateway gateway = mock_gateway();

    SUBCASE("1 chunk, 1 template, 5 samples -> 5 records") {
        auto config = basic_config(1, 0, 5);
        config.template_bank = TemplateBank::cross({"factual"}, {"short"}, {"declarative"});
        Generator generator(gateway, config);
        RunReport report;
        std::vector<DocumentChunk> one = {make_chunk("d1", 0, "text")};
        auto records = generator.run_template_baseline(one, report);
        CHECK(records.size() == 5);
        CHECK(report.calls_attempted == 1);
        CHECK(records[0].pipeline == Pipeline::template_bank);
    }
    SUBCASE("T templates, D chunks, one draw each -> T*D calls") {
        auto config = basic_config(1, 0, 1);
        config.template_bank =
            TemplateBank::cross({"summarization", "inference"}, {"short", "detailed"},
                                {"declarative"});  // T = 4
        Generator generator(gateway, config);
        RunReport report;
        auto chunks = marker_chunks();  // D = 3
        auto records = generator.run_template_baseline(chunks, report);
        CHECK(report.calls_attempted == 12);
        CHECK(records.size() == 12);
        // combo_id records the template id.
        std::set<int> template_ids;
        for (const auto& qa : records) template_ids.insert(qa.combo_id);
        CHECK(template_ids == std::set<int>{1, 2, 3, 4});
    }
    SUBCASE("template order is seeded and reproducible") {
        TempDir dir("template");
        auto run_once = [&](const std::filesystem::path& out) {
            Gateway fresh = mock_gateway(3);
            auto config = basic_config(2, 0, 1, 55);
            Generator generator(fresh, config);
            RunReport report;
            auto records = generator.run_template_baseline(marker_chunks(), report);
            save_generated(out, records);
        };
        run_once(dir.file("a.jsonl"));
        run_once(dir.file("b.jsonl"));
        CHECK(testsupport::read_file(dir.file("a.jsonl")) ==
              testsupport::read_file(dir.file("b.jsonl")));
    }
    SUBCASE("empty template bank is a configuration error") {
        auto config = basic_config(1, 0, 1);
        config.template_bank.templates.clear();
        Generator generator(gateway, config);
        RunReport report;
        CHECK_THROWS_AS(generator.run_template_baseline(marker_chunks(), report),
                        ConfigurationError);
    }
}
