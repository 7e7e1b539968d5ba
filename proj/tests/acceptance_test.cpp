// Acceptance suite: runs every criterion end to end and prints one PASS/FAIL
// line per criterion. Exit code is the number of failed criteria.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "expertgen/config.hpp"
#include "expertgen/dedup.hpp"
#include "expertgen/generator.hpp"
#include "expertgen/metrics.hpp"
#include "expertgen/providers.hpp"
#include "expertgen/retrieval.hpp"
#include "expertgen/stages.hpp"
#include "expertgen/util.hpp"

using namespace expertgen;
using nlohmann::json;

namespace {

struct AcceptanceFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool condition, const std::string& message) {
    if (!condition) throw AcceptanceFailure(message);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    out << content;
}

Gateway mock_gateway(std::uint64_t seed) {
    MockOptions options;
    options.seed = seed;
    options.duplicate_rate = 0.2;
    RetryPolicy retry;
    retry.base_delay_ms = 0;
    return Gateway(std::make_shared<MockProvider>(options), retry);
}

// --- criterion 1 -------------------------------------------------------------

void criterion_efficiency() {
    struct Row {
        std::size_t calls, unique;
        double percent;
    };
    for (const Row& row : {Row{17622, 7140, 40.52}, Row{17400, 3658, 21.02},
                           Row{51100, 8030, 15.71}}) {
        const double got = efficiency(row.calls, row.unique).efficiency * 100.0;
        std::ostringstream msg;
        msg << "(" << row.calls << ", " << row.unique << ") -> " << got << "%, expected "
            << row.percent << "% +/- 0.005";
        require(std::abs(got - row.percent) <= 0.005, msg.str());
    }
}

// --- criterion 2 -------------------------------------------------------------

std::vector<DocumentChunk> marker_chunks() {
    std::vector<DocumentChunk> chunks;
    const std::vector<std::pair<std::string, std::string>> docs = {
        {"doc_a", "first passage topics=2 about brakes"},
        {"doc_b", "second passage topics=3 about signals"},
        {"doc_c", "third passage topics=4 about crossings"},
    };
    for (const auto& [doc_id, text] : docs) {
        DocumentChunk chunk;
        chunk.doc_id = doc_id;
        chunk.seq = 0;
        chunk.text = text;
        chunk.id = chunk_id_for(doc_id, 0, text);
        chunks.push_back(chunk);
    }
    return chunks;
}

std::vector<ExpertQA> style_pool(int per_style) {
    std::vector<ExpertQA> pool;
    int serial = 0;
    for (const auto& style : default_styles()) {
        for (int i = 0; i < per_style; ++i) {
            ExpertQA qa;
            qa.id = "qa" + std::to_string(serial++);
            qa.question = "Expert question " + std::to_string(serial) + " concerning " + style +
                          " obligations?";
            qa.answer = "Expert answer " + std::to_string(serial) + ".";
            qa.style = style;
            pool.push_back(qa);
        }
    }
    return pool;
}

void criterion_count_law() {
    Gateway gateway = mock_gateway(11);
    GenerationConfig config;
    config.combos_per_style = 2;
    config.fewshot_n = 3;
    config.n_samples = 5;
    config.seed = 11;
    Generator generator(gateway, config);
    RunReport report;
    auto records = generator.run_expertgenqa(marker_chunks(), style_pool(4), report);
    // 5 samples * 3 styles * K=2 * (2+3+4) topics = 270.
    std::ostringstream msg;
    msg << "expected 270 raw records, got " << records.size();
    require(records.size() == 270, msg.str());
    require(report.calls_failed == 0, "calls failed in mock mode");
}

// --- criterion 3 -------------------------------------------------------------

std::vector<std::string> acceptance_tokens(const std::string& text) {
    std::string cleaned;
    for (char ch : text) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (c >= 'A' && c <= 'Z') {
            cleaned.push_back(static_cast<char>(c - 'A' + 'a'));
        } else if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c >= 0x80) {
            cleaned.push_back(static_cast<char>(c));
        } else {
            cleaned.push_back(' ');
        }
    }
    std::vector<std::string> tokens;
    std::string token;
    for (char c : cleaned + " ") {
        if (c == ' ') {
            if (!token.empty()) tokens.push_back(token);
            token.clear();
        } else {
            token.push_back(c);
        }
    }
    return tokens;
}

double acceptance_overlap(const std::string& a, const std::string& b) {
    auto ta = acceptance_tokens(a);
    auto tb = acceptance_tokens(b);
    std::set<std::pair<std::string, std::string>> sa, sb;
    for (std::size_t i = 0; i + 1 < ta.size(); ++i) sa.emplace(ta[i], ta[i + 1]);
    for (std::size_t i = 0; i + 1 < tb.size(); ++i) sb.emplace(tb[i], tb[i + 1]);
    if (sa.empty() || sb.empty()) return ta == tb ? 1.0 : 0.0;
    std::size_t shared = 0;
    for (const auto& bg : sa) {
        if (sb.count(bg)) ++shared;
    }
    return static_cast<double>(shared) / static_cast<double>(std::min(sa.size(), sb.size()));
}

void criterion_dedup_equivalence() {
    // 200 questions with planted exact duplicates and paraphrases.
    const std::vector<std::string> words = {
        "track",  "signal", "brake",   "train",   "crossing", "report", "injury",  "employee",
        "record", "form",   "freight", "yard",    "rule",     "crew",   "shift",   "service",
        "defect", "repair", "notice",  "filing",  "case",     "audit",  "penalty", "region",
        "bridge", "gate",   "horn",    "speed",   "zone",     "duty",
    };
    std::mt19937_64 rng(99);
    auto word = [&]() { return words[rng() % words.size()]; };
    std::vector<std::string> questions;
    while (questions.size() < 200) {
        const std::size_t roll = rng() % 100;
        if (!questions.empty() && roll < 15) {
            questions.push_back(questions[rng() % questions.size()]);
        } else if (!questions.empty() && roll < 35) {
            auto tokens = acceptance_tokens(questions[rng() % questions.size()]);
            if (tokens.size() > 2) tokens[rng() % tokens.size()] = word();
            std::string rebuilt = "what about";
            for (const auto& t : tokens) rebuilt += " " + t;
            questions.push_back(rebuilt + "?");
        } else {
            std::string q = "how does the";
            const std::size_t len = 5 + rng() % 5;
            for (std::size_t i = 0; i < len; ++i) q += " " + word();
            questions.push_back(q + "?");
        }
    }

    // O(n^2) brute-force greedy oracle.
    std::vector<std::size_t> expected;
    for (std::size_t i = 0; i < questions.size(); ++i) {
        bool admit = true;
        for (std::size_t j : expected) {
            if (acceptance_overlap(questions[i], questions[j]) >= 0.3) {
                admit = false;
                break;
            }
        }
        if (admit) expected.push_back(i);
    }

    auto kept = dedup_within_indices(questions, 0.3);
    require(kept == expected, "inverted-index dedup disagrees with the brute-force oracle");
    require(kept.size() < questions.size(), "fixture planted no duplicates");

    for (std::size_t i = 0; i < kept.size(); ++i) {
        for (std::size_t j = i + 1; j < kept.size(); ++j) {
            require(acceptance_overlap(questions[kept[i]], questions[kept[j]]) < 0.3,
                    "post-condition violated: a kept pair overlaps at >= 0.3");
        }
    }
}

// --- criterion 4 -------------------------------------------------------------

void criterion_infonce() {
    AdapterModel adapter = AdapterModel::identity(4, 0.1);
    for (Eigen::Index B : {2, 4, 8}) {
        InfoNceBatch batch;
        Eigen::VectorXd q(4), d(4);
        q << 1.0, 0.5, -0.25, 0.0;
        d << 0.3, -1.0, 0.75, 0.5;
        batch.queries.resize(4, B);
        batch.documents.resize(4, B);
        for (Eigen::Index i = 0; i < B; ++i) {
            batch.queries.col(i) = q;
            batch.documents.col(i) = d;
        }
        const double loss = info_nce_loss(adapter, batch).loss;
        std::ostringstream msg;
        msg << "uniform batch B=" << B << ": loss " << loss << " != log B";
        require(std::abs(loss - std::log(static_cast<double>(B))) < 1e-9, msg.str());
    }

    Rng rng(314);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index dim = 4 + static_cast<Eigen::Index>(rng.below(13));
        const Eigen::Index B = 2 + static_cast<Eigen::Index>(rng.below(7));
        InfoNceBatch batch;
        batch.queries.resize(dim, B);
        batch.documents.resize(dim, B);
        for (Eigen::Index c = 0; c < B; ++c) {
            for (Eigen::Index r = 0; r < dim; ++r) {
                batch.queries(r, c) = rng.normal();
                batch.documents(r, c) = rng.normal();
            }
        }
        AdapterModel model;
        model.temperature = 0.1;
        model.W = Eigen::MatrixXd::Identity(dim, dim);
        for (Eigen::Index r = 0; r < dim; ++r) {
            for (Eigen::Index c = 0; c < dim; ++c) model.W(r, c) += 0.1 * rng.normal();
        }

        auto analytic = info_nce_loss(model, batch);
        Eigen::MatrixXd fd(dim, dim);
        const double h = 1e-6;
        for (Eigen::Index r = 0; r < dim; ++r) {
            for (Eigen::Index c = 0; c < dim; ++c) {
                const double original = model.W(r, c);
                model.W(r, c) = original + h;
                const double lp = info_nce_loss(model, batch).loss;
                model.W(r, c) = original - h;
                const double lm = info_nce_loss(model, batch).loss;
                model.W(r, c) = original;
                fd(r, c) = (lp - lm) / (2.0 * h);
            }
        }
        const double rel = (analytic.grad - fd).norm() / std::max(1e-12, fd.norm());
        std::ostringstream msg;
        msg << "gradient check trial " << trial << " (dim " << dim << ", B " << B
            << "): relative error " << rel;
        require(rel < 1e-4, msg.str());
    }
}

// --- criterion 5 -------------------------------------------------------------

void criterion_toy_retrieval() {
    const Eigen::Index docs = 64;
    const Eigen::Index signal_dim = 64;
    const Eigen::Index dim = signal_dim + 32;
    const double signal_scale = 2.0;

    Rng rng(2025);
    // Random orthogonal rotation applied to every vector.
    Eigen::MatrixXd G(dim, dim);
    for (Eigen::Index r = 0; r < dim; ++r) {
        for (Eigen::Index c = 0; c < dim; ++c) G(r, c) = rng.normal();
    }
    Eigen::MatrixXd rotation = Eigen::HouseholderQR<Eigen::MatrixXd>(G).householderQ();

    // One latent direction per doc; heavy noise in the remaining dims drowns
    // it for the identity adapter, while a linear projection recovers it.
    auto make_vec = [&](Eigen::Index doc) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
        v(doc) = signal_scale;
        for (Eigen::Index i = signal_dim; i < dim; ++i) v(i) = rng.normal();
        return (rotation * v).eval();
    };

    EmbeddingIndex embeddings;
    std::vector<EmbeddingRecord> chunk_embeddings;
    std::vector<std::pair<std::string, std::string>> pairs;
    for (Eigen::Index d = 0; d < docs; ++d) {
        Eigen::VectorXd doc_vec = make_vec(d);
        const std::string did = "c" + std::to_string(d);
        embeddings[did] = doc_vec;
        chunk_embeddings.push_back(
            {did, std::vector<double>(doc_vec.data(), doc_vec.data() + dim)});
        for (int r = 0; r < 8; ++r) {
            const std::string qid = "q" + std::to_string(d) + "_" + std::to_string(r);
            embeddings[qid] = make_vec(d);
            pairs.emplace_back(qid, did);
        }
    }
    require(pairs.size() == 512, "expected 512 training pairs");

    EmbeddingIndex held_out;
    std::vector<std::pair<std::string, std::string>> test_queries;
    for (Eigen::Index d = 0; d < docs; ++d) {
        const std::string qid = "h" + std::to_string(d);
        held_out[qid] = make_vec(d);
        test_queries.emplace_back(qid, "c" + std::to_string(d));
    }

    AdapterModel identity = AdapterModel::identity(dim, 0.1);
    auto baseline = evaluate_topk(identity, test_queries, held_out, chunk_embeddings, {1, 5});
    {
        std::ostringstream msg;
        msg << "identity top-1 " << baseline.top_k_accuracy.at(1) << " exceeds the 0.40 ceiling";
        require(baseline.top_k_accuracy.at(1) <= 0.40, msg.str());
        require(baseline.top_k_accuracy.at(1) <= baseline.top_k_accuracy.at(5),
                "baseline top-1 > top-5");
    }

    TrainConfig config;
    config.batch_size = 64;
    config.learning_rate = 0.5;
    config.epochs = 10;
    config.temperature = 0.1;
    config.seed = 7;
    auto result = train_adapter(pairs, embeddings, config);

    auto trained = evaluate_topk(result.adapter, test_queries, held_out, chunk_embeddings, {1, 5});
    {
        std::ostringstream msg;
        msg << "held-out top-1 after training " << trained.top_k_accuracy.at(1)
            << " (needs >= 0.90); baseline was " << baseline.top_k_accuracy.at(1);
        require(trained.top_k_accuracy.at(1) >= 0.90, msg.str());
        require(trained.top_k_accuracy.at(1) <= trained.top_k_accuracy.at(5),
                "trained top-1 > top-5");
    }
}

// --- criterion 6 -------------------------------------------------------------

void criterion_topic_coverage() {
    DocumentChunk a;
    a.doc_id = "doc_a";
    a.seq = 0;
    a.text = "a";
    a.id = chunk_id_for("doc_a", 0, "a");
    a.topics = {"t1", "t2", "t3", "t4"};
    DocumentChunk b;
    b.doc_id = "doc_b";
    b.seq = 0;
    b.text = "b";
    b.id = chunk_id_for("doc_b", 0, "b");
    b.topics = {"u1", "u2"};
    std::vector<DocumentChunk> chunks = {a, b};

    auto question_for = [](const std::string& id, const std::string& chunk_id,
                           const Topic& topic) {
        GeneratedQA qa;
        qa.id = id;
        qa.question = "q?";
        qa.source_chunk_id = chunk_id;
        qa.topic = topic;
        qa.style = "scenario_based";
        qa.pipeline = Pipeline::expertgenqa;
        return qa;
    };

    std::vector<GeneratedQA> full;
    int serial = 0;
    for (const auto& chunk : chunks) {
        for (const auto& topic : chunk.topics) {
            full.push_back(question_for("g" + std::to_string(serial++), chunk.id, topic));
        }
    }
    require(topic_coverage(chunks, full).tc == 1.0, "full coverage must give TC = 1.0 exactly");

    std::vector<GeneratedQA> mixed = {
        question_for("m1", a.id, "t1"), question_for("m2", a.id, "t2"),
        question_for("m3", b.id, "u1"), question_for("m4", b.id, "u2")};
    require(topic_coverage(chunks, mixed).tc == 0.75,
            "mixed fixture (0.5, 1.0) must give TC = 0.75 exactly");

    // Monotonicity under question addition, 100 random cases.
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<DocumentChunk> random_chunks;
        const std::size_t n_docs = 1 + rng() % 4;
        for (std::size_t d = 0; d < n_docs; ++d) {
            DocumentChunk chunk;
            chunk.doc_id = "doc" + std::to_string(d);
            chunk.seq = 0;
            chunk.text = "t";
            chunk.id = chunk_id_for(chunk.doc_id, 0, "t");
            const std::size_t n_topics = 1 + rng() % 5;
            for (std::size_t t = 0; t < n_topics; ++t) {
                chunk.topics.push_back("t" + std::to_string(d) + "_" + std::to_string(t));
            }
            random_chunks.push_back(chunk);
        }
        std::vector<GeneratedQA> generated;
        double previous = 0.0;
        for (int step = 0; step < 8; ++step) {
            const auto& chunk = random_chunks[rng() % random_chunks.size()];
            const auto& topic = chunk.topics[rng() % chunk.topics.size()];
            generated.push_back(
                question_for("g" + std::to_string(step), chunk.id, topic));
            const double tc = topic_coverage(random_chunks, generated).tc;
            require(tc >= previous - 1e-12, "TC decreased when a question was added");
            require(tc <= 1.0, "TC above 1");
            previous = tc;
        }
    }
}

// --- criterion 7 -------------------------------------------------------------

void write_pipeline_fixture(const std::filesystem::path& dir) {
    const std::vector<std::pair<std::string, std::string>> docs = {
        {"doc_a", "first passage topics=2 about brakes"},
        {"doc_b", "second passage topics=3 about signals"},
        {"doc_c", "third passage topics=4 about crossings"},
    };
    std::string chunk_lines;
    std::vector<std::string> chunk_ids;
    for (const auto& [doc_id, text] : docs) {
        json line = {{"doc_id", doc_id}, {"seq", 0}, {"text", text}};
        chunk_lines += line.dump() + "\n";
        chunk_ids.push_back(chunk_id_for(doc_id, 0, text));
    }
    write_file(dir / "chunks.jsonl", chunk_lines);

    std::string pool_lines;
    int serial = 0;
    for (const auto& style : default_styles()) {
        for (int i = 0; i < 6; ++i) {
            json line = {{"id", "qa" + std::to_string(serial)},
                         {"question", "Expert question " + std::to_string(serial) +
                                          " concerning " + style + " obligations?"},
                         {"answer", "Expert answer " + std::to_string(serial) + "."},
                         {"style", style},
                         {"source_chunk_ids", {chunk_ids[serial % chunk_ids.size()]}}};
            pool_lines += line.dump() + "\n";
            ++serial;
        }
    }
    write_file(dir / "expert_qa.jsonl", pool_lines);

    const json config = {
        {"seed", 123},
        {"provider",
         {{"kind", "mock"}, {"embedding_dim", 32}, {"retry", {{"base_delay_ms", 0}}}}},
        {"generation", {{"pipeline", "expertgenqa"}, {"k", 2}, {"n", 2}, {"n_samples", 3}}},
        {"metrics",
         {{"bloom", true}, {"preference", true}, {"preference_n", 3}, {"preference_limit", 3}}},
        {"retrieval", {{"batch_size", 8}, {"epochs", 2}, {"ks", {1, 5}}}},
        {"io", {{"workdir", "work"}, {"chunks", "chunks.jsonl"}, {"expert_pool", "expert_qa.jsonl"}}},
    };
    write_file(dir / "config.json", config.dump(2) + "\n");
}

void run_pipeline_in(const std::filesystem::path& dir) {
    const auto previous = std::filesystem::current_path();
    std::filesystem::current_path(dir);
    // Mute stage progress chatter; this criterion's output is the PASS line.
    std::ostringstream sink;
    auto* cout_buffer = std::cout.rdbuf(sink.rdbuf());
    try {
        RunConfig config = load_run_config("config.json");
        cmd_ingest(config);
        cmd_generate(config);
        cmd_dedup(config);
        cmd_metrics(config);
        cmd_train(config);
        cmd_eval(config);
        cmd_report(config);
    } catch (...) {
        std::cout.rdbuf(cout_buffer);
        std::filesystem::current_path(previous);
        throw;
    }
    std::cout.rdbuf(cout_buffer);
    std::filesystem::current_path(previous);
}

void criterion_determinism() {
    const auto root = std::filesystem::temp_directory_path() /
                      ("expertgen_acceptance_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(root / "run_a");
    std::filesystem::create_directories(root / "run_b");
    struct Cleanup {
        std::filesystem::path path;
        ~Cleanup() {
            std::error_code ec;
            std::filesystem::remove_all(path, ec);
        }
    } cleanup{root};

    write_pipeline_fixture(root / "run_a");
    write_pipeline_fixture(root / "run_b");
    run_pipeline_in(root / "run_a");
    run_pipeline_in(root / "run_b");

    const std::string generated_a = read_file(root / "run_a" / "work" / "generated.jsonl");
    const std::string generated_b = read_file(root / "run_b" / "work" / "generated.jsonl");
    require(!generated_a.empty(), "generated.jsonl is empty");
    require(generated_a == generated_b, "generated.jsonl differs between identical runs");

    const std::string report_a = read_file(root / "run_a" / "work" / "report.json");
    const std::string report_b = read_file(root / "run_b" / "work" / "report.json");
    require(!report_a.empty(), "report.json is empty");
    require(report_a == report_b, "report.json differs between identical runs");

    validate_report_schema(json::parse(report_a));
}

// --- criterion 8 -------------------------------------------------------------

// The paper-scale retrieval, preference and Bloom numbers need GPT-4o-class
// generation, 27-70B reward models and the FRA corpus; the repo ships the
// workflows but CI asserts only the structural properties.
void criterion_structural() {
    Gateway gateway = mock_gateway(31);

    // reward_gap >= 0 across a batch of mock preference stats.
    PreferenceOptions options;
    options.n_responses = 10;
    for (int i = 0; i < 5; ++i) {
        auto stat = preference_metrics(gateway, "q" + std::to_string(i), "context passage",
                                       "Question " + std::to_string(i) + "?", options);
        require(!stat.incomplete, "mock preference stat incomplete");
        require(stat.rewards.size() == 10, "expected N=10 rewards");
        require(stat.reward_gap >= 0.0, "reward_gap < 0");
    }

    // Bloom histogram totals equal the number of classified questions.
    std::vector<BloomLabel> labels;
    const std::vector<std::string> questions = {
        "What is a signal?", "How should a crew report?", "Why compare freight and yard rules?",
        "Design an audit plan.", "Explain the filing duty."};
    for (std::size_t i = 0; i < questions.size(); ++i) {
        labels.push_back(classify_bloom(gateway, "b" + std::to_string(i), questions[i]));
    }
    auto hist = bloom_histogram(labels);
    std::size_t total = 0;
    for (const auto& [_, count] : hist.counts) total += count;
    require(total == hist.classified, "bloom histogram does not sum to classified count");
    require(hist.classified + hist.uncertain == labels.size(), "bloom rows lost");

    // Monotone top-k on a random retrieval result.
    Rng rng(12);
    const Eigen::Index dim = 8;
    EmbeddingIndex queries;
    std::vector<EmbeddingRecord> chunks;
    std::vector<std::pair<std::string, std::string>> tests;
    for (int c = 0; c < 10; ++c) {
        Eigen::VectorXd v(dim);
        for (Eigen::Index r = 0; r < dim; ++r) v(r) = rng.normal();
        chunks.push_back({"c" + std::to_string(c), std::vector<double>(v.data(), v.data() + dim)});
    }
    for (int q = 0; q < 5; ++q) {
        Eigen::VectorXd v(dim);
        for (Eigen::Index r = 0; r < dim; ++r) v(r) = rng.normal();
        queries["q" + std::to_string(q)] = v;
        tests.emplace_back("q" + std::to_string(q), "c" + std::to_string(q));
    }
    auto result = evaluate_topk(AdapterModel::identity(dim, 0.1), tests, queries, chunks,
                                {1, 3, 5, 10});
    double previous = 0.0;
    for (int k : {1, 3, 5, 10}) {
        require(result.top_k_accuracy.at(k) >= previous, "top-k not monotone in k");
        previous = result.top_k_accuracy.at(k);
    }
}

}  // namespace

int main() {
    struct Criterion {
        std::string name;
        std::function<void()> run;
    };
    const std::vector<Criterion> criteria = {
        {"1 efficiency arithmetic matches the reference table (+/- 0.005 pp)",
         criterion_efficiency},
        {"2 count law: 3 docs x {2,3,4} topics, 3 styles, K=2, n_samples=5 -> 270 records",
         criterion_count_law},
        {"3 dedup equals the O(n^2) oracle and satisfies the pairwise post-condition",
         criterion_dedup_equivalence},
        {"4 InfoNCE: uniform loss = log B (1e-9); gradient vs finite differences (< 1e-4)",
         criterion_infonce},
        {"5 toy retrieval: identity top-1 <= 40% lifts to >= 90% within 10 epochs",
         criterion_toy_retrieval},
        {"6 TC: full -> 1.0, mixed -> 0.75, monotone under question addition",
         criterion_topic_coverage},
        {"7 determinism: two seeded mock runs produce byte-identical artifacts",
         criterion_determinism},
        {"8 structural properties of live-only metrics (gap >= 0, histogram, monotone k)",
         criterion_structural},
    };

    int failures = 0;
    for (const auto& criterion : criteria) {
        try {
            criterion.run();
            std::cout << "PASS criterion " << criterion.name << "\n";
        } catch (const std::exception& e) {
            ++failures;
            std::cout << "FAIL criterion " << criterion.name << ": " << e.what() << "\n";
        }
    }
    if (failures > 0) {
        std::cout << failures << " criterion(s) failed\n";
    }
    return failures;
}
