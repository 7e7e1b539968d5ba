#include "expertgen/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "expertgen/errors.hpp"
#include "expertgen/util.hpp"

namespace expertgen {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string chunk_id_for(const std::string& doc_id, std::uint64_t seq,
                         const std::string& normalized_text) {
    std::string key = doc_id;
    key.push_back('\x1f');
    key += std::to_string(seq);
    key.push_back('\x1f');
    key += normalized_text;
    return hex16(fnv1a64(key));
}

namespace {

json parse_jsonl_line(const std::string& line, const std::filesystem::path& path,
                      std::size_t line_no) {
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object()) {
        std::ostringstream msg;
        msg << path.string() << ":" << line_no << ": malformed JSON record";
        throw ParseError(msg.str());
    }
    return record;
}

template <typename T>
T require_field(const json& record, const char* key, const std::filesystem::path& path,
                std::size_t line_no) {
    auto it = record.find(key);
    if (it == record.end()) {
        std::ostringstream msg;
        msg << path.string() << ":" << line_no << ": missing field '" << key << "'";
        throw ParseError(msg.str());
    }
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        std::ostringstream msg;
        msg << path.string() << ":" << line_no << ": field '" << key
            << "' has the wrong type";
        throw ParseError(msg.str());
    }
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open file: " + path.string());
    }
    return in;
}

}  // namespace

std::vector<DocumentChunk> load_corpus(const std::filesystem::path& path) {
    std::ifstream in = open_or_throw(path);
    std::vector<DocumentChunk> chunks;
    std::unordered_set<std::string> seen_keys;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json record = parse_jsonl_line(line, path, line_no);
        DocumentChunk chunk;
        chunk.doc_id = require_field<std::string>(record, "doc_id", path, line_no);
        chunk.seq = require_field<std::uint64_t>(record, "seq", path, line_no);
        chunk.text = normalize_whitespace(require_field<std::string>(record, "text", path, line_no));
        if (chunk.text.empty()) {
            std::ostringstream msg;
            msg << path.string() << ":" << line_no << ": chunk text empty after normalization";
            throw ParseError(msg.str());
        }
        std::string key = chunk.doc_id + "\x1f" + std::to_string(chunk.seq);
        if (!seen_keys.insert(key).second) {
            std::ostringstream msg;
            msg << path.string() << ":" << line_no << ": duplicate (doc_id, seq) = ("
                << chunk.doc_id << ", " << chunk.seq << ")";
            throw IntegrityError(msg.str());
        }
        chunk.id = chunk_id_for(chunk.doc_id, chunk.seq, chunk.text);
        if (record.contains("topics")) {
            for (const auto& t : record.at("topics")) {
                std::string label = normalize_label(t.get<std::string>());
                if (!label.empty() &&
                    std::find(chunk.topics.begin(), chunk.topics.end(), label) ==
                        chunk.topics.end()) {
                    chunk.topics.push_back(label);
                }
            }
        }
        chunks.push_back(std::move(chunk));
    }
    std::sort(chunks.begin(), chunks.end(), [](const DocumentChunk& a, const DocumentChunk& b) {
        if (a.doc_id != b.doc_id) return a.doc_id < b.doc_id;
        return a.seq < b.seq;
    });
    return chunks;
}

std::vector<ExpertQA> load_expert_pool(
    const std::filesystem::path& path, const std::vector<StyleName>& allowed_styles,
    const std::unordered_set<std::string>* known_chunk_ids) {
    std::ifstream in = open_or_throw(path);
    std::vector<ExpertQA> pool;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json record = parse_jsonl_line(line, path, line_no);
        ExpertQA qa;
        qa.question = normalize_whitespace(require_field<std::string>(record, "question", path, line_no));
        qa.answer = normalize_whitespace(require_field<std::string>(record, "answer", path, line_no));
        qa.style = require_field<std::string>(record, "style", path, line_no);
        if (record.contains("source_chunk_ids")) {
            qa.source_chunk_ids =
                require_field<std::vector<std::string>>(record, "source_chunk_ids", path, line_no);
        }
        if (qa.question.empty()) {
            std::ostringstream msg;
            msg << path.string() << ":" << line_no << ": question must be non-empty";
            throw ValidationError(msg.str());
        }
        if (std::find(allowed_styles.begin(), allowed_styles.end(), qa.style) ==
            allowed_styles.end()) {
            std::ostringstream msg;
            msg << path.string() << ":" << line_no << ": unknown style '" << qa.style
                << "'; allowed styles:";
            for (const auto& s : allowed_styles) msg << " " << s;
            throw ValidationError(msg.str());
        }
        if (known_chunk_ids != nullptr) {
            for (const auto& cid : qa.source_chunk_ids) {
                if (known_chunk_ids->find(cid) == known_chunk_ids->end()) {
                    std::ostringstream msg;
                    msg << path.string() << ":" << line_no << ": source_chunk_id '" << cid
                        << "' does not resolve to a corpus chunk";
                    throw ValidationError(msg.str());
                }
            }
        }
        if (record.contains("id")) {
            qa.id = record.at("id").get<std::string>();
        } else {
            qa.id = hex16(fnv1a64(qa.question + "\x1f" + qa.answer + "\x1f" + qa.style));
        }
        if (!seen_ids.insert(qa.id).second) {
            std::ostringstream msg;
            msg << path.string() << ":" << line_no << ": duplicate expert QA id '" << qa.id << "'";
            throw IntegrityError(msg.str());
        }
        pool.push_back(std::move(qa));
    }
    return pool;
}

void save_corpus(const std::filesystem::path& path, const std::vector<DocumentChunk>& chunks) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ParseError("cannot write file: " + path.string());
    for (const auto& chunk : chunks) {
        ordered_json record;
        record["id"] = chunk.id;
        record["doc_id"] = chunk.doc_id;
        record["seq"] = chunk.seq;
        record["text"] = chunk.text;
        record["topics"] = chunk.topics;
        out << record.dump() << "\n";
    }
}

void save_expert_pool(const std::filesystem::path& path, const std::vector<ExpertQA>& pool) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ParseError("cannot write file: " + path.string());
    for (const auto& qa : pool) {
        ordered_json record;
        record["id"] = qa.id;
        record["question"] = qa.question;
        record["answer"] = qa.answer;
        record["style"] = qa.style;
        record["source_chunk_ids"] = qa.source_chunk_ids;
        out << record.dump() << "\n";
    }
}

PoolSplit split_pool(const std::vector<ExpertQA>& pool, double test_fraction,
                     std::uint64_t seed) {
    if (pool.empty()) {
        throw ContractError("split_pool: pool must be non-empty");
    }
    if (test_fraction < 0.0 || test_fraction > 1.0) {
        throw ContractError("split_pool: test_fraction must be in [0, 1]");
    }
    std::vector<std::size_t> order(pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(seed, "split_pool"));
    rng.shuffle(order);

    auto n_test = static_cast<std::size_t>(
        std::min<double>(static_cast<double>(pool.size()),
                         std::llround(test_fraction * static_cast<double>(pool.size()))));
    PoolSplit split;
    split.test.reserve(n_test);
    split.train.reserve(pool.size() - n_test);
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i < n_test) {
            split.test.push_back(pool[order[i]]);
        } else {
            split.train.push_back(pool[order[i]]);
        }
    }
    return split;
}

std::vector<std::string> chunk_text(const std::string& raw_text, std::size_t max_chars) {
    if (max_chars == 0) {
        throw ContractError("chunk_text: max_chars must be positive");
    }
    // Paragraphs = blank-line separated blocks.
    std::vector<std::string> paragraphs;
    std::string current;
    std::istringstream in(raw_text);
    std::string line;
    auto flush = [&]() {
        std::string p = normalize_whitespace(current);
        if (!p.empty()) paragraphs.push_back(std::move(p));
        current.clear();
    };
    while (std::getline(in, line)) {
        if (normalize_whitespace(line).empty()) {
            flush();
        } else {
            current += line;
            current.push_back('\n');
        }
    }
    flush();

    std::vector<std::string> chunks;
    std::string acc;
    for (const auto& p : paragraphs) {
        if (!acc.empty() && acc.size() + 1 + p.size() > max_chars) {
            chunks.push_back(acc);
            acc.clear();
        }
        if (p.size() > max_chars) {
            // Paragraph longer than the limit: hard-split on the boundary.
            std::size_t pos = 0;
            if (!acc.empty()) {
                chunks.push_back(acc);
                acc.clear();
            }
            while (pos < p.size()) {
                chunks.push_back(p.substr(pos, max_chars));
                pos += max_chars;
            }
            continue;
        }
        if (acc.empty()) {
            acc = p;
        } else {
            acc += " ";
            acc += p;
        }
    }
    if (!acc.empty()) chunks.push_back(acc);
    return chunks;
}

}  // namespace expertgen
