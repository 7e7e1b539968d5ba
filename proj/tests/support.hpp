#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "expertgen/corpus.hpp"

namespace testsupport {

// Unique scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::mt19937_64 rng(std::random_device{}());
        path_ = std::filesystem::temp_directory_path() /
                ("expertgen_" + tag + "_" + std::to_string(rng()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path file(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    out << content;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

inline expertgen::DocumentChunk make_chunk(const std::string& doc_id, std::uint64_t seq,
                                           const std::string& text) {
    expertgen::DocumentChunk chunk;
    chunk.doc_id = doc_id;
    chunk.seq = seq;
    chunk.text = text;
    chunk.id = expertgen::chunk_id_for(doc_id, seq, text);
    return chunk;
}

inline expertgen::ExpertQA make_expert_qa(const std::string& id, const std::string& question,
                                          const std::string& answer, const std::string& style,
                                          std::vector<std::string> chunk_ids = {}) {
    expertgen::ExpertQA qa;
    qa.id = id;
    qa.question = question;
    qa.answer = answer;
    qa.style = style;
    qa.source_chunk_ids = std::move(chunk_ids);
    return qa;
}

}  // namespace testsupport
