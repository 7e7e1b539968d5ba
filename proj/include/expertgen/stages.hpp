#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "expertgen/config.hpp"
#include "expertgen/gateway.hpp"

namespace expertgen {

// Workdir layout; every stage reads and writes only its declared files.
struct StagePaths {
    explicit StagePaths(const std::filesystem::path& workdir) : root(workdir) {}

    std::filesystem::path root;
    std::filesystem::path chunks() const { return root / "chunks.jsonl"; }
    std::filesystem::path expert_pool() const { return root / "expert_pool.jsonl"; }
    std::filesystem::path topics() const { return root / "topics.jsonl"; }
    std::filesystem::path generated() const { return root / "generated.jsonl"; }
    std::filesystem::path run_report() const { return root / "run.json"; }
    std::filesystem::path deduped() const { return root / "deduped.jsonl"; }
    std::filesystem::path dedup_stats() const { return root / "dedup.json"; }
    std::filesystem::path metrics() const { return root / "metrics.json"; }
    std::filesystem::path bloom_csv() const { return root / "bloom_labels.csv"; }
    std::filesystem::path preference_csv() const { return root / "preference_stats.csv"; }
    std::filesystem::path embeddings() const { return root / "embeddings.jsonl"; }
    std::filesystem::path pairs() const { return root / "pairs.jsonl"; }
    std::filesystem::path adapter() const { return root / "adapter.json"; }
    std::filesystem::path retrieval() const { return root / "retrieval.json"; }
    std::filesystem::path report() const { return root / "report.json"; }
    std::filesystem::path cache() const { return root / "cache.jsonl"; }
};

std::shared_ptr<Provider> make_provider(const RunConfig& config);
Gateway make_gateway(const RunConfig& config, std::shared_ptr<Provider> provider = nullptr);

// Pipeline stages, one per CLI subcommand. Each throws DependencyError naming
// the producing command when an upstream artifact is missing.
void cmd_ingest(const RunConfig& config);
void cmd_generate(const RunConfig& config);
void cmd_dedup(const RunConfig& config);
void cmd_metrics(const RunConfig& config);
void cmd_train(const RunConfig& config);
void cmd_eval(const RunConfig& config);
void cmd_report(const RunConfig& config);

}  // namespace expertgen
