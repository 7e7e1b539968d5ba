#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "expertgen/gateway.hpp"

namespace expertgen {

// Linear adapter over frozen embeddings. Both queries and documents pass
// through the same W; similarities are measured in adapter space.
struct AdapterModel {
    Eigen::MatrixXd W;          // dim_out x dim_in, identity by default
    double temperature = 0.1;   // tau > 0

    static AdapterModel identity(Eigen::Index dim, double temperature = 0.1);

    Eigen::VectorXd transform(const Eigen::VectorXd& v) const { return W * v; }
};

struct TrainConfig {
    int batch_size = 64;        // >= 2, in-batch negatives need company
    double learning_rate = 1e-3;
    int epochs = 3;
    double temperature = 0.1;
    std::uint64_t seed = 0;
};

double cosine_similarity(const Eigen::VectorXd& q, const Eigen::VectorXd& d);

struct InfoNceBatch {
    // Column i of queries pairs with column i of documents.
    Eigen::MatrixXd queries;    // dim x B
    Eigen::MatrixXd documents;  // dim x B
    // Optional positive-document ids; duplicate ids are masked out of each
    // other's negative sets so a shared positive is never pushed away.
    std::vector<std::string> doc_ids;
};

struct InfoNceResult {
    double loss = 0.0;
    Eigen::MatrixXd grad;           // dLoss/dW
    Eigen::MatrixXd similarities;   // B x B adapter-space cosine matrix
};

// Mean over queries of -log softmax_i(s_i,j / tau): the positive is each
// query's own document, negatives are the other in-batch documents. Returns
// the analytic gradient with respect to W.
InfoNceResult info_nce_loss(const AdapterModel& adapter, const InfoNceBatch& batch);

using EmbeddingIndex = std::unordered_map<std::string, Eigen::VectorXd>;

EmbeddingIndex index_embeddings(const std::vector<EmbeddingRecord>& records);

struct TrainResult {
    AdapterModel adapter;
    std::vector<double> loss_curve;  // mean batch loss per epoch
};

// Mini-batch gradient descent over (query id, positive chunk id) pairs with
// seeded shuffling per epoch. Deterministic under seed. Non-finite loss
// aborts with diagnostics.
TrainResult train_adapter(const std::vector<std::pair<std::string, std::string>>& pairs,
                          const EmbeddingIndex& embeddings, const TrainConfig& config);

struct RetrievalResult {
    std::map<int, double> top_k_accuracy;
    std::map<std::string, int> per_query_rank;  // rank >= 1
    std::vector<std::string> errors;            // queries excluded (gold missing etc.)
};

// Ranks each query's gold chunk among all candidate chunks by adapter-space
// cosine similarity; exact ties are broken by chunk-id order. ks must be
// sorted ascending.
RetrievalResult evaluate_topk(const AdapterModel& adapter,
                              const std::vector<std::pair<std::string, std::string>>& test_queries,
                              const EmbeddingIndex& query_embeddings,
                              const std::vector<EmbeddingRecord>& chunk_embeddings,
                              const std::vector<int>& ks);

std::string format_topk_table(const RetrievalResult& result);

void save_adapter(const std::filesystem::path& path, const AdapterModel& adapter,
                  const TrainConfig& config, const std::vector<double>& loss_curve);
AdapterModel load_adapter(const std::filesystem::path& path);

void save_embeddings(const std::filesystem::path& path,
                     const std::vector<EmbeddingRecord>& records);
std::vector<EmbeddingRecord> load_embeddings(const std::filesystem::path& path);

void save_pairs(const std::filesystem::path& path,
                const std::vector<std::pair<std::string, std::string>>& pairs);
std::vector<std::pair<std::string, std::string>> load_pairs(const std::filesystem::path& path);

}  // namespace expertgen
