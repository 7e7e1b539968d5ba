#include "expertgen/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "expertgen/errors.hpp"
#include "expertgen/util.hpp"

namespace expertgen {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

AdapterModel AdapterModel::identity(Eigen::Index dim, double temperature) {
    AdapterModel model;
    model.W = Eigen::MatrixXd::Identity(dim, dim);
    model.temperature = temperature;
    return model;
}

double cosine_similarity(const Eigen::VectorXd& q, const Eigen::VectorXd& d) {
    if (q.size() != d.size()) {
        throw ContractError("cosine_similarity: dimension mismatch");
    }
    const double qn = q.norm();
    const double dn = d.norm();
    if (qn == 0.0 || dn == 0.0) {
        throw ContractError("cosine_similarity: zero vector");
    }
    return q.dot(d) / (qn * dn);
}

InfoNceResult info_nce_loss(const AdapterModel& adapter, const InfoNceBatch& batch) {
    const Eigen::Index B = batch.queries.cols();
    const Eigen::Index dim_in = batch.queries.rows();
    if (B < 2) {
        throw ContractError("info_nce_loss: batch size must be >= 2");
    }
    if (batch.documents.cols() != B || batch.documents.rows() != dim_in) {
        throw ContractError("info_nce_loss: query/document shape mismatch");
    }
    if (adapter.W.cols() != dim_in) {
        throw ContractError("info_nce_loss: adapter expects dim " +
                            std::to_string(adapter.W.cols()) + ", batch has " +
                            std::to_string(dim_in));
    }
    if (!batch.doc_ids.empty() && static_cast<Eigen::Index>(batch.doc_ids.size()) != B) {
        throw ContractError("info_nce_loss: doc_ids size mismatch");
    }
    if (adapter.temperature <= 0.0) {
        throw ContractError("info_nce_loss: temperature must be positive");
    }
    const double tau = adapter.temperature;

    // Adapter-space projections and their normalized versions.
    Eigen::MatrixXd U = adapter.W * batch.queries;    // m x B
    Eigen::MatrixXd V = adapter.W * batch.documents;  // m x B
    Eigen::VectorXd u_norm = U.colwise().norm();
    Eigen::VectorXd v_norm = V.colwise().norm();
    for (Eigen::Index i = 0; i < B; ++i) {
        if (u_norm(i) < 1e-300 || v_norm(i) < 1e-300) {
            throw ContractError("info_nce_loss: zero vector after adapter transform");
        }
    }
    Eigen::MatrixXd U_hat = U * u_norm.cwiseInverse().asDiagonal();
    Eigen::MatrixXd V_hat = V * v_norm.cwiseInverse().asDiagonal();

    Eigen::MatrixXd S = U_hat.transpose() * V_hat;  // B x B cosine matrix

    // Negative-set mask: row i admits column j unless j is a duplicate of
    // query i's own positive document.
    Eigen::ArrayXXd mask = Eigen::ArrayXXd::Ones(B, B);
    if (!batch.doc_ids.empty()) {
        for (Eigen::Index i = 0; i < B; ++i) {
            for (Eigen::Index j = 0; j < B; ++j) {
                if (i != j && batch.doc_ids[static_cast<std::size_t>(i)] ==
                                  batch.doc_ids[static_cast<std::size_t>(j)]) {
                    mask(i, j) = 0.0;
                }
            }
        }
    }

    // Row-wise masked softmax over S/tau with log-sum-exp stabilization.
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(B, B);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < B; ++i) {
        double row_max = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < B; ++j) {
            if (mask(i, j) > 0.0) row_max = std::max(row_max, S(i, j) / tau);
        }
        double denom = 0.0;
        for (Eigen::Index j = 0; j < B; ++j) {
            if (mask(i, j) > 0.0) denom += std::exp(S(i, j) / tau - row_max);
        }
        for (Eigen::Index j = 0; j < B; ++j) {
            if (mask(i, j) > 0.0) P(i, j) = std::exp(S(i, j) / tau - row_max) / denom;
        }
        loss += std::log(denom) + row_max - S(i, i) / tau;
    }
    loss /= static_cast<double>(B);

    // dL/dS = (P - I) / (B * tau) on admitted entries.
    Eigen::MatrixXd G = P;
    G.diagonal().array() -= 1.0;
    G /= static_cast<double>(B) * tau;

    // dS(i,j)/dW = ((v_hat_j - s_ij u_hat_i)/|u_i|) x_i^T
    //            + ((u_hat_i - s_ij v_hat_j)/|v_j|) y_j^T
    Eigen::MatrixXd GS = G.cwiseProduct(S);
    Eigen::VectorXd row_gs = GS.rowwise().sum();              // sum_j g_ij s_ij
    Eigen::VectorXd col_gs = GS.colwise().sum().transpose();  // sum_i g_ij s_ij

    // Query-side coefficients, one column per i.
    Eigen::MatrixXd A = V_hat * G.transpose();  // m x B, col i = sum_j g_ij v_hat_j
    A -= U_hat * row_gs.asDiagonal();
    A = A * u_norm.cwiseInverse().asDiagonal();

    // Document-side coefficients, one column per j.
    Eigen::MatrixXd C = U_hat * G;  // m x B, col j = sum_i g_ij u_hat_i
    C -= V_hat * col_gs.asDiagonal();
    C = C * v_norm.cwiseInverse().asDiagonal();

    InfoNceResult result;
    result.loss = loss;
    result.grad = A * batch.queries.transpose() + C * batch.documents.transpose();
    result.similarities = std::move(S);
    return result;
}

EmbeddingIndex index_embeddings(const std::vector<EmbeddingRecord>& records) {
    EmbeddingIndex index;
    for (const auto& record : records) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(record.vector.size()));
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            v(i) = record.vector[static_cast<std::size_t>(i)];
        }
        index[record.owner_id] = std::move(v);
    }
    return index;
}

TrainResult train_adapter(const std::vector<std::pair<std::string, std::string>>& pairs,
                          const EmbeddingIndex& embeddings, const TrainConfig& config) {
    if (config.batch_size < 2) {
        throw ConfigurationError("train_adapter: batch_size must be >= 2");
    }
    if (config.epochs < 0) {
        throw ConfigurationError("train_adapter: epochs must be non-negative");
    }
    if (pairs.empty()) {
        throw ContractError("train_adapter: no training pairs");
    }

    std::vector<const Eigen::VectorXd*> queries;
    std::vector<const Eigen::VectorXd*> documents;
    queries.reserve(pairs.size());
    documents.reserve(pairs.size());
    for (const auto& [query_id, chunk_id] : pairs) {
        auto q = embeddings.find(query_id);
        auto d = embeddings.find(chunk_id);
        if (q == embeddings.end() || d == embeddings.end()) {
            throw ContractError("train_adapter: pair (" + query_id + ", " + chunk_id +
                                ") does not resolve to embeddings");
        }
        queries.push_back(&q->second);
        documents.push_back(&d->second);
    }
    const Eigen::Index dim = queries.front()->size();

    TrainResult result;
    result.adapter = AdapterModel::identity(dim, config.temperature);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::vector<std::size_t> order(pairs.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng rng(derive_seed(config.seed, "epoch:" + std::to_string(epoch)));
        rng.shuffle(order);

        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start + 2 <= order.size();
             start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t size =
                std::min<std::size_t>(static_cast<std::size_t>(config.batch_size),
                                      order.size() - start);
            if (size < 2) break;
            InfoNceBatch batch;
            batch.queries.resize(dim, static_cast<Eigen::Index>(size));
            batch.documents.resize(dim, static_cast<Eigen::Index>(size));
            batch.doc_ids.reserve(size);
            for (std::size_t b = 0; b < size; ++b) {
                const std::size_t idx = order[start + b];
                batch.queries.col(static_cast<Eigen::Index>(b)) = *queries[idx];
                batch.documents.col(static_cast<Eigen::Index>(b)) = *documents[idx];
                batch.doc_ids.push_back(pairs[idx].second);
            }
            InfoNceResult step = info_nce_loss(result.adapter, batch);
            if (!std::isfinite(step.loss)) {
                std::ostringstream msg;
                msg << "train_adapter: non-finite loss at epoch " << epoch + 1 << ", batch "
                    << batches + 1 << " (learning rate " << config.learning_rate
                    << " likely too high)";
                throw Error("training", msg.str());
            }
            result.adapter.W -= config.learning_rate * step.grad;
            epoch_loss += step.loss;
            ++batches;
        }
        result.loss_curve.push_back(batches == 0 ? 0.0 : epoch_loss / static_cast<double>(batches));
    }
    return result;
}

RetrievalResult evaluate_topk(const AdapterModel& adapter,
                              const std::vector<std::pair<std::string, std::string>>& test_queries,
                              const EmbeddingIndex& query_embeddings,
                              const std::vector<EmbeddingRecord>& chunk_embeddings,
                              const std::vector<int>& ks) {
    if (ks.empty() || !std::is_sorted(ks.begin(), ks.end())) {
        throw ContractError("evaluate_topk: ks must be non-empty and sorted ascending");
    }
    if (chunk_embeddings.empty()) {
        throw ContractError("evaluate_topk: empty candidate pool");
    }

    // Candidates in stable chunk-id order; this is also the tie-break order.
    std::vector<std::pair<std::string, Eigen::VectorXd>> candidates;
    candidates.reserve(chunk_embeddings.size());
    for (const auto& record : chunk_embeddings) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(record.vector.size()));
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            v(i) = record.vector[static_cast<std::size_t>(i)];
        }
        Eigen::VectorXd t = adapter.transform(v);
        const double n = t.norm();
        if (n == 0.0) {
            throw ContractError("evaluate_topk: chunk " + record.owner_id +
                                " has zero norm after adapter transform");
        }
        candidates.emplace_back(record.owner_id, t / n);
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    RetrievalResult result;
    std::size_t evaluated = 0;
    std::map<int, std::size_t> hits;
    for (int k : ks) hits[k] = 0;

    for (const auto& [query_id, gold_chunk_id] : test_queries) {
        auto q_it = query_embeddings.find(query_id);
        if (q_it == query_embeddings.end()) {
            result.errors.push_back("query " + query_id + ": no embedding");
            continue;
        }
        const bool gold_present =
            std::any_of(candidates.begin(), candidates.end(),
                        [&](const auto& c) { return c.first == gold_chunk_id; });
        if (!gold_present) {
            result.errors.push_back("query " + query_id + ": gold chunk " + gold_chunk_id +
                                    " not in candidate pool");
            continue;
        }
        Eigen::VectorXd q = adapter.transform(q_it->second);
        const double qn = q.norm();
        if (qn == 0.0) {
            result.errors.push_back("query " + query_id + ": zero norm after adapter transform");
            continue;
        }
        q /= qn;

        double gold_sim = 0.0;
        std::vector<double> sims(candidates.size());
        for (std::size_t c = 0; c < candidates.size(); ++c) {
            sims[c] = q.dot(candidates[c].second);
            if (candidates[c].first == gold_chunk_id) gold_sim = sims[c];
        }
        int rank = 1;
        for (std::size_t c = 0; c < candidates.size(); ++c) {
            if (candidates[c].first == gold_chunk_id) continue;
            if (sims[c] > gold_sim ||
                (sims[c] == gold_sim && candidates[c].first < gold_chunk_id)) {
                ++rank;
            }
        }
        result.per_query_rank[query_id] = rank;
        ++evaluated;
        for (int k : ks) {
            if (rank <= k) ++hits[k];
        }
    }

    for (int k : ks) {
        result.top_k_accuracy[k] =
            evaluated == 0 ? 0.0 : static_cast<double>(hits[k]) / static_cast<double>(evaluated);
    }
    return result;
}

std::string format_topk_table(const RetrievalResult& result) {
    std::ostringstream out;
    out << std::left << std::setw(8) << "k" << std::right << std::setw(10) << "accuracy" << "\n";
    for (const auto& [k, acc] : result.top_k_accuracy) {
        out << std::left << std::setw(8) << k << std::right << std::setw(10) << std::fixed
            << std::setprecision(4) << acc << "\n";
    }
    if (!result.errors.empty()) {
        out << "(" << result.errors.size() << " queries excluded)\n";
    }
    return out.str();
}

void save_adapter(const std::filesystem::path& path, const AdapterModel& adapter,
                  const TrainConfig& config, const std::vector<double>& loss_curve) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ParseError("cannot write file: " + path.string());
    ordered_json j;
    j["dim_out"] = adapter.W.rows();
    j["dim_in"] = adapter.W.cols();
    j["temperature"] = adapter.temperature;
    j["batch_size"] = config.batch_size;
    j["learning_rate"] = config.learning_rate;
    j["epochs"] = config.epochs;
    j["seed"] = config.seed;
    j["loss_curve"] = loss_curve;
    json rows = json::array();
    for (Eigen::Index r = 0; r < adapter.W.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < adapter.W.cols(); ++c) {
            row.push_back(adapter.W(r, c));
        }
        rows.push_back(std::move(row));
    }
    j["W"] = std::move(rows);
    out << j.dump() << "\n";
}

AdapterModel load_adapter(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open file: " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ParseError("malformed adapter file: " + path.string());
    AdapterModel model;
    model.temperature = j.at("temperature").get<double>();
    const auto rows = j.at("W").get<std::vector<std::vector<double>>>();
    if (rows.empty()) throw ParseError("adapter file has empty W: " + path.string());
    model.W.resize(static_cast<Eigen::Index>(rows.size()),
                   static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size()) {
            throw ParseError("adapter file has ragged W: " + path.string());
        }
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            model.W(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    return model;
}

void save_embeddings(const std::filesystem::path& path,
                     const std::vector<EmbeddingRecord>& records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ParseError("cannot write file: " + path.string());
    for (const auto& record : records) {
        ordered_json j;
        j["owner_id"] = record.owner_id;
        j["vector"] = record.vector;
        out << j.dump() << "\n";
    }
}

std::vector<EmbeddingRecord> load_embeddings(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open file: " + path.string());
    std::vector<EmbeddingRecord> records;
    std::string line;
    std::size_t line_no = 0;
    std::size_t dim = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": malformed record");
        }
        EmbeddingRecord record;
        record.owner_id = j.at("owner_id").get<std::string>();
        record.vector = j.at("vector").get<std::vector<double>>();
        if (records.empty()) {
            dim = record.vector.size();
        } else if (record.vector.size() != dim) {
            throw IntegrityError(path.string() + ":" + std::to_string(line_no) +
                                 ": embedding dimension mismatch");
        }
        records.push_back(std::move(record));
    }
    return records;
}

void save_pairs(const std::filesystem::path& path,
                const std::vector<std::pair<std::string, std::string>>& pairs) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ParseError("cannot write file: " + path.string());
    for (const auto& [query_id, chunk_id] : pairs) {
        ordered_json j;
        j["query_id"] = query_id;
        j["chunk_id"] = chunk_id;
        out << j.dump() << "\n";
    }
}

std::vector<std::pair<std::string, std::string>> load_pairs(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open file: " + path.string());
    std::vector<std::pair<std::string, std::string>> pairs;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw ParseError("malformed pairs file: " + path.string());
        pairs.emplace_back(j.at("query_id").get<std::string>(), j.at("chunk_id").get<std::string>());
    }
    return pairs;
}

}  // namespace expertgen
