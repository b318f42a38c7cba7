#pragma once

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "hoplab/corpus.hpp"

namespace hoplab {

using EmbeddingVector = Eigen::VectorXf;

/// Maps a batch of texts to equal-dimension vectors, order preserved.
using EmbedFn = std::function<std::vector<EmbeddingVector>(const std::vector<std::string>&)>;

struct ScoredChunk {
    Chunk chunk;
    double score = 0.0; // cosine similarity in [-1, 1]
};

struct IndexBuildOptions {
    std::string encoder_id = "unknown";
    std::size_t window = 220;
    std::size_t overlap = 50;
    std::size_t batch_size = 64;
    std::size_t parallelism = 4; // concurrent embedding batches during build
};

struct IndexManifest {
    int format_version = 1;
    std::string encoder_id;
    int dim = 0;
    std::size_t chunk_count = 0;
    std::size_t window = 220;
    std::size_t overlap = 50;
};

/// Exhaustive cosine index. Single-writer build; immutable afterwards, so
/// concurrent searches need no locking. Vectors are L2-normalized at build
/// time and scores are accumulated in double precision.
class VectorIndex {
public:
    VectorIndex() = default;

    static VectorIndex build(std::vector<Chunk> chunks, const EmbedFn& embed,
                             const IndexBuildOptions& options = {});

    /// Top-k by cosine similarity, ties broken by chunk_id ascending.
    /// Returns exactly min(k, size()) results. Throws ConfigError for k < 1
    /// and GatewayError on query dimension mismatch.
    std::vector<ScoredChunk> search(const EmbeddingVector& query, int k) const;

    void save(const std::string& dir) const;
    static VectorIndex load(const std::string& dir);

    const IndexManifest& manifest() const { return manifest_; }
    std::size_t size() const { return chunks_.size(); }
    int dim() const { return manifest_.dim; }
    const Chunk* chunk_by_id(const std::string& chunk_id) const;
    const std::vector<Chunk>& chunks() const { return chunks_; }

private:
    using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    IndexManifest manifest_;
    std::vector<Chunk> chunks_;
    RowMatrix vectors_; // one L2-normalized row per chunk
    std::unordered_map<std::string, std::size_t> by_id_;

    void rebuild_id_map();
};

} // namespace hoplab
