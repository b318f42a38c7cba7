#include "hoplab/index.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include <nlohmann/json.hpp>

#include "hoplab/errors.hpp"

namespace hoplab {

namespace fs = std::filesystem;
using nlohmann::json;

VectorIndex VectorIndex::build(std::vector<Chunk> chunks, const EmbedFn& embed,
                               const IndexBuildOptions& options) {
    for (const auto& c : chunks) {
        if (c.text.empty()) throw ValidationError("chunk " + c.chunk_id + " has empty text");
    }

    VectorIndex index;
    index.manifest_.encoder_id = options.encoder_id;
    index.manifest_.window = options.window;
    index.manifest_.overlap = options.overlap;
    index.manifest_.chunk_count = chunks.size();
    index.chunks_ = std::move(chunks);

    if (index.chunks_.empty()) {
        index.manifest_.dim = 0;
        return index;
    }

    const std::size_t batch_size = std::max<std::size_t>(1, options.batch_size);
    const std::size_t n_batches = (index.chunks_.size() + batch_size - 1) / batch_size;
    std::vector<std::vector<EmbeddingVector>> batch_results(n_batches);

    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    auto worker = [&] {
        for (;;) {
            const std::size_t b = next.fetch_add(1);
            if (b >= n_batches) return;
            std::vector<std::string> texts;
            const std::size_t lo = b * batch_size;
            const std::size_t hi = std::min(lo + batch_size, index.chunks_.size());
            texts.reserve(hi - lo);
            for (std::size_t i = lo; i < hi; ++i) texts.push_back(index.chunks_[i].text);
            try {
                batch_results[b] = embed(texts);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    const std::size_t workers =
        std::max<std::size_t>(1, std::min(options.parallelism, n_batches));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);

    int dim = -1;
    std::size_t row = 0;
    for (std::size_t b = 0; b < n_batches; ++b) {
        const std::size_t lo = b * batch_size;
        const std::size_t hi = std::min(lo + batch_size, index.chunks_.size());
        if (batch_results[b].size() != hi - lo) {
            throw GatewayError("embedding batch returned " +
                               std::to_string(batch_results[b].size()) + " vectors for " +
                               std::to_string(hi - lo) + " texts");
        }
        for (const auto& v : batch_results[b]) {
            if (dim < 0) {
                dim = static_cast<int>(v.size());
                if (dim == 0) throw GatewayError("embedding dimension is zero");
                index.vectors_.resize(static_cast<Eigen::Index>(index.chunks_.size()), dim);
            }
            if (static_cast<int>(v.size()) != dim) {
                throw GatewayError("embedding dimension drift: expected " + std::to_string(dim) +
                                   ", got " + std::to_string(v.size()));
            }
            const float norm = v.norm();
            index.vectors_.row(static_cast<Eigen::Index>(row)) =
                norm > 0.0f ? (v / norm).transpose() : v.transpose();
            ++row;
        }
    }
    index.manifest_.dim = dim;
    index.rebuild_id_map();
    return index;
}

std::vector<ScoredChunk> VectorIndex::search(const EmbeddingVector& query, int k) const {
    if (k < 1) throw ConfigError("search k must be >= 1");
    if (chunks_.empty()) return {};
    if (static_cast<int>(query.size()) != manifest_.dim) {
        throw GatewayError("query dimension " + std::to_string(query.size()) +
                           " does not match index dimension " + std::to_string(manifest_.dim));
    }

    Eigen::VectorXd q = query.cast<double>();
    const double qnorm = q.norm();
    if (qnorm > 0.0) q /= qnorm;

    const auto n = static_cast<std::size_t>(vectors_.rows());
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = vectors_.row(static_cast<Eigen::Index>(i)).cast<double>().dot(q);
        scores[i] = std::clamp(s, -1.0, 1.0);
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), n);
    auto better = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return chunks_[a].chunk_id < chunks_[b].chunk_id;
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<long>(take), order.end(), better);

    std::vector<ScoredChunk> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        out.push_back(ScoredChunk{chunks_[order[i]], scores[order[i]]});
    }
    return out;
}

const Chunk* VectorIndex::chunk_by_id(const std::string& chunk_id) const {
    auto it = by_id_.find(chunk_id);
    return it == by_id_.end() ? nullptr : &chunks_[it->second];
}

void VectorIndex::rebuild_id_map() {
    by_id_.clear();
    by_id_.reserve(chunks_.size());
    for (std::size_t i = 0; i < chunks_.size(); ++i) by_id_[chunks_[i].chunk_id] = i;
}

void VectorIndex::save(const std::string& dir) const {
    fs::create_directories(dir);

    json m{{"format_version", manifest_.format_version},
           {"encoder_id", manifest_.encoder_id},
           {"dim", manifest_.dim},
           {"chunk_count", manifest_.chunk_count},
           {"window", manifest_.window},
           {"overlap", manifest_.overlap}};
    std::ofstream mf(fs::path(dir) / "index_manifest.json", std::ios::binary | std::ios::trunc);
    if (!mf) throw IoError("cannot write index manifest in " + dir);
    mf << m.dump(2) << "\n";

    std::ofstream cf(fs::path(dir) / "chunks.jsonl", std::ios::binary | std::ios::trunc);
    if (!cf) throw IoError("cannot write chunk metadata in " + dir);
    for (const auto& c : chunks_) {
        json j{{"chunk_id", c.chunk_id},
               {"doc_id", c.doc_id},
               {"word_start", c.word_start},
               {"word_end", c.word_end},
               {"text", c.text}};
        cf << j.dump() << "\n";
    }

    std::ofstream vf(fs::path(dir) / "vectors.f32", std::ios::binary | std::ios::trunc);
    if (!vf) throw IoError("cannot write vectors in " + dir);
    if (vectors_.size() > 0) {
        vf.write(reinterpret_cast<const char*>(vectors_.data()),
                 static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(
                                                                  vectors_.size())));
    }
}

VectorIndex VectorIndex::load(const std::string& dir) {
    std::ifstream mf(fs::path(dir) / "index_manifest.json", std::ios::binary);
    if (!mf) throw IoError("missing index manifest in " + dir);
    json m = json::parse(mf);

    VectorIndex index;
    index.manifest_.format_version = m.at("format_version").get<int>();
    if (index.manifest_.format_version != 1) {
        throw ValidationError("unsupported index format version " +
                              std::to_string(index.manifest_.format_version));
    }
    index.manifest_.encoder_id = m.at("encoder_id").get<std::string>();
    index.manifest_.dim = m.at("dim").get<int>();
    index.manifest_.chunk_count = m.at("chunk_count").get<std::size_t>();
    index.manifest_.window = m.at("window").get<std::size_t>();
    index.manifest_.overlap = m.at("overlap").get<std::size_t>();

    std::ifstream cf(fs::path(dir) / "chunks.jsonl", std::ios::binary);
    if (!cf) throw IoError("missing chunk metadata in " + dir);
    std::string line;
    long line_no = 0;
    while (std::getline(cf, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ValidationError(std::string("malformed chunk row: ") + e.what(), line_no);
        }
        Chunk c;
        c.chunk_id = j.at("chunk_id").get<std::string>();
        c.doc_id = j.at("doc_id").get<std::string>();
        c.word_start = j.at("word_start").get<std::size_t>();
        c.word_end = j.at("word_end").get<std::size_t>();
        c.text = j.at("text").get<std::string>();
        index.chunks_.push_back(std::move(c));
    }
    if (index.chunks_.size() != index.manifest_.chunk_count) {
        throw ValidationError("chunk count mismatch: manifest says " +
                              std::to_string(index.manifest_.chunk_count) + ", found " +
                              std::to_string(index.chunks_.size()));
    }

    if (!index.chunks_.empty()) {
        index.vectors_.resize(static_cast<Eigen::Index>(index.chunks_.size()),
                              index.manifest_.dim);
        std::ifstream vf(fs::path(dir) / "vectors.f32", std::ios::binary);
        if (!vf) throw IoError("missing vectors in " + dir);
        const auto bytes =
            static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(
                                                             index.vectors_.size()));
        vf.read(reinterpret_cast<char*>(index.vectors_.data()), bytes);
        if (vf.gcount() != bytes) throw ValidationError("vector file truncated in " + dir);
    }
    index.rebuild_id_map();
    return index;
}

} // namespace hoplab
