#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "novelbench/common.hpp"
#include "novelbench/corpus.hpp"
#include "novelbench/llm_gateway.hpp"

namespace novelbench {

/// Dense embedding. Values are single precision; similarity arithmetic is
/// carried out in double.
class EmbeddingVector {
  public:
    EmbeddingVector() = default;
    explicit EmbeddingVector(std::vector<float> values);

    /// L2-normalizes `raw`. Throws DataError on non-finite entries or a zero vector.
    static EmbeddingVector normalized(std::span<const double> raw);
    static EmbeddingVector normalized(std::span<const float> raw);

    [[nodiscard]] std::span<const float> values() const { return values_; }
    [[nodiscard]] std::size_t dimension() const { return values_.size(); }
    [[nodiscard]] double norm() const;

    friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

  private:
    std::vector<float> values_;
};

/// dot(u, v) / (|u| |v|), clamped to [-1, 1]. Throws DataError on dimension mismatch.
double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v);

// ---------------------------------------------------------------------------
// Embedding providers
// ---------------------------------------------------------------------------

class EmbeddingProvider {
  public:
    virtual ~EmbeddingProvider() = default;
    virtual std::vector<std::vector<float>> embed(const std::string& model_id, std::span<const std::string> texts) = 0;
    [[nodiscard]] virtual bool is_mock() const { return false; }
};

/// OpenAI-compatible embeddings endpoint: POST {base_url}/embeddings.
class HttpEmbeddingProvider final : public EmbeddingProvider {
  public:
    HttpEmbeddingProvider(std::string base_url, std::string api_key, std::shared_ptr<HttpTransport> transport,
                          std::optional<int> request_dimensions = std::nullopt);

    std::vector<std::vector<float>> embed(const std::string& model_id, std::span<const std::string> texts) override;

  private:
    std::string url_;
    std::string api_key_;
    std::shared_ptr<HttpTransport> transport_;
    std::optional<int> request_dimensions_;
};

/// Deterministic in-process provider driven by a per-text function.
class MockEmbeddingProvider final : public EmbeddingProvider {
  public:
    using Fn = std::function<std::vector<float>(const std::string&)>;

    explicit MockEmbeddingProvider(Fn fn);

    /// Signed feature hashing of lower-cased word tokens into `dimension` buckets.
    static std::shared_ptr<MockEmbeddingProvider> hashing(int dimension);

    std::vector<std::vector<float>> embed(const std::string& model_id, std::span<const std::string> texts) override;
    [[nodiscard]] bool is_mock() const override { return true; }

    [[nodiscard]] std::size_t calls() const { return calls_.load(); }
    [[nodiscard]] std::size_t texts_embedded() const { return texts_.load(); }

  private:
    Fn fn_;
    std::atomic<std::size_t> calls_{0};
    std::atomic<std::size_t> texts_{0};
};

/// Keyed by (model id, normalized text). Directory layout:
/// `<dir>/embed-v1/<key[0:2]>/<key>.f32` holding raw little-endian floats.
class EmbeddingCache {
  public:
    static constexpr std::string_view kLayoutVersion = "embed-v1";

    EmbeddingCache() = default;
    explicit EmbeddingCache(std::filesystem::path dir);

    static std::string key_for(const std::string& model_id, const std::string& normalized_text);

    [[nodiscard]] std::optional<EmbeddingVector> get(const std::string& key) const;
    void put(const std::string& key, const EmbeddingVector& vector);
    [[nodiscard]] std::size_t size() const;

  private:
    std::optional<std::filesystem::path> dir_;
    mutable std::shared_mutex mu_;
    mutable std::unordered_map<std::string, EmbeddingVector> memory_;
};

struct EmbedderOptions {
    std::string model_id = "text-embedding-3-small";
    int dimension = 1536;
    int batch_size = 64;
    RetryPolicy retry;
    Sleeper sleeper = real_sleeper();
    std::shared_ptr<EmbeddingCache> cache = std::make_shared<EmbeddingCache>();
};

/// Embeds text through a provider with retries, local L2 normalization and caching.
class Embedder {
  public:
    Embedder(std::shared_ptr<EmbeddingProvider> provider, EmbedderOptions options = {});

    EmbeddingVector embed(const std::string& text);
    std::vector<EmbeddingVector> embed_many(std::span<const std::string> texts);

    [[nodiscard]] const std::string& model_id() const { return options_.model_id; }
    [[nodiscard]] int dimension() const { return options_.dimension; }
    [[nodiscard]] bool is_mock() const { return provider_->is_mock(); }

  private:
    std::vector<EmbeddingVector> embed_uncached(std::span<const std::string> normalized_texts);

    std::shared_ptr<EmbeddingProvider> provider_;
    EmbedderOptions options_;
};

// ---------------------------------------------------------------------------
// Index
// ---------------------------------------------------------------------------

struct IndexEntry {
    std::string paper_id;
    EmbeddingVector vector;
    Date published_date;
    Field field = Field::Cs;

    friend bool operator==(const IndexEntry&, const IndexEntry&) = default;
};

struct IndexManifest {
    static constexpr int kFormatVersion = 1;

    int format_version = kFormatVersion;
    std::string model_id;
    int dimension = 0;
    Field field = Field::Cs;
    std::size_t entry_count = 0;
};

/// Immutable once built; exact (brute-force) cosine search with a date cutoff.
class Index {
  public:
    Index(std::string model_id, int dimension, Field field);

    /// Appends an entry; throws DataError on duplicate id, wrong field or
    /// dimension, or a vector that is not unit length.
    void add(IndexEntry entry);

    [[nodiscard]] std::size_t size() const { return ids_.size(); }
    [[nodiscard]] int dimension() const { return dimension_; }
    [[nodiscard]] Field field() const { return field_; }
    [[nodiscard]] const std::string& model_id() const { return model_id_; }
    [[nodiscard]] IndexManifest manifest() const;

    [[nodiscard]] IndexEntry entry(std::size_t i) const;
    [[nodiscard]] const std::string& id_at(std::size_t i) const { return ids_[i]; }
    [[nodiscard]] Date date_at(std::size_t i) const { return dates_[i]; }
    [[nodiscard]] std::span<const float> vector_at(std::size_t i) const;
    [[nodiscard]] double norm_at(std::size_t i) const { return norms_[i]; }

    /// Writes `manifest.json` and `entries.bin` into `dir`.
    void save(const std::filesystem::path& dir) const;

    struct Expectations {
        std::optional<std::string> model_id;
        std::optional<int> dimension;
        std::optional<Field> field;
    };

    /// Throws DataError on any manifest/entries inconsistency or unmet expectation.
    static Index load(const std::filesystem::path& dir, const Expectations& expect = {});

    friend bool operator==(const Index&, const Index&) = default;

  private:
    std::string model_id_;
    int dimension_;
    Field field_;
    std::vector<std::string> ids_;
    std::vector<Date> dates_;
    std::vector<float> matrix_;  // row-major, size() x dimension_
    std::vector<double> norms_;
    std::unordered_map<std::string, std::size_t> positions_;
};

class IndexBuildError : public Error {
  public:
    IndexBuildError(const std::string& what, std::vector<std::string> failed_ids)
        : Error(what), failed_ids_(std::move(failed_ids)) {}
    [[nodiscard]] const std::vector<std::string>& failed_ids() const { return failed_ids_; }

  private:
    std::vector<std::string> failed_ids_;
};

/// Embeds every abstract in the pool. The pool must be non-empty, single-field
/// and free of duplicate ids.
Index build_index(std::span<const PaperRecord> pool, Embedder& embedder);

struct RetrievalHit {
    std::string paper_id;
    double cosine_score = 0.0;
    Date published_date;

    friend bool operator==(const RetrievalHit&, const RetrievalHit&) = default;
};

struct RetrievalResult {
    std::vector<RetrievalHit> hits;  // score descending, id ascending on ties
    std::optional<double> avg_cosine;
    std::optional<Date> avg_date;  // floor of the mean day number

    [[nodiscard]] bool empty() const { return hits.empty(); }
};

/// Aggregates over an arbitrary hit list (mean score, floored mean date).
void compute_aggregates(RetrievalResult& result);

/// The k most similar entries dated on or before `cutoff`.
RetrievalResult retrieve_topk(const Index& index, const EmbeddingVector& query, int k, Date cutoff);

/// Later of the two publication dates; the cutoff for both retrievals of a pair.
Date pair_cutoff(const PaperRecord& paper_x, const PaperRecord& paper_y);

}  // namespace novelbench
