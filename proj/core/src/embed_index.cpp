#include "novelbench/embed_index.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <queue>
#include <sstream>
#include <thread>

namespace novelbench {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "index files are little-endian");

namespace {

constexpr double kUnitTolerance = 1e-6;
constexpr char kEntriesMagic[8] = {'N', 'B', 'I', 'D', 'X', '\0', 'v', '1'};
constexpr const char* kManifestName = "manifest.json";
constexpr const char* kEntriesName = "entries.bin";

template <typename T>
EmbeddingVector normalize_impl(std::span<const T> raw) {
    double sum = 0.0;
    for (T x : raw) {
        if (!std::isfinite(static_cast<double>(x))) throw DataError("embedding has a non-finite component");
        sum += static_cast<double>(x) * static_cast<double>(x);
    }
    if (raw.empty() || sum == 0.0) throw DataError("cannot normalize a zero-length embedding");
    const double inv = 1.0 / std::sqrt(sum);
    std::vector<float> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = static_cast<float>(static_cast<double>(raw[i]) * inv);
    return EmbeddingVector(std::move(out));
}

double dot(std::span<const float> a, std::span<const float> b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return sum;
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

template <typename T>
void write_pod(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw DataError("index entries file is truncated");
    return value;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Orders hits best-first: higher score, then lexicographically smaller id.
struct BetterHit {
    bool operator()(const RetrievalHit& a, const RetrievalHit& b) const {
        if (a.cosine_score != b.cosine_score) return a.cosine_score > b.cosine_score;
        return a.paper_id < b.paper_id;
    }
};

}  // namespace

// ---------------------------------------------------------------------------
// EmbeddingVector
// ---------------------------------------------------------------------------

EmbeddingVector::EmbeddingVector(std::vector<float> values) : values_(std::move(values)) {
    for (float x : values_) {
        if (!std::isfinite(x)) throw DataError("embedding has a non-finite component");
    }
}

EmbeddingVector EmbeddingVector::normalized(std::span<const double> raw) { return normalize_impl(raw); }
EmbeddingVector EmbeddingVector::normalized(std::span<const float> raw) { return normalize_impl(raw); }

double EmbeddingVector::norm() const { return std::sqrt(dot(values_, values_)); }

double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v) {
    if (u.dimension() != v.dimension()) {
        throw DataError("cosine_similarity: dimension mismatch (" + std::to_string(u.dimension()) + " vs " +
                        std::to_string(v.dimension()) + ")");
    }
    const double denom = u.norm() * v.norm();
    if (denom == 0.0) return 0.0;
    return std::clamp(dot(u.values(), v.values()) / denom, -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// Providers
// ---------------------------------------------------------------------------

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string base_url, std::string api_key,
                                             std::shared_ptr<HttpTransport> transport,
                                             std::optional<int> request_dimensions)
    : url_(std::move(base_url)),
      api_key_(std::move(api_key)),
      transport_(std::move(transport)),
      request_dimensions_(request_dimensions) {
    while (!url_.empty() && url_.back() == '/') url_.pop_back();
    url_ += "/embeddings";
    if (!transport_) throw ConfigError("HttpEmbeddingProvider requires a transport");
}

std::vector<std::vector<float>> HttpEmbeddingProvider::embed(const std::string& model_id,
                                                             std::span<const std::string> texts) {
    json body = {{"model", model_id}, {"input", std::vector<std::string>(texts.begin(), texts.end())}};
    if (request_dimensions_) body["dimensions"] = *request_dimensions_;
    HttpHeaders headers;
    if (!api_key_.empty()) headers.emplace_back("Authorization", "Bearer " + api_key_);

    const auto res = transport_->post_json(url_, body.dump(), headers);
    if (res.status != 200) {
        std::string what = "embedding provider returned status " + std::to_string(res.status);
        if (!res.error.empty()) what += ": " + res.error;
        throw ProviderError(classify_http_status(res.status), res.status, what);
    }
    json parsed = json::parse(res.body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("data") || !parsed["data"].is_array()) {
        throw ProviderError(FailureKind::Transient, res.status, "malformed embedding response");
    }
    std::vector<std::vector<float>> out(texts.size());
    std::size_t position = 0;
    for (const auto& item : parsed["data"]) {
        const auto idx = item.value("index", position);
        if (idx >= out.size()) throw ProviderError(FailureKind::Transient, res.status, "embedding index out of range");
        out[idx] = item.at("embedding").get<std::vector<float>>();
        ++position;
    }
    if (position != texts.size()) {
        throw ProviderError(FailureKind::Transient, res.status, "embedding response count mismatch");
    }
    return out;
}

MockEmbeddingProvider::MockEmbeddingProvider(Fn fn) : fn_(std::move(fn)) {
    if (!fn_) throw ConfigError("mock embedding function must be callable");
}

std::shared_ptr<MockEmbeddingProvider> MockEmbeddingProvider::hashing(int dimension) {
    if (dimension < 2) throw ConfigError("hashing embedder needs dimension >= 2");
    const auto dim = static_cast<std::size_t>(dimension);
    return std::make_shared<MockEmbeddingProvider>([dim](const std::string& text) {
        std::vector<float> v(dim, 0.0f);
        std::string token;
        auto flush = [&] {
            if (token.empty()) return;
            const auto h = fnv1a(token);
            v[h % dim] += (h >> 63) ? -1.0f : 1.0f;
            token.clear();
        };
        for (char c : text) {
            if (std::isalnum(static_cast<unsigned char>(c))) {
                token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
            } else {
                flush();
            }
        }
        flush();
        if (std::all_of(v.begin(), v.end(), [](float x) { return x == 0.0f; })) v[0] = 1.0f;
        return v;
    });
}

std::vector<std::vector<float>> MockEmbeddingProvider::embed(const std::string&, std::span<const std::string> texts) {
    calls_.fetch_add(1);
    texts_.fetch_add(texts.size());
    std::vector<std::vector<float>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(fn_(t));
    return out;
}

// ---------------------------------------------------------------------------
// EmbeddingCache
// ---------------------------------------------------------------------------

EmbeddingCache::EmbeddingCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(*dir_ / kLayoutVersion, ec);
    if (ec) throw IoError("cannot create embedding cache " + dir_->string() + ": " + ec.message());
}

std::string EmbeddingCache::key_for(const std::string& model_id, const std::string& normalized_text) {
    return sha256_hex(model_id + '\n' + normalized_text);
}

std::optional<EmbeddingVector> EmbeddingCache::get(const std::string& key) const {
    {
        std::shared_lock lock(mu_);
        if (auto it = memory_.find(key); it != memory_.end()) return it->second;
    }
    if (!dir_) return std::nullopt;
    const auto path = *dir_ / kLayoutVersion / key.substr(0, 2) / (key + ".f32");
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    if (bytes.empty() || bytes.size() % sizeof(float) != 0) return std::nullopt;
    std::vector<float> values(bytes.size() / sizeof(float));
    std::memcpy(values.data(), bytes.data(), bytes.size());
    EmbeddingVector v(std::move(values));

    std::unique_lock lock(mu_);
    return memory_.emplace(key, std::move(v)).first->second;
}

void EmbeddingCache::put(const std::string& key, const EmbeddingVector& vector) {
    std::unique_lock lock(mu_);
    if (!memory_.emplace(key, vector).second) return;
    if (!dir_) return;
    const auto path = *dir_ / kLayoutVersion / key.substr(0, 2) / (key + ".f32");
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    auto tmp = path;
    tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write embedding cache entry " + tmp.string());
        const auto values = vector.values();
        out.write(reinterpret_cast<const char*>(values.data()),
                  static_cast<std::streamsize>(values.size() * sizeof(float)));
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot publish embedding cache entry: " + ec.message());
}

std::size_t EmbeddingCache::size() const {
    std::shared_lock lock(mu_);
    return memory_.size();
}

// ---------------------------------------------------------------------------
// Embedder
// ---------------------------------------------------------------------------

Embedder::Embedder(std::shared_ptr<EmbeddingProvider> provider, EmbedderOptions options)
    : provider_(std::move(provider)), options_(std::move(options)) {
    if (!provider_) throw ConfigError("embedder requires a provider");
    if (options_.dimension < 1) throw ConfigError("embedding dimension must be positive");
    if (options_.batch_size < 1) throw ConfigError("embedding batch size must be positive");
    if (!options_.cache) options_.cache = std::make_shared<EmbeddingCache>();
}

EmbeddingVector Embedder::embed(const std::string& text) {
    const std::string one[] = {text};
    return embed_many(one).front();
}

std::vector<EmbeddingVector> Embedder::embed_many(std::span<const std::string> texts) {
    std::vector<std::string> normalized;
    normalized.reserve(texts.size());
    for (const auto& t : texts) {
        auto n = normalize_whitespace(t);
        if (n.empty()) throw DataError("cannot embed empty text");
        normalized.push_back(std::move(n));
    }

    std::vector<std::optional<EmbeddingVector>> out(texts.size());
    std::vector<std::string> keys(texts.size());
    std::vector<std::string> missing;
    std::unordered_map<std::string, std::size_t> missing_pos;
    for (std::size_t i = 0; i < normalized.size(); ++i) {
        keys[i] = EmbeddingCache::key_for(options_.model_id, normalized[i]);
        if (auto hit = options_.cache->get(keys[i])) {
            out[i] = std::move(*hit);
        } else if (!missing_pos.contains(keys[i])) {
            missing_pos.emplace(keys[i], missing.size());
            missing.push_back(normalized[i]);
        }
    }

    if (!missing.empty()) {
        const auto fresh = embed_uncached(missing);
        for (std::size_t i = 0; i < normalized.size(); ++i) {
            if (out[i]) continue;
            const auto& v = fresh[missing_pos.at(keys[i])];
            options_.cache->put(keys[i], v);
            out[i] = v;
        }
    }

    std::vector<EmbeddingVector> result;
    result.reserve(out.size());
    for (auto& v : out) result.push_back(std::move(*v));
    return result;
}

std::vector<EmbeddingVector> Embedder::embed_uncached(std::span<const std::string> normalized_texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(normalized_texts.size());
    const auto batch = static_cast<std::size_t>(options_.batch_size);
    for (std::size_t start = 0; start < normalized_texts.size(); start += batch) {
        const auto chunk = normalized_texts.subspan(start, std::min(batch, normalized_texts.size() - start));
        int attempts = 0;
        auto raw = call_with_retries(
            options_.retry, options_.sleeper, [&] { return provider_->embed(options_.model_id, chunk); }, attempts);
        if (raw.size() != chunk.size()) throw ProviderError(FailureKind::Permanent, 0, "embedding count mismatch");
        for (const auto& v : raw) {
            if (static_cast<int>(v.size()) != options_.dimension) {
                throw ConfigError("embedding dimension mismatch: provider returned " + std::to_string(v.size()) +
                                  ", configured " + std::to_string(options_.dimension));
            }
            out.push_back(EmbeddingVector::normalized(std::span<const float>(v)));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Index
// ---------------------------------------------------------------------------

Index::Index(std::string model_id, int dimension, Field field)
    : model_id_(std::move(model_id)), dimension_(dimension), field_(field) {
    if (dimension_ < 1) throw ConfigError("index dimension must be positive");
}

void Index::add(IndexEntry entry) {
    if (entry.field != field_) {
        throw DataError("index entry " + entry.paper_id + " has field " + std::string(to_string(entry.field)) +
                        ", index is " + std::string(to_string(field_)));
    }
    if (static_cast<int>(entry.vector.dimension()) != dimension_) {
        throw DataError("index entry " + entry.paper_id + " has wrong dimension");
    }
    const double norm = entry.vector.norm();
    if (std::abs(norm - 1.0) > kUnitTolerance) {
        throw DataError("index entry " + entry.paper_id + " is not unit length");
    }
    if (!positions_.emplace(entry.paper_id, ids_.size()).second) {
        throw DataError("duplicate paper id in index: " + entry.paper_id);
    }
    ids_.push_back(std::move(entry.paper_id));
    dates_.push_back(entry.published_date);
    norms_.push_back(norm);
    const auto v = entry.vector.values();
    matrix_.insert(matrix_.end(), v.begin(), v.end());
}

IndexManifest Index::manifest() const {
    IndexManifest m;
    m.model_id = model_id_;
    m.dimension = dimension_;
    m.field = field_;
    m.entry_count = ids_.size();
    return m;
}

std::span<const float> Index::vector_at(std::size_t i) const {
    const auto dim = static_cast<std::size_t>(dimension_);
    return std::span<const float>(matrix_).subspan(i * dim, dim);
}

IndexEntry Index::entry(std::size_t i) const {
    const auto v = vector_at(i);
    return IndexEntry{ids_[i], EmbeddingVector(std::vector<float>(v.begin(), v.end())), dates_[i], field_};
}

void Index::save(const std::filesystem::path& dir) const {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create index directory " + dir.string() + ": " + ec.message());

    // entries.bin: magic[8] | u32 dimension | u64 count | count x (u32 id_len, id, i64 day, f32[dimension])
    {
        std::ofstream out(dir / kEntriesName, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + (dir / kEntriesName).string());
        out.write(kEntriesMagic, sizeof(kEntriesMagic));
        write_pod(out, static_cast<std::uint32_t>(dimension_));
        write_pod(out, static_cast<std::uint64_t>(ids_.size()));
        for (std::size_t i = 0; i < ids_.size(); ++i) {
            write_pod(out, static_cast<std::uint32_t>(ids_[i].size()));
            out.write(ids_[i].data(), static_cast<std::streamsize>(ids_[i].size()));
            write_pod(out, static_cast<std::int64_t>(dates_[i].days_since_epoch()));
            const auto v = vector_at(i);
            out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
        }
        if (!out) throw IoError("write failure on index entries");
    }

    json manifest = {
        {"format", "novelbench-index"},
        {"format_version", IndexManifest::kFormatVersion},
        {"model_id", model_id_},
        {"dimension", dimension_},
        {"field", to_string(field_)},
        {"entry_count", ids_.size()},
        {"entries_file", kEntriesName},
        {"entries_sha256", sha256_hex(read_file(dir / kEntriesName))},
    };
    std::ofstream out(dir / kManifestName, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write index manifest");
    out << manifest.dump(2) << '\n';
}

Index Index::load(const std::filesystem::path& dir, const Expectations& expect) {
    json manifest = json::parse(read_file(dir / kManifestName), nullptr, false);
    if (manifest.is_discarded()) throw DataError("index manifest is not valid JSON");
    if (manifest.value("format", "") != "novelbench-index") throw DataError("not a novelbench index manifest");
    if (manifest.value("format_version", 0) != IndexManifest::kFormatVersion) {
        throw DataError("unsupported index format version");
    }
    const auto model_id = manifest.at("model_id").get<std::string>();
    const auto dimension = manifest.at("dimension").get<int>();
    const auto field = parse_field(manifest.at("field").get<std::string>());
    const auto count = manifest.at("entry_count").get<std::size_t>();
    if (!field) throw DataError("index manifest has unknown field");

    if (expect.model_id && *expect.model_id != model_id) {
        throw DataError("index model mismatch: manifest '" + model_id + "', expected '" + *expect.model_id + "'");
    }
    if (expect.dimension && *expect.dimension != dimension) throw DataError("index dimension mismatch");
    if (expect.field && *expect.field != *field) throw DataError("index field mismatch");

    const auto bytes = read_file(dir / kEntriesName);
    if (manifest.contains("entries_sha256") && manifest["entries_sha256"].get<std::string>() != sha256_hex(bytes)) {
        throw DataError("index entries checksum does not match manifest");
    }

    std::istringstream in(bytes);
    char magic[sizeof(kEntriesMagic)];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kEntriesMagic, sizeof(magic)) != 0) throw DataError("bad index entries magic");
    if (read_pod<std::uint32_t>(in) != static_cast<std::uint32_t>(dimension)) {
        throw DataError("entries dimension disagrees with manifest");
    }
    if (read_pod<std::uint64_t>(in) != count) throw DataError("entries count disagrees with manifest");

    Index index(model_id, dimension, *field);
    std::vector<float> values(static_cast<std::size_t>(dimension));
    for (std::size_t i = 0; i < count; ++i) {
        const auto id_len = read_pod<std::uint32_t>(in);
        std::string id(id_len, '\0');
        in.read(id.data(), id_len);
        const auto day = read_pod<std::int64_t>(in);
        in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(float)));
        if (!in) throw DataError("index entries file is truncated");
        index.add(IndexEntry{std::move(id), EmbeddingVector(values), Date::from_days(day), *field});
    }
    if (in.peek() != std::char_traits<char>::eof()) throw DataError("trailing bytes in index entries file");
    return index;
}

Index build_index(std::span<const PaperRecord> pool, Embedder& embedder) {
    if (pool.empty()) throw DataError("cannot build an index from an empty pool");
    const Field field = pool.front().field;
    for (const auto& p : pool) {
        if (p.field != field) throw DataError("index pool mixes fields (" + p.id + ")");
    }

    Index index(embedder.model_id(), embedder.dimension(), field);
    std::vector<std::string> failed;
    constexpr std::size_t kChunk = 256;
    for (std::size_t start = 0; start < pool.size(); start += kChunk) {
        const auto chunk = pool.subspan(start, std::min(kChunk, pool.size() - start));
        std::vector<std::string> texts;
        texts.reserve(chunk.size());
        for (const auto& p : chunk) texts.push_back(p.abstract);

        std::vector<std::optional<EmbeddingVector>> vectors(chunk.size());
        try {
            auto batch = embedder.embed_many(texts);
            for (std::size_t i = 0; i < batch.size(); ++i) vectors[i] = std::move(batch[i]);
        } catch (const ProviderError&) {
            // Narrow the failure down to individual papers.
            for (std::size_t i = 0; i < chunk.size(); ++i) {
                try {
                    vectors[i] = embedder.embed(texts[i]);
                } catch (const ProviderError&) {
                    failed.push_back(chunk[i].id);
                }
            }
        }
        for (std::size_t i = 0; i < chunk.size(); ++i) {
            if (vectors[i]) index.add(IndexEntry{chunk[i].id, std::move(*vectors[i]), chunk[i].published_date, field});
        }
    }
    if (!failed.empty()) {
        std::string list;
        for (const auto& id : failed) list += (list.empty() ? "" : ", ") + id;
        throw IndexBuildError("embedding failed for " + std::to_string(failed.size()) + " papers: " + list,
                              std::move(failed));
    }
    return index;
}

// ---------------------------------------------------------------------------
// Retrieval
// ---------------------------------------------------------------------------

void compute_aggregates(RetrievalResult& result) {
    if (result.hits.empty()) {
        result.avg_cosine.reset();
        result.avg_date.reset();
        return;
    }
    double score_sum = 0.0;
    std::int64_t day_sum = 0;
    for (const auto& h : result.hits) {
        score_sum += h.cosine_score;
        day_sum += h.published_date.days_since_epoch();
    }
    const auto n = static_cast<std::int64_t>(result.hits.size());
    std::int64_t mean_day = day_sum / n;
    if (day_sum % n != 0 && day_sum < 0) --mean_day;  // floor, not truncation
    result.avg_cosine = score_sum / static_cast<double>(n);
    result.avg_date = Date::from_days(mean_day);
}

RetrievalResult retrieve_topk(const Index& index, const EmbeddingVector& query, int k, Date cutoff) {
    if (k < 1) throw DataError("retrieve_topk: k must be >= 1");
    if (static_cast<int>(query.dimension()) != index.dimension()) {
        throw DataError("retrieve_topk: query dimension " + std::to_string(query.dimension()) +
                        " does not match index dimension " + std::to_string(index.dimension()));
    }
    const double qnorm = query.norm();
    const auto limit = static_cast<std::size_t>(k);

    // Max-heap on "worse" keeps the current k best at hand; top() is the weakest.
    std::priority_queue<RetrievalHit, std::vector<RetrievalHit>, BetterHit> heap;
    const BetterHit better;
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index.date_at(i) > cutoff) continue;
        const double denom = index.norm_at(i) * qnorm;
        const double score =
            denom == 0.0 ? 0.0 : std::clamp(dot(index.vector_at(i), query.values()) / denom, -1.0, 1.0);
        RetrievalHit hit{index.id_at(i), score, index.date_at(i)};
        if (heap.size() < limit) {
            heap.push(std::move(hit));
        } else if (better(hit, heap.top())) {
            heap.pop();
            heap.push(std::move(hit));
        }
    }

    RetrievalResult result;
    result.hits.reserve(heap.size());
    while (!heap.empty()) {
        result.hits.push_back(heap.top());
        heap.pop();
    }
    std::reverse(result.hits.begin(), result.hits.end());
    compute_aggregates(result);
    return result;
}

Date pair_cutoff(const PaperRecord& paper_x, const PaperRecord& paper_y) {
    return std::max(paper_x.published_date, paper_y.published_date);
}

}  // namespace novelbench
