#include "novelbench/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

namespace novelbench {

using nlohmann::json;

namespace {

std::optional<std::string> string_at(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) return std::nullopt;
    return it->get<std::string>();
}

std::vector<std::string> parse_authors(const json& obj) {
    std::vector<std::string> authors;
    if (auto it = obj.find("authors_parsed"); it != obj.end() && it->is_array()) {
        for (const auto& entry : *it) {
            if (!entry.is_array() || entry.empty()) continue;
            // [last, first, suffix]
            std::string last = entry[0].is_string() ? entry[0].get<std::string>() : "";
            std::string first = entry.size() > 1 && entry[1].is_string() ? entry[1].get<std::string>() : "";
            std::string suffix = entry.size() > 2 && entry[2].is_string() ? entry[2].get<std::string>() : "";
            std::string name = normalize_whitespace(first + " " + last + " " + suffix);
            if (!name.empty()) authors.push_back(std::move(name));
        }
    }
    return authors;
}

// Partial Fisher-Yates: first `count` entries of a permutation of [0, n).
std::vector<std::size_t> draw_without_replacement(std::size_t n, std::size_t count, SeededRng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    count = std::min(count, n);
    for (std::size_t i = 0; i < count; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(count);
    return idx;
}

std::uint64_t cell_seed(std::uint64_t base, Field field, int a, int b, std::uint64_t stream) {
    std::uint64_t h = mix_seed(base);
    h = mix_seed(h ^ static_cast<std::uint64_t>(field));
    h = mix_seed(h ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)));
    h = mix_seed(h ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(b)));
    return mix_seed(h ^ stream);
}

std::string cell_name(Field f, int s, int g) {
    std::ostringstream os;
    os << "cell (field=" << to_string(f) << ", start_year=" << s << ", gap=" << g << ")";
    return os.str();
}

template <typename T, typename Fn>
std::vector<T> read_lines(std::istream& in, Fn&& parse) {
    std::vector<T> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(parse(json::parse(line)));
        } catch (const json::exception& e) {
            throw DataError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (in.bad()) throw IoError("read failure");
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// CorpusStore
// ---------------------------------------------------------------------------

CorpusStore::CorpusStore(std::vector<PaperRecord> records) {
    for (auto& r : records) {
        buckets_[{r.field, r.published_year}].push_back(std::move(r));
    }
    for (auto& [key, bucket] : buckets_) {
        std::stable_sort(bucket.begin(), bucket.end(),
                         [](const PaperRecord& a, const PaperRecord& b) { return a.id < b.id; });
        size_ += bucket.size();
    }
}

std::span<const PaperRecord> CorpusStore::papers(Field field, int year) const {
    auto it = buckets_.find({field, year});
    if (it == buckets_.end()) return {};
    return it->second;
}

std::optional<std::pair<int, int>> CorpusStore::year_range(Field field) const {
    std::optional<std::pair<int, int>> range;
    for (const auto& [key, bucket] : buckets_) {
        if (key.first != field || bucket.empty()) continue;
        if (!range) {
            range = {key.second, key.second};
        } else {
            range->first = std::min(range->first, key.second);
            range->second = std::max(range->second, key.second);
        }
    }
    return range;
}

std::string CorpusStore::digest() const {
    std::string canonical;
    for (const auto& [key, bucket] : buckets_) {
        for (const auto& paper : bucket) {
            canonical += to_json(paper).dump();
            canonical += '\n';
        }
    }
    return sha256_hex(canonical);
}

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

std::optional<PaperRecord> parse_metadata_record(const json& obj, bool* outside_fields) {
    if (outside_fields) *outside_fields = false;
    if (!obj.is_object()) return std::nullopt;

    auto id = string_at(obj, "id");
    auto abstract = string_at(obj, "abstract");
    auto categories = string_at(obj, "categories");
    if (!id || id->empty() || !abstract || !categories) return std::nullopt;

    PaperRecord rec;
    rec.id = normalize_whitespace(*id);
    rec.abstract = normalize_whitespace(*abstract);
    rec.title = normalize_whitespace(string_at(obj, "title").value_or(""));
    if (rec.id.empty() || rec.abstract.empty()) return std::nullopt;

    // Publication date is the first listed version.
    auto versions = obj.find("versions");
    if (versions == obj.end() || !versions->is_array() || versions->empty()) return std::nullopt;
    const auto& first = versions->front();
    std::optional<std::string> created =
        first.is_object() ? string_at(first, "created") : std::nullopt;
    if (!created) return std::nullopt;
    auto date = Date::parse(*created);
    if (!date) return std::nullopt;
    rec.published_date = *date;
    rec.published_year = date->year();

    std::istringstream cats(*categories);
    std::string primary;
    cats >> primary;
    auto field = field_from_category(primary);
    if (!field) {
        if (outside_fields) *outside_fields = !primary.empty();
        return std::nullopt;
    }
    rec.field = *field;

    rec.authors = parse_authors(obj);
    if (auto tldr = string_at(obj, "tldr"); tldr && !normalize_whitespace(*tldr).empty()) {
        rec.tldr = normalize_whitespace(*tldr);
    }
    if (auto aff = string_at(obj, "affiliation"); aff && !normalize_whitespace(*aff).empty()) {
        rec.affiliation = normalize_whitespace(*aff);
    }
    return rec;
}

IngestResult ingest_metadata(std::istream& source) {
    if (!source) throw IoError("metadata source is not readable");

    IngestResult result;
    std::vector<PaperRecord> records;
    std::set<std::string> seen;
    std::string line;
    while (std::getline(source, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json obj = json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (obj.is_discarded()) {
            ++result.stats.malformed;
            continue;
        }
        bool outside = false;
        auto rec = parse_metadata_record(obj, &outside);
        if (!rec) {
            ++(outside ? result.stats.outside_fields : result.stats.malformed);
            continue;
        }
        if (!seen.insert(rec->id).second) {
            ++result.stats.duplicate_ids;
            continue;
        }
        records.push_back(std::move(*rec));
    }
    if (source.bad()) throw IoError("read failure while ingesting metadata");
    result.stats.accepted = records.size();
    result.store = CorpusStore(std::move(records));
    return result;
}

IngestResult ingest_metadata_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open metadata file: " + path);
    return ingest_metadata(in);
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

void validate(const DatasetSpec& spec) {
    if (spec.fields.empty()) throw ConfigError("dataset spec: no fields");
    if (spec.start_years.empty()) throw ConfigError("dataset spec: no start years");
    if (spec.year_gaps.empty()) throw ConfigError("dataset spec: no year gaps");
    if (spec.samples_per_cell < 1) throw ConfigError("dataset spec: samples_per_cell must be >= 1");
    for (int g : spec.year_gaps) {
        if (g < 1) throw ConfigError("dataset spec: year gaps must be >= 1");
    }
}

std::vector<PairSample> sample_dataset(const CorpusStore& store, const DatasetSpec& spec) {
    validate(spec);
    const auto per_cell = static_cast<std::size_t>(spec.samples_per_cell);

    std::vector<PairSample> out;
    out.reserve(spec.expected_pairs());
    for (Field f : spec.fields) {
        const auto range = store.year_range(f);
        for (int s : spec.start_years) {
            for (int g : spec.year_gaps) {
                const int older = s - g;
                if (!range || older < range->first || s > range->second) {
                    throw InsufficientPapersError(cell_name(f, s, g) + ": years " + std::to_string(older) +
                                                  ".." + std::to_string(s) +
                                                  " outside corpus year range for field");
                }
                const auto newer_pool = store.papers(f, s);
                const auto older_pool = store.papers(f, older);
                if (newer_pool.size() < per_cell || older_pool.size() < per_cell) {
                    throw InsufficientPapersError(
                        cell_name(f, s, g) + ": need " + std::to_string(per_cell) + " papers per year, have " +
                        std::to_string(newer_pool.size()) + " in " + std::to_string(s) + " and " +
                        std::to_string(older_pool.size()) + " in " + std::to_string(older));
                }
                SeededRng rng_x(cell_seed(spec.rng_seed, f, s, g, 1));
                SeededRng rng_y(cell_seed(spec.rng_seed, f, s, g, 2));
                const auto xs = draw_without_replacement(newer_pool.size(), per_cell, rng_x);
                const auto ys = draw_without_replacement(older_pool.size(), per_cell, rng_y);
                for (std::size_t i = 0; i < per_cell; ++i) {
                    PairSample pair;
                    pair.field = f;
                    pair.start_year = s;
                    pair.year_gap = g;
                    pair.paper_x = newer_pool[xs[i]];
                    pair.paper_y = older_pool[ys[i]];
                    pair.label = pair.paper_x.id;
                    out.push_back(std::move(pair));
                }
            }
        }
    }
    return out;
}

IndexPoolResult sample_index_pool(const CorpusStore& store, Field field, int first_year, int last_year,
                                  int per_year, std::uint64_t rng_seed) {
    if (per_year < 1) throw ConfigError("index pool: per_year must be >= 1");
    if (first_year > last_year) throw ConfigError("index pool: empty year range");

    IndexPoolResult result;
    for (int year = first_year; year <= last_year; ++year) {
        const auto pool = store.papers(field, year);
        const auto wanted = static_cast<std::size_t>(per_year);
        if (pool.size() < wanted) {
            result.warnings.push_back("index pool " + std::string(to_string(field)) + "/" +
                                      std::to_string(year) + ": wanted " + std::to_string(wanted) +
                                      ", only " + std::to_string(pool.size()) + " available");
        }
        SeededRng rng(cell_seed(rng_seed, field, year, 0, 3));
        for (auto i : draw_without_replacement(pool.size(), wanted, rng)) {
            result.papers.push_back(pool[i]);
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

json to_json(const PaperRecord& paper) {
    json j = {
        {"id", paper.id},
        {"title", paper.title},
        {"abstract", paper.abstract},
        {"field", to_string(paper.field)},
        {"published_date", paper.published_date.iso()},
        {"published_year", paper.published_year},
        {"authors", paper.authors},
    };
    if (paper.tldr) j["tldr"] = *paper.tldr;
    if (paper.affiliation) j["affiliation"] = *paper.affiliation;
    return j;
}

PaperRecord paper_from_json(const json& j) {
    PaperRecord p;
    p.id = j.at("id").get<std::string>();
    p.title = j.value("title", "");
    p.abstract = j.at("abstract").get<std::string>();
    const auto field_name = j.at("field").get<std::string>();
    auto field = parse_field(field_name);
    if (!field) throw DataError("unknown field '" + field_name + "' for paper " + p.id);
    p.field = *field;
    auto date = Date::parse(j.at("published_date").get<std::string>());
    if (!date) throw DataError("bad published_date for paper " + p.id);
    p.published_date = *date;
    p.published_year = j.value("published_year", date->year());
    if (p.published_year != date->year()) {
        throw DataError("published_year does not match published_date for paper " + p.id);
    }
    if (normalize_whitespace(p.abstract).empty()) throw DataError("empty abstract for paper " + p.id);
    p.authors = j.value("authors", std::vector<std::string>{});
    if (auto it = j.find("tldr"); it != j.end() && it->is_string()) p.tldr = it->get<std::string>();
    if (auto it = j.find("affiliation"); it != j.end() && it->is_string()) {
        p.affiliation = it->get<std::string>();
    }
    return p;
}

json to_json(const PairSample& pair) {
    return {
        {"field", to_string(pair.field)},
        {"start_year", pair.start_year},
        {"year_gap", pair.year_gap},
        {"paper_x", to_json(pair.paper_x)},
        {"paper_y", to_json(pair.paper_y)},
        {"label", pair.label},
    };
}

PairSample pair_from_json(const json& j) {
    PairSample pair;
    const auto field_name = j.at("field").get<std::string>();
    auto field = parse_field(field_name);
    if (!field) throw DataError("unknown field '" + field_name + "'");
    pair.field = *field;
    pair.start_year = j.at("start_year").get<int>();
    pair.year_gap = j.at("year_gap").get<int>();
    pair.paper_x = paper_from_json(j.at("paper_x"));
    pair.paper_y = paper_from_json(j.at("paper_y"));
    pair.label = j.at("label").get<std::string>();
    return pair;
}

void write_papers(std::ostream& out, std::span<const PaperRecord> papers) {
    for (const auto& p : papers) out << to_json(p).dump() << '\n';
}

std::vector<PaperRecord> read_papers(std::istream& in) {
    return read_lines<PaperRecord>(in, [](const json& j) { return paper_from_json(j); });
}

void write_pairs(std::ostream& out, std::span<const PairSample> pairs) {
    for (const auto& p : pairs) out << to_json(p).dump() << '\n';
}

std::vector<PairSample> read_pairs(std::istream& in) {
    return read_lines<PairSample>(in, [](const json& j) { return pair_from_json(j); });
}

void save_papers(const std::string& path, std::span<const PaperRecord> papers) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    write_papers(out, papers);
    if (!out) throw IoError("write failure on " + path);
}

std::vector<PaperRecord> load_papers(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return read_papers(in);
}

void save_pairs(const std::string& path, std::span<const PairSample> pairs) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    write_pairs(out, pairs);
    if (!out) throw IoError("write failure on " + path);
}

std::vector<PairSample> load_pairs(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return read_pairs(in);
}

std::string pair_key(const PairSample& pair) {
    return std::string(to_string(pair.field)) + "/" + std::to_string(pair.start_year) + "/" +
           std::to_string(pair.year_gap) + "/" + pair.paper_x.id + "/" + pair.paper_y.id;
}

}  // namespace novelbench
