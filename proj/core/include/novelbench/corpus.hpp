#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "novelbench/common.hpp"

namespace novelbench {

struct PaperRecord {
    std::string id;
    std::string title;
    std::string abstract;
    Field field = Field::Cs;
    Date published_date;
    int published_year = 0;
    std::vector<std::string> authors;
    std::optional<std::string> tldr;
    std::optional<std::string> affiliation;

    friend bool operator==(const PaperRecord&, const PaperRecord&) = default;
};

/// One benchmark tuple. paper_x is the later-published paper and the label.
struct PairSample {
    Field field = Field::Cs;
    int start_year = 0;
    int year_gap = 0;
    PaperRecord paper_x;
    PaperRecord paper_y;
    std::string label;

    friend bool operator==(const PairSample&, const PairSample&) = default;
};

struct DatasetSpec {
    std::vector<Field> fields{kAllFields.begin(), kAllFields.end()};
    std::vector<int> start_years{2019, 2020, 2021, 2022, 2023};
    std::vector<int> year_gaps{2, 4, 6, 8, 10};
    int samples_per_cell = 100;
    std::uint64_t rng_seed = 0;

    [[nodiscard]] std::size_t expected_pairs() const {
        return fields.size() * start_years.size() * year_gaps.size() *
               static_cast<std::size_t>(samples_per_cell);
    }
};

struct IngestStats {
    std::size_t accepted = 0;
    std::size_t malformed = 0;          // unparseable line or missing id/abstract/date
    std::size_t outside_fields = 0;     // primary category not in the six fields
    std::size_t duplicate_ids = 0;
};

/// Immutable after construction; records in each (field, year) bucket are kept
/// sorted by id so that sampling does not depend on input line order.
class CorpusStore {
  public:
    using Bucket = std::vector<PaperRecord>;

    CorpusStore() = default;
    explicit CorpusStore(std::vector<PaperRecord> records);

    [[nodiscard]] std::span<const PaperRecord> papers(Field field, int year) const;
    [[nodiscard]] std::size_t size() const { return size_; }
    [[nodiscard]] std::optional<std::pair<int, int>> year_range(Field field) const;
    [[nodiscard]] const std::map<std::pair<Field, int>, Bucket>& buckets() const { return buckets_; }

    /// Content digest over all records in canonical order.
    [[nodiscard]] std::string digest() const;

    friend bool operator==(const CorpusStore&, const CorpusStore&) = default;

  private:
    std::map<std::pair<Field, int>, Bucket> buckets_;
    std::size_t size_ = 0;
};

struct IngestResult {
    CorpusStore store;
    IngestStats stats;
};

/// Parses newline-delimited arXiv snapshot records. Malformed lines are
/// counted and skipped; a stream read failure throws IoError.
IngestResult ingest_metadata(std::istream& source);
IngestResult ingest_metadata_file(const std::string& path);

/// Builds a record from one snapshot object; nullopt when required keys are
/// missing or the primary category is outside the six fields (the flag tells
/// which).
std::optional<PaperRecord> parse_metadata_record(const nlohmann::json& obj, bool* outside_fields = nullptr);

/// Thrown when a (field, start year, gap) cell cannot be filled.
class InsufficientPapersError : public DataError {
  public:
    using DataError::DataError;
};

void validate(const DatasetSpec& spec);

/// Deterministic pair sampling: for each (field, start year, gap) cell, draws
/// samples_per_cell papers without replacement from year s and from year s-g.
std::vector<PairSample> sample_dataset(const CorpusStore& store, const DatasetSpec& spec);

struct IndexPoolResult {
    std::vector<PaperRecord> papers;
    std::vector<std::string> warnings;  // one per under-populated year
};

/// Draws per_year papers for every year in [first_year, last_year].
IndexPoolResult sample_index_pool(const CorpusStore& store, Field field, int first_year, int last_year,
                                  int per_year, std::uint64_t rng_seed);

// Serialization (newline-delimited JSON).
nlohmann::json to_json(const PaperRecord& paper);
PaperRecord paper_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PairSample& pair);
PairSample pair_from_json(const nlohmann::json& j);

void write_papers(std::ostream& out, std::span<const PaperRecord> papers);
std::vector<PaperRecord> read_papers(std::istream& in);
void write_pairs(std::ostream& out, std::span<const PairSample> pairs);
std::vector<PairSample> read_pairs(std::istream& in);

void save_papers(const std::string& path, std::span<const PaperRecord> papers);
std::vector<PaperRecord> load_papers(const std::string& path);
void save_pairs(const std::string& path, std::span<const PairSample> pairs);
std::vector<PairSample> load_pairs(const std::string& path);

/// Stable key "field/start/gap/x/y" used to join trials across strategies.
std::string pair_key(const PairSample& pair);

}  // namespace novelbench
