#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "novelbench/corpus.hpp"

namespace novelbench::testkit {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
  public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  private:
    std::filesystem::path path_;
};

PaperRecord make_paper(const std::string& id, Field field, Date date, const std::string& abstract = "");

/// Pair with paper_x dated June of `start_year` and paper_y June of
/// start_year - gap; full metadata (tldr, authors, affiliation) is set.
PairSample make_pair(Field field, int start_year, int gap, const std::string& tag = "a");

/// Abstract dominated by a per-year token so that hashing embeddings cluster
/// by publication year.
std::string era_abstract(int year, const std::string& unique);

struct SyntheticCorpusSpec {
    std::vector<Field> fields{Field::Cs};
    int first_year = 2013;
    int last_year = 2023;
    int per_year = 20;
    std::uint64_t seed = 1;
    unsigned first_month = 1;   // dates are drawn uniformly within these months
    unsigned last_month = 12;
    std::string id_prefix = "p";
};

std::vector<PaperRecord> synthetic_papers(const SyntheticCorpusSpec& spec);

/// One arXiv-snapshot style JSON line (versions, categories, authors_parsed).
std::string snapshot_line(const PaperRecord& paper);
void write_snapshot(const std::filesystem::path& path, const std::vector<PaperRecord>& papers);

}  // namespace novelbench::testkit
