#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "novelbench/corpus.hpp"
#include "novelbench/strategies.hpp"

namespace novelbench {

// ---------------------------------------------------------------------------
// Trials
// ---------------------------------------------------------------------------

/// One judged presentation of a pair.
struct TrialRecord {
    Field field = Field::Cs;
    int start_year = 0;
    int year_gap = 0;
    std::string paper_x_id;
    std::string paper_y_id;
    std::string label;

    StrategyId strategy = StrategyId::ZeroShot;
    std::string options_label = "plain";  // metadata option set
    std::string run_label;                // sub-run, e.g. "newer=research"
    Order order = Order::AscYear;

    Verdict verdict;
    bool correct = false;
    int provider_calls = 0;
    std::optional<std::string> error;
    std::string timestamp;

    /// "<pair key>|<strategy>|<options>|<sub-run>|<order>"
    [[nodiscard]] std::string key() const;
    /// Report grouping: "<strategy>/<options>" plus "/<sub-run>" when set.
    [[nodiscard]] std::string run_key() const;
    /// Pair and order only; joins trials of different runs.
    [[nodiscard]] std::string presentation_key() const;
};

nlohmann::json to_json(const TrialRecord& trial);
TrialRecord trial_from_json(const nlohmann::json& j);

/// Append-only JSONL trial store. Opening an existing file loads it and drops
/// a torn (unterminated) last line left by a crash. Errored trials do not
/// count as completed, so a resumed run retries them; for a repeated key the
/// last record wins.
class TrialLedger {
  public:
    TrialLedger() = default;  // memory only
    explicit TrialLedger(std::filesystem::path path);

    [[nodiscard]] bool completed(const std::string& key) const;
    [[nodiscard]] std::optional<TrialRecord> find(const std::string& key) const;

    /// Throws DataError if `key` is already completed.
    void append(const TrialRecord& trial);

    /// Latest record per key, in first-seen order.
    [[nodiscard]] std::vector<TrialRecord> records() const;
    [[nodiscard]] std::size_t appended() const;
    [[nodiscard]] const std::optional<std::filesystem::path>& path() const { return path_; }

    /// Reads a ledger file without opening it for append.
    static std::vector<TrialRecord> read(const std::filesystem::path& path);

  private:
    void remember(TrialRecord trial);

    std::optional<std::filesystem::path> path_;
    mutable std::mutex mu_;
    std::vector<TrialRecord> records_;
    std::unordered_map<std::string, std::size_t> latest_;
    std::size_t appended_ = 0;
};

using TimestampFn = std::function<std::string()>;

/// UTC ISO-8601 wall-clock time, seconds resolution.
std::string utc_timestamp();

struct TrialContext {
    TrialLedger* ledger = nullptr;  // optional
    std::string options_label = "plain";
    std::string run_label;
    TimestampFn now = utc_timestamp;
};

/// Judges `pair` in both orders (AscYear first). A trial already completed in
/// the ledger is returned as recorded without calling the provider. Strategy
/// errors are captured in the trial rather than thrown. Both trials are
/// appended to the ledger before returning.
std::pair<TrialRecord, TrialRecord> run_pair(StrategyId strategy, const PairSample& pair, Gateway& gateway,
                                             const JudgeOptions& options, const TrialContext& context = {});

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

struct CellKey {
    Field field = Field::Cs;
    int start_year = 0;
    int year_gap = 0;

    auto operator<=>(const CellKey&) const = default;
};

struct CellStats {
    std::size_t asc_n = 0;
    std::size_t asc_correct = 0;
    std::size_t desc_n = 0;
    std::size_t desc_correct = 0;
    std::size_t unparsed = 0;
    std::size_t errors = 0;

    [[nodiscard]] std::size_t n() const { return asc_n + desc_n; }
    [[nodiscard]] double asc_accuracy() const;
    [[nodiscard]] double desc_accuracy() const;
    /// Over all trials of both orders; the mean of asc and desc when n matches.
    [[nodiscard]] double overall_accuracy() const;
    [[nodiscard]] double unparsed_rate() const;
    [[nodiscard]] double error_rate() const;

    void add(const TrialRecord& trial);
    void merge(const CellStats& other);
};

struct McNemarResult {
    std::size_t b = 0;  // correct in A only
    std::size_t c = 0;  // correct in B only
    double statistic = 0.0;  // min(b, c) for the exact test, chi-square otherwise
    double p_value = 1.0;
    bool exact = true;
};

/// Discordant pairs below this use the exact binomial test.
inline constexpr std::size_t kMcNemarExactBelow = 25;

McNemarResult mcnemar_from_counts(std::size_t b, std::size_t c);

/// Pairs trials by (pair, order); throws DataError unless both sides cover
/// exactly the same presentations.
McNemarResult mcnemar(std::span<const TrialRecord> trials_a, std::span<const TrialRecord> trials_b);

struct SignificanceRow {
    std::string run_a;
    std::string run_b;
    std::optional<CellKey> cell;  // nullopt: all cells pooled
    McNemarResult result;
};

struct EvalReport {
    std::string run_key;
    std::map<CellKey, CellStats> per_cell;
    std::map<Field, CellStats> per_field;
    std::map<int, CellStats> per_gap;
    std::map<int, CellStats> per_start_year;
    CellStats total;

    [[nodiscard]] double unparsed_rate() const { return total.unparsed_rate(); }
    [[nodiscard]] double error_rate() const { return total.error_rate(); }
    /// Highest per-cell error rate (0 for an empty report).
    [[nodiscard]] double max_cell_error_rate() const;
};

/// Aggregates trials of a single run. Throws DataError if `trials` is empty
/// or mixes runs.
EvalReport aggregate(std::span<const TrialRecord> trials);

/// One report per run key, ordered by key.
std::vector<EvalReport> aggregate_by_run(std::span<const TrialRecord> trials);

/// McNemar for every pair of runs, pooled and per cell. Runs that do not
/// cover the same presentations are skipped.
std::vector<SignificanceRow> significance_table(std::span<const TrialRecord> trials);

// ---------------------------------------------------------------------------
// Experiment grid
// ---------------------------------------------------------------------------

struct AffiliationNames {
    std::string research = "Massachusetts Institute of Technology";
    std::string teaching = "Williams College";
};

inline constexpr std::string_view kNewerResearch = "newer=research";
inline constexpr std::string_view kNewerTeaching = "newer=teaching";

/// Copy of `pair` with the newer paper given `newer` as affiliation and the
/// older paper `older`.
PairSample with_affiliations(const PairSample& pair, const std::string& newer, const std::string& older);

struct MatrixOptions {
    std::vector<StrategyId> strategies;
    std::vector<MetadataOptions> metadata{MetadataOptions{}};
    /// Option sets with affiliation run twice, once per assignment.
    bool affiliation_swap = true;
    AffiliationNames affiliations;

    JudgeOptions judge;                                 // metadata/exemplars/index are set per run
    std::map<Field, const Index*> indices;              // required for RagNovelty
    std::vector<PairSample> exemplar_pool;              // TwoShot; defaults to the dataset
    std::uint64_t two_shot_seed = 0;
    int parallelism = 1;
    TimestampFn now = utc_timestamp;
};

struct MatrixResult {
    std::vector<TrialRecord> trials;
    std::vector<EvalReport> reports;
};

/// Runs every strategy x option set (x affiliation sub-run) over `dataset`.
/// Missing resources are reported as ConfigError before any provider call.
MatrixResult run_matrix(std::span<const PairSample> dataset, Gateway& gateway, TrialLedger& ledger,
                        const MatrixOptions& options);

/// Trial counts the grid would execute, keyed by (run key, cell); each value
/// counts both orders.
std::map<std::pair<std::string, CellKey>, std::size_t> plan_matrix(std::span<const PairSample> dataset,
                                                                   const MatrixOptions& options);

// ---------------------------------------------------------------------------
// Report files
// ---------------------------------------------------------------------------

/// Per-cell rows for every report.
void write_cell_table(std::ostream& out, std::span<const EvalReport> reports);

/// Rows per year gap plus an Average row (unweighted mean of the gap rows);
/// Asc/Desc/Acc columns for every report.
void write_gap_table(std::ostream& out, std::span<const EvalReport> reports);

/// Long-format plot data: run, breakdown, group, asc, desc, overall, n.
void write_plot_data(std::ostream& out, std::span<const EvalReport> reports, std::string_view breakdown);

void write_significance(std::ostream& out, std::span<const SignificanceRow> rows);

/// Writes all tables under `dir` and returns the created file names.
std::vector<std::string> write_report_files(const std::filesystem::path& dir, std::span<const TrialRecord> trials);

}  // namespace novelbench
