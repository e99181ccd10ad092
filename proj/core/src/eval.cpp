#include "novelbench/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <thread>

namespace novelbench {

using nlohmann::json;

namespace {

double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::string fmt(double v, int precision = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
    return buf;
}

TrialRecord base_trial(StrategyId strategy, const PairSample& pair, Order order, const TrialContext& ctx) {
    TrialRecord t;
    t.field = pair.field;
    t.start_year = pair.start_year;
    t.year_gap = pair.year_gap;
    t.paper_x_id = pair.paper_x.id;
    t.paper_y_id = pair.paper_y.id;
    t.label = pair.label;
    t.strategy = strategy;
    t.options_label = ctx.options_label;
    t.run_label = ctx.run_label;
    t.order = order;
    return t;
}

TrialRecord run_trial(StrategyId strategy, const PairSample& pair, Order order, Gateway& gateway,
                      const JudgeOptions& options, const TrialContext& ctx) {
    auto t = base_trial(strategy, pair, order, ctx);
    if (ctx.ledger) {
        if (auto done = ctx.ledger->find(t.key()); done && !done->error) return *done;
    }
    try {
        t.verdict = judge(strategy, pair, order, gateway, options);
        t.correct = t.verdict.winner != Winner::Unparsed && t.verdict.winner_paper_id == pair.label;
        t.provider_calls = t.verdict.provider_calls;
    } catch (const std::exception& e) {
        t.verdict = Verdict{};
        t.correct = false;
        t.error = e.what();
    }
    t.timestamp = ctx.now ? ctx.now() : std::string();
    if (ctx.ledger) ctx.ledger->append(t);
    return t;
}

std::string cell_name(const CellKey& k) {
    return std::string(to_string(k.field)) + "/" + std::to_string(k.start_year) + "/" + std::to_string(k.year_gap);
}

// Minimal CSV quoting: wrap when the value contains a delimiter, quote or newline.
std::string csv(std::string_view v) {
    if (v.find_first_of(",\"\n") == std::string_view::npos) return std::string(v);
    std::string out = "\"";
    for (char c : v) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

// ---------------------------------------------------------------------------
// TrialRecord
// ---------------------------------------------------------------------------

std::string TrialRecord::presentation_key() const {
    return std::string(to_string(field)) + "/" + std::to_string(start_year) + "/" + std::to_string(year_gap) + "/" +
           paper_x_id + "/" + paper_y_id + "|" + std::string(to_string(order));
}

std::string TrialRecord::run_key() const {
    std::string k = std::string(to_string(strategy)) + "/" + options_label;
    if (!run_label.empty()) k += "/" + run_label;
    return k;
}

std::string TrialRecord::key() const {
    return std::string(to_string(field)) + "/" + std::to_string(start_year) + "/" + std::to_string(year_gap) + "/" +
           paper_x_id + "/" + paper_y_id + "|" + std::string(to_string(strategy)) + "|" + options_label + "|" +
           run_label + "|" + std::string(to_string(order));
}

json to_json(const TrialRecord& t) {
    return {
        {"pair", {{"field", to_string(t.field)},
                  {"start_year", t.start_year},
                  {"year_gap", t.year_gap},
                  {"paper_x", t.paper_x_id},
                  {"paper_y", t.paper_y_id},
                  {"label", t.label}}},
        {"strategy", to_string(t.strategy)},
        {"options", t.options_label},
        {"run_label", t.run_label},
        {"order", to_string(t.order)},
        {"verdict", to_json(t.verdict)},
        {"correct", t.correct},
        {"provider_calls", t.provider_calls},
        {"error", t.error ? json(*t.error) : json(nullptr)},
        {"timestamp", t.timestamp},
    };
}

TrialRecord trial_from_json(const json& j) {
    TrialRecord t;
    const auto& p = j.at("pair");
    auto field = parse_field(p.at("field").get<std::string>());
    if (!field) throw DataError("trial has unknown field " + p.at("field").dump());
    t.field = *field;
    t.start_year = p.at("start_year").get<int>();
    t.year_gap = p.at("year_gap").get<int>();
    t.paper_x_id = p.at("paper_x").get<std::string>();
    t.paper_y_id = p.at("paper_y").get<std::string>();
    t.label = p.at("label").get<std::string>();
    auto strategy = parse_strategy(j.at("strategy").get<std::string>());
    if (!strategy) throw DataError("trial has unknown strategy " + j.at("strategy").dump());
    t.strategy = *strategy;
    t.options_label = j.value("options", "plain");
    t.run_label = j.value("run_label", "");
    auto order = parse_order(j.at("order").get<std::string>());
    if (!order) throw DataError("trial has unknown order " + j.at("order").dump());
    t.order = *order;
    t.verdict = verdict_from_json(j.at("verdict"));
    t.correct = j.at("correct").get<bool>();
    t.provider_calls = j.value("provider_calls", 0);
    if (j.contains("error") && j["error"].is_string()) t.error = j["error"].get<std::string>();
    t.timestamp = j.value("timestamp", "");
    return t;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// ---------------------------------------------------------------------------
// TrialLedger
// ---------------------------------------------------------------------------

TrialLedger::TrialLedger(std::filesystem::path path) : path_(std::move(path)) {
    if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
    if (!std::filesystem::exists(*path_)) {
        std::ofstream create(*path_, std::ios::app);
        if (!create) throw IoError("cannot create ledger " + path_->string());
        return;
    }

    std::string content;
    {
        std::ifstream in(*path_, std::ios::binary);
        if (!in) throw IoError("cannot read ledger " + path_->string());
        content.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    // Anything after the last newline is a partial write from an interrupted run.
    const auto last_nl = content.rfind('\n');
    const std::size_t keep = last_nl == std::string::npos ? 0 : last_nl + 1;
    if (keep != content.size()) {
        std::filesystem::resize_file(*path_, keep);
        content.resize(keep);
    }

    std::istringstream lines(content);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw DataError("ledger " + path_->string() + " line " + std::to_string(line_no) + " is not valid JSON");
        }
        remember(trial_from_json(j));
    }
}

void TrialLedger::remember(TrialRecord trial) {
    auto key = trial.key();
    if (auto it = latest_.find(key); it != latest_.end()) {
        records_[it->second] = std::move(trial);
    } else {
        latest_.emplace(std::move(key), records_.size());
        records_.push_back(std::move(trial));
    }
}

bool TrialLedger::completed(const std::string& key) const {
    std::lock_guard lock(mu_);
    auto it = latest_.find(key);
    return it != latest_.end() && !records_[it->second].error;
}

std::optional<TrialRecord> TrialLedger::find(const std::string& key) const {
    std::lock_guard lock(mu_);
    auto it = latest_.find(key);
    if (it == latest_.end()) return std::nullopt;
    return records_[it->second];
}

void TrialLedger::append(const TrialRecord& trial) {
    const auto key = trial.key();
    std::lock_guard lock(mu_);
    if (auto it = latest_.find(key); it != latest_.end() && !records_[it->second].error) {
        throw DataError("trial " + key + " is already completed");
    }
    if (path_) {
        std::ofstream out(*path_, std::ios::app | std::ios::binary);
        out << to_json(trial).dump() << '\n';
        out.flush();
        if (!out) throw IoError("cannot append to ledger " + path_->string());
    }
    ++appended_;
    remember(trial);
}

std::vector<TrialRecord> TrialLedger::records() const {
    std::lock_guard lock(mu_);
    return records_;
}

std::size_t TrialLedger::appended() const {
    std::lock_guard lock(mu_);
    return appended_;
}

std::vector<TrialRecord> TrialLedger::read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read ledger " + path.string());
    TrialLedger scratch;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            if (in.eof()) break;  // torn tail
            throw DataError("ledger " + path.string() + " contains invalid JSON");
        }
        scratch.remember(trial_from_json(j));
    }
    return scratch.records_;
}

// ---------------------------------------------------------------------------
// run_pair
// ---------------------------------------------------------------------------

std::pair<TrialRecord, TrialRecord> run_pair(StrategyId strategy, const PairSample& pair, Gateway& gateway,
                                             const JudgeOptions& options, const TrialContext& context) {
    auto asc = run_trial(strategy, pair, Order::AscYear, gateway, options, context);
    auto desc = run_trial(strategy, pair, Order::DescYear, gateway, options, context);
    return {std::move(asc), std::move(desc)};
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

double CellStats::asc_accuracy() const { return ratio(asc_correct, asc_n); }
double CellStats::desc_accuracy() const { return ratio(desc_correct, desc_n); }
double CellStats::overall_accuracy() const { return ratio(asc_correct + desc_correct, n()); }
double CellStats::unparsed_rate() const { return ratio(unparsed, n()); }
double CellStats::error_rate() const { return ratio(errors, n()); }

void CellStats::add(const TrialRecord& t) {
    const bool correct = t.correct && !t.error;
    if (t.order == Order::AscYear) {
        ++asc_n;
        asc_correct += correct ? 1 : 0;
    } else {
        ++desc_n;
        desc_correct += correct ? 1 : 0;
    }
    if (t.error) {
        ++errors;
    } else if (t.verdict.winner == Winner::Unparsed) {
        ++unparsed;
    }
}

void CellStats::merge(const CellStats& o) {
    asc_n += o.asc_n;
    asc_correct += o.asc_correct;
    desc_n += o.desc_n;
    desc_correct += o.desc_correct;
    unparsed += o.unparsed;
    errors += o.errors;
}

double EvalReport::max_cell_error_rate() const {
    double worst = 0.0;
    for (const auto& [_, s] : per_cell) worst = std::max(worst, s.error_rate());
    return worst;
}

EvalReport aggregate(std::span<const TrialRecord> trials) {
    if (trials.empty()) throw DataError("aggregate: no trials");
    EvalReport r;
    r.run_key = trials.front().run_key();
    for (const auto& t : trials) {
        if (t.run_key() != r.run_key) {
            throw DataError("aggregate: trials mix runs " + r.run_key + " and " + t.run_key());
        }
        r.per_cell[{t.field, t.start_year, t.year_gap}].add(t);
        r.per_field[t.field].add(t);
        r.per_gap[t.year_gap].add(t);
        r.per_start_year[t.start_year].add(t);
        r.total.add(t);
    }
    return r;
}

std::vector<EvalReport> aggregate_by_run(std::span<const TrialRecord> trials) {
    std::map<std::string, std::vector<TrialRecord>> runs;
    for (const auto& t : trials) runs[t.run_key()].push_back(t);
    std::vector<EvalReport> reports;
    for (const auto& [_, ts] : runs) reports.push_back(aggregate(ts));
    return reports;
}

// ---------------------------------------------------------------------------
// McNemar
// ---------------------------------------------------------------------------

McNemarResult mcnemar_from_counts(std::size_t b, std::size_t c) {
    McNemarResult r;
    r.b = b;
    r.c = c;
    const std::size_t n = b + c;
    if (n == 0) return r;

    if (n < kMcNemarExactBelow) {
        // Two-sided exact binomial(n, 1/2) test on the smaller count. All
        // terms are integers below 2^53, so the sum is exact before division.
        const std::size_t k = std::min(b, c);
        std::uint64_t coeff = 1;  // C(n, 0)
        std::uint64_t tail = 0;
        for (std::size_t i = 0; i <= k; ++i) {
            tail += coeff;
            coeff = coeff * (n - i) / (i + 1);
        }
        const double total = std::ldexp(1.0, static_cast<int>(n));
        r.exact = true;
        r.statistic = static_cast<double>(k);
        r.p_value = std::min(1.0, 2.0 * static_cast<double>(tail) / total);
        return r;
    }

    const double diff = std::abs(static_cast<double>(b) - static_cast<double>(c)) - 1.0;
    r.exact = false;
    r.statistic = diff * diff / static_cast<double>(n);
    // Chi-square survival function with one degree of freedom.
    r.p_value = std::erfc(std::sqrt(r.statistic / 2.0));
    return r;
}

McNemarResult mcnemar(std::span<const TrialRecord> trials_a, std::span<const TrialRecord> trials_b) {
    std::map<std::string, bool> a;
    for (const auto& t : trials_a) {
        if (!a.emplace(t.presentation_key(), t.correct && !t.error).second) {
            throw DataError("mcnemar: duplicate presentation " + t.presentation_key() + " in first run");
        }
    }
    std::size_t b = 0, c = 0, matched = 0;
    std::set<std::string> seen;
    for (const auto& t : trials_b) {
        const auto key = t.presentation_key();
        if (!seen.insert(key).second) throw DataError("mcnemar: duplicate presentation " + key + " in second run");
        auto it = a.find(key);
        if (it == a.end()) throw DataError("mcnemar: presentation " + key + " missing from first run");
        ++matched;
        const bool cb = t.correct && !t.error;
        if (it->second && !cb) ++b;
        if (!it->second && cb) ++c;
    }
    if (matched != a.size()) throw DataError("mcnemar: first run has presentations missing from second run");
    return mcnemar_from_counts(b, c);
}

std::vector<SignificanceRow> significance_table(std::span<const TrialRecord> trials) {
    std::map<std::string, std::vector<TrialRecord>> runs;
    for (const auto& t : trials) runs[t.run_key()].push_back(t);

    std::vector<SignificanceRow> rows;
    for (auto ia = runs.begin(); ia != runs.end(); ++ia) {
        for (auto ib = std::next(ia); ib != runs.end(); ++ib) {
            McNemarResult pooled;
            try {
                pooled = mcnemar(ia->second, ib->second);
            } catch (const DataError&) {
                continue;
            }
            rows.push_back({ia->first, ib->first, std::nullopt, pooled});

            std::map<CellKey, std::pair<std::vector<TrialRecord>, std::vector<TrialRecord>>> cells;
            for (const auto& t : ia->second) cells[{t.field, t.start_year, t.year_gap}].first.push_back(t);
            for (const auto& t : ib->second) cells[{t.field, t.start_year, t.year_gap}].second.push_back(t);
            for (const auto& [cell, pair] : cells) {
                rows.push_back({ia->first, ib->first, cell, mcnemar(pair.first, pair.second)});
            }
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Experiment grid
// ---------------------------------------------------------------------------

PairSample with_affiliations(const PairSample& pair, const std::string& newer, const std::string& older) {
    PairSample out = pair;
    out.paper_x.affiliation = newer;
    out.paper_y.affiliation = older;
    return out;
}

namespace {

struct GridRun {
    StrategyId strategy;
    MetadataOptions metadata;
    std::string run_label;
};

std::vector<GridRun> grid_runs(const MatrixOptions& options) {
    std::vector<GridRun> runs;
    for (auto s : options.strategies) {
        for (const auto& m : options.metadata) {
            if (m.affiliation && options.affiliation_swap) {
                runs.push_back({s, m, std::string(kNewerResearch)});
                runs.push_back({s, m, std::string(kNewerTeaching)});
            } else {
                runs.push_back({s, m, ""});
            }
        }
    }
    return runs;
}

PairSample prepare(const PairSample& pair, const GridRun& run, const AffiliationNames& names) {
    if (run.run_label == kNewerResearch) return with_affiliations(pair, names.research, names.teaching);
    if (run.run_label == kNewerTeaching) return with_affiliations(pair, names.teaching, names.research);
    return pair;
}

}  // namespace

std::map<std::pair<std::string, CellKey>, std::size_t> plan_matrix(std::span<const PairSample> dataset,
                                                                   const MatrixOptions& options) {
    std::map<std::pair<std::string, CellKey>, std::size_t> plan;
    for (const auto& run : grid_runs(options)) {
        TrialRecord probe;
        probe.strategy = run.strategy;
        probe.options_label = run.metadata.label();
        probe.run_label = run.run_label;
        const auto key = probe.run_key();
        for (const auto& p : dataset) plan[{key, {p.field, p.start_year, p.year_gap}}] += 2;
    }
    return plan;
}

MatrixResult run_matrix(std::span<const PairSample> dataset, Gateway& gateway, TrialLedger& ledger,
                        const MatrixOptions& options) {
    if (options.strategies.empty()) throw ConfigError("run_matrix: no strategies");
    if (options.metadata.empty()) throw ConfigError("run_matrix: no metadata option sets");
    if (options.parallelism < 1) throw ConfigError("run_matrix: parallelism must be at least 1");

    const auto runs = grid_runs(options);
    const std::span<const PairSample> pool =
        options.exemplar_pool.empty() ? dataset : std::span<const PairSample>(options.exemplar_pool);

    // Resource checks up front so a misconfigured grid fails before any call.
    for (const auto& run : runs) {
        if (run.strategy == StrategyId::RagNovelty) {
            if (!options.judge.embedder) throw ConfigError("rag_novelty requires an embedder");
            for (const auto& p : dataset) {
                auto it = options.indices.find(p.field);
                if (it == options.indices.end() || !it->second) {
                    throw ConfigError("rag_novelty: no index for field " + std::string(to_string(p.field)));
                }
            }
        }
        if (run.strategy == StrategyId::TwoShot) {
            for (const auto& p : dataset) (void)select_two_shot_exemplars(pool, p, options.two_shot_seed);
        }
    }

    struct Task {
        const GridRun* run;
        const PairSample* pair;
    };
    std::vector<Task> tasks;
    tasks.reserve(runs.size() * dataset.size());
    for (const auto& run : runs) {
        for (const auto& p : dataset) tasks.push_back({&run, &p});
    }

    std::vector<std::pair<TrialRecord, TrialRecord>> results(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1)) {
            const auto& run = *tasks[i].run;
            const auto pair = prepare(*tasks[i].pair, run, options.affiliations);

            JudgeOptions judge = options.judge;
            judge.metadata = run.metadata;
            if (run.strategy == StrategyId::TwoShot) {
                judge.exemplars = select_two_shot_exemplars(pool, *tasks[i].pair, options.two_shot_seed);
                for (auto& ex : judge.exemplars) ex.pair = prepare(ex.pair, run, options.affiliations);
            }
            if (run.strategy == StrategyId::RagNovelty) judge.index = options.indices.at(pair.field);

            TrialContext ctx{&ledger, run.metadata.label(), run.run_label, options.now};
            results[i] = run_pair(run.strategy, pair, gateway, judge, ctx);
        }
    };

    const auto threads = std::min<std::size_t>(static_cast<std::size_t>(options.parallelism), tasks.size());
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool_threads;
        for (std::size_t t = 0; t < threads; ++t) pool_threads.emplace_back(worker);
    }

    MatrixResult out;
    out.trials.reserve(results.size() * 2);
    for (auto& [asc, desc] : results) {
        out.trials.push_back(std::move(asc));
        out.trials.push_back(std::move(desc));
    }
    out.reports = aggregate_by_run(out.trials);
    return out;
}

// ---------------------------------------------------------------------------
// Report files
// ---------------------------------------------------------------------------

void write_cell_table(std::ostream& out, std::span<const EvalReport> reports) {
    out << "run,field,start_year,year_gap,asc_accuracy,desc_accuracy,accuracy,n,unparsed_rate,error_rate\n";
    for (const auto& r : reports) {
        for (const auto& [cell, s] : r.per_cell) {
            out << csv(r.run_key) << ',' << to_string(cell.field) << ',' << cell.start_year << ',' << cell.year_gap
                << ',' << fmt(s.asc_accuracy()) << ',' << fmt(s.desc_accuracy()) << ',' << fmt(s.overall_accuracy())
                << ',' << s.n() << ',' << fmt(s.unparsed_rate()) << ',' << fmt(s.error_rate()) << '\n';
        }
    }
}

void write_gap_table(std::ostream& out, std::span<const EvalReport> reports) {
    std::set<int> gaps;
    for (const auto& r : reports) {
        for (const auto& [g, _] : r.per_gap) gaps.insert(g);
    }
    out << "year_gap";
    for (const auto& r : reports) {
        out << ',' << csv(r.run_key + " asc") << ',' << csv(r.run_key + " desc") << ',' << csv(r.run_key + " acc");
    }
    out << '\n';

    std::vector<std::array<double, 3>> sums(reports.size(), {0.0, 0.0, 0.0});
    std::vector<int> counts(reports.size(), 0);
    for (int g : gaps) {
        out << g;
        for (std::size_t i = 0; i < reports.size(); ++i) {
            auto it = reports[i].per_gap.find(g);
            if (it == reports[i].per_gap.end()) {
                out << ",,,";
                continue;
            }
            const auto& s = it->second;
            const std::array<double, 3> row = {s.asc_accuracy(), s.desc_accuracy(), s.overall_accuracy()};
            for (std::size_t c = 0; c < 3; ++c) {
                sums[i][c] += row[c];
                out << ',' << fmt(row[c], 2);
            }
            ++counts[i];
        }
        out << '\n';
    }
    out << "Average";
    for (std::size_t i = 0; i < reports.size(); ++i) {
        for (std::size_t c = 0; c < 3; ++c) {
            out << ',' << (counts[i] ? fmt(sums[i][c] / counts[i], 2) : std::string());
        }
    }
    out << '\n';
}

void write_plot_data(std::ostream& out, std::span<const EvalReport> reports, std::string_view breakdown) {
    out << "run,breakdown,group,asc_accuracy,desc_accuracy,accuracy,n\n";
    auto row = [&](const EvalReport& r, const std::string& group, const CellStats& s) {
        out << csv(r.run_key) << ',' << breakdown << ',' << csv(group) << ',' << fmt(s.asc_accuracy()) << ','
            << fmt(s.desc_accuracy()) << ',' << fmt(s.overall_accuracy()) << ',' << s.n() << '\n';
    };
    for (const auto& r : reports) {
        if (breakdown == "year_gap") {
            for (const auto& [g, s] : r.per_gap) row(r, std::to_string(g), s);
        } else if (breakdown == "field") {
            for (const auto& [f, s] : r.per_field) row(r, std::string(to_string(f)), s);
        } else if (breakdown == "start_year") {
            for (const auto& [y, s] : r.per_start_year) row(r, std::to_string(y), s);
        } else if (breakdown == "field_gap") {
            std::map<std::pair<Field, int>, CellStats> fg;
            for (const auto& [cell, s] : r.per_cell) fg[{cell.field, cell.year_gap}].merge(s);
            for (const auto& [k, s] : fg) row(r, std::string(to_string(k.first)) + "/" + std::to_string(k.second), s);
        } else {
            throw ConfigError("unknown plot breakdown '" + std::string(breakdown) + "'");
        }
    }
}

void write_significance(std::ostream& out, std::span<const SignificanceRow> rows) {
    out << "run_a,run_b,cell,b,c,test,statistic,p_value\n";
    for (const auto& row : rows) {
        out << csv(row.run_a) << ',' << csv(row.run_b) << ',' << (row.cell ? cell_name(*row.cell) : "all") << ','
            << row.result.b << ',' << row.result.c << ',' << (row.result.exact ? "exact" : "chi2") << ','
            << fmt(row.result.statistic, 6) << ',' << fmt(row.result.p_value, 6) << '\n';
    }
}

std::vector<std::string> write_report_files(const std::filesystem::path& dir, std::span<const TrialRecord> trials) {
    std::filesystem::create_directories(dir);
    const auto reports = aggregate_by_run(trials);
    const auto sig = significance_table(trials);

    std::vector<std::string> written;
    auto emit = [&](const std::string& name, const std::function<void(std::ostream&)>& body) {
        std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + (dir / name).string());
        body(out);
        if (!out) throw IoError("failed writing " + (dir / name).string());
        written.push_back(name);
    };
    emit("cells.csv", [&](std::ostream& o) { write_cell_table(o, reports); });
    emit("by_gap.csv", [&](std::ostream& o) { write_gap_table(o, reports); });
    for (const char* b : {"year_gap", "field", "start_year", "field_gap"}) {
        emit(std::string("plot_") + b + ".csv", [&](std::ostream& o) { write_plot_data(o, reports, b); });
    }
    emit("significance.csv", [&](std::ostream& o) { write_significance(o, sig); });
    return written;
}

}  // namespace novelbench
