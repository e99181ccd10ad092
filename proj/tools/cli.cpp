#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "novelbench/corpus.hpp"
#include "novelbench/embed_index.hpp"
#include "novelbench/eval.hpp"
#include "novelbench/llm_gateway.hpp"
#include "novelbench/run_config.hpp"

namespace novelbench::cli {

namespace {

using nlohmann::json;

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<int> int_list(const std::string& s) {
    std::vector<int> out;
    for (const auto& item : split_list(s)) {
        try {
            out.push_back(std::stoi(item));
        } catch (const std::exception&) {
            throw ConfigError("'" + item + "' is not an integer");
        }
    }
    return out;
}

std::vector<Field> field_list(const std::string& s) {
    std::vector<Field> out;
    for (const auto& item : split_list(s)) {
        auto f = parse_field(item);
        if (!f) throw ConfigError("unknown field '" + item + "'");
        out.push_back(*f);
    }
    return out;
}

// Flags shared by every subcommand; unset optionals leave the config value.
struct Overrides {
    std::string config;
    std::optional<std::string> output_dir;
    std::optional<std::string> corpus;

    // sample
    std::optional<std::string> fields;
    std::optional<std::string> start_years;
    std::optional<std::string> gaps;
    std::optional<int> per_cell;
    std::optional<std::uint64_t> seed;

    // build-index
    std::optional<std::string> index_fields;
    std::optional<int> per_year;
    std::optional<int> first_year;
    std::optional<int> last_year;
    std::optional<std::uint64_t> index_seed;

    // run
    std::optional<std::string> strategies;
    std::optional<std::string> metadata;
    std::optional<int> parallelism;
    std::optional<std::string> provider_kind;
    std::optional<std::string> mock_rule;
    std::optional<std::string> model;
    std::optional<int> k;
    std::optional<double> max_error_rate;
    bool dry_run = false;

    // report
    std::optional<std::string> ledger;
    std::optional<std::string> report_dir;
};

RunConfig resolve_config(const Overrides& o) {
    RunConfig c = o.config.empty() ? RunConfig{} : load_run_config(o.config);
    if (o.output_dir) c.output_dir = *o.output_dir;
    if (o.corpus) c.corpus_path = *o.corpus;
    if (o.fields) c.dataset.fields = field_list(*o.fields);
    if (o.start_years) c.dataset.start_years = int_list(*o.start_years);
    if (o.gaps) c.dataset.year_gaps = int_list(*o.gaps);
    if (o.per_cell) c.dataset.samples_per_cell = *o.per_cell;
    if (o.seed) c.dataset.rng_seed = *o.seed;
    if (o.index_fields) c.index.fields = field_list(*o.index_fields);
    if (o.per_year) c.index.per_year = *o.per_year;
    if (o.first_year) c.index.first_year = *o.first_year;
    if (o.last_year) c.index.last_year = *o.last_year;
    if (o.index_seed) c.index.seed = *o.index_seed;
    if (o.strategies) {
        c.strategies.clear();
        for (const auto& s : split_list(*o.strategies)) {
            auto id = parse_strategy(s);
            if (!id) throw ConfigError("unknown strategy '" + s + "'");
            c.strategies.push_back(*id);
        }
    }
    if (o.metadata) {
        c.metadata.clear();
        for (const auto& m : split_list(*o.metadata)) c.metadata.push_back(MetadataOptions::parse(m));
    }
    if (o.parallelism) c.run.parallelism = *o.parallelism;
    if (o.provider_kind) c.provider.kind = *o.provider_kind;
    if (o.mock_rule) c.provider.mock_rule = *o.mock_rule;
    if (o.model) c.provider.model = *o.model;
    if (o.k) c.index.k = *o.k;
    if (o.max_error_rate) c.run.max_cell_error_rate = *o.max_error_rate;
    return c;
}

void write_manifest(const RunConfig& c, std::string_view command, json extra) {
    auto m = run_manifest(c, command);
    m.update(extra);
    const auto dir = c.output_dir / "manifests";
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / (std::string(command) + ".json"), std::ios::trunc);
    out << m.dump(2) << '\n';
    if (!out) throw IoError("cannot write manifest in " + dir.string());
}

CorpusStore load_store(const RunConfig& c, std::ostream& out) {
    if (std::filesystem::exists(c.corpus_store_path())) {
        return CorpusStore(load_papers(c.corpus_store_path().string()));
    }
    if (c.corpus_path.empty()) {
        throw ConfigError("no ingested corpus at " + c.corpus_store_path().string() + " and no corpus path configured");
    }
    out << "ingesting " << c.corpus_path.string() << '\n';
    return ingest_metadata_file(c.corpus_path.string()).store;
}

std::vector<Field> index_fields(const RunConfig& c) { return c.index.fields.empty() ? c.dataset.fields : c.index.fields; }

int cmd_ingest(const RunConfig& c, std::ostream& out) {
    if (c.corpus_path.empty()) throw ConfigError("ingest needs --input or a 'corpus' config entry");
    if (!std::filesystem::exists(c.corpus_path)) throw IoError("input file " + c.corpus_path.string() + " does not exist");
    auto result = ingest_metadata_file(c.corpus_path.string());

    std::vector<PaperRecord> records;
    for (const auto& [_, bucket] : result.store.buckets()) records.insert(records.end(), bucket.begin(), bucket.end());
    std::filesystem::create_directories(c.output_dir);
    save_papers(c.corpus_store_path().string(), records);

    const auto digest = result.store.digest();
    const auto& s = result.stats;
    out << "accepted " << s.accepted << '\n'
        << "skipped_malformed " << s.malformed << '\n'
        << "skipped_outside_fields " << s.outside_fields << '\n'
        << "skipped_duplicate_ids " << s.duplicate_ids << '\n'
        << "digest " << digest << '\n';
    write_manifest(c, "ingest",
                   {{"input", c.corpus_path.string()},
                    {"store", c.corpus_store_path().string()},
                    {"digest", digest},
                    {"accepted", s.accepted},
                    {"malformed", s.malformed},
                    {"outside_fields", s.outside_fields},
                    {"duplicate_ids", s.duplicate_ids}});
    return kOk;
}

int cmd_sample(const RunConfig& c, std::ostream& out) {
    const auto store = load_store(c, out);
    const auto pairs = sample_dataset(store, c.dataset);
    std::filesystem::create_directories(c.output_dir);
    save_pairs(c.pairs_path().string(), pairs);
    out << "pairs " << pairs.size() << '\n' << "wrote " << c.pairs_path().string() << '\n';
    write_manifest(c, "sample",
                   {{"pairs", pairs.size()}, {"pairs_path", c.pairs_path().string()}, {"corpus_digest", store.digest()}});
    return kOk;
}

int cmd_build_index(const RunConfig& c, std::ostream& out, std::ostream& err) {
    const auto store = load_store(c, out);
    auto embedder = make_embedder(c);
    json built = json::array();
    for (auto field : index_fields(c)) {
        auto pool = sample_index_pool(store, field, c.index.first_year, c.index.last_year, c.index.per_year,
                                      c.index.seed);
        for (const auto& w : pool.warnings) err << "warning: " << w << '\n';
        if (pool.papers.empty()) throw DataError("no papers for index of field " + std::string(to_string(field)));
        const auto index = build_index(pool.papers, *embedder);
        index.save(c.index_dir(field));
        out << "index " << to_string(field) << " entries " << index.size() << " -> " << c.index_dir(field).string()
            << '\n';
        built.push_back({{"field", to_string(field)}, {"entries", index.size()}, {"dir", c.index_dir(field).string()}});
    }
    write_manifest(c, "build-index", {{"indices", built}});
    return kOk;
}

MatrixOptions matrix_options(const RunConfig& c) {
    MatrixOptions m;
    m.strategies = c.strategies;
    m.metadata = c.metadata;
    m.affiliation_swap = c.run.affiliation_swap;
    m.affiliations = c.run.affiliations;
    m.judge = judge_options(c);
    m.two_shot_seed = c.params.two_shot_seed;
    m.parallelism = c.run.parallelism;
    return m;
}

int cmd_run(const RunConfig& c, bool dry_run, std::ostream& out, std::ostream& err) {
    if (!std::filesystem::exists(c.pairs_path())) {
        throw ConfigError("no dataset at " + c.pairs_path().string() + "; run 'sample' first");
    }
    const auto pairs = load_pairs(c.pairs_path().string());
    auto options = matrix_options(c);

    if (dry_run) {
        const auto plan = plan_matrix(pairs, options);
        std::size_t total = 0;
        out << "run,field,start_year,year_gap,asc_trials,desc_trials\n";
        for (const auto& [key, n] : plan) {
            out << key.first << ',' << to_string(key.second.field) << ',' << key.second.start_year << ','
                << key.second.year_gap << ',' << n / 2 << ',' << n / 2 << '\n';
            total += n;
        }
        out << "total_trials " << total << '\n';
        return kOk;
    }

    const bool needs_rag =
        std::find(c.strategies.begin(), c.strategies.end(), StrategyId::RagNovelty) != c.strategies.end();
    std::unique_ptr<Embedder> embedder;
    std::map<Field, Index> indices;
    if (needs_rag) {
        embedder = make_embedder(c);
        std::set<Field> fields;
        for (const auto& p : pairs) fields.insert(p.field);
        for (auto f : fields) {
            indices.emplace(f, Index::load(c.index_dir(f), {c.embedding.model, c.embedding.dimension, f}));
        }
        for (const auto& [f, idx] : indices) options.indices[f] = &idx;
        options.judge.embedder = embedder.get();
    }

    auto gateway = make_gateway(c);
    TrialLedger ledger(c.ledger_path());
    const auto before = http_requests_sent();
    const auto result = run_matrix(pairs, *gateway, ledger, options);

    const auto all_trials = ledger.records();
    const auto files = write_report_files(c.reports_dir(), all_trials);

    bool over_threshold = false;
    for (const auto& r : result.reports) {
        out << r.run_key << " accuracy " << r.total.overall_accuracy() << " asc " << r.total.asc_accuracy()
            << " desc " << r.total.desc_accuracy() << " n " << r.total.n() << " unparsed_rate " << r.unparsed_rate()
            << " error_rate " << r.error_rate() << '\n';
        if (r.max_cell_error_rate() > c.run.max_cell_error_rate) {
            over_threshold = true;
            err << "error: " << r.run_key << " has a cell error rate of " << r.max_cell_error_rate()
                << " (threshold " << c.run.max_cell_error_rate << ")\n";
        }
    }
    const auto network = http_requests_sent() - before;
    out << "trials " << result.trials.size() << '\n'
        << "provider_round_trips " << gateway->provider_round_trips() << '\n'
        << "network_requests " << network << '\n';

    write_manifest(c, "run",
                   {{"pairs", pairs.size()},
                    {"trials", result.trials.size()},
                    {"ledger", c.ledger_path().string()},
                    {"reports", files},
                    {"provider_round_trips", gateway->provider_round_trips()},
                    {"network_requests", network}});
    return over_threshold ? kErrorThreshold : kOk;
}

int cmd_report(const RunConfig& c, const Overrides& o, std::ostream& out) {
    const std::filesystem::path ledger = o.ledger ? std::filesystem::path(*o.ledger) : c.ledger_path();
    const std::filesystem::path dir = o.report_dir ? std::filesystem::path(*o.report_dir) : c.reports_dir();
    const auto trials = TrialLedger::read(ledger);
    if (trials.empty()) throw DataError("ledger " + ledger.string() + " has no trials");
    const auto files = write_report_files(dir, trials);
    const auto reports = aggregate_by_run(trials);
    write_gap_table(out, reports);
    for (const auto& f : files) out << "wrote " << (dir / f).string() << '\n';
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Pairwise scholarly-novelty benchmark harness", "novelbench"};
    app.require_subcommand(1);
    Overrides o;

    auto common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", o.config, "Run configuration (JSON)");
        sub->add_option("-o,--output-dir", o.output_dir, "Artifact directory");
    };
    auto sample_flags = [&](CLI::App* sub) {
        sub->add_option("--fields", o.fields, "Comma-separated fields");
        sub->add_option("--start-years", o.start_years, "Comma-separated start years");
        sub->add_option("--gaps", o.gaps, "Comma-separated year gaps");
        sub->add_option("--per-cell", o.per_cell, "Pairs per (field, start year, gap) cell");
        sub->add_option("--seed", o.seed, "Sampling seed");
    };

    auto* ingest = app.add_subcommand("ingest", "Normalize an arXiv metadata snapshot");
    common(ingest);
    ingest->add_option("-i,--input", o.corpus, "Snapshot JSONL file");

    auto* sample = app.add_subcommand("sample", "Draw the pair dataset");
    common(sample);
    sample->add_option("--corpus", o.corpus, "Snapshot used when no ingested corpus exists");
    sample_flags(sample);

    auto* build = app.add_subcommand("build-index", "Embed per-field retrieval pools");
    common(build);
    build->add_option("--corpus", o.corpus, "Snapshot used when no ingested corpus exists");
    build->add_option("--fields", o.index_fields, "Comma-separated fields (default: dataset fields)");
    build->add_option("--per-year", o.per_year, "Papers per year");
    build->add_option("--first-year", o.first_year);
    build->add_option("--last-year", o.last_year);
    build->add_option("--seed", o.index_seed, "Pool sampling seed");

    auto* run_cmd = app.add_subcommand("run", "Judge the dataset with the configured strategies");
    common(run_cmd);
    run_cmd->add_option("--strategies", o.strategies, "Comma-separated strategy ids");
    run_cmd->add_option("--metadata", o.metadata, "Comma-separated option sets, e.g. plain,tldr,author");
    run_cmd->add_option("-j,--parallelism", o.parallelism);
    run_cmd->add_option("--provider", o.provider_kind, "http or mock");
    run_cmd->add_option("--mock-rule", o.mock_rule, "first, second or date-aware");
    run_cmd->add_option("--model", o.model);
    run_cmd->add_option("-k", o.k, "Retrieved neighbours for rag_novelty");
    run_cmd->add_option("--max-error-rate", o.max_error_rate, "Per-cell error rate that fails the run");
    run_cmd->add_flag("--dry-run", o.dry_run, "Print the trial plan without calling any provider");

    auto* report = app.add_subcommand("report", "Rebuild report tables from a trial ledger");
    common(report);
    report->add_option("--ledger", o.ledger);
    report->add_option("--out", o.report_dir);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        if (!reversed.empty()) reversed.pop_back();  // program name
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kOk : kUsage;
    }

    RunConfig config;
    try {
        config = resolve_config(o);
        validate(config, ingest->parsed());
    } catch (const Error& e) {
        err << "config error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        err << "config error: " << e.what() << '\n';
        return kUsage;
    }

    try {
        if (ingest->parsed()) return cmd_ingest(config, out);
        if (sample->parsed()) return cmd_sample(config, out);
        if (build->parsed()) return cmd_build_index(config, out, err);
        if (run_cmd->parsed()) return cmd_run(config, o.dry_run, out, err);
        if (report->parsed()) return cmd_report(config, o, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kUsage;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    return run(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace novelbench::cli
