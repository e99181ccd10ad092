#include "novelbench/run_config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "novelbench/prompts.hpp"

namespace novelbench {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, std::string_view section, std::initializer_list<std::string_view> allowed) {
    if (!obj.is_object()) throw ConfigError("config section '" + std::string(section) + "' must be an object");
    for (const auto& [key, _] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ConfigError("unknown config key '" + std::string(section) + "." + key + "'");
        }
    }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
    if (auto it = obj.find(key); it != obj.end() && !it->is_null()) {
        try {
            out = it->get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(std::string("config key '") + key + "': " + e.what());
        }
    }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_relative() && !base.empty()) return base / path;
    return path;
}

std::vector<Field> read_fields(const json& arr) {
    std::vector<Field> out;
    for (const auto& f : arr) {
        auto parsed = parse_field(f.get<std::string>());
        if (!parsed) throw ConfigError("unknown field '" + f.get<std::string>() + "'");
        out.push_back(*parsed);
    }
    return out;
}

json fields_json(const std::vector<Field>& fields) {
    json arr = json::array();
    for (auto f : fields) arr.push_back(to_string(f));
    return arr;
}

}  // namespace

std::filesystem::path RunConfig::effective_cache_dir() const { return cache_dir ? *cache_dir : output_dir / "cache"; }

std::filesystem::path RunConfig::index_dir(Field field) const {
    return output_dir / "index" / std::string(to_string(field));
}

namespace {

RunConfig parse_run_config(const json& j, const std::filesystem::path& base_dir) {
    reject_unknown(j, "root",
                   {"output_dir", "corpus", "cache_dir", "dataset", "index", "embedding", "provider", "strategies",
                    "metadata_options", "params", "run"});
    RunConfig c;
    if (j.contains("output_dir")) c.output_dir = resolve(base_dir, j["output_dir"].get<std::string>());
    if (j.contains("corpus")) c.corpus_path = resolve(base_dir, j["corpus"].get<std::string>());
    if (j.contains("cache_dir")) c.cache_dir = resolve(base_dir, j["cache_dir"].get<std::string>());

    if (auto it = j.find("dataset"); it != j.end()) {
        reject_unknown(*it, "dataset", {"fields", "start_years", "year_gaps", "samples_per_cell", "seed"});
        if (it->contains("fields")) c.dataset.fields = read_fields((*it)["fields"]);
        read(*it, "start_years", c.dataset.start_years);
        read(*it, "year_gaps", c.dataset.year_gaps);
        read(*it, "samples_per_cell", c.dataset.samples_per_cell);
        read(*it, "seed", c.dataset.rng_seed);
    }
    if (auto it = j.find("index"); it != j.end()) {
        reject_unknown(*it, "index", {"fields", "first_year", "last_year", "per_year", "k", "seed"});
        if (it->contains("fields")) c.index.fields = read_fields((*it)["fields"]);
        read(*it, "first_year", c.index.first_year);
        read(*it, "last_year", c.index.last_year);
        read(*it, "per_year", c.index.per_year);
        read(*it, "k", c.index.k);
        read(*it, "seed", c.index.seed);
    }
    if (auto it = j.find("embedding"); it != j.end()) {
        reject_unknown(*it, "embedding",
                       {"kind", "base_url", "model", "api_key_env", "dimension", "batch_size", "request_dimensions",
                        "max_retries"});
        read(*it, "kind", c.embedding.kind);
        read(*it, "base_url", c.embedding.base_url);
        read(*it, "model", c.embedding.model);
        read(*it, "api_key_env", c.embedding.api_key_env);
        read(*it, "dimension", c.embedding.dimension);
        read(*it, "batch_size", c.embedding.batch_size);
        read(*it, "request_dimensions", c.embedding.request_dimensions);
        read(*it, "max_retries", c.embedding.max_retries);
    }
    if (auto it = j.find("provider"); it != j.end()) {
        reject_unknown(*it, "provider",
                       {"kind", "base_url", "model", "api_key_env", "mock_rule", "requests_per_second", "max_retries",
                        "timeout_seconds"});
        read(*it, "kind", c.provider.kind);
        read(*it, "base_url", c.provider.base_url);
        read(*it, "model", c.provider.model);
        read(*it, "api_key_env", c.provider.api_key_env);
        read(*it, "mock_rule", c.provider.mock_rule);
        read(*it, "requests_per_second", c.provider.requests_per_second);
        read(*it, "max_retries", c.provider.max_retries);
        read(*it, "timeout_seconds", c.provider.timeout_seconds);
    }
    if (auto it = j.find("strategies"); it != j.end()) {
        c.strategies.clear();
        for (const auto& s : *it) {
            auto id = parse_strategy(s.get<std::string>());
            if (!id) throw ConfigError("unknown strategy '" + s.get<std::string>() + "'");
            c.strategies.push_back(*id);
        }
    }
    if (auto it = j.find("metadata_options"); it != j.end()) {
        c.metadata.clear();
        for (const auto& m : *it) c.metadata.push_back(MetadataOptions::parse(m.get<std::string>()));
    }
    if (auto it = j.find("params"); it != j.end()) {
        reject_unknown(*it, "params",
                       {"sc_paths", "sc_temperature", "sc_max_tokens", "sc_max_extra_paths", "discussion_max_tokens",
                        "strict_retry", "two_shot_seed"});
        read(*it, "sc_paths", c.params.sc_paths);
        read(*it, "sc_temperature", c.params.sc_temperature);
        read(*it, "sc_max_tokens", c.params.sc_max_tokens);
        read(*it, "sc_max_extra_paths", c.params.sc_max_extra_paths);
        read(*it, "discussion_max_tokens", c.params.discussion_max_tokens);
        read(*it, "strict_retry", c.params.strict_retry);
        read(*it, "two_shot_seed", c.params.two_shot_seed);
    }
    if (auto it = j.find("run"); it != j.end()) {
        reject_unknown(*it, "run",
                       {"parallelism", "max_cell_error_rate", "affiliation_swap", "research_affiliation",
                        "teaching_affiliation"});
        read(*it, "parallelism", c.run.parallelism);
        read(*it, "max_cell_error_rate", c.run.max_cell_error_rate);
        read(*it, "affiliation_swap", c.run.affiliation_swap);
        read(*it, "research_affiliation", c.run.affiliations.research);
        read(*it, "teaching_affiliation", c.run.affiliations.teaching);
    }
    return c;
}

}  // namespace

RunConfig run_config_from_json(const json& j, const std::filesystem::path& base_dir) {
    try {
        return parse_run_config(j, base_dir);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid config: ") + e.what());
    }
}

json to_json(const RunConfig& c) {
    json strategies = json::array();
    for (auto s : c.strategies) strategies.push_back(to_string(s));
    json metadata = json::array();
    for (const auto& m : c.metadata) metadata.push_back(m.label());
    json j = {
        {"output_dir", c.output_dir.string()},
        {"corpus", c.corpus_path.string()},
        {"dataset",
         {{"fields", fields_json(c.dataset.fields)},
          {"start_years", c.dataset.start_years},
          {"year_gaps", c.dataset.year_gaps},
          {"samples_per_cell", c.dataset.samples_per_cell},
          {"seed", c.dataset.rng_seed}}},
        {"index",
         {{"fields", fields_json(c.index.fields)},
          {"first_year", c.index.first_year},
          {"last_year", c.index.last_year},
          {"per_year", c.index.per_year},
          {"k", c.index.k},
          {"seed", c.index.seed}}},
        {"embedding",
         {{"kind", c.embedding.kind},
          {"base_url", c.embedding.base_url},
          {"model", c.embedding.model},
          {"api_key_env", c.embedding.api_key_env},
          {"dimension", c.embedding.dimension},
          {"batch_size", c.embedding.batch_size},
          {"request_dimensions", c.embedding.request_dimensions},
          {"max_retries", c.embedding.max_retries}}},
        {"provider",
         {{"kind", c.provider.kind},
          {"base_url", c.provider.base_url},
          {"model", c.provider.model},
          {"api_key_env", c.provider.api_key_env},
          {"mock_rule", c.provider.mock_rule},
          {"requests_per_second", c.provider.requests_per_second},
          {"max_retries", c.provider.max_retries},
          {"timeout_seconds", c.provider.timeout_seconds}}},
        {"strategies", strategies},
        {"metadata_options", metadata},
        {"params",
         {{"sc_paths", c.params.sc_paths},
          {"sc_temperature", c.params.sc_temperature},
          {"sc_max_tokens", c.params.sc_max_tokens},
          {"sc_max_extra_paths", c.params.sc_max_extra_paths},
          {"discussion_max_tokens", c.params.discussion_max_tokens},
          {"strict_retry", c.params.strict_retry},
          {"two_shot_seed", c.params.two_shot_seed}}},
        {"run",
         {{"parallelism", c.run.parallelism},
          {"max_cell_error_rate", c.run.max_cell_error_rate},
          {"affiliation_swap", c.run.affiliation_swap},
          {"research_affiliation", c.run.affiliations.research},
          {"teaching_affiliation", c.run.affiliations.teaching}}},
    };
    if (c.cache_dir) j["cache_dir"] = c.cache_dir->string();
    return j;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config " + path.string() + " is not valid JSON");
    return run_config_from_json(j, path.parent_path());
}

void validate(const RunConfig& c, bool require_corpus) {
    validate(c.dataset);
    if (c.output_dir.empty()) throw ConfigError("output_dir must be set");
    if (require_corpus) {
        if (c.corpus_path.empty()) throw ConfigError("corpus path must be set");
        if (!std::filesystem::exists(c.corpus_path)) {
            throw ConfigError("corpus file " + c.corpus_path.string() + " does not exist");
        }
    }
    if (c.index.first_year > c.index.last_year) throw ConfigError("index.first_year is after index.last_year");
    if (c.index.per_year < 1) throw ConfigError("index.per_year must be positive");
    if (c.index.k < 1) throw ConfigError("index.k must be positive");
    for (const auto* kind : {&c.provider.kind, &c.embedding.kind}) {
        if (*kind != "http" && *kind != "mock") throw ConfigError("provider kind must be 'http' or 'mock'");
    }
    if (c.provider.kind == "mock" && !mock_rules::by_name(c.provider.mock_rule)) {
        throw ConfigError("unknown mock rule '" + c.provider.mock_rule + "'");
    }
    if (c.provider.model.empty()) throw ConfigError("provider.model must be set");
    if (c.provider.requests_per_second < 0) throw ConfigError("provider.requests_per_second must be >= 0");
    if (c.provider.max_retries < 0 || c.embedding.max_retries < 0) throw ConfigError("max_retries must be >= 0");
    if (c.embedding.dimension < 1) throw ConfigError("embedding.dimension must be positive");
    if (c.embedding.batch_size < 1) throw ConfigError("embedding.batch_size must be positive");
    if (c.strategies.empty()) throw ConfigError("at least one strategy is required");
    if (c.metadata.empty()) throw ConfigError("at least one metadata option set is required");
    if (c.params.sc_paths < 1) throw ConfigError("params.sc_paths must be positive");
    if (c.params.sc_max_extra_paths < 0) throw ConfigError("params.sc_max_extra_paths must be >= 0");
    if (c.run.parallelism < 1) throw ConfigError("run.parallelism must be positive");
    if (c.run.max_cell_error_rate < 0.0 || c.run.max_cell_error_rate > 1.0) {
        throw ConfigError("run.max_cell_error_rate must be in [0, 1]");
    }
}

std::string config_hash(const RunConfig& config) { return sha256_hex(to_json(config).dump()); }

std::shared_ptr<ChatProvider> make_chat_provider(const RunConfig& c) {
    if (c.provider.kind == "mock") {
        auto rule = mock_rules::by_name(c.provider.mock_rule);
        if (!rule) throw ConfigError("unknown mock rule '" + c.provider.mock_rule + "'");
        return make_mock(std::move(*rule));
    }
    std::shared_ptr<HttpTransport> transport = make_http_transport(std::chrono::seconds(c.provider.timeout_seconds));
    return std::make_shared<HttpChatProvider>(c.provider.base_url, api_key_from_env(c.provider.api_key_env),
                                              std::move(transport));
}

std::unique_ptr<Gateway> make_gateway(const RunConfig& c, std::shared_ptr<ChatProvider> provider) {
    if (!provider) provider = make_chat_provider(c);
    GatewayOptions opts;
    opts.cache = std::make_shared<ResponseCache>(c.effective_cache_dir());
    if (c.provider.requests_per_second > 0) {
        opts.limiter = std::make_shared<RateLimiter>(c.provider.requests_per_second, system_clock());
    }
    opts.retry.max_retries = c.provider.max_retries;
    opts.default_model = c.provider.model;
    return std::make_unique<Gateway>(std::move(provider), std::move(opts));
}

std::unique_ptr<Embedder> make_embedder(const RunConfig& c) {
    std::shared_ptr<EmbeddingProvider> provider;
    if (c.embedding.kind == "mock") {
        provider = MockEmbeddingProvider::hashing(c.embedding.dimension);
    } else {
        std::optional<int> dims;
        if (c.embedding.request_dimensions) dims = c.embedding.dimension;
        provider = std::make_shared<HttpEmbeddingProvider>(c.embedding.base_url,
                                                           api_key_from_env(c.embedding.api_key_env),
                                                           make_http_transport(), dims);
    }
    EmbedderOptions opts;
    opts.model_id = c.embedding.model;
    opts.dimension = c.embedding.dimension;
    opts.batch_size = c.embedding.batch_size;
    opts.retry.max_retries = c.embedding.max_retries;
    opts.cache = std::make_shared<EmbeddingCache>(c.effective_cache_dir());
    return std::make_unique<Embedder>(std::move(provider), std::move(opts));
}

JudgeOptions judge_options(const RunConfig& c) {
    JudgeOptions o;
    o.model_id = c.provider.model;
    o.strict_retry = c.params.strict_retry;
    o.sc_paths = c.params.sc_paths;
    o.sc_temperature = c.params.sc_temperature;
    o.sc_max_tokens = c.params.sc_max_tokens;
    o.sc_max_extra_paths = c.params.sc_max_extra_paths;
    o.discussion_max_tokens = c.params.discussion_max_tokens;
    o.k = c.index.k;
    return o;
}

json run_manifest(const RunConfig& c, std::string_view command) {
    return {
        {"command", command},
        {"config_hash", config_hash(c)},
        {"config", to_json(c)},
        {"seeds",
         {{"dataset", c.dataset.rng_seed}, {"index", c.index.seed}, {"two_shot", c.params.two_shot_seed}}},
        {"k", c.index.k},
        {"chat_model", c.provider.model},
        {"embedding_model", c.embedding.model},
        {"prompt_version", prompt_version()},
    };
}

}  // namespace novelbench
