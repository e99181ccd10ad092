#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "novelbench/corpus.hpp"
#include "novelbench/embed_index.hpp"
#include "novelbench/eval.hpp"
#include "novelbench/llm_gateway.hpp"
#include "novelbench/strategies.hpp"

namespace novelbench {

struct ProviderConfig {
    std::string kind = "mock";  // "http" or "mock"
    std::string base_url = "https://api.openai.com/v1";
    std::string model = "gpt-4o-mini";
    std::string api_key_env = "OPENAI_API_KEY";
    std::string mock_rule = "first";
    int requests_per_second = 0;  // 0: unlimited
    int max_retries = 3;
    int timeout_seconds = 120;
};

struct EmbeddingConfig {
    std::string kind = "mock";
    std::string base_url = "https://api.openai.com/v1";
    std::string model = "text-embedding-3-small";
    std::string api_key_env = "OPENAI_API_KEY";
    int dimension = 1536;
    int batch_size = 64;
    bool request_dimensions = false;  // send `dimensions` with each request
    int max_retries = 3;
};

struct IndexConfig {
    std::vector<Field> fields;  // empty: the dataset's fields
    int first_year = 2000;
    int last_year = 2023;
    int per_year = 500;
    int k = 10;
    std::uint64_t seed = 0;
};

struct StrategyParams {
    int sc_paths = 10;
    double sc_temperature = 0.7;
    int sc_max_tokens = 200;
    int sc_max_extra_paths = 3;
    int discussion_max_tokens = 200;
    bool strict_retry = true;
    std::uint64_t two_shot_seed = 0;
};

struct RunSettings {
    int parallelism = 1;
    double max_cell_error_rate = 0.05;
    bool affiliation_swap = true;
    AffiliationNames affiliations;
};

/// Declarative experiment description. Relative paths resolve against the
/// directory of the config file.
struct RunConfig {
    std::filesystem::path output_dir = "novelbench-out";
    std::filesystem::path corpus_path;  // arXiv snapshot (JSONL)
    std::optional<std::filesystem::path> cache_dir;  // default: <output_dir>/cache

    DatasetSpec dataset;
    IndexConfig index;
    EmbeddingConfig embedding;
    ProviderConfig provider;
    std::vector<StrategyId> strategies{StrategyId::ZeroShot};
    std::vector<MetadataOptions> metadata{MetadataOptions{}};
    StrategyParams params;
    RunSettings run;

    [[nodiscard]] std::filesystem::path effective_cache_dir() const;
    [[nodiscard]] std::filesystem::path corpus_store_path() const { return output_dir / "corpus.jsonl"; }
    [[nodiscard]] std::filesystem::path pairs_path() const { return output_dir / "pairs.jsonl"; }
    [[nodiscard]] std::filesystem::path index_dir(Field field) const;
    [[nodiscard]] std::filesystem::path ledger_path() const { return output_dir / "trials.jsonl"; }
    [[nodiscard]] std::filesystem::path reports_dir() const { return output_dir / "reports"; }
    [[nodiscard]] std::filesystem::path manifest_path() const { return output_dir / "manifest.json"; }
};

/// Unknown keys are rejected so typos do not silently fall back to defaults.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const RunConfig& config);
RunConfig load_run_config(const std::filesystem::path& path);

/// Throws ConfigError on invalid values. With `require_corpus`, the corpus
/// path must exist.
void validate(const RunConfig& config, bool require_corpus = false);

/// sha256 of the canonical JSON form.
std::string config_hash(const RunConfig& config);

std::shared_ptr<ChatProvider> make_chat_provider(const RunConfig& config);
std::unique_ptr<Gateway> make_gateway(const RunConfig& config, std::shared_ptr<ChatProvider> provider = nullptr);
std::unique_ptr<Embedder> make_embedder(const RunConfig& config);

/// Judge options derived from the strategy params and provider model.
JudgeOptions judge_options(const RunConfig& config);

/// Provenance written next to every artifact set.
nlohmann::json run_manifest(const RunConfig& config, std::string_view command);

}  // namespace novelbench
