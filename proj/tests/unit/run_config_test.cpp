#include <gtest/gtest.h>

#include <fstream>

#include "novelbench/prompts.hpp"
#include "novelbench/run_config.hpp"
#include "testkit.hpp"

using namespace novelbench;
using nlohmann::json;
using testkit::TempDir;

TEST(RunConfig, Defaults) {
    RunConfig c;
    EXPECT_EQ(c.provider.model, "gpt-4o-mini");
    EXPECT_EQ(c.provider.max_retries, 3);
    EXPECT_EQ(c.embedding.model, "text-embedding-3-small");
    EXPECT_EQ(c.index.k, 10);
    EXPECT_EQ(c.dataset.expected_pairs(), 15000u);
    EXPECT_EQ(c.effective_cache_dir(), c.output_dir / "cache");
    EXPECT_EQ(c.index_dir(Field::QBio), c.output_dir / "index" / "q-bio");
    EXPECT_NO_THROW(validate(c));
    EXPECT_THROW(validate(c, true), ConfigError);  // no corpus configured
}

TEST(RunConfig, ParsesAndResolvesRelativePaths) {
    const json j = {
        {"output_dir", "out"},
        {"corpus", "/data/snapshot.jsonl"},
        {"dataset", {{"fields", {"cs", "q-fin"}}, {"start_years", {2022}}, {"samples_per_cell", 3}, {"seed", 9}}},
        {"index", {{"k", 5}, {"per_year", 40}}},
        {"provider", {{"mock_rule", "date-aware"}, {"requests_per_second", 2}}},
        {"strategies", {"rag_novelty", "cot"}},
        {"metadata_options", {"plain", "tldr+author"}},
        {"params", {{"sc_paths", 4}}},
        {"run", {{"parallelism", 2}, {"research_affiliation", "R"}}},
    };
    const auto c = run_config_from_json(j, "/base");
    EXPECT_EQ(c.output_dir, std::filesystem::path("/base/out"));
    EXPECT_EQ(c.corpus_path, std::filesystem::path("/data/snapshot.jsonl"));
    EXPECT_EQ(c.dataset.fields, (std::vector<Field>{Field::Cs, Field::QFin}));
    EXPECT_EQ(c.dataset.samples_per_cell, 3);
    EXPECT_EQ(c.dataset.rng_seed, 9u);
    EXPECT_EQ(c.index.k, 5);
    EXPECT_EQ(c.provider.mock_rule, "date-aware");
    EXPECT_EQ(c.strategies, (std::vector<StrategyId>{StrategyId::RagNovelty, StrategyId::CoT}));
    ASSERT_EQ(c.metadata.size(), 2u);
    EXPECT_TRUE(c.metadata[1].tldr && c.metadata[1].authors && !c.metadata[1].affiliation);
    EXPECT_EQ(c.run.affiliations.research, "R");
    EXPECT_EQ(c.run.affiliations.teaching, "Williams College");
    EXPECT_EQ(judge_options(c).sc_paths, 4);
    EXPECT_EQ(judge_options(c).k, 5);
    EXPECT_EQ(judge_options(c).model_id, "gpt-4o-mini");

    const auto round = run_config_from_json(to_json(c));
    EXPECT_EQ(to_json(round), to_json(c));
    EXPECT_EQ(config_hash(round), config_hash(c));
}

TEST(RunConfig, RejectsBadInput) {
    EXPECT_THROW(run_config_from_json({{"outptu_dir", "x"}}), ConfigError);
    EXPECT_THROW(run_config_from_json({{"provider", {{"temperature", 1}}}}), ConfigError);
    EXPECT_THROW(run_config_from_json({{"strategies", {"few_shot"}}}), ConfigError);
    EXPECT_THROW(run_config_from_json({{"dataset", {{"fields", {"econ"}}}}}), ConfigError);
    EXPECT_THROW(run_config_from_json({{"index", {{"k", "ten"}}}}), ConfigError);
    EXPECT_THROW(run_config_from_json({{"strategies", {1}}}), ConfigError);
    EXPECT_THROW(run_config_from_json({{"metadata_options", {"venue"}}}), ConfigError);

    auto invalid = [](auto mutate) {
        RunConfig c;
        mutate(c);
        return [c] { validate(c); };
    };
    EXPECT_THROW(invalid([](RunConfig& c) { c.index.k = 0; })(), ConfigError);
    EXPECT_THROW(invalid([](RunConfig& c) { c.provider.kind = "grpc"; })(), ConfigError);
    EXPECT_THROW(invalid([](RunConfig& c) { c.provider.mock_rule = "coin"; })(), ConfigError);
    EXPECT_THROW(invalid([](RunConfig& c) { c.strategies.clear(); })(), ConfigError);
    EXPECT_THROW(invalid([](RunConfig& c) { c.run.max_cell_error_rate = 2.0; })(), ConfigError);
    EXPECT_THROW(invalid([](RunConfig& c) { c.dataset.samples_per_cell = 0; })(), ConfigError);
    EXPECT_THROW(invalid([](RunConfig& c) { c.index.first_year = 2030; })(), ConfigError);
}

TEST(RunConfig, LoadFromFile) {
    TempDir dir;
    std::ofstream(dir / "cfg.json") << R"({"output_dir": "artifacts", "cache_dir": "shared-cache"})";
    const auto c = load_run_config(dir / "cfg.json");
    EXPECT_EQ(c.output_dir, dir.path() / "artifacts");
    EXPECT_EQ(c.effective_cache_dir(), dir.path() / "shared-cache");
    std::ofstream(dir / "broken.json") << "{";
    EXPECT_THROW(load_run_config(dir / "broken.json"), ConfigError);
    EXPECT_THROW(load_run_config(dir / "absent.json"), ConfigError);
}

TEST(RunConfig, FactoriesAndManifest) {
    TempDir dir;
    RunConfig c;
    c.output_dir = dir.path();
    c.embedding.dimension = 32;
    auto gw = make_gateway(c);
    EXPECT_TRUE(gw->is_mock());
    EXPECT_EQ(gw->default_model(), "gpt-4o-mini");
    auto emb = make_embedder(c);
    EXPECT_TRUE(emb->is_mock());
    EXPECT_EQ(emb->embed("hello world").dimension(), 32u);

    const auto m = run_manifest(c, "run");
    EXPECT_EQ(m["command"], "run");
    EXPECT_EQ(m["config_hash"], config_hash(c));
    EXPECT_EQ(m["chat_model"], "gpt-4o-mini");
    EXPECT_EQ(m["embedding_model"], "text-embedding-3-small");
    EXPECT_EQ(m["prompt_version"], prompt_version());
    EXPECT_EQ(m["k"], 10);
    EXPECT_TRUE(m["seeds"].contains("dataset"));

    RunConfig other = c;
    other.index.k = 3;
    EXPECT_NE(config_hash(other), config_hash(c));
}
