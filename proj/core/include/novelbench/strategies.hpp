#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "novelbench/corpus.hpp"
#include "novelbench/embed_index.hpp"
#include "novelbench/llm_gateway.hpp"

namespace novelbench {

enum class StrategyId : std::uint8_t {
    ZeroShot,
    TwoShot,
    CoT,
    SelfReflection,
    SelfConsistency,
    LlmDiscussion,
    Pointwise,
    RagNovelty,
};

inline constexpr std::array<StrategyId, 8> kAllStrategies = {
    StrategyId::ZeroShot,        StrategyId::TwoShot,       StrategyId::CoT,       StrategyId::SelfReflection,
    StrategyId::SelfConsistency, StrategyId::LlmDiscussion, StrategyId::Pointwise, StrategyId::RagNovelty,
};

std::string_view to_string(StrategyId id);
std::optional<StrategyId> parse_strategy(std::string_view name);

/// AscYear presents the older paper first; DescYear the newer paper first.
enum class Order : std::uint8_t { AscYear, DescYear };

std::string_view to_string(Order order);
std::optional<Order> parse_order(std::string_view name);

/// Prompt slot chosen by the judge. First is "Paper 1"/"Paper X".
enum class Winner : std::uint8_t { First, Second, Unparsed };

std::string_view to_string(Winner winner);

/// Paper shown in `slot` (First or Second) under `order`.
const PaperRecord& paper_in_slot(const PairSample& pair, Order order, Winner slot);

struct MetadataOptions {
    bool tldr = false;
    bool authors = false;
    bool affiliation = false;

    /// "plain", or "+"-joined option names ("tldr+author").
    [[nodiscard]] std::string label() const;
    static MetadataOptions parse(std::string_view label);

    friend bool operator==(const MetadataOptions&, const MetadataOptions&) = default;
};

class MetadataMissingError : public DataError {
  public:
    using DataError::DataError;
};

struct DecodingParams {
    std::optional<double> temperature;
    std::optional<int> max_tokens;
};

struct PromptBundle {
    std::string system_text;
    std::string user_text;
    DecodingParams params;
    StrategyId strategy = StrategyId::ZeroShot;
    Order order = Order::AscYear;
};

/// Retrieval statistics for the two presented slots (x = first, y = second).
struct RagContext {
    std::optional<double> avg_cosine_x;
    std::optional<double> avg_cosine_y;
    std::optional<Date> avg_date_x;
    std::optional<Date> avg_date_y;
    int k_used = 0;
    Date cutoff;
    std::vector<RetrievalHit> hits_x;
    std::vector<RetrievalHit> hits_y;

    [[nodiscard]] bool missing_context() const { return !avg_date_x || !avg_date_y; }
};

/// Text substituted for statistics when a retrieval returned nothing.
inline constexpr std::string_view kNoRetrievedContext = "no retrieved context";

struct TranscriptEntry {
    int round = 1;
    std::string role;
    std::string response;
};

struct Verdict {
    Winner winner = Winner::Unparsed;
    std::optional<std::string> winner_paper_id;
    std::optional<int> score_x;  // first slot
    std::optional<int> score_y;  // second slot
    std::string raw_response;
    int provider_calls = 0;
    std::vector<TranscriptEntry> transcript;
    std::optional<RagContext> rag;
    bool rag_context_missing = false;
};

nlohmann::json to_json(const Verdict& verdict);
Verdict verdict_from_json(const nlohmann::json& j);

/// Worked example for Two-Shot prompting.
struct Exemplar {
    PairSample pair;
    Order order = Order::AscYear;
};

/// Two exemplars from the same field but a different start year, chosen
/// deterministically from `pool` for the query's (field, start year). The first
/// is shown in AscYear order and the second in DescYear, so the two example
/// answers differ. Throws DataError if fewer than two candidates exist.
std::vector<Exemplar> select_two_shot_exemplars(std::span<const PairSample> pool, const PairSample& query,
                                                std::uint64_t seed);

struct RenderInputs {
    MetadataOptions metadata;
    const RagContext* rag = nullptr;             // required iff RagNovelty
    std::span<const Exemplar> exemplars;         // required for TwoShot
};

/// First-call prompt for a strategy. LlmDiscussion renders the first reviewer's
/// round-one prompt and Pointwise the prompt for the first slot's paper.
PromptBundle render_prompt(StrategyId strategy, const PairSample& pair, Order order, const RenderInputs& inputs);

inline constexpr std::array<std::string_view, 3> kDiscussionReviewers = {
    "professor", "PhD student", "editor of a prestigious journal"};
inline constexpr std::string_view kDiscussionChair = "chair of the conference";

/// Round 1: reviewer alone. Round 2: own round-1 answer plus the other
/// reviewers' round-1 answers. Round 3 (chair): all round-2 answers.
PromptBundle render_discussion_prompt(std::string_view role, int round, const PairSample& pair, Order order,
                                      const MetadataOptions& metadata, const std::string& previous_response,
                                      std::span<const std::pair<std::string, std::string>> other_responses);

PromptBundle render_pointwise_prompt(const PairSample& pair, Order order, Winner slot,
                                     const MetadataOptions& metadata);

/// Slot named by a free-form response, or Unparsed when absent, ambiguous or
/// contradictory.
Winner parse_winner_slot(std::string_view raw);

/// Maps the parsed slot to the concrete paper under `order`.
Verdict parse_verdict(std::string_view raw, Order order, const PairSample& pair);

/// Novelty score in [1, 10] from responses like "8", "8/10", "Score: 8".
std::optional<int> parse_score(std::string_view raw);

/// Per-slot scores from a comparative answer ("Paper X Score: 7/10").
std::pair<std::optional<int>, std::optional<int>> parse_slot_scores(std::string_view raw);

// ---------------------------------------------------------------------------
// Judging
// ---------------------------------------------------------------------------

struct JudgeOptions {
    MetadataOptions metadata;
    std::string model_id;  // empty: gateway default
    bool strict_retry = true;

    // Self-consistency
    int sc_paths = 10;
    double sc_temperature = 0.7;
    int sc_max_tokens = 200;
    int sc_max_extra_paths = 3;

    // LLM discussion
    int discussion_max_tokens = 200;

    // Two-shot
    std::vector<Exemplar> exemplars;

    // RAG-Novelty
    const Index* index = nullptr;
    Embedder* embedder = nullptr;
    int k = 10;
};

Verdict judge_single(StrategyId strategy, const PairSample& pair, Order order, Gateway& gateway,
                     const JudgeOptions& options);
Verdict judge_self_consistency(const PairSample& pair, Order order, Gateway& gateway, const JudgeOptions& options);
Verdict judge_llm_discussion(const PairSample& pair, Order order, Gateway& gateway, const JudgeOptions& options);
Verdict judge_pointwise(const PairSample& pair, Order order, Gateway& gateway, const JudgeOptions& options);

/// Retrieves for both papers with cutoff = pair_cutoff(x, y); slot-mapped.
RagContext build_rag_context(const PairSample& pair, Order order, const Index& index, Embedder& embedder, int k);

Verdict judge_rag_novelty(const PairSample& pair, Order order, Gateway& gateway, const JudgeOptions& options);

/// Dispatches to the strategy's judge.
Verdict judge(StrategyId strategy, const PairSample& pair, Order order, Gateway& gateway, const JudgeOptions& options);

}  // namespace novelbench
