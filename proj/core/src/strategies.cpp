#include "novelbench/strategies.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>
#include <regex>
#include <set>

#include "novelbench/prompts.hpp"

namespace novelbench {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<StrategyId, std::string_view>, 8> kStrategyNames = {{
    {StrategyId::ZeroShot, "zero_shot"},
    {StrategyId::TwoShot, "two_shot"},
    {StrategyId::CoT, "cot"},
    {StrategyId::SelfReflection, "self_reflection"},
    {StrategyId::SelfConsistency, "self_consistency"},
    {StrategyId::LlmDiscussion, "llm_discussion"},
    {StrategyId::Pointwise, "pointwise"},
    {StrategyId::RagNovelty, "rag_novelty"},
}};

enum class Labels { Numeric, Lettered };

Labels labels_for(StrategyId id) {
    switch (id) {
        case StrategyId::ZeroShot:
        case StrategyId::TwoShot:
        case StrategyId::CoT:
        case StrategyId::Pointwise: return Labels::Numeric;
        default: return Labels::Lettered;
    }
}

std::string slot_label(Labels labels, Winner slot) {
    if (labels == Labels::Numeric) return slot == Winner::First ? "1" : "2";
    return slot == Winner::First ? "X" : "Y";
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string rtrim(std::string s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    return s;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

// Metadata lines for one paper, each ending in '\n'. `prefix` is e.g. "Paper X ".
std::string metadata_lines(const PairSample& pair, const PaperRecord& paper, const MetadataOptions& opts,
                           const std::string& prefix) {
    auto missing = [&](const char* what) {
        return MetadataMissingError("pair " + pair_key(pair) + ": paper " + paper.id + " has no " + what);
    };
    std::string out;
    if (opts.tldr) {
        if (!paper.tldr || paper.tldr->empty()) throw missing("tldr");
        out += prefix + "TLDR: " + *paper.tldr + "\n";
    }
    if (opts.authors) {
        if (paper.authors.empty()) throw missing("authors");
        out += prefix + "Authors: " + join(paper.authors, ", ") + "\n";
    }
    if (opts.affiliation) {
        if (!paper.affiliation || paper.affiliation->empty()) throw missing("affiliation");
        out += prefix + "Affiliation: " + *paper.affiliation + "\n";
    }
    return out;
}

std::string pair_block(const PairSample& pair, Order order, Labels labels, const MetadataOptions& opts) {
    const auto& first = paper_in_slot(pair, order, Winner::First);
    const auto& second = paper_in_slot(pair, order, Winner::Second);
    const bool numeric = labels == Labels::Numeric;
    const std::string a = numeric ? "paper_1" : "paper_x";
    const std::string b = numeric ? "paper_2" : "paper_y";
    const std::string la = "Paper " + slot_label(labels, Winner::First) + " ";
    const std::string lb = "Paper " + slot_label(labels, Winner::Second) + " ";
    const PromptTemplate tpl(prompt_asset(numeric ? "pair_numeric.user" : "pair_xy.user"));
    return tpl.render({
        {a + "_title", first.title},
        {a + "_abstract", first.abstract},
        {a + "_metadata", metadata_lines(pair, first, opts, la)},
        {b + "_title", second.title},
        {b + "_abstract", second.abstract},
        {b + "_metadata", metadata_lines(pair, second, opts, lb)},
    });
}

std::string system_asset(StrategyId id) {
    switch (id) {
        case StrategyId::ZeroShot:
        case StrategyId::TwoShot: return "zero_shot.system";
        case StrategyId::CoT: return "cot.system";
        case StrategyId::SelfReflection: return "self_reflection.system";
        case StrategyId::SelfConsistency: return "self_consistency.system";
        case StrategyId::LlmDiscussion: return "discussion.system";
        case StrategyId::Pointwise: return "pointwise.system";
        case StrategyId::RagNovelty: return "rag_novelty.system";
    }
    return "zero_shot.system";
}

DecodingParams default_params(StrategyId id) {
    DecodingParams p;
    if (id == StrategyId::SelfConsistency) {
        p.temperature = 0.7;
        p.max_tokens = 200;
    } else if (id == StrategyId::LlmDiscussion) {
        p.max_tokens = 200;
    }
    return p;
}

std::string format_cosine(std::optional<double> v) {
    if (!v) return std::string(kNoRetrievedContext);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", *v);
    return buf;
}

std::string format_date(std::optional<Date> d) { return d ? d->iso() : std::string(kNoRetrievedContext); }

std::string answer_for(const Exemplar& ex) {
    return paper_in_slot(ex.pair, ex.order, Winner::First).id == ex.pair.label ? "1" : "2";
}

// --- response parsing -------------------------------------------------------

const std::regex& strong_patterns(std::size_t i) {
    static const std::array<std::regex, 3> patterns = {
        std::regex(R"(more\s+novel(?:\s+and\s+impactful)?\s+paper\s+is\s*:?\s*[\*\["'`(]*\s*(?:paper\s*)?([12xy])(?![a-z0-9]))",
                   std::regex::icase),
        std::regex(R"(answer\s*:\s*[\*\["'`(]*\s*(?:paper\s*)?([12xy])(?![a-z0-9]))", std::regex::icase),
        std::regex(
            R"(paper\s*([12xy])(?![a-z0-9])[\*"'`)\]]*\s+(?:is|exhibits|demonstrates|appears)\s+(?:to\s+be\s+)?(?:the\s+)?(?:more|most)\s+novel)",
            std::regex::icase),
    };
    return patterns[i];
}

std::optional<Winner> slot_from_token(std::string_view token) {
    const auto t = lower(token);
    if (t == "1" || t == "x") return Winner::First;
    if (t == "2" || t == "y") return Winner::Second;
    return std::nullopt;
}

std::string strip_decoration(std::string_view raw) {
    auto is_deco = [](char c) {
        return std::isspace(static_cast<unsigned char>(c)) || c == '*' || c == '"' || c == '\'' || c == '`' ||
               c == '.' || c == '[' || c == ']' || c == '(' || c == ')' || c == '#' || c == ':' || c == '!';
    };
    std::size_t b = 0, e = raw.size();
    while (b < e && is_deco(raw[b])) ++b;
    while (e > b && is_deco(raw[e - 1])) --e;
    return std::string(raw.substr(b, e - b));
}

int score_in_range(const std::string& digits) {
    const int v = std::stoi(digits);
    return (v >= 1 && v <= 10) ? v : 0;
}

std::optional<int> first_score(const std::string& text, const std::regex& re) {
    for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
        if (int v = score_in_range((*it)[1].str())) return v;
    }
    return std::nullopt;
}

// --- judging helpers ---------------------------------------------------------

std::string request_tag(const PairSample& pair, StrategyId id, Order order) {
    return pair_key(pair) + "|" + std::string(to_string(id)) + "|" + std::string(to_string(order));
}

ChatRequest to_request(const PromptBundle& bundle, const JudgeOptions& options, std::string tag) {
    ChatRequest req;
    req.model_id = options.model_id;
    req.messages = {{Role::System, bundle.system_text}, {Role::User, bundle.user_text}};
    req.temperature = bundle.params.temperature;
    req.max_tokens = bundle.params.max_tokens;
    req.request_tag = std::move(tag);
    return req;
}

void resolve(Verdict& v, Winner slot, Order order, const PairSample& pair) {
    v.winner = slot;
    if (slot == Winner::Unparsed) {
        v.winner_paper_id.reset();
    } else {
        v.winner_paper_id = paper_in_slot(pair, order, slot).id;
    }
}

std::string strict_retry_asset(StrategyId id) {
    return labels_for(id) == Labels::Numeric ? "strict_retry_numeric.user" : "strict_retry_xy.user";
}

// One call plus, when unparsed, one strict-format retry in the same conversation.
Verdict judge_once_with_retry(StrategyId id, const PromptBundle& bundle, const PairSample& pair, Order order,
                              Gateway& gateway, const JudgeOptions& options) {
    Verdict v;
    auto req = to_request(bundle, options, request_tag(pair, id, order));
    auto first = gateway.chat(req);
    ++v.provider_calls;
    v.transcript.push_back({1, "judge", first.text});
    v.raw_response = first.text;
    Winner slot = parse_winner_slot(first.text);

    if (slot == Winner::Unparsed && options.strict_retry) {
        req.messages.push_back({Role::Assistant, first.text});
        req.messages.push_back({Role::User, std::string(prompt_asset(strict_retry_asset(id)))});
        auto second = gateway.chat(req);
        ++v.provider_calls;
        v.transcript.push_back({2, "judge-retry", second.text});
        v.raw_response = second.text;
        slot = parse_winner_slot(second.text);
    }
    resolve(v, slot, order, pair);
    auto [sx, sy] = parse_slot_scores(v.transcript.front().response);
    v.score_x = sx;
    v.score_y = sy;
    return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// Names
// ---------------------------------------------------------------------------

std::string_view to_string(StrategyId id) {
    for (const auto& [k, name] : kStrategyNames) {
        if (k == id) return name;
    }
    return "unknown";
}

std::optional<StrategyId> parse_strategy(std::string_view name) {
    for (const auto& [k, n] : kStrategyNames) {
        if (n == name) return k;
    }
    return std::nullopt;
}

std::string_view to_string(Order order) { return order == Order::AscYear ? "asc" : "desc"; }

std::optional<Order> parse_order(std::string_view name) {
    if (name == "asc") return Order::AscYear;
    if (name == "desc") return Order::DescYear;
    return std::nullopt;
}

std::string_view to_string(Winner winner) {
    switch (winner) {
        case Winner::First: return "first";
        case Winner::Second: return "second";
        case Winner::Unparsed: return "unparsed";
    }
    return "unparsed";
}

const PaperRecord& paper_in_slot(const PairSample& pair, Order order, Winner slot) {
    if (slot == Winner::Unparsed) throw std::invalid_argument("paper_in_slot: Unparsed is not a slot");
    const bool older_first = order == Order::AscYear;
    const bool first = slot == Winner::First;
    return (first == older_first) ? pair.paper_y : pair.paper_x;
}

std::string MetadataOptions::label() const {
    std::vector<std::string> parts;
    if (tldr) parts.emplace_back("tldr");
    if (authors) parts.emplace_back("author");
    if (affiliation) parts.emplace_back("affiliation");
    return parts.empty() ? "plain" : join(parts, "+");
}

MetadataOptions MetadataOptions::parse(std::string_view label) {
    MetadataOptions opts;
    if (label.empty() || label == "plain") return opts;
    std::size_t start = 0;
    while (start <= label.size()) {
        auto end = label.find('+', start);
        if (end == std::string_view::npos) end = label.size();
        const auto part = label.substr(start, end - start);
        if (part == "tldr") {
            opts.tldr = true;
        } else if (part == "author" || part == "authors") {
            opts.authors = true;
        } else if (part == "affiliation") {
            opts.affiliation = true;
        } else {
            throw ConfigError("unknown metadata option '" + std::string(part) + "'");
        }
        start = end + 1;
    }
    return opts;
}

// ---------------------------------------------------------------------------
// Verdict serialization
// ---------------------------------------------------------------------------

json to_json(const Verdict& v) {
    json j = {
        {"winner", to_string(v.winner)},
        {"winner_paper_id", v.winner_paper_id ? json(*v.winner_paper_id) : json(nullptr)},
        {"score_x", v.score_x ? json(*v.score_x) : json(nullptr)},
        {"score_y", v.score_y ? json(*v.score_y) : json(nullptr)},
        {"raw_response", v.raw_response},
        {"provider_calls", v.provider_calls},
        {"rag_context_missing", v.rag_context_missing},
    };
    json transcript = json::array();
    for (const auto& t : v.transcript) {
        transcript.push_back({{"round", t.round}, {"role", t.role}, {"response", t.response}});
    }
    j["transcript"] = std::move(transcript);
    if (v.rag) {
        auto hits = [](const std::vector<RetrievalHit>& hs) {
            json arr = json::array();
            for (const auto& h : hs) arr.push_back({h.paper_id, h.cosine_score, h.published_date.iso()});
            return arr;
        };
        j["rag"] = {
            {"avg_cosine_x", v.rag->avg_cosine_x ? json(*v.rag->avg_cosine_x) : json(nullptr)},
            {"avg_cosine_y", v.rag->avg_cosine_y ? json(*v.rag->avg_cosine_y) : json(nullptr)},
            {"avg_date_x", v.rag->avg_date_x ? json(v.rag->avg_date_x->iso()) : json(nullptr)},
            {"avg_date_y", v.rag->avg_date_y ? json(v.rag->avg_date_y->iso()) : json(nullptr)},
            {"k_used", v.rag->k_used},
            {"cutoff", v.rag->cutoff.iso()},
            {"hits_x", hits(v.rag->hits_x)},
            {"hits_y", hits(v.rag->hits_y)},
        };
    }
    return j;
}

Verdict verdict_from_json(const json& j) {
    Verdict v;
    const auto w = j.at("winner").get<std::string>();
    v.winner = w == "first" ? Winner::First : w == "second" ? Winner::Second : Winner::Unparsed;
    if (j.contains("winner_paper_id") && j["winner_paper_id"].is_string()) {
        v.winner_paper_id = j["winner_paper_id"].get<std::string>();
    }
    if (j.contains("score_x") && j["score_x"].is_number_integer()) v.score_x = j["score_x"].get<int>();
    if (j.contains("score_y") && j["score_y"].is_number_integer()) v.score_y = j["score_y"].get<int>();
    v.raw_response = j.value("raw_response", "");
    v.provider_calls = j.value("provider_calls", 0);
    v.rag_context_missing = j.value("rag_context_missing", false);
    if (auto it = j.find("transcript"); it != j.end() && it->is_array()) {
        for (const auto& t : *it) {
            v.transcript.push_back({t.value("round", 1), t.value("role", ""), t.value("response", "")});
        }
    }
    if (auto it = j.find("rag"); it != j.end() && it->is_object()) {
        RagContext rag;
        const auto& r = *it;
        if (r.contains("avg_cosine_x") && r["avg_cosine_x"].is_number()) rag.avg_cosine_x = r["avg_cosine_x"].get<double>();
        if (r.contains("avg_cosine_y") && r["avg_cosine_y"].is_number()) rag.avg_cosine_y = r["avg_cosine_y"].get<double>();
        if (r.contains("avg_date_x") && r["avg_date_x"].is_string()) rag.avg_date_x = Date::parse(r["avg_date_x"].get<std::string>());
        if (r.contains("avg_date_y") && r["avg_date_y"].is_string()) rag.avg_date_y = Date::parse(r["avg_date_y"].get<std::string>());
        rag.k_used = r.value("k_used", 0);
        if (auto d = Date::parse(r.value("cutoff", ""))) rag.cutoff = *d;
        auto hits = [](const json& arr, std::vector<RetrievalHit>& out) {
            if (!arr.is_array()) return;
            for (const auto& h : arr) {
                out.push_back({h.at(0).get<std::string>(), h.at(1).get<double>(),
                               Date::parse(h.at(2).get<std::string>()).value_or(Date{})});
            }
        };
        if (r.contains("hits_x")) hits(r["hits_x"], rag.hits_x);
        if (r.contains("hits_y")) hits(r["hits_y"], rag.hits_y);
        v.rag = std::move(rag);
    }
    return v;
}

// ---------------------------------------------------------------------------
// Two-shot exemplars
// ---------------------------------------------------------------------------

std::vector<Exemplar> select_two_shot_exemplars(std::span<const PairSample> pool, const PairSample& query,
                                                std::uint64_t seed) {
    std::vector<const PairSample*> candidates;
    for (const auto& p : pool) {
        if (p.field == query.field && p.start_year != query.start_year) candidates.push_back(&p);
    }
    if (candidates.size() < 2) {
        throw DataError("two-shot: need two held-out pairs for field " + std::string(to_string(query.field)) +
                        " outside start year " + std::to_string(query.start_year));
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const PairSample* a, const PairSample* b) { return pair_key(*a) < pair_key(*b); });
    SeededRng rng(mix_seed(seed ^ mix_seed(static_cast<std::uint64_t>(query.field) * 10007u +
                                           static_cast<std::uint64_t>(query.start_year))));
    const auto i = static_cast<std::size_t>(rng.below(candidates.size()));
    auto j = static_cast<std::size_t>(rng.below(candidates.size() - 1));
    if (j >= i) ++j;
    return {Exemplar{*candidates[i], Order::AscYear}, Exemplar{*candidates[j], Order::DescYear}};
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

PromptBundle render_prompt(StrategyId strategy, const PairSample& pair, Order order, const RenderInputs& inputs) {
    if ((strategy == StrategyId::RagNovelty) != (inputs.rag != nullptr)) {
        throw ConfigError("retrieval context must be supplied exactly for rag_novelty");
    }
    if (strategy == StrategyId::LlmDiscussion) {
        return render_discussion_prompt(kDiscussionReviewers[0], 1, pair, order, inputs.metadata, "", {});
    }
    if (strategy == StrategyId::Pointwise) {
        return render_pointwise_prompt(pair, order, Winner::First, inputs.metadata);
    }

    PromptBundle bundle;
    bundle.strategy = strategy;
    bundle.order = order;
    bundle.params = default_params(strategy);
    bundle.system_text = std::string(prompt_asset(system_asset(strategy)));

    const auto labels = labels_for(strategy);
    const auto block = pair_block(pair, order, labels, inputs.metadata);
    if (strategy == StrategyId::TwoShot) {
        if (inputs.exemplars.size() != 2) throw ConfigError("two_shot requires exactly two exemplars");
        const PromptTemplate tpl(prompt_asset("two_shot.user"));
        bundle.user_text = tpl.render({
            {"example_1_block", pair_block(inputs.exemplars[0].pair, inputs.exemplars[0].order, labels, inputs.metadata)},
            {"example_1_answer", answer_for(inputs.exemplars[0])},
            {"example_2_block", pair_block(inputs.exemplars[1].pair, inputs.exemplars[1].order, labels, inputs.metadata)},
            {"example_2_answer", answer_for(inputs.exemplars[1])},
            {"pair_block", block},
        });
    } else if (strategy == StrategyId::RagNovelty) {
        const auto& rag = *inputs.rag;
        const PromptTemplate tpl(prompt_asset("rag_novelty.user"));
        bundle.user_text = tpl.render({
            {"paper_x_avg_cosine_similarity", format_cosine(rag.avg_cosine_x)},
            {"paper_x_avg_contextual_date", format_date(rag.avg_date_x)},
            {"paper_y_avg_cosine_similarity", format_cosine(rag.avg_cosine_y)},
            {"paper_y_avg_contextual_date", format_date(rag.avg_date_y)},
            {"pair_block", block},
        });
    } else {
        bundle.user_text = block;
    }
    bundle.user_text = rtrim(std::move(bundle.user_text));
    return bundle;
}

PromptBundle render_discussion_prompt(std::string_view role, int round, const PairSample& pair, Order order,
                                      const MetadataOptions& metadata, const std::string& previous_response,
                                      std::span<const std::pair<std::string, std::string>> other_responses) {
    if (round < 1 || round > 3) throw ConfigError("discussion round must be 1, 2 or 3");
    PromptBundle bundle;
    bundle.strategy = StrategyId::LlmDiscussion;
    bundle.order = order;
    bundle.params = default_params(StrategyId::LlmDiscussion);
    bundle.system_text = PromptTemplate(prompt_asset("discussion.system"))
                             .render({{"role", std::string(role)}, {"category", std::string(display_name(pair.field))}});

    const auto block = pair_block(pair, order, Labels::Lettered, metadata);
    std::string others;
    for (const auto& [who, text] : other_responses) others += "Reviewer (" + who + "): " + text + "\n\n";
    others = rtrim(std::move(others));

    if (round == 1) {
        bundle.user_text = block;
    } else if (round == 2) {
        bundle.user_text = PromptTemplate(prompt_asset("discussion_round2.user"))
                               .render({{"pair_block", block},
                                        {"previous_response", previous_response},
                                        {"other_responses", others}});
    } else {
        bundle.user_text = PromptTemplate(prompt_asset("discussion_chair.user"))
                               .render({{"pair_block", block}, {"other_responses", others}});
    }
    bundle.user_text = rtrim(std::move(bundle.user_text));
    return bundle;
}

PromptBundle render_pointwise_prompt(const PairSample& pair, Order order, Winner slot, const MetadataOptions& metadata) {
    const auto& paper = paper_in_slot(pair, order, slot);
    PromptBundle bundle;
    bundle.strategy = StrategyId::Pointwise;
    bundle.order = order;
    bundle.params = default_params(StrategyId::Pointwise);
    bundle.system_text = std::string(prompt_asset("pointwise.system"));
    bundle.user_text = rtrim(PromptTemplate(prompt_asset("pointwise.user"))
                                 .render({{"paper_title", paper.title},
                                          {"paper_abstract", paper.abstract},
                                          {"paper_metadata", metadata_lines(pair, paper, metadata, "Paper ")}}));
    return bundle;
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

Winner parse_winner_slot(std::string_view raw) {
    const std::string text(raw);

    std::set<Winner> strong;
    for (std::size_t p = 0; p < 3; ++p) {
        const auto& re = strong_patterns(p);
        for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
            if (auto s = slot_from_token((*it)[1].str())) strong.insert(*s);
        }
    }
    if (!strong.empty()) return strong.size() == 1 ? *strong.begin() : Winner::Unparsed;

    auto bare = lower(strip_decoration(text));
    if (bare.rfind("paper", 0) == 0) bare = strip_decoration(bare.substr(5));
    if (auto s = slot_from_token(bare)) return *s;

    static const std::regex mention(R"(paper\s*([12xy])(?![a-z0-9]))", std::regex::icase);
    std::set<Winner> mentioned;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), mention); it != std::sregex_iterator(); ++it) {
        if (auto s = slot_from_token((*it)[1].str())) mentioned.insert(*s);
    }
    if (mentioned.size() == 1) return *mentioned.begin();
    return Winner::Unparsed;
}

Verdict parse_verdict(std::string_view raw, Order order, const PairSample& pair) {
    Verdict v;
    v.raw_response = std::string(raw);
    resolve(v, parse_winner_slot(raw), order, pair);
    auto [sx, sy] = parse_slot_scores(raw);
    v.score_x = sx;
    v.score_y = sy;
    return v;
}

std::optional<int> parse_score(std::string_view raw) {
    const std::string text(raw);
    static const std::regex out_of_ten(R"((\d{1,2})\s*/\s*10(?!\d))");
    static const std::regex labelled(R"(score\D{0,20}?(\d{1,2})(?!\d))", std::regex::icase);
    if (auto v = first_score(text, out_of_ten)) return v;
    if (auto v = first_score(text, labelled)) return v;
    const auto bare = strip_decoration(text);
    if (!bare.empty() && bare.size() <= 2 && std::all_of(bare.begin(), bare.end(), [](unsigned char c) {
            return std::isdigit(c);
        })) {
        if (int v = score_in_range(bare)) return v;
    }
    return std::nullopt;
}

std::pair<std::optional<int>, std::optional<int>> parse_slot_scores(std::string_view raw) {
    const std::string text(raw);
    static const std::regex first_after(
        R"(paper\s*(?:x|1)(?![a-z0-9])[^\n]{0,80}?score[^\d\n]{0,15}(\d{1,2})(?!\d))", std::regex::icase);
    static const std::regex first_before(R"(score\s*(?:for|of)?\s*paper\s*(?:x|1)(?![a-z0-9])[^\d\n]{0,15}(\d{1,2})(?!\d))",
                                         std::regex::icase);
    static const std::regex second_after(
        R"(paper\s*(?:y|2)(?![a-z0-9])[^\n]{0,80}?score[^\d\n]{0,15}(\d{1,2})(?!\d))", std::regex::icase);
    static const std::regex second_before(R"(score\s*(?:for|of)?\s*paper\s*(?:y|2)(?![a-z0-9])[^\d\n]{0,15}(\d{1,2})(?!\d))",
                                          std::regex::icase);
    auto x = first_score(text, first_before);
    if (!x) x = first_score(text, first_after);
    auto y = first_score(text, second_before);
    if (!y) y = first_score(text, second_after);
    return {x, y};
}

// ---------------------------------------------------------------------------
// Judges
// ---------------------------------------------------------------------------

Verdict judge_single(StrategyId strategy, const PairSample& pair, Order order, Gateway& gateway,
                     const JudgeOptions& options) {
    switch (strategy) {
        case StrategyId::ZeroShot:
        case StrategyId::TwoShot:
        case StrategyId::CoT:
        case StrategyId::SelfReflection: break;
        default: throw ConfigError("judge_single does not handle " + std::string(to_string(strategy)));
    }
    RenderInputs inputs;
    inputs.metadata = options.metadata;
    inputs.exemplars = options.exemplars;
    const auto bundle = render_prompt(strategy, pair, order, inputs);
    return judge_once_with_retry(strategy, bundle, pair, order, gateway, options);
}

Verdict judge_self_consistency(const PairSample& pair, Order order, Gateway& gateway, const JudgeOptions& options) {
    if (options.sc_paths < 1) throw ConfigError("self-consistency needs at least one path");
    RenderInputs inputs;
    inputs.metadata = options.metadata;
    auto bundle = render_prompt(StrategyId::SelfConsistency, pair, order, inputs);
    bundle.params.temperature = options.sc_temperature;
    bundle.params.max_tokens = options.sc_max_tokens;

    Verdict v;
    int first_votes = 0;
    int second_votes = 0;
    auto draw = [&](int path) {
        auto req = to_request(bundle, options, request_tag(pair, StrategyId::SelfConsistency, order));
        req.sample_index = path;
        auto res = gateway.chat(std::move(req));
        ++v.provider_calls;
        v.transcript.push_back({1, "path-" + std::to_string(path), res.text});
        switch (parse_winner_slot(res.text)) {
            case Winner::First: ++first_votes; break;
            case Winner::Second: ++second_votes; break;
            case Winner::Unparsed: break;
        }
    };

    int path = 0;
    for (; path < options.sc_paths; ++path) draw(path);
    // A tie between real votes draws extra paths one at a time.
    for (int extra = 0; extra < options.sc_max_extra_paths && first_votes == second_votes && first_votes > 0;
         ++extra, ++path) {
        draw(path);
    }

    Winner slot = Winner::Unparsed;
    if (first_votes > second_votes) slot = Winner::First;
    if (second_votes > first_votes) slot = Winner::Second;
    resolve(v, slot, order, pair);
    v.raw_response = "votes: first=" + std::to_string(first_votes) + " second=" + std::to_string(second_votes) +
                     " unparsed=" + std::to_string(v.provider_calls - first_votes - second_votes);
    return v;
}

Verdict judge_llm_discussion(const PairSample& pair, Order order, Gateway& gateway, const JudgeOptions& options) {
    Verdict v;
    const auto tag = request_tag(pair, StrategyId::LlmDiscussion, order);
    auto call = [&](const PromptBundle& bundle, int round, std::string_view role) {
        auto req = to_request(bundle, options, tag);
        req.max_tokens = options.discussion_max_tokens;
        auto res = gateway.chat(std::move(req));
        ++v.provider_calls;
        v.transcript.push_back({round, std::string(role), res.text});
        return res.text;
    };

    const std::size_t n = kDiscussionReviewers.size();
    std::vector<std::string> round1(n), round2(n);
    for (std::size_t r = 0; r < n; ++r) {
        round1[r] = call(render_discussion_prompt(kDiscussionReviewers[r], 1, pair, order, options.metadata, "", {}), 1,
                         kDiscussionReviewers[r]);
    }
    for (std::size_t r = 0; r < n; ++r) {
        std::vector<std::pair<std::string, std::string>> others;
        for (std::size_t o = 0; o < n; ++o) {
            if (o != r) others.emplace_back(std::string(kDiscussionReviewers[o]), round1[o]);
        }
        round2[r] = call(render_discussion_prompt(kDiscussionReviewers[r], 2, pair, order, options.metadata, round1[r],
                                                  others),
                         2, kDiscussionReviewers[r]);
    }
    std::vector<std::pair<std::string, std::string>> all;
    for (std::size_t r = 0; r < n; ++r) all.emplace_back(std::string(kDiscussionReviewers[r]), round2[r]);
    const auto chair_bundle = render_discussion_prompt(kDiscussionChair, 3, pair, order, options.metadata, "", all);
    const auto chair = call(chair_bundle, 3, kDiscussionChair);
    v.raw_response = chair;

    Winner slot = parse_winner_slot(chair);
    if (slot == Winner::Unparsed && options.strict_retry) {
        auto req = to_request(chair_bundle, options, tag);
        req.max_tokens = options.discussion_max_tokens;
        req.messages.push_back({Role::Assistant, chair});
        req.messages.push_back({Role::User, std::string(prompt_asset("strict_retry_xy.user"))});
        auto res = gateway.chat(std::move(req));
        ++v.provider_calls;
        v.transcript.push_back({4, "chair-retry", res.text});
        v.raw_response = res.text;
        slot = parse_winner_slot(res.text);
    }
    resolve(v, slot, order, pair);
    return v;
}

Verdict judge_pointwise(const PairSample& pair, Order order, Gateway& gateway, const JudgeOptions& options) {
    Verdict v;
    const auto tag = request_tag(pair, StrategyId::Pointwise, order);
    auto score_slot = [&](Winner slot) -> std::optional<int> {
        const auto bundle = render_pointwise_prompt(pair, order, slot, options.metadata);
        auto req = to_request(bundle, options, tag);
        auto res = gateway.chat(req);
        ++v.provider_calls;
        const std::string role = slot == Winner::First ? "score-first" : "score-second";
        v.transcript.push_back({1, role, res.text});
        auto score = parse_score(res.text);
        if (!score && options.strict_retry) {
            req.messages.push_back({Role::Assistant, res.text});
            req.messages.push_back({Role::User, std::string(prompt_asset("strict_retry_score.user"))});
            auto retry = gateway.chat(std::move(req));
            ++v.provider_calls;
            v.transcript.push_back({2, role + "-retry", retry.text});
            score = parse_score(retry.text);
        }
        return score;
    };

    v.score_x = score_slot(Winner::First);
    v.score_y = score_slot(Winner::Second);
    v.raw_response = "scores: first=" + (v.score_x ? std::to_string(*v.score_x) : std::string("?")) +
                     " second=" + (v.score_y ? std::to_string(*v.score_y) : std::string("?"));
    Winner slot = Winner::Unparsed;
    if (v.score_x && v.score_y && *v.score_x != *v.score_y) {
        slot = *v.score_x > *v.score_y ? Winner::First : Winner::Second;
    }
    resolve(v, slot, order, pair);
    return v;
}

RagContext build_rag_context(const PairSample& pair, Order order, const Index& index, Embedder& embedder, int k) {
    if (index.field() != pair.field) {
        throw ConfigError("index field " + std::string(to_string(index.field())) + " does not match pair field " +
                          std::string(to_string(pair.field)));
    }
    if (index.model_id() != embedder.model_id()) {
        throw ConfigError("query embedder model '" + embedder.model_id() + "' differs from index model '" +
                          index.model_id() + "'");
    }
    RagContext ctx;
    ctx.k_used = k;
    ctx.cutoff = pair_cutoff(pair.paper_x, pair.paper_y);
    const auto& first = paper_in_slot(pair, order, Winner::First);
    const auto& second = paper_in_slot(pair, order, Winner::Second);
    const std::string texts[] = {first.abstract, second.abstract};
    const auto queries = embedder.embed_many(texts);
    auto rx = retrieve_topk(index, queries[0], k, ctx.cutoff);
    auto ry = retrieve_topk(index, queries[1], k, ctx.cutoff);
    ctx.avg_cosine_x = rx.avg_cosine;
    ctx.avg_date_x = rx.avg_date;
    ctx.avg_cosine_y = ry.avg_cosine;
    ctx.avg_date_y = ry.avg_date;
    ctx.hits_x = std::move(rx.hits);
    ctx.hits_y = std::move(ry.hits);
    return ctx;
}

Verdict judge_rag_novelty(const PairSample& pair, Order order, Gateway& gateway, const JudgeOptions& options) {
    if (!options.index || !options.embedder) throw ConfigError("rag_novelty requires an index and an embedder");
    auto ctx = build_rag_context(pair, order, *options.index, *options.embedder, options.k);
    RenderInputs inputs;
    inputs.metadata = options.metadata;
    inputs.rag = &ctx;
    const auto bundle = render_prompt(StrategyId::RagNovelty, pair, order, inputs);
    auto v = judge_once_with_retry(StrategyId::RagNovelty, bundle, pair, order, gateway, options);
    v.rag_context_missing = ctx.missing_context();
    v.rag = std::move(ctx);
    return v;
}

Verdict judge(StrategyId strategy, const PairSample& pair, Order order, Gateway& gateway, const JudgeOptions& options) {
    switch (strategy) {
        case StrategyId::ZeroShot:
        case StrategyId::TwoShot:
        case StrategyId::CoT:
        case StrategyId::SelfReflection: return judge_single(strategy, pair, order, gateway, options);
        case StrategyId::SelfConsistency: return judge_self_consistency(pair, order, gateway, options);
        case StrategyId::LlmDiscussion: return judge_llm_discussion(pair, order, gateway, options);
        case StrategyId::Pointwise: return judge_pointwise(pair, order, gateway, options);
        case StrategyId::RagNovelty: return judge_rag_novelty(pair, order, gateway, options);
    }
    throw ConfigError("unknown strategy");
}

}  // namespace novelbench
