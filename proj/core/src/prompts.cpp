#include "novelbench/prompts.hpp"

#include <algorithm>

namespace novelbench {

namespace {

bool is_name_char(char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_'; }

}  // namespace

std::string_view prompt_asset(std::string_view name) {
    auto text = find_prompt_asset(name);
    if (!text) throw ConfigError("unknown prompt asset: " + std::string(name));
    return *text;
}

PromptTemplate::PromptTemplate(std::string_view text) {
    std::string literal;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] == '{') {
            std::size_t j = i + 1;
            while (j < text.size() && is_name_char(text[j])) ++j;
            if (j < text.size() && text[j] == '}' && j > i + 1) {
                if (!literal.empty()) segments_.push_back({false, std::move(literal)});
                literal.clear();
                segments_.push_back({true, std::string(text.substr(i + 1, j - i - 1))});
                i = j + 1;
                continue;
            }
        }
        literal.push_back(text[i]);
        ++i;
    }
    if (!literal.empty()) segments_.push_back({false, std::move(literal)});
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
    std::string out;
    for (const auto& seg : segments_) {
        if (!seg.placeholder) {
            out += seg.text;
            continue;
        }
        auto it = values.find(seg.text);
        if (it == values.end()) throw ConfigError("unreplaced prompt placeholder {" + seg.text + "}");
        out += it->second;
    }
    return out;
}

std::vector<std::string> PromptTemplate::placeholders() const {
    std::vector<std::string> names;
    for (const auto& seg : segments_) {
        if (seg.placeholder && std::find(names.begin(), names.end(), seg.text) == names.end()) {
            names.push_back(seg.text);
        }
    }
    return names;
}

}  // namespace novelbench
