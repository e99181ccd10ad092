#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "novelbench/common.hpp"

namespace novelbench {

/// Version tag of the bundled prompt set (recorded in run manifests).
std::string_view prompt_version();

/// Bundled prompt text by asset name, e.g. "zero_shot.system".
std::optional<std::string_view> find_prompt_asset(std::string_view name);
std::vector<std::string_view> prompt_asset_names();

/// Throws ConfigError if the asset does not exist.
std::string_view prompt_asset(std::string_view name);

/// Text with `{name}` placeholders (lower-case letters, digits, underscore).
/// Any other brace is literal. Substituted values are never re-scanned, so
/// abstracts containing braces are safe.
class PromptTemplate {
  public:
    explicit PromptTemplate(std::string_view text);

    /// Every placeholder must have a value; throws ConfigError naming the
    /// first one that does not.
    [[nodiscard]] std::string render(const std::map<std::string, std::string>& values) const;
    [[nodiscard]] std::vector<std::string> placeholders() const;

  private:
    struct Segment {
        bool placeholder = false;
        std::string text;  // literal text or placeholder name
    };
    std::vector<Segment> segments_;
};

}  // namespace novelbench
