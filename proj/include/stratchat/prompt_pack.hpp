#pragma once

#include <map>
#include <string>
#include <string_view>

namespace stratchat {

// Prompt roles every pack must provide. Files are named <role>.txt.
namespace prompt {
inline constexpr std::string_view kStrategyProvider = "strategy_provider";
inline constexpr std::string_view kStrategyProviderNoEmotion = "strategy_provider_no_emotion";
inline constexpr std::string_view kModeratorInitial = "moderator_initial";
inline constexpr std::string_view kModeratorStrategy = "moderator_strategy";
inline constexpr std::string_view kModeratorStrategyNoEmotion = "moderator_strategy_no_emotion";
inline constexpr std::string_view kStrategyExtractor = "strategy_extractor";
inline constexpr std::string_view kAnnotator = "annotator";
inline constexpr std::string_view kJudge = "judge";
inline constexpr std::string_view kTwin = "twin";
}  // namespace prompt

using TemplateVars = std::map<std::string, std::string, std::less<>>;

// Versioned set of prompt templates with {{name}} placeholders.
class PromptPack {
public:
    PromptPack(std::map<std::string, std::string, std::less<>> templates, std::string version);

    const std::string& version() const { return version_; }
    const std::string& raw(std::string_view role) const;

    // Substitutes every {{name}}. A placeholder with no value throws ConfigError.
    // Lines that end up blank after substitution of an empty value are dropped.
    std::string render(std::string_view role, const TemplateVars& vars) const;

private:
    std::map<std::string, std::string, std::less<>> templates_;
    std::string version_;
};

// Reads <dir>/*.txt and <dir>/VERSION. Throws ConfigError if a role is missing.
PromptPack load_prompt_pack(const std::string& dir);
const PromptPack& default_prompt_pack();

std::string render_template(std::string_view text, const TemplateVars& vars);

}  // namespace stratchat
