#include "stratchat/prompt_pack.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "embedded.hpp"
#include "stratchat/errors.hpp"

namespace stratchat {

namespace {

constexpr std::string_view kRequired[] = {
    prompt::kStrategyProvider,  prompt::kStrategyProviderNoEmotion, prompt::kModeratorInitial,
    prompt::kModeratorStrategy, prompt::kModeratorStrategyNoEmotion, prompt::kStrategyExtractor,
    prompt::kAnnotator,         prompt::kJudge,                     prompt::kTwin};

std::string trim(std::string s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

PromptPack::PromptPack(std::map<std::string, std::string, std::less<>> templates, std::string version)
    : templates_(std::move(templates)), version_(std::move(version)) {
    for (auto role : kRequired)
        if (!templates_.count(role))
            throw ConfigError("prompt pack is missing role '" + std::string(role) + "'");
}

const std::string& PromptPack::raw(std::string_view role) const {
    auto it = templates_.find(role);
    if (it == templates_.end()) throw ConfigError("unknown prompt role '" + std::string(role) + "'");
    return it->second;
}

std::string PromptPack::render(std::string_view role, const TemplateVars& vars) const {
    return render_template(raw(role), vars);
}

std::string render_template(std::string_view text, const TemplateVars& vars) {
    std::string out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto eol = text.find('\n', pos);
        bool last = eol == std::string_view::npos;
        std::string_view line = text.substr(pos, last ? std::string_view::npos : eol - pos);

        std::string rendered;
        bool substituted = false;
        std::size_t i = 0;
        while (i < line.size()) {
            auto open = line.find("{{", i);
            if (open == std::string_view::npos) {
                rendered.append(line.substr(i));
                break;
            }
            auto close = line.find("}}", open + 2);
            if (close == std::string_view::npos)
                throw ConfigError("unterminated placeholder in template");
            rendered.append(line.substr(i, open - i));
            auto name = line.substr(open + 2, close - open - 2);
            auto it = vars.find(name);
            if (it == vars.end())
                throw ConfigError("no value for placeholder '" + std::string(name) + "'");
            rendered.append(it->second);
            substituted = true;
            i = close + 2;
        }
        bool drop = substituted && trim(rendered).empty();
        if (!drop) {
            out.append(rendered);
            if (!last) out.push_back('\n');
        }
        if (last) break;
        pos = eol + 1;
    }
    return out;
}

PromptPack load_prompt_pack(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw ConfigError("prompt pack directory '" + dir + "' not found");
    std::map<std::string, std::string, std::less<>> templates;
    std::string version = "unversioned";
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        auto name = entry.path().filename().string();
        if (name == "VERSION")
            version = trim(ss.str());
        else if (entry.path().extension() == ".txt")
            templates[entry.path().stem().string()] = ss.str();
    }
    return PromptPack(std::move(templates), std::move(version));
}

const PromptPack& default_prompt_pack() {
    static const PromptPack pack = [] {
        std::map<std::string, std::string, std::less<>> templates;
        std::string version = "unversioned";
        for (std::size_t i = 0; i < embedded::prompt_file_count; ++i) {
            const auto& f = embedded::prompt_files[i];
            if (f.name == "VERSION")
                version = trim(std::string(f.text));
            else
                templates[std::string(f.name)] = std::string(f.text);
        }
        return PromptPack(std::move(templates), std::move(version));
    }();
    return pack;
}

}  // namespace stratchat
