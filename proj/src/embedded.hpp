#pragma once

#include <cstddef>
#include <string_view>

// Resources compiled in from data/ and prompts/default/ at configure time.
namespace stratchat::embedded {

struct PromptFile {
    std::string_view name;
    std::string_view text;
};

extern const std::string_view pool_document;
extern const PromptFile prompt_files[];
extern const std::size_t prompt_file_count;

}  // namespace stratchat::embedded
