#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace alignretrieve {

// Lowercased word tokens: alphanumeric runs, split further at camelCase
// boundaries (snake_case falls out of the non-alphanumeric split).
// ASCII-only classification, so results are identical on every platform.
std::vector<std::string> tokenize(const std::string& text);

struct TokenSpan {
    std::size_t begin = 0;  // byte offset, inclusive
    std::size_t end = 0;    // byte offset, exclusive
};

// Byte spans of the tokens tokenize() would produce, in text order.
// token_spans(t).size() == tokenize(t).size().
std::vector<TokenSpan> token_spans(const std::string& text);

// Prompt-size estimate used for token budgets: ~4 bytes per model token.
std::size_t estimate_tokens(const std::string& text);

// True when every character is ASCII whitespace (or the string is empty).
bool is_blank(const std::string& line);

}  // namespace alignretrieve
