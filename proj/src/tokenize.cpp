#include "alignretrieve/tokenize.hpp"

namespace alignretrieve {
namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_lower(char c) { return c >= 'a' && c <= 'z'; }
bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_alnum(char c) { return is_digit(c) || is_lower(c) || is_upper(c); }

}  // namespace

std::vector<TokenSpan> token_spans(const std::string& text) {
    std::vector<TokenSpan> spans;
    const std::size_t n = text.size();
    std::size_t i = 0;
    while (i < n) {
        if (!is_alnum(text[i])) {
            ++i;
            continue;
        }
        std::size_t run_end = i;
        while (run_end < n && is_alnum(text[run_end])) {
            ++run_end;
        }
        // Camel boundaries inside the run: aB / 2B, and the last capital of
        // an acronym followed by a lowercase letter (HTTPServer -> HTTP Server).
        std::size_t start = i;
        for (std::size_t j = i + 1; j < run_end; ++j) {
            const char prev = text[j - 1];
            const char cur = text[j];
            bool boundary = false;
            if (is_upper(cur) && (is_lower(prev) || is_digit(prev))) {
                boundary = true;
            } else if (is_upper(prev) && is_upper(cur) && j + 1 < run_end && is_lower(text[j + 1])) {
                boundary = true;
            }
            if (boundary) {
                spans.push_back({start, j});
                start = j;
            }
        }
        spans.push_back({start, run_end});
        i = run_end;
    }
    return spans;
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    for (const TokenSpan& span : token_spans(text)) {
        std::string token = text.substr(span.begin, span.end - span.begin);
        for (char& c : token) {
            if (is_upper(c)) {
                c = static_cast<char>(c - 'A' + 'a');
            }
        }
        tokens.push_back(std::move(token));
    }
    return tokens;
}

std::size_t estimate_tokens(const std::string& text) {
    return (text.size() + 3) / 4;
}

bool is_blank(const std::string& line) {
    for (char c : line) {
        if (c != ' ' && c != '\t' && c != '\r' && c != '\f' && c != '\v') {
            return false;
        }
    }
    return true;
}

}  // namespace alignretrieve
