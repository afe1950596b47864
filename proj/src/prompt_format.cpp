#include "alignretrieve/prompt_format.hpp"

#include "alignretrieve/tokenize.hpp"

namespace alignretrieve {

namespace {
const char* kHeaderPrefix = "# context: ";
const char* kLinePrefix = "# ";
}  // namespace

std::string frame_snippet(const Snippet& snippet) {
    std::string out = kHeaderPrefix + snippet.origin_path + "\n";
    for (const std::string& line : split_lines(snippet.text)) {
        out += kLinePrefix;
        out += line;
        out.push_back('\n');
    }
    return out;
}

std::vector<std::string> context_snippet_lines(const std::string& prompt) {
    std::vector<std::string> collected;
    bool in_block = false;
    for (const std::string& line : split_lines(prompt)) {
        if (line.rfind(kHeaderPrefix, 0) == 0) {
            in_block = true;
            continue;
        }
        if (in_block && line.rfind(kLinePrefix, 0) == 0) {
            collected.push_back(line.substr(2));
        } else {
            in_block = false;
        }
    }
    return collected;
}

std::string render_snippet_context(const Snippet& snippet, const std::string& unfinished_code) {
    return frame_snippet(snippet) + "\n" + unfinished_code;
}

std::string tail_lines(const std::string& text, std::size_t count) {
    const std::vector<std::string> lines = split_lines(text);
    const std::size_t begin = lines.size() > count ? lines.size() - count : 0;
    std::string out;
    for (std::size_t i = begin; i < lines.size(); ++i) {
        if (i > begin) {
            out.push_back('\n');
        }
        out += lines[i];
    }
    return out;
}

std::string last_nonempty_line(const std::string& text) {
    const std::vector<std::string> lines = split_lines(text);
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
        if (!is_blank(*it)) {
            return *it;
        }
    }
    return "";
}

}  // namespace alignretrieve
