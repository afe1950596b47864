#pragma once

#include <string>
#include <vector>

#include "alignretrieve/corpus.hpp"

namespace alignretrieve {

// Snippets enter prompts as comment blocks:
//   # context: <origin_path>
//   # <snippet line>
//   ...
// followed by a blank line. The unfinished code comes last, unframed.
std::string frame_snippet(const Snippet& snippet);

// Recovers the framed snippet lines from a prompt, in order of appearance.
// A block starts at a "# context:" header and ends at the first line that
// is not "# "-prefixed.
std::vector<std::string> context_snippet_lines(const std::string& prompt);

// One snippet framed above unfinished code; the conditional-perplexity
// context (matches how generation prompts frame snippets).
std::string render_snippet_context(const Snippet& snippet, const std::string& unfinished_code);

// Last `count` lines of text (all lines when fewer).
std::string tail_lines(const std::string& text, std::size_t count);

std::string last_nonempty_line(const std::string& text);

}  // namespace alignretrieve
