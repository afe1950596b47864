#include "alignretrieve/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "alignretrieve/imports.hpp"
#include "alignretrieve/tokenize.hpp"

namespace alignretrieve {

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string current;
    for (char c : text) {
        if (c == '\n') {
            if (!current.empty() && current.back() == '\r') {
                current.pop_back();
            }
            lines.push_back(current);
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    if (!current.empty()) {
        lines.push_back(current);
    }
    return lines;
}

std::string join_lines(const std::vector<std::string>& lines) {
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i > 0) {
            out.push_back('\n');
        }
        out += lines[i];
    }
    return out;
}

std::string language_of(const std::string& path) {
    if (path.size() >= 3 && path.compare(path.size() - 3, 3, ".py") == 0) {
        return "python";
    }
    if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".java") == 0) {
        return "java";
    }
    return "";
}

std::vector<MiniBlock> split_into_miniblocks(const SourceFile& file) {
    std::vector<MiniBlock> blocks;
    MiniBlock current;
    bool open = false;
    for (std::size_t i = 0; i < file.lines.size(); ++i) {
        if (is_blank(file.lines[i])) {
            if (open) {
                blocks.push_back(std::move(current));
                current = MiniBlock{};
                open = false;
            }
            continue;
        }
        if (!open) {
            current.start_line = i;
            open = true;
        }
        current.end_line = i;
        current.lines.push_back(file.lines[i]);
    }
    if (open) {
        blocks.push_back(std::move(current));
    }
    return blocks;
}

namespace {

// Oversized blocks are cut into chunks of at most max_lines so the greedy
// packing below never sees a block it cannot place.
std::vector<MiniBlock> normalize_blocks(const std::vector<MiniBlock>& blocks,
                                        std::size_t max_lines) {
    std::vector<MiniBlock> out;
    for (const MiniBlock& block : blocks) {
        if (block.lines.size() <= max_lines) {
            out.push_back(block);
            continue;
        }
        std::size_t offset = 0;
        while (offset < block.lines.size()) {
            const std::size_t take = std::min(max_lines, block.lines.size() - offset);
            MiniBlock chunk;
            chunk.start_line = block.start_line + offset;
            chunk.end_line = chunk.start_line + take - 1;
            chunk.lines.assign(block.lines.begin() + static_cast<std::ptrdiff_t>(offset),
                               block.lines.begin() + static_cast<std::ptrdiff_t>(offset + take));
            out.push_back(std::move(chunk));
            offset += take;
        }
    }
    return out;
}

Snippet make_base_snippet(const std::string& path, const std::vector<const MiniBlock*>& group) {
    Snippet snippet;
    snippet.kind = SnippetKind::Base;
    snippet.origin_path = path;
    snippet.start_line = static_cast<int>(group.front()->start_line) + 1;
    snippet.end_line = static_cast<int>(group.back()->end_line) + 1;
    snippet.id = path + ":" + std::to_string(snippet.start_line) + "-" +
                 std::to_string(snippet.end_line);
    std::vector<std::string> lines;
    for (const MiniBlock* block : group) {
        lines.insert(lines.end(), block->lines.begin(), block->lines.end());
    }
    snippet.line_count = lines.size();
    snippet.text = join_lines(lines);
    return snippet;
}

}  // namespace

std::vector<Snippet> aggregate_blocks(const SourceFile& file,
                                      const std::vector<MiniBlock>& blocks,
                                      std::size_t max_lines) {
    if (max_lines < 1) {
        throw Error(ErrorKind::InvalidParameter, "max snippet lines must be >= 1");
    }
    const std::vector<MiniBlock> normalized = normalize_blocks(blocks, max_lines);
    std::vector<Snippet> snippets;
    std::vector<const MiniBlock*> group;
    std::size_t group_lines = 0;
    for (const MiniBlock& block : normalized) {
        if (!group.empty() && group_lines + block.lines.size() > max_lines) {
            snippets.push_back(make_base_snippet(file.path, group));
            group.clear();
            group_lines = 0;
        }
        group.push_back(&block);
        group_lines += block.lines.size();
    }
    if (!group.empty()) {
        snippets.push_back(make_base_snippet(file.path, group));
    }
    return snippets;
}

std::vector<Snippet> build_base_snippets(const SourceFile& file, std::size_t max_lines) {
    return aggregate_blocks(file, split_into_miniblocks(file), max_lines);
}

namespace {

int span_key(const Snippet& s) {
    return s.kind == SnippetKind::Dependency ? -1 : s.start_line;
}

void sort_and_uniquify(std::vector<Snippet>& snippets) {
    std::stable_sort(snippets.begin(), snippets.end(), [](const Snippet& a, const Snippet& b) {
        return std::make_tuple(std::cref(a.origin_path), span_key(a), std::cref(a.id)) <
               std::make_tuple(std::cref(b.origin_path), span_key(b), std::cref(b.id));
    });
    std::set<std::string> seen;
    for (Snippet& s : snippets) {
        std::string id = s.id;
        std::size_t k = 1;
        while (!seen.insert(id).second) {
            id = s.id + "~" + std::to_string(k++);
        }
        s.id = id;
    }
}

}  // namespace

std::vector<Snippet> build_codebase(const std::vector<SourceFile>& repo,
                                    const std::string& completion_path,
                                    const CorpusConfig& config,
                                    Diagnostics* diags) {
    if (repo.empty()) {
        throw Error(ErrorKind::InvalidInput, "repository is empty");
    }
    const SourceFile* completion = nullptr;
    for (const SourceFile& file : repo) {
        if (file.path == completion_path) {
            completion = &file;
            break;
        }
    }
    if (completion == nullptr) {
        throw Error(ErrorKind::InvalidInput,
                    "completion file not found in repository: " + completion_path);
    }

    std::vector<Snippet> snippets;
    for (const SourceFile& file : repo) {
        if (file.path == completion_path) {
            continue;
        }
        std::vector<Snippet> base = build_base_snippets(file, config.max_snippet_lines);
        snippets.insert(snippets.end(), base.begin(), base.end());
    }

    const std::string language = language_of(completion_path);
    if (!language.empty()) {
        std::vector<std::string> repo_paths;
        repo_paths.reserve(repo.size());
        for (const SourceFile& file : repo) {
            repo_paths.push_back(file.path);
        }
        std::vector<ImportRef> imports = extract_imports(*completion, language, diags);
        std::vector<ResolvedImport> resolved = filter_intra_repo(imports, repo_paths, language);
        std::vector<Snippet> deps = build_dependency_snippets(resolved, repo, diags);
        snippets.insert(snippets.end(), deps.begin(), deps.end());
    } else {
        warn(diags, "unsupported language for dependency extraction: " + completion_path);
    }

    sort_and_uniquify(snippets);
    return snippets;
}

std::vector<Snippet> build_base_corpus(const std::vector<SourceFile>& repo,
                                       const CorpusConfig& config) {
    std::vector<Snippet> snippets;
    for (const SourceFile& file : repo) {
        std::vector<Snippet> base = build_base_snippets(file, config.max_snippet_lines);
        snippets.insert(snippets.end(), base.begin(), base.end());
    }
    sort_and_uniquify(snippets);
    return snippets;
}

std::string corpus_to_jsonl(const std::vector<Snippet>& snippets) {
    std::string out;
    for (const Snippet& s : snippets) {
        nlohmann::json record;
        record["id"] = s.id;
        record["kind"] = s.kind == SnippetKind::Base ? "base" : "dependency";
        record["origin_path"] = s.origin_path;
        if (s.kind == SnippetKind::Base) {
            record["start_line"] = s.start_line;
            record["end_line"] = s.end_line;
        } else {
            record["start_line"] = nullptr;
            record["end_line"] = nullptr;
        }
        record["text"] = s.text;
        out += record.dump();
        out.push_back('\n');
    }
    return out;
}

std::vector<Snippet> corpus_from_jsonl(const std::string& jsonl) {
    std::vector<Snippet> snippets;
    std::istringstream in(jsonl);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) {
            continue;
        }
        nlohmann::json record = nlohmann::json::parse(line, nullptr, false);
        if (record.is_discarded() || !record.is_object()) {
            throw Error(ErrorKind::InvalidInput,
                        "corpus line " + std::to_string(line_no) + " is not a JSON object");
        }
        Snippet s;
        try {
            s.id = record.at("id").get<std::string>();
            const std::string kind = record.at("kind").get<std::string>();
            if (kind == "base") {
                s.kind = SnippetKind::Base;
            } else if (kind == "dependency") {
                s.kind = SnippetKind::Dependency;
            } else {
                throw Error(ErrorKind::InvalidInput, "unknown snippet kind: " + kind);
            }
            s.origin_path = record.at("origin_path").get<std::string>();
            if (record.contains("start_line") && !record["start_line"].is_null()) {
                s.start_line = record["start_line"].get<int>();
            }
            if (record.contains("end_line") && !record["end_line"].is_null()) {
                s.end_line = record["end_line"].get<int>();
            }
            s.text = record.at("text").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::InvalidInput,
                        "corpus line " + std::to_string(line_no) + ": " + e.what());
        }
        s.line_count = split_lines(s.text).size();
        snippets.push_back(std::move(s));
    }
    return snippets;
}

void write_corpus_file(const std::string& path, const std::vector<Snippet>& snippets) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::Io, "cannot open corpus file for writing: " + path);
    }
    out << corpus_to_jsonl(snippets);
    if (!out) {
        throw Error(ErrorKind::Io, "failed writing corpus file: " + path);
    }
}

std::vector<Snippet> read_corpus_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot open corpus file: " + path);
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return corpus_from_jsonl(buffer.str());
}

}  // namespace alignretrieve
