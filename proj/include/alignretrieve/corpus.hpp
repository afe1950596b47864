#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "alignretrieve/error.hpp"

namespace alignretrieve {

struct SourceFile {
    std::string path;
    std::vector<std::string> lines;  // newline-stripped, disk order
};

// Contiguous run of non-blank lines. Indices are 0-based inclusive.
struct MiniBlock {
    std::size_t start_line = 0;
    std::size_t end_line = 0;
    std::vector<std::string> lines;
};

enum class SnippetKind { Base, Dependency };

struct Snippet {
    std::string id;
    SnippetKind kind = SnippetKind::Base;
    std::string origin_path;
    // 1-based inclusive span in the origin file; -1/-1 for dependency snippets.
    int start_line = -1;
    int end_line = -1;
    std::string text;
    std::size_t line_count = 0;
};

enum class ImportKind { Class, Method, Function, Module, Unknown };

struct ImportRef {
    std::string module;  // dotted module path
    std::string entity;  // imported name, empty for whole-module imports
    std::string alias;   // empty when not aliased
    ImportKind kind = ImportKind::Unknown;
};

struct CorpusConfig {
    std::size_t max_snippet_lines = 15;
};

std::vector<std::string> split_lines(const std::string& text);
std::string join_lines(const std::vector<std::string>& lines);

// Language inferred from the file extension (.py / .java).
std::string language_of(const std::string& path);

std::vector<MiniBlock> split_into_miniblocks(const SourceFile& file);

std::vector<Snippet> aggregate_blocks(const SourceFile& file,
                                      const std::vector<MiniBlock>& blocks,
                                      std::size_t max_lines);

// Base snippets for one file: split + aggregate.
std::vector<Snippet> build_base_snippets(const SourceFile& file, std::size_t max_lines);

// Full codebase: base snippets over all cross-files plus dependency snippets
// derived from the completion file's imports. completion_path must be present
// in `repo`. Sorted by (origin_path, span, id); ids are unique.
std::vector<Snippet> build_codebase(const std::vector<SourceFile>& repo,
                                    const std::string& completion_path,
                                    const CorpusConfig& config,
                                    Diagnostics* diags);

// Base snippets for every file; no dependency extraction. Used for standalone
// indexing where no completion file is designated.
std::vector<Snippet> build_base_corpus(const std::vector<SourceFile>& repo,
                                       const CorpusConfig& config);

std::string corpus_to_jsonl(const std::vector<Snippet>& snippets);
std::vector<Snippet> corpus_from_jsonl(const std::string& jsonl);

void write_corpus_file(const std::string& path, const std::vector<Snippet>& snippets);
std::vector<Snippet> read_corpus_file(const std::string& path);

}  // namespace alignretrieve
