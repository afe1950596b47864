#pragma once

#include <optional>
#include <string>
#include <vector>

#include "alignretrieve/corpus.hpp"
#include "alignretrieve/error.hpp"

namespace alignretrieve {

// Import statements parsed from one file. Unparseable files yield an empty
// list plus a warning, never an error.
std::vector<ImportRef> extract_imports(const SourceFile& file, const std::string& language,
                                       Diagnostics* diags);

bool is_stdlib_module(const std::string& module, const std::string& language);

struct ResolvedImport {
    ImportRef ref;
    std::string path;    // repo file the module maps to
    std::string entity;  // empty for whole-module imports
};

// Maps a dotted module to a repo file: dots become path separators, then
// `m.py` / `m/__init__.py` (Python) or `m.java` (Java) is matched exactly or
// as a path suffix. Smallest path wins when several match.
std::optional<std::string> resolve_module_path(const std::string& module,
                                               const std::vector<std::string>& repo_paths,
                                               const std::string& language);

// Keeps imports that resolve to a repo file and are neither standard-library
// nor third-party modules.
std::vector<ResolvedImport> filter_intra_repo(const std::vector<ImportRef>& imports,
                                              const std::vector<std::string>& repo_paths,
                                              const std::string& language);

// Signature skeleton of a class: class header plus method headers plus nested
// class/method headers, in file order, original indentation.
struct EntitySignatures {
    ImportKind kind = ImportKind::Unknown;  // Class, Function or Method
    std::vector<std::string> lines;
};

std::optional<EntitySignatures> extract_entity_signatures(const SourceFile& file,
                                                          const std::string& entity,
                                                          const std::string& language);

// One Dependency snippet per imported class; all function/method signatures
// aggregated into a single snippet. Missing entities are skipped with a
// warning.
std::vector<Snippet> build_dependency_snippets(const std::vector<ResolvedImport>& imports,
                                               const std::vector<SourceFile>& repo,
                                               Diagnostics* diags);

}  // namespace alignretrieve
