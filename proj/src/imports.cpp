#include "alignretrieve/imports.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <utility>

#include "alignretrieve/stdlib_data.hpp"
#include "alignretrieve/tokenize.hpp"

namespace alignretrieve {
namespace {

std::string strip(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string rstrip(const std::string& s) {
    std::size_t e = s.size();
    while (e > 0 && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(0, e);
}

bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string current;
    for (char c : s) {
        if (c == sep) {
            parts.push_back(current);
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    parts.push_back(current);
    return parts;
}

std::string join_module(const std::string& a, const std::string& b) {
    if (a.empty()) return b;
    if (b.empty()) return a;
    return a + "." + b;
}

std::string dirname(const std::string& path) {
    const std::size_t pos = path.rfind('/');
    return pos == std::string::npos ? std::string() : path.substr(0, pos);
}

// --- Python import statement parsing -----------------------------------

std::string drop_comment(const std::string& line) {
    char quote = 0;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quote != 0) {
            if (c == '\\') {
                ++i;
            } else if (c == quote) {
                quote = 0;
            }
        } else if (c == '\'' || c == '"') {
            quote = c;
        } else if (c == '#') {
            return line.substr(0, i);
        }
    }
    return line;
}

int paren_balance(const std::string& line) {
    int depth = 0;
    char quote = 0;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quote != 0) {
            if (c == '\\') {
                ++i;
            } else if (c == quote) {
                quote = 0;
            }
        } else if (c == '\'' || c == '"') {
            quote = c;
        } else if (c == '(' || c == '[') {
            ++depth;
        } else if (c == ')' || c == ']') {
            --depth;
        }
    }
    return depth;
}

// "a.b as c" -> {"a.b", "c"}
std::pair<std::string, std::string> split_alias(const std::string& item) {
    const std::size_t pos = item.find(" as ");
    if (pos == std::string::npos) {
        return {strip(item), ""};
    }
    return {strip(item.substr(0, pos)), strip(item.substr(pos + 4))};
}

// Resolves leading dots of a relative module against the importing file's
// directory. Returns false when the dots climb above the repo root.
bool resolve_relative(const std::string& module, const std::string& file_path,
                      std::string* absolute) {
    std::size_t dots = 0;
    while (dots < module.size() && module[dots] == '.') ++dots;
    if (dots == 0) {
        *absolute = module;
        return true;
    }
    std::string package = dirname(file_path);
    for (std::size_t i = 1; i < dots; ++i) {
        if (package.empty()) {
            return false;
        }
        package = dirname(package);
    }
    std::string dotted = package;
    std::replace(dotted.begin(), dotted.end(), '/', '.');
    *absolute = join_module(dotted, module.substr(dots));
    return true;
}

void parse_python_statement(const std::string& statement, const std::string& file_path,
                            std::vector<ImportRef>* out, Diagnostics* diags) {
    std::string body = strip(statement);
    if (body.rfind("import ", 0) == 0) {
        for (const std::string& item : split_on(body.substr(7), ',')) {
            auto [module, alias] = split_alias(item);
            if (module.empty()) {
                warn(diags, "malformed import statement: " + statement);
                continue;
            }
            std::string absolute;
            if (!resolve_relative(module, file_path, &absolute)) {
                warn(diags, "relative import escapes repository: " + statement);
                continue;
            }
            out->push_back({absolute, "", alias, ImportKind::Module});
        }
        return;
    }
    if (body.rfind("from ", 0) != 0) {
        return;
    }
    const std::size_t import_pos = body.find(" import ");
    if (import_pos == std::string::npos) {
        warn(diags, "malformed from-import statement: " + statement);
        return;
    }
    std::string module = strip(body.substr(5, import_pos - 5));
    std::string names = strip(body.substr(import_pos + 8));
    if (!names.empty() && names.front() == '(') {
        names = strip(names.substr(1));
        if (!names.empty() && names.back() == ')') {
            names = strip(names.substr(0, names.size() - 1));
        }
    }
    std::string absolute;
    if (!resolve_relative(module, file_path, &absolute)) {
        warn(diags, "relative import escapes repository: " + statement);
        return;
    }
    if (names == "*") {
        out->push_back({absolute, "", "", ImportKind::Module});
        return;
    }
    for (const std::string& item : split_on(names, ',')) {
        auto [entity, alias] = split_alias(item);
        if (entity.empty()) {
            continue;
        }
        out->push_back({absolute, entity, alias, ImportKind::Unknown});
    }
}

std::vector<ImportRef> extract_python_imports(const SourceFile& file, Diagnostics* diags) {
    std::vector<ImportRef> refs;
    for (std::size_t i = 0; i < file.lines.size(); ++i) {
        std::string head = strip(drop_comment(file.lines[i]));
        if (head.rfind("import ", 0) != 0 && head.rfind("from ", 0) != 0) {
            continue;
        }
        // Join physical lines of one logical statement: open parens and
        // trailing backslashes continue it.
        std::string statement = head;
        int depth = paren_balance(head);
        while (i + 1 < file.lines.size() &&
               (depth > 0 || (!statement.empty() && statement.back() == '\\'))) {
            if (!statement.empty() && statement.back() == '\\') {
                statement.pop_back();
            }
            ++i;
            const std::string next = strip(drop_comment(file.lines[i]));
            depth += paren_balance(next);
            statement += " " + next;
        }
        parse_python_statement(statement, file.path, &refs, diags);
    }
    return refs;
}

// --- Java import statement parsing --------------------------------------

std::vector<ImportRef> extract_java_imports(const SourceFile& file, Diagnostics* diags) {
    std::vector<ImportRef> refs;
    for (const std::string& raw : file.lines) {
        std::string line = strip(raw);
        if (line.rfind("import ", 0) != 0) {
            continue;
        }
        line = strip(line.substr(7));
        bool is_static = false;
        if (line.rfind("static ", 0) == 0) {
            is_static = true;
            line = strip(line.substr(7));
        }
        const std::size_t semi = line.find(';');
        if (semi == std::string::npos) {
            warn(diags, "malformed import statement: " + raw);
            continue;
        }
        std::string target = strip(line.substr(0, semi));
        if (target.empty()) {
            warn(diags, "malformed import statement: " + raw);
            continue;
        }
        if (target.size() >= 2 && target.compare(target.size() - 2, 2, ".*") == 0) {
            refs.push_back({target.substr(0, target.size() - 2), "", "", ImportKind::Module});
            continue;
        }
        const std::size_t last_dot = target.rfind('.');
        const std::string last = last_dot == std::string::npos ? target : target.substr(last_dot + 1);
        if (is_static) {
            if (last_dot == std::string::npos) {
                warn(diags, "malformed static import: " + raw);
                continue;
            }
            refs.push_back({target.substr(0, last_dot), last, "", ImportKind::Method});
        } else {
            refs.push_back({target, last, "", ImportKind::Class});
        }
    }
    return refs;
}

}  // namespace

std::vector<ImportRef> extract_imports(const SourceFile& file, const std::string& language,
                                       Diagnostics* diags) {
    if (language == "python") {
        return extract_python_imports(file, diags);
    }
    if (language == "java") {
        return extract_java_imports(file, diags);
    }
    warn(diags, "unsupported language '" + language + "' for " + file.path);
    return {};
}

bool is_stdlib_module(const std::string& module, const std::string& language) {
    const std::set<std::string>& names = stdlib_modules(language);
    // Check every dotted prefix so "os.path" matches the "os" entry.
    std::string prefix;
    for (const std::string& segment : split_on(module, '.')) {
        prefix = join_module(prefix, segment);
        if (names.count(prefix) > 0) {
            return true;
        }
    }
    return false;
}

std::optional<std::string> resolve_module_path(const std::string& module,
                                               const std::vector<std::string>& repo_paths,
                                               const std::string& language) {
    if (module.empty()) {
        return std::nullopt;
    }
    std::string rel = module;
    std::replace(rel.begin(), rel.end(), '.', '/');
    std::vector<std::string> candidates;
    if (language == "python") {
        candidates = {rel + ".py", rel + "/__init__.py"};
    } else if (language == "java") {
        candidates = {rel + ".java"};
    } else {
        return std::nullopt;
    }
    // A path equal to the module's own layout wins outright; suffix matches
    // cover repositories whose packages sit below the root.
    std::vector<std::string> exact;
    std::vector<std::string> suffix;
    for (const std::string& path : repo_paths) {
        for (const std::string& candidate : candidates) {
            if (path == candidate) {
                exact.push_back(path);
            } else if (path.size() > candidate.size() + 1 &&
                       path.compare(path.size() - candidate.size() - 1, candidate.size() + 1,
                                    "/" + candidate) == 0) {
                suffix.push_back(path);
            }
        }
    }
    const std::vector<std::string>& matches = exact.empty() ? suffix : exact;
    if (matches.empty()) {
        return std::nullopt;
    }
    return *std::min_element(matches.begin(), matches.end());
}

std::vector<ResolvedImport> filter_intra_repo(const std::vector<ImportRef>& imports,
                                              const std::vector<std::string>& repo_paths,
                                              const std::string& language) {
    std::vector<ResolvedImport> kept;
    for (const ImportRef& ref : imports) {
        if (is_stdlib_module(ref.module, language)) {
            continue;
        }
        if (language == "python") {
            if (!ref.entity.empty()) {
                // "from a.b import c" may name a submodule or an entity; the
                // submodule file wins when both exist.
                if (auto path = resolve_module_path(join_module(ref.module, ref.entity),
                                                    repo_paths, language)) {
                    ImportRef as_module = ref;
                    as_module.kind = ImportKind::Module;
                    kept.push_back({as_module, *path, ""});
                    continue;
                }
            }
            if (auto path = resolve_module_path(ref.module, repo_paths, language)) {
                kept.push_back({ref, *path, ref.entity});
            }
            continue;
        }
        if (auto path = resolve_module_path(ref.module, repo_paths, language)) {
            kept.push_back({ref, *path, ref.entity});
        }
    }
    return kept;
}

namespace {

// --- Python signature extraction -----------------------------------------

std::size_t indent_width(const std::string& line) {
    std::size_t width = 0;
    for (char c : line) {
        if (c == ' ') {
            width += 1;
        } else if (c == '\t') {
            width += 4;
        } else {
            break;
        }
    }
    return width;
}

// "def " or "class " header starting at `start`; the header ends on the line
// holding the ':' that closes it at bracket depth zero.
std::size_t python_header_end(const std::vector<std::string>& lines, std::size_t start) {
    int depth = 0;
    char quote = 0;
    for (std::size_t i = start; i < lines.size(); ++i) {
        const std::string& line = lines[i];
        for (std::size_t j = 0; j < line.size(); ++j) {
            const char c = line[j];
            if (quote != 0) {
                if (c == '\\') {
                    ++j;
                } else if (c == quote) {
                    quote = 0;
                }
            } else if (c == '\'' || c == '"') {
                quote = c;
            } else if (c == '(' || c == '[' || c == '{') {
                ++depth;
            } else if (c == ')' || c == ']' || c == '}') {
                --depth;
            } else if (c == ':' && depth == 0) {
                return i;
            }
        }
        quote = 0;  // headers do not span strings across lines
    }
    return lines.size() - 1;
}

// Matches "def name" / "class name" at the start of a stripped line and
// returns the declared name.
std::string python_decl_name(const std::string& stripped, bool* is_class) {
    std::string rest;
    if (stripped.rfind("def ", 0) == 0) {
        *is_class = false;
        rest = stripped.substr(4);
    } else if (stripped.rfind("class ", 0) == 0) {
        *is_class = true;
        rest = stripped.substr(6);
    } else {
        return "";
    }
    std::size_t end = 0;
    while (end < rest.size() && is_ident_char(rest[end])) ++end;
    return rest.substr(0, end);
}

std::optional<EntitySignatures> python_entity_signatures(const SourceFile& file,
                                                         const std::string& entity) {
    const std::vector<std::string>& lines = file.lines;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (indent_width(lines[i]) != 0) {
            continue;
        }
        bool is_class = false;
        if (python_decl_name(strip(lines[i]), &is_class) != entity) {
            continue;
        }
        const std::size_t header_end = python_header_end(lines, i);
        EntitySignatures sig;
        for (std::size_t j = i; j <= header_end; ++j) {
            sig.lines.push_back(lines[j]);
        }
        if (!is_class) {
            sig.kind = ImportKind::Function;
            return sig;
        }
        sig.kind = ImportKind::Class;
        // Collect every def/class header inside the class body, file order,
        // original indentation: methods, nested classes, nested methods.
        std::size_t j = header_end + 1;
        while (j < lines.size()) {
            if (is_blank(lines[j])) {
                ++j;
                continue;
            }
            if (indent_width(lines[j]) == 0) {
                break;
            }
            bool inner_class = false;
            if (!python_decl_name(strip(lines[j]), &inner_class).empty()) {
                const std::size_t inner_end = python_header_end(lines, j);
                for (std::size_t k = j; k <= inner_end; ++k) {
                    sig.lines.push_back(lines[k]);
                }
                j = inner_end + 1;
            } else {
                ++j;
            }
        }
        return sig;
    }
    return std::nullopt;
}

// --- Java signature extraction -------------------------------------------

std::string strip_java_comments(const std::string& text) {
    std::string out = text;
    char quote = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const char c = out[i];
        if (quote != 0) {
            if (c == '\\') {
                ++i;
            } else if (c == quote) {
                quote = 0;
            }
            continue;
        }
        if (c == '"' || c == '\'') {
            quote = c;
            continue;
        }
        if (c == '/' && i + 1 < out.size() && out[i + 1] == '/') {
            while (i < out.size() && out[i] != '\n') {
                out[i++] = ' ';
            }
        } else if (c == '/' && i + 1 < out.size() && out[i + 1] == '*') {
            while (i < out.size() && !(out[i] == '*' && i + 1 < out.size() && out[i + 1] == '/')) {
                if (out[i] != '\n') {
                    out[i] = ' ';
                }
                ++i;
            }
            if (i < out.size()) {
                out[i] = ' ';
                out[i + 1] = ' ';
                ++i;
            }
        }
    }
    return out;
}

struct JavaStatement {
    int depth = 0;            // brace depth before the opening brace
    std::string text;         // header text, comments stripped
    std::size_t start_line = 0;
    std::size_t open_line = 0;  // line holding the '{'
    std::size_t open_col = 0;
    std::size_t order = 0;      // event index for range queries
};

struct JavaScan {
    std::vector<JavaStatement> opens;
    // close_depth[i]: event order at which depth dropped back to i-th open's depth
    std::vector<std::pair<std::size_t, int>> closes;  // (order, depth after close)
};

JavaScan scan_java(const std::string& text) {
    JavaScan scan;
    const std::string clean = strip_java_comments(text);
    int depth = 0;
    std::size_t line = 0;
    std::size_t col = 0;
    std::size_t order = 0;
    std::string buffer;
    std::size_t buffer_line = 0;
    bool buffer_started = false;
    char quote = 0;
    for (std::size_t i = 0; i < clean.size(); ++i) {
        const char c = clean[i];
        if (c == '\n') {
            ++line;
            col = 0;
            buffer.push_back(' ');
            continue;
        }
        if (quote != 0) {
            if (c == '\\') {
                ++i;
                col += 2;
                continue;
            }
            if (c == quote) {
                quote = 0;
            }
            ++col;
            buffer.push_back(c);
            continue;
        }
        if (c == '"' || c == '\'') {
            quote = c;
            buffer.push_back(c);
            ++col;
            continue;
        }
        if (c == '{') {
            JavaStatement st;
            st.depth = depth;
            st.text = strip(buffer);
            st.start_line = buffer_started ? buffer_line : line;
            st.open_line = line;
            st.open_col = col;
            st.order = order++;
            scan.opens.push_back(std::move(st));
            ++depth;
            buffer.clear();
            buffer_started = false;
        } else if (c == '}') {
            --depth;
            scan.closes.push_back({order++, depth});
            buffer.clear();
            buffer_started = false;
        } else if (c == ';') {
            buffer.clear();
            buffer_started = false;
        } else {
            if (!buffer_started && !std::isspace(static_cast<unsigned char>(c))) {
                buffer_started = true;
                buffer_line = line;
            }
            buffer.push_back(c);
        }
        ++col;
    }
    return scan;
}

bool contains_word(const std::string& text, const std::string& word) {
    std::size_t pos = 0;
    while ((pos = text.find(word, pos)) != std::string::npos) {
        const bool left_ok = pos == 0 || !is_ident_char(text[pos - 1]);
        const std::size_t end = pos + word.size();
        const bool right_ok = end >= text.size() || !is_ident_char(text[end]);
        if (left_ok && right_ok) {
            return true;
        }
        pos = end;
    }
    return false;
}

bool is_java_type_decl(const std::string& text) {
    return contains_word(text, "class") || contains_word(text, "interface") ||
           contains_word(text, "enum") || contains_word(text, "record");
}

bool is_java_method_decl(const std::string& text) {
    if (text.find('(') == std::string::npos || is_java_type_decl(text)) {
        return false;
    }
    static const std::set<std::string> control = {"if",    "for",   "while", "switch",
                                                  "catch", "do",    "else",  "try",
                                                  "synchronized", "return", "new"};
    std::size_t b = 0;
    while (b < text.size() && !is_ident_char(text[b]) && text[b] != '@') ++b;
    std::size_t e = b;
    while (e < text.size() && (is_ident_char(text[e]) || text[e] == '@')) ++e;
    return control.count(text.substr(b, e - b)) == 0;
}

std::string java_method_name(const std::string& text) {
    const std::size_t paren = text.find('(');
    if (paren == std::string::npos) {
        return "";
    }
    std::size_t e = paren;
    while (e > 0 && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
    std::size_t b = e;
    while (b > 0 && is_ident_char(text[b - 1])) --b;
    return text.substr(b, e - b);
}

// Header lines of the statement, final line cut before its '{'.
std::vector<std::string> java_statement_lines(const std::vector<std::string>& lines,
                                              const JavaStatement& st) {
    std::vector<std::string> out;
    for (std::size_t i = st.start_line; i <= st.open_line && i < lines.size(); ++i) {
        std::string line = lines[i];
        if (i == st.open_line && st.open_col <= line.size()) {
            line = line.substr(0, st.open_col);
        }
        line = rstrip(line);
        if (!(out.empty() && strip(line).empty())) {
            out.push_back(line);
        }
    }
    while (!out.empty() && strip(out.back()).empty()) {
        out.pop_back();
    }
    return out;
}

std::optional<EntitySignatures> java_entity_signatures(const SourceFile& file,
                                                       const std::string& entity) {
    const std::string text = join_lines(file.lines);
    const JavaScan scan = scan_java(text);

    // Class (or interface/enum/record) defined in this file.
    for (const JavaStatement& st : scan.opens) {
        if (!is_java_type_decl(st.text) || !contains_word(st.text, entity)) {
            continue;
        }
        EntitySignatures sig;
        sig.kind = ImportKind::Class;
        std::vector<std::string> header = java_statement_lines(file.lines, st);
        sig.lines.insert(sig.lines.end(), header.begin(), header.end());

        // Statements inside the class: between this open and the close that
        // returns to its depth.
        std::size_t close_order = scan.closes.empty() ? st.order + 1 : 0;
        for (const auto& [order, depth_after] : scan.closes) {
            if (order > st.order && depth_after == st.depth) {
                close_order = order;
                break;
            }
        }
        for (const JavaStatement& inner : scan.opens) {
            if (inner.order <= st.order || inner.order >= close_order) {
                continue;
            }
            if (is_java_type_decl(inner.text) || is_java_method_decl(inner.text)) {
                std::vector<std::string> inner_lines = java_statement_lines(file.lines, inner);
                sig.lines.insert(sig.lines.end(), inner_lines.begin(), inner_lines.end());
            }
        }
        return sig;
    }

    // Method named `entity` anywhere in the file (static imports).
    for (const JavaStatement& st : scan.opens) {
        if (is_java_method_decl(st.text) && java_method_name(st.text) == entity) {
            EntitySignatures sig;
            sig.kind = ImportKind::Method;
            sig.lines = java_statement_lines(file.lines, st);
            return sig;
        }
    }
    return std::nullopt;
}

}  // namespace

std::optional<EntitySignatures> extract_entity_signatures(const SourceFile& file,
                                                          const std::string& entity,
                                                          const std::string& language) {
    if (entity.empty()) {
        return std::nullopt;
    }
    if (language == "python") {
        return python_entity_signatures(file, entity);
    }
    if (language == "java") {
        return java_entity_signatures(file, entity);
    }
    return std::nullopt;
}

std::vector<Snippet> build_dependency_snippets(const std::vector<ResolvedImport>& imports,
                                               const std::vector<SourceFile>& repo,
                                               Diagnostics* diags) {
    std::map<std::string, const SourceFile*> by_path;
    for (const SourceFile& file : repo) {
        by_path[file.path] = &file;
    }

    std::vector<Snippet> snippets;
    std::set<std::pair<std::string, std::string>> seen;
    std::vector<std::string> aggregated;  // function/method signature lines
    std::string aggregated_origin;

    for (const ResolvedImport& imp : imports) {
        if (imp.entity.empty()) {
            continue;  // whole-module imports carry no signatures
        }
        if (!seen.insert({imp.path, imp.entity}).second) {
            continue;
        }
        auto file_it = by_path.find(imp.path);
        if (file_it == by_path.end()) {
            warn(diags, "resolved import path missing from repo: " + imp.path);
            continue;
        }
        auto sig = extract_entity_signatures(*file_it->second, imp.entity, language_of(imp.path));
        if (!sig.has_value() || sig->lines.empty()) {
            warn(diags, "imported entity not found: " + imp.entity + " in " + imp.path);
            continue;
        }
        if (sig->kind == ImportKind::Class) {
            Snippet snippet;
            snippet.kind = SnippetKind::Dependency;
            snippet.origin_path = imp.path;
            snippet.id = "dep:" + imp.path + "#" + imp.entity;
            snippet.text = join_lines(sig->lines);
            snippet.line_count = sig->lines.size();
            snippets.push_back(std::move(snippet));
        } else {
            if (aggregated.empty()) {
                aggregated_origin = imp.path;
            }
            aggregated.insert(aggregated.end(), sig->lines.begin(), sig->lines.end());
        }
    }

    if (!aggregated.empty()) {
        Snippet snippet;
        snippet.kind = SnippetKind::Dependency;
        snippet.origin_path = aggregated_origin;
        snippet.id = "dep:fn:" + aggregated_origin;
        snippet.text = join_lines(aggregated);
        snippet.line_count = aggregated.size();
        snippets.push_back(std::move(snippet));
    }
    return snippets;
}

}  // namespace alignretrieve
