#pragma once

#include <set>
#include <string>

namespace alignretrieve {

// Bundled standard-library module names for a language ("python" or "java").
// Entries match any dotted prefix of a module path. Unknown language -> empty.
const std::set<std::string>& stdlib_modules(const std::string& language);

}  // namespace alignretrieve
