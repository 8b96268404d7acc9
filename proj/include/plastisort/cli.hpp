#pragma once

#include <string>
#include <vector>

namespace plastisort {

// Entry point behind the plastisort binary; `args` excludes argv[0].
// Returns 0 on success, 1 on validation/usage errors, 2 on runtime failure.
int run_cli(const std::vector<std::string>& args);

} // namespace plastisort
