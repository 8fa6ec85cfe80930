#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace deepcontext::cli {

// Exit codes: 0 success, 1 domain failure, 2 usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace deepcontext::cli
