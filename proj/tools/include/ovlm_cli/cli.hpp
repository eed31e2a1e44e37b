#pragma once

#include <iosfwd>

namespace ovlm::cli {

// Exit codes: 0 success, 1 runtime failure (missing file, bad data),
// 2 usage error (unknown command or flag).
int run(int argc, const char* const* argv, std::istream& in, std::ostream& out,
        std::ostream& err);

}  // namespace ovlm::cli
