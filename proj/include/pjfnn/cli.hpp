#pragma once

#include <iosfwd>

namespace pjfnn {

/// Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime or numeric error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pjfnn
