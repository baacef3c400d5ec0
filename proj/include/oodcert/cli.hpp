#pragma once

#include <ostream>

namespace oodcert {

// Entry point of the `oodcert` tool. Returns 0 on success, 2 on usage errors
// and 1 on validation or runtime errors; errors are reported on `err` as one
// JSON line {"error": kind, "message": text}.
int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err);

} // namespace oodcert
