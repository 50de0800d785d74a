#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace confreg::cli {

enum ExitCode : int { ok = 0, usage = 1, data = 2, numerical = 3 };

// Runs one verb: register, warp, tre, jacdet, synth or selfcheck.
// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

// CONFREG_THREADS if set and positive, otherwise every hardware thread.
int default_threads();

} // namespace confreg::cli
