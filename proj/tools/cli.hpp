#pragma once

#include <ostream>

namespace crowdsynth::cli {

/// Entry point of the `crowdsynth` tool. Returns 0 on success, 1 on runtime or
/// data errors and 2 on usage errors.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace crowdsynth::cli
