#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace iad::cli {

// Runs one `iad` invocation; args excludes the program name. Returns the
// process exit code: 0 on success, 1 on a runtime failure, 2 on bad usage or
// invalid inputs (detected before any compute starts).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Replay transcript for a trajectory log: the reset state, then one block per
// step with actions, skill and reward annotations, then the totals.
std::string replay_transcript(const std::string& log_path, const std::string& layout_arg,
                              const std::string& layouts_dir);

}  // namespace iad::cli
