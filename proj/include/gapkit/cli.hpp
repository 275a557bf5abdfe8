#pragma once

namespace gapkit::cli {

/// Entry point of the command-line tool. Returns the process exit code:
/// 0 success, 1 usage error, 2 data error, 3 numerical degeneracy.
int run(int argc, char** argv);

}  // namespace gapkit::cli
