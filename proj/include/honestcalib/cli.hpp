#pragma once

namespace honestcalib::cli {

// Full command-line entry point. Returns the process exit code:
// 0 success, 2 invalid input or arguments, 1 internal failure.
int run(int argc, char** argv);

}  // namespace honestcalib::cli
