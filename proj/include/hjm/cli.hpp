#pragma once

#include <ostream>

namespace hjm {

// Exit codes of the `hjmlab` command line.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInvariant = 1;  // a run finished but some check failed
inline constexpr int kExitUsage = 2;      // bad arguments or configuration

// hjmlab <experiment> [--config FILE] [--seed N] [--paths N] [--steps N] [--factors N]
//                     [--out DIR] [--threads N] [--claim NAME] [--psi-mode MODE]
//
// Seed precedence: --seed, then the LAB_SEED environment variable, then the file.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hjm
