#ifndef CHORRNN_CLI_HPP
#define CHORRNN_CLI_HPP

#include <iosfwd>

namespace chorrnn {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

// Entry point of the chorrnn tool: train, generate, gradcheck, synth,
// compare-heads, serve, export-anim.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace chorrnn

#endif  // CHORRNN_CLI_HPP
