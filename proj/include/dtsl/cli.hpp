#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dtsl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Entry point behind the `dtsl` executable: train, eval, sweep, ablation,
// gen-data. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// "0.01,0.05" or "0.90..0.99" (step = one unit in the last written decimal
// place), or a mix. Throws std::invalid_argument on malformed input.
std::vector<std::string> expand_values(const std::string& spec);

}  // namespace dtsl
