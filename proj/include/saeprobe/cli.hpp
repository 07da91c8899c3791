#ifndef SAEPROBE_CLI_HPP
#define SAEPROBE_CLI_HPP

#include <ostream>
#include <string>
#include <vector>

namespace saeprobe::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

/// Environment variable naming the default output directory.
inline constexpr const char* kOutDirEnv = "SAEPROBE_OUT_DIR";

/// Runs one command line (without the program name). Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace saeprobe::cli

#endif  // SAEPROBE_CLI_HPP
