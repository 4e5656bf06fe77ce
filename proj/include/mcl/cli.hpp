#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mcl::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // verify found a failing property
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

struct Invocation {
  std::string config_path;
  std::string out;
  std::vector<std::string> overrides;
  std::string seeds;  // comma list, overrides the config's seed(s)
  std::size_t jobs = 1;
  std::string grid = "all";
};

int cmd_generate(const Invocation& inv);
int cmd_train(const Invocation& inv);
int cmd_ablate(const Invocation& inv);
int cmd_verify();

// Parses argv and dispatches. Never throws.
int run(int argc, char** argv);

}  // namespace mcl::cli
