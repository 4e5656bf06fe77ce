#pragma once

#include <string_view>

// Minimal stderr logger. MCL_LOG=debug|info|warn selects the level; the
// default is info.
namespace mcl::log {

enum class Level { debug = 0, info = 1, warn = 2 };

Level level();
void set_level(Level level);

void debug(std::string_view message);
void info(std::string_view message);
void warn(std::string_view message);

}  // namespace mcl::log
