#include "mcl/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace mcl::log {

namespace {

Level level_from_env() {
  const char* env = std::getenv("MCL_LOG");
  if (env == nullptr) return Level::info;
  const std::string value(env);
  if (value == "debug") return Level::debug;
  if (value == "warn") return Level::warn;
  return Level::info;
}

std::atomic<Level>& current() {
  static std::atomic<Level> lvl{level_from_env()};
  return lvl;
}

void emit(Level at, std::string_view tag, std::string_view message) {
  if (at < current().load()) return;
  static std::mutex mu;
  std::lock_guard lock(mu);
  std::cerr << '[' << tag << "] " << message << '\n';
}

}  // namespace

Level level() { return current().load(); }
void set_level(Level lvl) { current().store(lvl); }

void debug(std::string_view message) { emit(Level::debug, "debug", message); }
void info(std::string_view message) { emit(Level::info, "info", message); }
void warn(std::string_view message) { emit(Level::warn, "warn", message); }

}  // namespace mcl::log
