#pragma once

#include <atomic>
#include <cstdio>
#include <string_view>

#include <fmt/core.h>

namespace mces::log {

enum class Level { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3, kSilent = 4 };

inline std::atomic<Level>& threshold() {
  static std::atomic<Level> level{Level::kInfo};
  return level;
}

inline void set_level(Level level) { threshold().store(level); }

inline std::atomic<long>& warning_count() {
  static std::atomic<long> count{0};
  return count;
}

template <typename... Args>
void emit(Level level, std::string_view tag, fmt::format_string<Args...> format, Args&&... args) {
  if (level == Level::kWarn) ++warning_count();
  if (level < threshold().load()) return;
  fmt::print(stderr, "[{}] {}\n", tag, fmt::format(format, std::forward<Args>(args)...));
}

template <typename... Args>
void debug(fmt::format_string<Args...> format, Args&&... args) {
  emit(Level::kDebug, "debug", format, std::forward<Args>(args)...);
}
template <typename... Args>
void info(fmt::format_string<Args...> format, Args&&... args) {
  emit(Level::kInfo, "info", format, std::forward<Args>(args)...);
}
template <typename... Args>
void warn(fmt::format_string<Args...> format, Args&&... args) {
  emit(Level::kWarn, "warn", format, std::forward<Args>(args)...);
}
template <typename... Args>
void error(fmt::format_string<Args...> format, Args&&... args) {
  emit(Level::kError, "error", format, std::forward<Args>(args)...);
}

}  // namespace mces::log
