#pragma once

#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>

// Minimal stderr logger, level from SSMHAR_LOG={error,info,debug}.
namespace ssmhar {

enum class LogLevel { kError = 0, kInfo = 1, kDebug = 2 };

inline LogLevel log_level() {
  static LogLevel level = [] {
    const char* env = std::getenv("SSMHAR_LOG");
    if (env == nullptr) return LogLevel::kInfo;
    if (std::strcmp(env, "error") == 0) return LogLevel::kError;
    if (std::strcmp(env, "debug") == 0) return LogLevel::kDebug;
    return LogLevel::kInfo;
  }();
  return level;
}

inline void log_at(LogLevel lvl, const char* tag, const char* fmt, va_list ap) {
  if (static_cast<int>(lvl) > static_cast<int>(log_level())) return;
  std::fprintf(stderr, "[%s] ", tag);
  std::vfprintf(stderr, fmt, ap);
  std::fprintf(stderr, "\n");
}

inline void log_error(const char* fmt, ...) {
  va_list ap;
  va_start(ap, fmt);
  log_at(LogLevel::kError, "error", fmt, ap);
  va_end(ap);
}

inline void log_info(const char* fmt, ...) {
  va_list ap;
  va_start(ap, fmt);
  log_at(LogLevel::kInfo, "info", fmt, ap);
  va_end(ap);
}

inline void log_warn(const char* fmt, ...) {
  va_list ap;
  va_start(ap, fmt);
  log_at(LogLevel::kInfo, "warn", fmt, ap);
  va_end(ap);
}

inline void log_debug(const char* fmt, ...) {
  va_list ap;
  va_start(ap, fmt);
  log_at(LogLevel::kDebug, "debug", fmt, ap);
  va_end(ap);
}

}  // namespace ssmhar
