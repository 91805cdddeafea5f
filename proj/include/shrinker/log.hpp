#pragma once

// Tiny stderr logger gated by the SHRINKER_LOG environment variable.
// Recognized levels: "error", "info", "debug" (anything else keeps the
// default of error-only).  Logging is for humans watching a run; nothing
// in the library changes behavior based on it.

#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace shrinker {

enum class LogLevel : int { error = 0, info = 1, debug = 2 };

inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("SHRINKER_LOG");
        if (env == nullptr) return LogLevel::error;
        if (std::strcmp(env, "debug") == 0) return LogLevel::debug;
        if (std::strcmp(env, "info") == 0) return LogLevel::info;
        return LogLevel::error;
    }();
    return level;
}

inline void log_at(LogLevel level, const char* tag, const char* fmt, ...) {
    if (static_cast<int>(level) > static_cast<int>(log_level())) return;
    std::fprintf(stderr, "[%s] ", tag);
    va_list args;
    va_start(args, fmt);
    std::vfprintf(stderr, fmt, args);
    va_end(args);
    std::fputc('\n', stderr);
}

#define SHRINKER_LOG_ERROR(...) ::shrinker::log_at(::shrinker::LogLevel::error, "error", __VA_ARGS__)
#define SHRINKER_LOG_INFO(...) ::shrinker::log_at(::shrinker::LogLevel::info, "info", __VA_ARGS__)
#define SHRINKER_LOG_DEBUG(...) ::shrinker::log_at(::shrinker::LogLevel::debug, "debug", __VA_ARGS__)

} // namespace shrinker
