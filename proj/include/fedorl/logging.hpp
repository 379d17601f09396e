#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

namespace fedorl {

enum class LogLevel { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

/// Process-wide verbosity, read once from FEDORL_LOG (error|warn|info|debug).
inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("FEDORL_LOG");
        if (env == nullptr) return LogLevel::kWarn;
        if (std::strcmp(env, "error") == 0) return LogLevel::kError;
        if (std::strcmp(env, "info") == 0) return LogLevel::kInfo;
        if (std::strcmp(env, "debug") == 0) return LogLevel::kDebug;
        return LogLevel::kWarn;
    }();
    return level;
}

inline void log_message(LogLevel level, const std::string& msg) {
    static const char* names[] = {"error", "warn", "info", "debug"};
    if (static_cast<int>(level) <= static_cast<int>(log_level()))
        std::fprintf(stderr, "[fedorl:%s] %s\n", names[static_cast<int>(level)], msg.c_str());
}

inline void log_error(const std::string& m) { log_message(LogLevel::kError, m); }
inline void log_warn(const std::string& m) { log_message(LogLevel::kWarn, m); }
inline void log_info(const std::string& m) { log_message(LogLevel::kInfo, m); }
inline void log_debug(const std::string& m) { log_message(LogLevel::kDebug, m); }

}  // namespace fedorl
