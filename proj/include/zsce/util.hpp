#pragma once

#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>
#include <string_view>

namespace zsce {

/// Error hierarchy: configuration problems (bad config files, infeasible
/// ranges), I/O and format problems, and everything else as runtime errors.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error("config: " + msg) {}
};
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error("io: " + msg) {}
};

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

/// Log level comes from the ZSC_LOG environment variable (error|info|debug).
inline LogLevel log_level() {
    static LogLevel level = [] {
        const char* env = std::getenv("ZSC_LOG");
        if (!env) return LogLevel::Error;
        std::string_view v(env);
        if (v == "debug") return LogLevel::Debug;
        if (v == "info") return LogLevel::Info;
        return LogLevel::Error;
    }();
    return level;
}

inline void log_msg(LogLevel lvl, const char* fmt, ...) {
    if (lvl > log_level()) return;
    const char* tag = lvl == LogLevel::Error ? "error" : lvl == LogLevel::Info ? "info" : "debug";
    std::fprintf(stderr, "[zsce %s] ", tag);
    va_list args;
    va_start(args, fmt);
    std::vfprintf(stderr, fmt, args);
    va_end(args);
    std::fputc('\n', stderr);
}

#define ZSCE_INFO(...) ::zsce::log_msg(::zsce::LogLevel::Info, __VA_ARGS__)
#define ZSCE_DEBUG(...) ::zsce::log_msg(::zsce::LogLevel::Debug, __VA_ARGS__)
#define ZSCE_ERROR(...) ::zsce::log_msg(::zsce::LogLevel::Error, __VA_ARGS__)

/// FNV-1a, used for config hashes and artifact digests in run manifests.
inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a(std::string_view s, uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a(s.data(), s.size(), h);
}

inline std::string hex_digest(uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace zsce
