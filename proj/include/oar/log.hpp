// SPDX-FileCopyrightText: 2026 oar contributors
// SPDX-License-Identifier: Apache-2.0

#ifndef OAR_LOG_HPP
#define OAR_LOG_HPP

#include <cstdlib>
#include <iostream>
#include <string>

namespace oar {

enum class LogLevel { quiet = 0, info = 1, debug = 2 };

/// Verbosity from the OAR_LOG environment variable (debug|info); defaults
/// to info.
inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("OAR_LOG");
    if (!env) return LogLevel::info;
    const std::string v(env);
    if (v == "debug") return LogLevel::debug;
    if (v == "quiet") return LogLevel::quiet;
    return LogLevel::info;
  }();
  return level;
}

inline void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::info) std::cerr << "[oar] " << msg << '\n';
}

inline void log_debug(const std::string& msg) {
  if (log_level() >= LogLevel::debug)
    std::cerr << "[oar:debug] " << msg << '\n';
}

}  // namespace oar

#endif  // OAR_LOG_HPP
