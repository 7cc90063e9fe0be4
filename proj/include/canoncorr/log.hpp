#pragma once

#include <string_view>

namespace canoncorr {

enum class LogLevel { Quiet = 0, Warn = 1, Info = 2 };

/// Process-wide stderr verbosity. Defaults to Warn.
void set_log_level(LogLevel level);
LogLevel log_level();

void log_warn(std::string_view msg);
void log_info(std::string_view msg);

}  // namespace canoncorr
