#include "canoncorr/log.hpp"

#include <atomic>
#include <iostream>

namespace canoncorr {

namespace {
std::atomic<int> g_level{static_cast<int>(LogLevel::Warn)};
}

void set_log_level(LogLevel level) { g_level = static_cast<int>(level); }

LogLevel log_level() { return static_cast<LogLevel>(g_level.load()); }

void log_warn(std::string_view msg) {
  if (g_level >= static_cast<int>(LogLevel::Warn)) {
    std::cerr << "warning: " << msg << '\n';
  }
}

void log_info(std::string_view msg) {
  if (g_level >= static_cast<int>(LogLevel::Info)) std::cerr << msg << '\n';
}

}  // namespace canoncorr
