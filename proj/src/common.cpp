#include "mgr/common.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace mgr {

std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(s[i]);
  }
  out += ")";
  return out;
}

size_t shape_numel(const Shape& s) {
  size_t n = 1;
  for (size_t d : s) n *= d;
  return n;
}

LogLevel log_level() {
  static LogLevel level = [] {
    const char* env = std::getenv("MGR_LOG");
    if (env == nullptr) return LogLevel::Info;
    if (std::strcmp(env, "error") == 0) return LogLevel::Error;
    if (std::strcmp(env, "debug") == 0) return LogLevel::Debug;
    return LogLevel::Info;
  }();
  return level;
}

static void log_line(LogLevel lvl, const char* tag, const std::string& msg) {
  if (static_cast<int>(lvl) > static_cast<int>(log_level())) return;
  std::fprintf(stderr, "[%s] %s\n", tag, msg.c_str());
}

void log_error(const std::string& msg) { log_line(LogLevel::Error, "error", msg); }
void log_info(const std::string& msg) { log_line(LogLevel::Info, "info", msg); }
void log_debug(const std::string& msg) { log_line(LogLevel::Debug, "debug", msg); }

std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace mgr
