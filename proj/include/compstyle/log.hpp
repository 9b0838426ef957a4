#pragma once

#include <filesystem>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string_view>

namespace compstyle::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

Level threshold();
void set_threshold(Level level);

void write(Level level, std::string_view message);

/// Also append every record as a JSON line {"time","level","msg"} to `path`.
/// An empty path closes the sink.
void set_jsonl_sink(const std::filesystem::path& path);

template <typename... Args>
void info(const Args&... args) {
  if (threshold() > Level::info) return;
  std::ostringstream os;
  (os << ... << args);
  write(Level::info, os.str());
}

template <typename... Args>
void warn(const Args&... args) {
  if (threshold() > Level::warn) return;
  std::ostringstream os;
  (os << ... << args);
  write(Level::warn, os.str());
}

}  // namespace compstyle::log
