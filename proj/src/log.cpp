#include "compstyle/log.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

namespace compstyle::log {
namespace {

Level initial_level() {
  const char* env = std::getenv("COMPSTYLE_LOG");
  if (!env) return Level::info;
  const std::string v(env);
  if (v == "debug") return Level::debug;
  if (v == "warn") return Level::warn;
  if (v == "error") return Level::error;
  if (v == "off") return Level::off;
  return Level::info;
}

std::atomic<Level> g_level{initial_level()};
std::mutex g_mutex;
std::ofstream g_sink;

}  // namespace

Level threshold() { return g_level.load(std::memory_order_relaxed); }
void set_threshold(Level level) { g_level.store(level); }

void write(Level level, std::string_view message) {
  static constexpr const char* names[] = {"debug", "info", "warn", "error"};
  std::lock_guard lock(g_mutex);
  std::clog << '[' << names[static_cast<int>(level)] << "] " << message << '\n';
  if (g_sink.is_open()) {
    const auto now = std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
    g_sink << nlohmann::json{{"time", now}, {"level", names[static_cast<int>(level)]}, {"msg", message}}.dump() << '\n'
           << std::flush;
  }
}

void set_jsonl_sink(const std::filesystem::path& path) {
  std::lock_guard lock(g_mutex);
  if (g_sink.is_open()) g_sink.close();
  if (!path.empty()) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    g_sink.open(path, std::ios::app);
  }
}

}  // namespace compstyle::log
