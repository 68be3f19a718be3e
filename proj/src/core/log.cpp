#include "log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace nmpnerf::log {

namespace {

Level from_env() {
  const char* v = std::getenv("NMPNERF_LOG");
  if (!v) return Level::Warn;
  const std::string s(v);
  if (s == "error") return Level::Error;
  if (s == "info") return Level::Info;
  if (s == "debug") return Level::Debug;
  return Level::Warn;
}

std::atomic<int>& level_ref() {
  static std::atomic<int> level{int(from_env())};
  return level;
}

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

const char* tag(Level l) {
  switch (l) {
    case Level::Error: return "error";
    case Level::Warn: return "warn";
    case Level::Info: return "info";
    case Level::Debug: return "debug";
  }
  return "?";
}

}  // namespace

Level threshold() { return Level(level_ref().load()); }

void set_threshold(Level level) { level_ref().store(int(level)); }

void write(Level level, std::string_view message) {
  if (int(level) > level_ref().load()) return;
  std::lock_guard<std::mutex> lock(sink_mutex());
  std::cerr << "[nmpnerf " << tag(level) << "] " << message << '\n';
}

}  // namespace nmpnerf::log
