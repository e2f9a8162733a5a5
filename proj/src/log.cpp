#include "mivs/log.h"

#include <atomic>
#include <iostream>
#include <mutex>

namespace mivs::log {

namespace {
std::atomic<Level> g_level{Level::Warn};
std::mutex g_mutex;

void emit(Level at, const char* tag, const std::string& msg) {
    if (at < g_level.load()) return;
    std::lock_guard<std::mutex> lock(g_mutex);
    std::cerr << "[mivs " << tag << "] " << msg << '\n';
}
} // namespace

void set_level(Level level) { g_level = level; }
Level level() { return g_level.load(); }

void debug(const std::string& msg) { emit(Level::Debug, "debug", msg); }
void info(const std::string& msg) { emit(Level::Info, "info", msg); }
void warn(const std::string& msg) { emit(Level::Warn, "warn", msg); }

} // namespace mivs::log
