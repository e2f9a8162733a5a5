#pragma once

#include <string>

namespace mivs::log {

enum class Level { Debug = 0, Info = 1, Warn = 2, Off = 3 };

void set_level(Level level);
Level level();

void debug(const std::string& msg);
void info(const std::string& msg);
void warn(const std::string& msg);

} // namespace mivs::log
