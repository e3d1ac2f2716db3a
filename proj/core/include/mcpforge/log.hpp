#pragma once

#include <functional>
#include <string>

namespace mcpforge::log {

enum class Level { debug, info, warn, error };

using Sink = std::function<void(Level, const std::string&)>;

// Default sink writes "[level] message" lines to stderr at info and above.
void set_sink(Sink sink);
void set_level(Level level);
void write(Level level, const std::string& message);

inline void debug(const std::string& m) { write(Level::debug, m); }
inline void info(const std::string& m) { write(Level::info, m); }
inline void warn(const std::string& m) { write(Level::warn, m); }
inline void error(const std::string& m) { write(Level::error, m); }

}  // namespace mcpforge::log
