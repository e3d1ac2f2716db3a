#include "mcpforge/log.hpp"

#include <iostream>
#include <mutex>

namespace mcpforge::log {

namespace {

std::mutex& mutex() {
    static std::mutex m;
    return m;
}

Level& threshold() {
    static Level level = Level::info;
    return level;
}

const char* name(Level level) {
    switch (level) {
        case Level::debug: return "debug";
        case Level::info: return "info";
        case Level::warn: return "warn";
        case Level::error: return "error";
    }
    return "info";
}

Sink& sink() {
    static Sink s = [](Level level, const std::string& message) {
        std::cerr << '[' << name(level) << "] " << message << '\n';
    };
    return s;
}

}  // namespace

void set_sink(Sink s) {
    std::lock_guard lock(mutex());
    sink() = std::move(s);
}

void set_level(Level level) {
    std::lock_guard lock(mutex());
    threshold() = level;
}

void write(Level level, const std::string& message) {
    std::lock_guard lock(mutex());
    if (level < threshold() || !sink()) return;
    sink()(level, message);
}

}  // namespace mcpforge::log
