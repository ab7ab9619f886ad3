#pragma once

#include <iostream>
#include <mutex>
#include <sstream>
#include <string>

namespace respicast::logging {

enum class Level { Info = 0, Warn = 1, Quiet = 2 };

inline Level& threshold() {
    static Level lv = Level::Info;
    return lv;
}

inline std::mutex& mutex() {
    static std::mutex m;
    return m;
}

inline void emit(Level lv, const std::string& msg) {
    if (int(lv) < int(threshold())) return;
    std::lock_guard<std::mutex> lock(mutex());
    std::cerr << (lv == Level::Warn ? "[warn] " : "[info] ") << msg << "\n";
}

} // namespace respicast::logging

namespace respicast {

inline void log_info(const std::string& msg) { logging::emit(logging::Level::Info, msg); }
inline void log_warn(const std::string& msg) { logging::emit(logging::Level::Warn, msg); }

} // namespace respicast
