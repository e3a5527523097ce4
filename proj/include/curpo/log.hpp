/*
 Copyright 2026 The CuRPO Lab Authors
 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

#include <cstdlib>
#include <iostream>
#include <string>
#include <string_view>

namespace curpo::log {

enum class Level { Error = 0, Info = 1, Debug = 2 };

/// Verbosity from CURPO_LOG (error|info|debug); defaults to info.
inline Level threshold() {
  static const Level level = [] {
    const char* v = std::getenv("CURPO_LOG");
    if (!v) return Level::Info;
    const std::string_view s(v);
    if (s == "error") return Level::Error;
    if (s == "debug") return Level::Debug;
    return Level::Info;
  }();
  return level;
}

inline void write(Level lvl, std::string_view msg) {
  if (lvl > threshold()) return;
  static constexpr std::string_view names[] = {"error", "info", "debug"};
  std::cerr << "curpo[" << names[static_cast<int>(lvl)] << "] " << msg << '\n';
}

inline void error(std::string_view m) { write(Level::Error, m); }
inline void info(std::string_view m) { write(Level::Info, m); }
inline void debug(std::string_view m) { write(Level::Debug, m); }

}  // namespace curpo::log
