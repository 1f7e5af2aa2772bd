#ifndef VIDLINK_TESTS_SUPPORT_H_
#define VIDLINK_TESTS_SUPPORT_H_

#include <map>
#include <sstream>
#include <string>

#include "vidlink/scenario.h"

namespace vidlink::testing {

// Built-in scenario text with some keys replaced or added.
inline std::string DefaultTextWith(
    const std::map<std::string, std::string>& overrides) {
  std::istringstream in{std::string(PaperDefaultText())};
  std::map<std::string, std::string> pending = overrides;
  std::string out;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos && line[0] != '#') {
      const std::string key = line.substr(0, eq);
      if (auto it = pending.find(key); it != pending.end()) {
        line = key + " = " + it->second;
        pending.erase(it);
      }
    }
    out += line + "\n";
  }
  for (const auto& [key, value] : pending)
    out += key + " = " + value + "\n";
  return out;
}

inline Scenario DefaultWith(
    const std::map<std::string, std::string>& overrides) {
  return ParseScenario(DefaultTextWith(overrides), "test");
}

}  // namespace vidlink::testing

#endif  // VIDLINK_TESTS_SUPPORT_H_
