#include "reasonrec/log.hpp"

#include <atomic>
#include <chrono>
#include <iostream>
#include <mutex>

#include "reasonrec/error.hpp"

namespace reasonrec::log {

namespace {
std::atomic<Level> g_level{Level::warn};
std::mutex g_mu;

const char* name_of(Level l) {
  switch (l) {
    case Level::debug: return "debug";
    case Level::info: return "info";
    case Level::warn: return "warn";
    case Level::error: return "error";
    case Level::off: return "off";
  }
  return "?";
}
}  // namespace

void set_level(Level level) { g_level = level; }
Level level() { return g_level; }

Level parse_level(std::string_view name) {
  for (auto l : {Level::debug, Level::info, Level::warn, Level::error, Level::off}) {
    if (name == name_of(l)) return l;
  }
  throw ConfigError("log-level", "unknown level '" + std::string(name) + "'");
}

void write(Level lvl, std::string_view msg, const nlohmann::json& fields) {
  if (lvl < g_level.load()) return;
  nlohmann::json rec = {
      {"ts_ms", std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::system_clock::now().time_since_epoch())
                    .count()},
      {"level", name_of(lvl)},
      {"msg", msg}};
  if (fields.is_object()) {
    for (auto it = fields.begin(); it != fields.end(); ++it) rec[it.key()] = it.value();
  }
  std::lock_guard lock(g_mu);
  std::cerr << rec.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
}

}  // namespace reasonrec::log
