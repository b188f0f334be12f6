#include "spatialdiar/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace spatialdiar {
namespace {

std::atomic<bool> g_enabled{true};

}  // namespace

void log_warning(std::string_view message) {
  if (!g_enabled.load()) return;
  static std::mutex m;
  std::lock_guard lock(m);
  std::cerr << "warning: " << message << '\n';
}

void set_warnings_enabled(bool enabled) { g_enabled.store(enabled); }

}  // namespace spatialdiar
