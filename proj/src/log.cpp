#include "adedgedrop/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace adedgedrop::log {
namespace {
std::atomic<bool> g_quiet{false};
std::mutex g_mutex;
}  // namespace

void warn(std::string_view msg) {
  if (g_quiet.load(std::memory_order_relaxed)) return;
  std::lock_guard<std::mutex> lock(g_mutex);
  std::cerr << "warning: " << msg << '\n';
}

void set_quiet(bool q) { g_quiet.store(q, std::memory_order_relaxed); }
bool quiet() { return g_quiet.load(std::memory_order_relaxed); }

}  // namespace adedgedrop::log
