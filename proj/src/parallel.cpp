#include "wrecon/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>

namespace wrecon {
namespace {

int default_threads() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("WRECON_THREADS")) {
    try {
      const int cap = std::stoi(env);
      if (cap >= 1 && cap < n) n = cap;
    } catch (const std::exception&) {
      // ignore malformed values
    }
  }
  return n;
}

std::atomic<int> g_override{0};

}  // namespace

int thread_count() {
  const int o = g_override.load();
  if (o >= 1) return o;
  static const int n = default_threads();
  return n;
}

void set_thread_count(int n) { g_override.store(n >= 1 ? n : 0); }

}  // namespace wrecon
