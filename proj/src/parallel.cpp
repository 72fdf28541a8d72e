#include "etsi/parallel.hpp"

namespace etsi {

namespace {
std::atomic<std::size_t> g_max_threads{0};
}

void set_max_threads(std::size_t n) { g_max_threads.store(n); }

std::size_t max_threads() {
  const std::size_t cap = g_max_threads.load();
  if (cap) return cap;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

}  // namespace etsi
