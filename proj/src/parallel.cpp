#include "smd/parallel.hpp"

#include <atomic>

namespace smd {
namespace {
std::atomic<int> g_threads{1};
}

void set_threads(int n) { g_threads.store(n < 1 ? 1 : n); }
int threads() { return g_threads.load(); }

}  // namespace smd
