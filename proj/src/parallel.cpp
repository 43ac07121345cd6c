#include "scgfm/parallel.hpp"

#include <algorithm>
#include <atomic>

namespace scgfm {

namespace {
std::atomic<int> g_threads{1};
}

int get_threads() { return std::max(1, g_threads.load()); }

void set_threads(int n) { g_threads.store(std::max(1, n)); }

}  // namespace scgfm
