#include "efbench/parallel.hpp"

#include <cstdlib>
#include <string>

namespace efbench {

namespace {
std::atomic<std::size_t> g_threads{0};
}

std::size_t default_threads() {
    if (const auto n = g_threads.load()) return n;
    if (const char* env = std::getenv("EFBENCH_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void set_default_threads(std::size_t n) { g_threads.store(n); }

}  // namespace efbench
