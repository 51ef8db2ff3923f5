#include "qck/parallel.hpp"

#include <atomic>
#include <cstdlib>

#include <omp.h>

namespace qck {

namespace {

int initial_threads() noexcept {
    if (const char* env = std::getenv("QCK_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return omp_get_max_threads();
}

std::atomic<int>& thread_setting() noexcept {
    static std::atomic<int> n{initial_threads()};
    return n;
}

}  // namespace

int threads() noexcept { return thread_setting().load(std::memory_order_relaxed); }

void set_threads(int n) noexcept { thread_setting().store(n > 0 ? n : 1, std::memory_order_relaxed); }

}  // namespace qck
