#pragma once

namespace qck {

// Thread count used by all OpenMP kernels. Defaults to QCK_THREADS when set,
// otherwise to the OpenMP runtime default. One thread gives bitwise
// reproducible output for every operation.
int threads() noexcept;
void set_threads(int n) noexcept;

// Restores the previous thread count on scope exit.
class ThreadScope {
public:
    explicit ThreadScope(int n) noexcept : previous_(threads()) { set_threads(n); }
    ~ThreadScope() { set_threads(previous_); }
    ThreadScope(const ThreadScope&) = delete;
    ThreadScope& operator=(const ThreadScope&) = delete;

private:
    int previous_;
};

}  // namespace qck
