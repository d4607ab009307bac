#include "ptbench/kernels.hpp"

#include <omp.h>

#include <atomic>
#include <cassert>
#include <cstdlib>

namespace ptbench::kernels {

namespace {
std::atomic<bool> g_parallel{true};
std::atomic<int> g_max_threads{0};

bool env_serial() {
    const char* v = std::getenv("PTBENCH_SERIAL");
    return v != nullptr && v[0] == '1';
}
const bool g_env_serial = env_serial();
}  // namespace

void set_parallel(bool enabled) { g_parallel.store(enabled, std::memory_order_relaxed); }

bool parallel_enabled() {
    return g_parallel.load(std::memory_order_relaxed) && !g_env_serial;
}

void set_max_threads(int n) { g_max_threads.store(n, std::memory_order_relaxed); }

int max_threads() {
    int n = g_max_threads.load(std::memory_order_relaxed);
    return n > 0 ? n : omp_get_max_threads();
}

namespace detail {
void run_indexed(std::size_t n, void* ctx, void (*fn)(void*, std::size_t), bool parallel) {
    if (parallel && n > 1) {
        const int threads = max_threads();
#pragma omp parallel for schedule(static) num_threads(threads)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
            fn(ctx, static_cast<std::size_t>(i));
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) fn(ctx, i);
    }
}
}  // namespace detail

void matvec(std::span<const double> w, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> y) {
    assert(w.size() == rows * cols && x.size() == cols && y.size() == rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* wr = w.data() + r * cols;
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
        y[r] = acc;
    }
}

void matvec_t_add(std::span<const double> w, std::size_t rows, std::size_t cols,
                  std::span<const double> u, std::span<double> x_grad) {
    assert(w.size() == rows * cols && u.size() == rows && x_grad.size() == cols);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* wr = w.data() + r * cols;
        const double ur = u[r];
        for (std::size_t c = 0; c < cols; ++c) x_grad[c] += ur * wr[c];
    }
}

void outer_add(std::span<double> w_grad, std::size_t rows, std::size_t cols,
               std::span<const double> u, std::span<const double> x) {
    assert(w_grad.size() == rows * cols && u.size() == rows && x.size() == cols);
    for (std::size_t r = 0; r < rows; ++r) {
        double* gr = w_grad.data() + r * cols;
        const double ur = u[r];
        for (std::size_t c = 0; c < cols; ++c) gr[c] += ur * x[c];
    }
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
    assert(x.size() == y.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

}  // namespace ptbench::kernels
