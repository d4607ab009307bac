#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ptbench::kernels {

// Execution policy for the batch-level kernels. Every parallel loop in this
// project is a map over independent outputs with a fixed per-output summation
// order, so results are bit-identical to the serial reference regardless of
// thread count. Reductions across items are always done serially in index
// order by the caller.
void set_parallel(bool enabled);
bool parallel_enabled();
void set_max_threads(int n);  // 0 = runtime default
int max_threads();

namespace detail {
void run_indexed(std::size_t n, void* ctx, void (*fn)(void*, std::size_t), bool parallel);
}

// Parallel map over [0, n): fn(i) must only write state owned by index i.
template <class F>
void parallel_for(std::size_t n, F&& fn) {
    auto thunk = [](void* ctx, std::size_t i) { (*static_cast<F*>(ctx))(i); };
    detail::run_indexed(n, &fn, thunk, parallel_enabled());
}

// Serial reference path, kept separate so tests and the benchmark can compare
// against it explicitly.
template <class F>
void serial_for(std::size_t n, F&& fn) {
    auto thunk = [](void* ctx, std::size_t i) { (*static_cast<F*>(ctx))(i); };
    detail::run_indexed(n, &fn, thunk, false);
}

// Dense primitives used by the model forward/backward. Single serial
// implementation: per-sequence math is inherently sequential and the matrices
// are small; parallelism lives at the batch level (see parallel_for users).
void matvec(std::span<const double> w, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> y);               // y = W x
void matvec_t_add(std::span<const double> w, std::size_t rows, std::size_t cols,
                  std::span<const double> u, std::span<double> x_grad);    // x_grad += W^T u
void outer_add(std::span<double> w_grad, std::size_t rows, std::size_t cols,
               std::span<const double> u, std::span<const double> x);      // W_grad += u x^T

// y += a * x over equal-length spans.
void axpy(double a, std::span<const double> x, std::span<double> y);

}  // namespace ptbench::kernels
