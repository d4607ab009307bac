// Serial vs OpenMP throughput comparison for the batch kernels
// (sequence scoring, per-sequence gradients, greedy evaluation).

#include <chrono>
#include <cstdio>
#include <vector>

#include "ptbench/evaluator.hpp"
#include "ptbench/kernels.hpp"
#include "ptbench/model.hpp"
#include "ptbench/taskdata.hpp"

using namespace ptbench;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <class F>
double time_best_of(int reps, F&& fn) {
    double best = 1e30;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = Clock::now();
        fn();
        best = std::min(best, seconds_since(t0));
    }
    return best;
}

}  // namespace

int main(int argc, char** argv) {
    int n_problems = 256;
    int reps = 3;
    if (argc > 1) n_problems = std::atoi(argv[1]);
    if (argc > 2) reps = std::atoi(argv[2]);

    ModelConfig mc;
    auto params = ModelParams::random_init(mc, {}, 1234);
    auto problems = generate_problems(7, n_problems, difficulty_from_name("mix12"), Split::train);

    std::vector<SeqRef> items;
    for (const auto& p : problems) items.push_back({p.prompt, p.gold_response});
    std::vector<SequenceLogProb> scores(items.size());
    std::vector<std::vector<double>> grads(items.size());

    std::printf("batch kernels, %d sequences, best of %d (threads: %d)\n", n_problems, reps,
                kernels::max_threads());
    std::printf("%-18s %12s %12s %9s\n", "kernel", "serial (s)", "openmp (s)", "speedup");

    const double score_serial =
        time_best_of(reps, [&] { score_batch_serial(params, items, scores); });
    const double score_par = time_best_of(reps, [&] { score_batch(params, items, scores); });
    std::printf("%-18s %12.4f %12.4f %8.2fx\n", "score_batch", score_serial, score_par,
                score_serial / score_par);

    const double grad_serial =
        time_best_of(reps, [&] { grad_batch_serial(params, items, {}, grads); });
    const double grad_par = time_best_of(reps, [&] { grad_batch(params, items, {}, grads); });
    std::printf("%-18s %12.4f %12.4f %8.2fx\n", "grad_batch", grad_serial, grad_par,
                grad_serial / grad_par);

    const double eval_serial = time_best_of(reps, [&] { evaluate_serial(params, problems); });
    const double eval_par = time_best_of(reps, [&] { evaluate(params, problems); });
    std::printf("%-18s %12.4f %12.4f %8.2fx\n", "evaluate", eval_serial, eval_par,
                eval_serial / eval_par);

    // parity check: the parallel kernels must be bit-identical to serial
    std::vector<SequenceLogProb> a(items.size()), b(items.size());
    score_batch_serial(params, items, a);
    score_batch(params, items, b);
    bool identical = true;
    for (std::size_t i = 0; i < items.size(); ++i) {
        identical = identical && a[i].total == b[i].total;
    }
    std::printf("serial/parallel bit-identical: %s\n", identical ? "yes" : "NO");
    return identical ? 0 : 1;
}
