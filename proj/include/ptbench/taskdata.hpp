#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ptbench/model.hpp"
#include "ptbench/rng.hpp"

namespace ptbench {

enum class Split { train, test };

// Operations applied step by step to a running two-digit value. Operands are
// chosen so no step ever carries or borrows across the digit boundary, which
// keeps every intermediate in [10, 99] and the task learnable at this scale.
enum class Op { add, sub, mul };

struct ProblemStep {
    Op op;
    int operand;  // single digit
};

struct Problem {
    std::uint64_t id = 0;
    std::vector<int> prompt;
    long long gold_answer = 0;
    std::vector<int> gold_response;  // worked solution ending in "#### <answer>" + eos
    int start_value = 0;
    std::vector<ProblemStep> steps;
    Split split = Split::train;
};

struct Difficulty {
    int min_steps = 1;
    int max_steps = 2;
};

// Named difficulty levels: "1step", "2step", "3step", "mix12".
Difficulty difficulty_from_name(const std::string& name);

// Deterministic problem generation. Train and test splits are disjoint by
// construction: they draw the start operand from complementary digit-sum
// parity classes, so no operand tuple can appear in both.
std::vector<Problem> generate_problems(std::uint64_t seed, int count, Difficulty difficulty,
                                       Split split);

// True exact-match reward: strict extraction of the completion equals the
// gold answer.
bool verify_answer(const std::vector<int>& completion, const Problem& problem);

enum class Provenance { self_play_correct, self_play_incorrect, gold };

struct PreferencePair {
    std::uint64_t problem_id = 0;
    std::vector<int> chosen;
    std::vector<int> rejected;
    Provenance chosen_provenance = Provenance::self_play_correct;
    Provenance rejected_provenance = Provenance::self_play_incorrect;
};

// Self-play pair construction: sample `samples_per_prompt` completions per
// problem, pair the first verified-correct one with the first incorrect one.
// No correct sample -> gold response stands in as chosen. No incorrect
// sample -> the problem is skipped. Deterministic given the rng state.
std::vector<PreferencePair> build_pairs(const std::vector<Problem>& problems,
                                        const ModelParams& params, int samples_per_prompt,
                                        Rng& rng, double temperature = 1.0);

// Single-problem variant; nullopt when no incorrect sample exists.
// Sample j of problem p draws from stream mix(seed_base, p.id, j).
std::optional<PreferencePair> build_pair_for(const Problem& problem, const ModelParams& params,
                                             int samples_per_prompt, std::uint64_t seed_base,
                                             double temperature = 1.0);

// Data-order sampling with the seed-propagation toggle. With
// propagate_run_seed off the permutation depends on (shuffle_seed, epoch)
// only, reproducing the sampler bug where every run sees identical batches
// regardless of its training seed.
struct SamplerState {
    int epoch = 0;
    std::uint64_t shuffle_seed = 0;
    bool propagate_run_seed = true;
};

std::vector<std::size_t> epoch_order(std::size_t n_items, const SamplerState& state,
                                     std::uint64_t run_seed);

// JSONL serialization (one object per line, stable field names).
std::string problems_to_jsonl(const std::vector<Problem>& problems);
std::vector<Problem> problems_from_jsonl(const std::string& text);
std::string pairs_to_jsonl(const std::vector<PreferencePair>& pairs);
std::vector<PreferencePair> pairs_from_jsonl(const std::string& text);

}  // namespace ptbench
