#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ptbench/model.hpp"
#include "ptbench/taskdata.hpp"

namespace ptbench {

struct RLConfig {
    int group_size = 4;          // n completions per prompt
    double kl_coeff = 0.0;       // diagnostic-only by default
    double clip_low = 0.8;
    double clip_high = 1.2;
    std::string variant = "sgrpo";  // sgrpo | gspo | cispo
    int max_rollout_tokens = 24;
    double temperature = 1.0;
    double adv_epsilon = 1e-8;

    void validate() const;
};

struct Completion {
    std::vector<int> tokens;
    double reward = 0.0;
    std::vector<double> old_logp;  // per token, snapshotted at generation time
    std::vector<double> new_logp;  // per token, under the current policy
};

struct RolloutGroup {
    std::uint64_t problem_id = 0;
    std::vector<int> prompt;
    std::vector<Completion> completions;
    std::vector<double> advantages;
};

struct RLDiagnostics {
    double clip_fraction = 0.0;
    double approx_kl = 0.0;
    bool nan_flag = false;
    double mean_reward = 0.0;
};

// Group-normalized advantages: (r - mean) / (population std + epsilon).
// All-equal rewards produce exactly zero advantages rather than 0/eps noise.
std::vector<double> group_advantages(std::span<const double> rewards, double epsilon = 1e-8);

// Non-negative KL estimator mean(exp(d) - d - 1) with d = old - new.
// Returns NaN when any input is non-finite.
double approx_kl(std::span<const double> old_logps, std::span<const double> new_logps);

// Surrogate value, per-token d(loss)/d(new_logp) coefficients, and
// diagnostics, computed from the group's old/new log-probs and advantages.
struct SurrogateResult {
    double loss = 0.0;
    std::vector<std::vector<double>> token_coeffs;  // per completion, per token
    RLDiagnostics diags;
};

SurrogateResult sgrpo_surrogate(const RolloutGroup& group, const RLConfig& cfg);
SurrogateResult gspo_surrogate(const RolloutGroup& group, const RLConfig& cfg);
SurrogateResult cispo_surrogate(const RolloutGroup& group, const RLConfig& cfg);

// Full objective through the model: refreshes new_logp under `params`, runs
// the surrogate for cfg.variant, and chains the token coefficients into a
// flat parameter gradient. Non-finite inputs set nan_flag and suppress the
// group's gradient.
struct RLObjective {
    double loss = 0.0;
    std::vector<double> grad;
    RLDiagnostics diags;
};

RLObjective rl_objective(const ModelParams& params, RolloutGroup& group, const RLConfig& cfg);

// n completions per prompt with rewards from the task verifier and old
// log-probs snapshotted at generation time. Deterministic given the seed;
// prompts are processed in parallel with per-completion derived rng streams.
std::vector<RolloutGroup> rollout(const ModelParams& params, std::span<const Problem> problems,
                                  const RLConfig& cfg, std::uint64_t seed);

// Sustained-high-clip-fraction detector for the failure signature where most
// importance ratios leave the trust region (clip fraction 0.7+ for several
// consecutive steps).
class PathologyMonitor {
public:
    PathologyMonitor(double threshold = 0.7, int consecutive = 3)
        : threshold_(threshold), consecutive_(consecutive) {}
    bool record(double clip_fraction);  // returns true once fired
    bool fired() const { return fired_; }

private:
    double threshold_;
    int consecutive_;
    int run_ = 0;
    bool fired_ = false;
};

}  // namespace ptbench
