#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ptbench/losses.hpp"
#include "ptbench/model.hpp"
#include "ptbench/rl.hpp"
#include "ptbench/taskdata.hpp"

namespace ptbench {

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.95;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

struct TrainConfig {
    std::string algorithm = "dpo";  // loss-registry id or sgrpo/gspo/cispo
    LossSpec loss;
    RLConfig rl;

    double peak_lr = 2e-3;
    double warmup_fraction = 0.1;
    int epochs = 3;
    int micro_batch = 1;
    int grad_accum = 8;
    std::uint64_t seed = 42;
    bool propagate_seed_to_sampler = true;
    std::uint64_t sampler_base_seed = 0;  // sampler default seed; runs share it unless propagated
    AdapterConfig adapter;
    AdamWConfig adamw;

    ModelConfig model;
    int train_problems = 512;
    int test_problems = 256;
    std::string difficulty = "mix12";
    std::uint64_t data_seed = 7;
    int samples_per_prompt = 4;
    double selfplay_temperature = 1.0;
    int rl_prompts_per_step = 8;
    int updates_per_batch = 1;
    std::string init_checkpoint;  // empty = random init from init_seed
    std::uint64_t init_seed = 1234;
    double max_skip_fraction = 0.1;

    bool is_rl() const {
        return algorithm == "sgrpo" || algorithm == "gspo" || algorithm == "cispo";
    }
};

// Canonical flat key-value serialization (sorted keys, "key: value" lines).
// The config hash is a pure function of this text.
std::string config_to_text(const TrainConfig& cfg);
TrainConfig config_from_text(const std::string& text);
void apply_override(TrainConfig& cfg, const std::string& key, const std::string& value);
std::uint64_t config_hash(const TrainConfig& cfg);

// Cosine schedule with linear warmup: 0 -> peak over the warmup span, then
// peak * 0.5 * (1 + cos(pi * progress)) down to 0 at total_steps.
double lr_at(long step, long total_steps, const TrainConfig& cfg);

struct AdamWState {
    std::vector<double> m, v;
    long step = 0;
};

// One decoupled-weight-decay update with bias correction. Returns false and
// leaves params/state untouched when any gradient entry is non-finite.
// Coordinates with trainable_mask[i] == 0 are frozen (empty mask = all
// trainable).
bool adamw_step(std::span<double> params, std::span<const double> grads, AdamWState& state,
                double lr, const AdamWConfig& cfg,
                std::span<const std::uint8_t> trainable_mask = {});

struct StepRecord {
    long step = 0;
    int epoch = 0;
    double lr = 0.0;
    double loss = 0.0;
    bool skipped = false;
    // RL diagnostics (NaN for offline steps)
    double mean_reward = 0.0;
    double clip_fraction = 0.0;
    double approx_kl = 0.0;
    bool nan_flag = false;
};

struct RunManifest {
    std::uint64_t config_hash = 0;
    std::vector<StepRecord> metrics;
    std::string final_checkpoint;
    double wall_clock_seconds = 0.0;
    std::uint64_t param_hash = 0;
    bool pathological = false;
    std::string pathology_reason;
    std::vector<std::vector<std::size_t>> epoch_permutations;
    std::vector<std::uint64_t> epoch_permutation_hashes;
    long skipped_steps = 0;
    long total_steps = 0;
};

std::string manifest_to_json(const RunManifest& m);

struct Dataset {
    std::vector<Problem> train_problems;
    std::vector<PreferencePair> pairs;  // unused for sft and RL
};

struct TrainResult {
    ModelParams params;
    RunManifest manifest;
};

// Runs the shared training loop for any registered algorithm. The data
// pipeline (epoch permutations, batch composition) depends only on
// (seed, propagate flag, item count), never on the loss. Bit-reproducible
// for a fixed (config, seed). Non-finite losses skip the step; more than
// max_skip_fraction skipped steps aborts with a pathology verdict instead of
// crashing.
TrainResult train(const TrainConfig& cfg, const Dataset& data, const ModelParams& init,
                  const LossRegistry& registry = LossRegistry::global());

// Convenience: build the dataset (problems + self-play pairs from the init
// policy) the way sweeps do.
Dataset build_dataset(const TrainConfig& cfg, const ModelParams& init);

}  // namespace ptbench
