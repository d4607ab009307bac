#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ptbench/rng.hpp"

namespace ptbench {

// Low-rank adapter on the linear layers (window mixer, both MLP matrices,
// output head). Effective delta per target is (alpha / rank) * A * B.
struct AdapterConfig {
    bool enabled = false;
    int rank = 16;
    double alpha = 32.0;

    double scale() const { return alpha / static_cast<double>(rank); }
};

struct ModelConfig {
    int vocab_size = 25;
    int context_len = 48;  // max prompt+response tokens (an internal bos slot is extra)
    int dims = 48;         // embedding width
    int hidden = 96;       // MLP hidden width
    int window = 17;       // causal window length mixed at each position
};

// Sum and per-token log-probabilities of a scored response.
struct SequenceLogProb {
    double total = 0.0;
    std::vector<double> per_token;
    int length = 0;  // response tokens only
};

// Named segment of the flat parameter vector; serialized into checkpoints.
struct ParamSegment {
    std::string name;
    std::size_t rows = 0, cols = 0, offset = 0;
    std::size_t size() const { return rows * cols; }
};

// A tiny deterministic autoregressive model over token sequences:
// embedding -> linear mix of a fixed causal window -> tanh -> MLP with
// residual -> tied output head with bias. All parameters live in one flat
// f64 vector so gradients, optimizer state, and checkpoints are trivial.
// Instances are immutable during scoring; concurrent read-only use is safe.
class ModelParams {
public:
    ModelParams(ModelConfig cfg, AdapterConfig adapter);

    static ModelParams zeros(ModelConfig cfg, AdapterConfig adapter = {});
    // Gaussian init (std init_std); adapter A matrices random, B zero so the
    // initial adapter delta is exactly zero.
    static ModelParams random_init(ModelConfig cfg, AdapterConfig adapter, std::uint64_t seed,
                                   double init_std = 0.08);

    const ModelConfig& config() const { return cfg_; }
    const AdapterConfig& adapter() const { return adapter_; }
    const std::vector<ParamSegment>& segments() const { return segments_; }

    std::span<double> flat() { return flat_; }
    std::span<const double> flat() const { return flat_; }
    std::size_t param_count() const { return flat_.size(); }

    std::vector<double> flatten() const { return flat_; }
    void unflatten(std::span<const double> values);

    // True for coordinates trained when the adapter is enabled (adapter
    // segments only); everything is trainable otherwise.
    bool is_trainable(std::size_t index) const;

    std::span<const double> segment(const std::string& name) const;
    std::span<double> segment(const std::string& name);

    std::uint64_t param_hash() const;

private:
    ModelConfig cfg_;
    AdapterConfig adapter_;
    std::vector<ParamSegment> segments_;
    std::vector<double> flat_;
    std::size_t adapter_begin_ = 0;  // flat index where adapter segments start
};

// Log-distribution over the next token given `context` (bos is implicit).
// Exponentials sum to 1 within 1e-6 by construction (stable log-softmax).
std::vector<double> next_logdist(const ModelParams& params, std::span<const int> context);

// Exact per-token log-probs of `response` conditioned on bos + prompt +
// preceding response tokens. Deterministic.
// Throws std::length_error when prompt+response exceeds context_len and
// std::domain_error on out-of-vocab tokens.
SequenceLogProb score_sequence(const ModelParams& params, std::span<const int> prompt,
                               std::span<const int> response);

// Analytic gradient of the weighted sum of response-token log-probs with
// respect to the flat parameter vector. weights empty = all ones (gradient of
// SequenceLogProb::total).
std::vector<double> grad_logprob_weighted(const ModelParams& params, std::span<const int> prompt,
                                          std::span<const int> response,
                                          std::span<const double> weights);
std::vector<double> grad_logprob(const ModelParams& params, std::span<const int> prompt,
                                 std::span<const int> response);

struct SampleOptions {
    double temperature = 1.0;
    bool greedy = false;
    int max_tokens = 24;
    int stop_token = -1;  // emitted and included in the output when reached
};

// Autoregressive sampling; identical seed => identical output. Greedy mode
// breaks argmax ties toward the lowest token id.
std::vector<int> sample(const ModelParams& params, std::span<const int> prompt,
                        const SampleOptions& opts, Rng& rng);

// Tabular bigram model built from transition counts; used as a brute-force
// oracle for the scoring interface. Unseen transitions score -inf.
class BigramModel {
public:
    BigramModel(int vocab_size);
    static BigramModel from_corpus(const std::vector<std::vector<int>>& sequences, int vocab_size);

    void add_transition(int prev, int next, double count = 1.0);
    // prev = -1 denotes the begin-of-sequence row.
    double logprob(int prev, int next) const;
    SequenceLogProb score_sequence(std::span<const int> prompt, std::span<const int> response) const;

private:
    int vocab_;
    std::vector<double> counts_;  // (vocab+1) x vocab; last row = bos
    std::size_t row(int prev) const;
};

// Batch scoring / gradient kernels. The parallel versions map over items with
// per-item outputs and a fixed per-item operation order, so they are
// bit-identical to the serial references at any thread count.
struct SeqRef {
    std::span<const int> prompt;
    std::span<const int> response;
};

void score_batch(const ModelParams& params, std::span<const SeqRef> items,
                 std::span<SequenceLogProb> out);
void score_batch_serial(const ModelParams& params, std::span<const SeqRef> items,
                        std::span<SequenceLogProb> out);

// out[i] is resized to the flat parameter count. token_weights may be empty
// (all ones) or hold one weight vector per item.
void grad_batch(const ModelParams& params, std::span<const SeqRef> items,
                std::span<const std::vector<double>> token_weights,
                std::span<std::vector<double>> out);
void grad_batch_serial(const ModelParams& params, std::span<const SeqRef> items,
                       std::span<const std::vector<double>> token_weights,
                       std::span<std::vector<double>> out);

// Checkpoint file: JSON header (config, adapter, segment manifest, config
// hash) followed by the flat parameter vector as little-endian f64.
void save_checkpoint(const std::string& path, const ModelParams& params,
                     std::uint64_t config_hash);
struct Checkpoint {
    ModelParams params;
    std::uint64_t config_hash;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ptbench
