// Test-side oracles: finite-difference gradient checks and small reference
// computations kept independent of the implementation paths they verify.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "ptbench/losses.hpp"
#include "ptbench/model.hpp"
#include "ptbench/rng.hpp"

namespace oracles {

inline double rel_error(double a, double b) {
    const double scale = std::max({std::fabs(a), std::fabs(b), 1e-3});
    return std::fabs(a - b) / scale;
}

// Central finite difference d f / d theta_i at step h.
inline double central_diff(const std::function<double(double)>& f_of_shift, double h = 1e-4) {
    return (f_of_shift(h) - f_of_shift(-h)) / (2.0 * h);
}

// Worst relative error between the analytic model gradient and central
// differences on `n_coords` coordinates drawn by `rng`.
inline double check_model_grad(const ptbench::ModelParams& params, const std::vector<int>& prompt,
                               const std::vector<int>& response,
                               const std::vector<double>& weights, ptbench::Rng& rng,
                               int n_coords = 32, double h = 1e-4) {
    auto grad = ptbench::grad_logprob_weighted(params, prompt, response, weights);
    double worst = 0.0;
    for (int c = 0; c < n_coords; ++c) {
        const std::size_t i = rng.below(params.param_count());
        auto f = [&](double shift) {
            ptbench::ModelParams p = params;
            p.flat()[i] += shift;
            auto s = ptbench::score_sequence(p, prompt, response);
            if (weights.empty()) return s.total;
            double acc = 0.0;
            for (std::size_t t = 0; t < s.per_token.size(); ++t) {
                acc += weights[t] * s.per_token[t];
            }
            return acc;
        };
        worst = std::max(worst, rel_error(central_diff(f, h), grad[i]));
    }
    return worst;
}

// Worst relative error of a loss's policy gradients vs central differences
// over every pair and both policy fields.
inline double check_loss_grad(const ptbench::PreferenceBatch& batch, const ptbench::LossSpec& spec,
                              double h = 1e-4) {
    const auto out = ptbench::variant_loss(batch, spec);
    double worst = 0.0;
    for (std::size_t i = 0; i < batch.pairs.size(); ++i) {
        for (int field = 0; field < 2; ++field) {
            auto f = [&](double shift) {
                ptbench::PreferenceBatch b = batch;
                if (field == 0) {
                    b.pairs[i].policy_chosen += shift;
                } else {
                    b.pairs[i].policy_rejected += shift;
                }
                return ptbench::variant_loss(b, spec).value;
            };
            const double analytic =
                field == 0 ? out.d_policy_chosen[i] : out.d_policy_rejected[i];
            worst = std::max(worst, rel_error(central_diff(f, h), analytic));
        }
    }
    return worst;
}

// Random preference batch over realistic log-prob ranges.
inline ptbench::PreferenceBatch random_batch(ptbench::Rng& rng, std::size_t n, bool with_ref = true) {
    ptbench::PreferenceBatch batch;
    batch.has_ref = with_ref;
    for (std::size_t i = 0; i < n; ++i) {
        ptbench::PreferenceExample ex;
        ex.policy_chosen = -0.2 - 7.8 * rng.uniform();
        ex.policy_rejected = -0.2 - 7.8 * rng.uniform();
        ex.ref_chosen = with_ref ? -0.2 - 7.8 * rng.uniform() : 0.0;
        ex.ref_rejected = with_ref ? -0.2 - 7.8 * rng.uniform() : 0.0;
        ex.len_chosen = 1 + static_cast<int>(rng.below(8));
        ex.len_rejected = 1 + static_cast<int>(rng.below(8));
        batch.pairs.push_back(ex);
    }
    return batch;
}

}  // namespace oracles
