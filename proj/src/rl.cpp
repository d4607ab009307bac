#include "ptbench/rl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ptbench/kernels.hpp"
#include "ptbench/vocab.hpp"

namespace ptbench {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool finite_group(const RolloutGroup& g) {
    for (double a : g.advantages) {
        if (!std::isfinite(a)) return false;
    }
    for (const auto& c : g.completions) {
        if (!std::isfinite(c.reward)) return false;
        for (double v : c.old_logp) {
            if (!std::isfinite(v)) return false;
        }
        for (double v : c.new_logp) {
            if (!std::isfinite(v)) return false;
        }
    }
    return true;
}

double group_mean_reward(const RolloutGroup& g) {
    double s = 0.0;
    for (const auto& c : g.completions) s += c.reward;
    return g.completions.empty() ? 0.0 : s / static_cast<double>(g.completions.size());
}

double group_approx_kl(const RolloutGroup& g) {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& c : g.completions) {
        for (std::size_t t = 0; t < c.old_logp.size(); ++t) {
            const double d = c.old_logp[t] - c.new_logp[t];
            s += std::exp(d) - d - 1.0;
            ++n;
        }
    }
    return n == 0 ? 0.0 : s / static_cast<double>(n);
}

SurrogateResult nan_result(const RolloutGroup& g) {
    SurrogateResult res;
    res.loss = kNaN;
    res.token_coeffs.resize(g.completions.size());
    for (std::size_t i = 0; i < g.completions.size(); ++i) {
        res.token_coeffs[i].assign(g.completions[i].tokens.size(), 0.0);
    }
    res.diags.nan_flag = true;
    res.diags.approx_kl = kNaN;
    res.diags.mean_reward = group_mean_reward(g);
    return res;
}

void check_group(const RolloutGroup& g, const RLConfig& cfg) {
    cfg.validate();
    if (g.completions.size() != g.advantages.size()) {
        throw std::invalid_argument("rl: completions/advantages size mismatch");
    }
    for (const auto& c : g.completions) {
        if (c.old_logp.size() != c.tokens.size() || c.new_logp.size() != c.tokens.size()) {
            throw std::invalid_argument("rl: per-token log-prob size mismatch");
        }
    }
}
}  // namespace

void RLConfig::validate() const {
    if (group_size < 2) throw std::domain_error("RLConfig: group_size must be >= 2");
    if (!(clip_low < 1.0 && 1.0 < clip_high)) {
        throw std::domain_error("RLConfig: clip range must straddle 1");
    }
    if (variant != "sgrpo" && variant != "gspo" && variant != "cispo") {
        throw std::invalid_argument("RLConfig: unknown variant " + variant);
    }
}

std::vector<double> group_advantages(std::span<const double> rewards, double epsilon) {
    if (rewards.size() < 2) throw std::domain_error("group_advantages: need at least 2 rewards");
    const double n = static_cast<double>(rewards.size());
    double mean = 0.0;
    for (double r : rewards) mean += r / n;
    bool all_equal = true;
    for (double r : rewards) {
        if (r != rewards[0]) {
            all_equal = false;
            break;
        }
    }
    std::vector<double> adv(rewards.size(), 0.0);
    if (all_equal) return adv;  // degenerate group: exactly zero, not 0/eps
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean) / n;  // population variance
    const double denom = std::sqrt(var) + epsilon;
    for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / denom;
    return adv;
}

double approx_kl(std::span<const double> old_logps, std::span<const double> new_logps) {
    if (old_logps.size() != new_logps.size()) {
        throw std::domain_error("approx_kl: length mismatch");
    }
    if (old_logps.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < old_logps.size(); ++i) {
        if (!std::isfinite(old_logps[i]) || !std::isfinite(new_logps[i])) return kNaN;
        const double d = old_logps[i] - new_logps[i];
        s += std::exp(d) - d - 1.0;
    }
    return s / static_cast<double>(old_logps.size());
}

SurrogateResult sgrpo_surrogate(const RolloutGroup& group, const RLConfig& cfg) {
    check_group(group, cfg);
    if (!finite_group(group)) return nan_result(group);

    SurrogateResult res;
    res.token_coeffs.resize(group.completions.size());
    std::size_t total_tokens = 0, clipped = 0;
    for (const auto& c : group.completions) total_tokens += c.tokens.size();
    if (total_tokens == 0) return res;
    const double inv_t = 1.0 / static_cast<double>(total_tokens);

    for (std::size_t i = 0; i < group.completions.size(); ++i) {
        const auto& c = group.completions[i];
        const double a = group.advantages[i];
        auto& coeffs = res.token_coeffs[i];
        coeffs.assign(c.tokens.size(), 0.0);
        for (std::size_t t = 0; t < c.tokens.size(); ++t) {
            const double rho = std::exp(c.new_logp[t] - c.old_logp[t]);
            const double clipped_rho = std::clamp(rho, cfg.clip_low, cfg.clip_high);
            if (rho < cfg.clip_low || rho > cfg.clip_high) ++clipped;
            const double unclipped_term = rho * a;
            const double clipped_term = clipped_rho * a;
            // token-level clipped surrogate: -min(rho*A, clip(rho)*A)
            if (unclipped_term <= clipped_term) {
                res.loss -= inv_t * unclipped_term;
                coeffs[t] = -inv_t * rho * a;  // d(rho*A)/d(new_logp) = rho*A
            } else {
                res.loss -= inv_t * clipped_term;
                coeffs[t] = 0.0;  // clipped branch is constant in new_logp
            }
        }
    }
    res.diags.clip_fraction = static_cast<double>(clipped) / static_cast<double>(total_tokens);
    res.diags.approx_kl = group_approx_kl(group);
    res.diags.mean_reward = group_mean_reward(group);
    return res;
}

SurrogateResult gspo_surrogate(const RolloutGroup& group, const RLConfig& cfg) {
    check_group(group, cfg);
    if (!finite_group(group)) return nan_result(group);

    SurrogateResult res;
    res.token_coeffs.resize(group.completions.size());
    const std::size_t n = group.completions.size();
    if (n == 0) return res;
    const double inv_n = 1.0 / static_cast<double>(n);
    std::size_t clipped = 0;

    for (std::size_t i = 0; i < n; ++i) {
        const auto& c = group.completions[i];
        const double a = group.advantages[i];
        auto& coeffs = res.token_coeffs[i];
        coeffs.assign(c.tokens.size(), 0.0);
        if (c.tokens.empty()) continue;
        const double len = static_cast<double>(c.tokens.size());
        double gap = 0.0;
        for (std::size_t t = 0; t < c.tokens.size(); ++t) gap += c.new_logp[t] - c.old_logp[t];
        // sequence-level ratio: geometric mean of the per-token ratios
        const double s = std::exp(gap / len);
        const double clipped_s = std::clamp(s, cfg.clip_low, cfg.clip_high);
        if (s < cfg.clip_low || s > cfg.clip_high) ++clipped;
        const double unclipped_term = s * a;
        const double clipped_term = clipped_s * a;
        if (unclipped_term <= clipped_term) {
            res.loss -= inv_n * unclipped_term;
            const double coeff = -inv_n * s * a / len;  // ds/d(new_logp_t) = s/len
            for (std::size_t t = 0; t < c.tokens.size(); ++t) coeffs[t] = coeff;
        } else {
            res.loss -= inv_n * clipped_term;
        }
    }
    res.diags.clip_fraction = static_cast<double>(clipped) / static_cast<double>(n);
    res.diags.approx_kl = group_approx_kl(group);
    res.diags.mean_reward = group_mean_reward(group);
    return res;
}

SurrogateResult cispo_surrogate(const RolloutGroup& group, const RLConfig& cfg) {
    check_group(group, cfg);
    if (!finite_group(group)) return nan_result(group);

    SurrogateResult res;
    res.token_coeffs.resize(group.completions.size());
    std::size_t total_tokens = 0, clipped = 0;
    for (const auto& c : group.completions) total_tokens += c.tokens.size();
    if (total_tokens == 0) return res;
    const double inv_t = 1.0 / static_cast<double>(total_tokens);

    for (std::size_t i = 0; i < group.completions.size(); ++i) {
        const auto& c = group.completions[i];
        const double a = group.advantages[i];
        auto& coeffs = res.token_coeffs[i];
        coeffs.assign(c.tokens.size(), 0.0);
        for (std::size_t t = 0; t < c.tokens.size(); ++t) {
            const double rho = std::exp(c.new_logp[t] - c.old_logp[t]);
            if (rho < cfg.clip_low || rho > cfg.clip_high) ++clipped;
            // REINFORCE carrier weighted by the clipped ratio held constant
            const double w = std::clamp(rho, cfg.clip_low, cfg.clip_high);
            res.loss -= inv_t * w * a * c.new_logp[t];
            coeffs[t] = -inv_t * w * a;
        }
    }
    res.diags.clip_fraction = static_cast<double>(clipped) / static_cast<double>(total_tokens);
    res.diags.approx_kl = group_approx_kl(group);
    res.diags.mean_reward = group_mean_reward(group);
    return res;
}

RLObjective rl_objective(const ModelParams& params, RolloutGroup& group, const RLConfig& cfg) {
    cfg.validate();
    // refresh new log-probs under the current policy
    for (auto& c : group.completions) {
        c.new_logp = score_sequence(params, group.prompt, c.tokens).per_token;
    }
    SurrogateResult sur;
    if (cfg.variant == "sgrpo") {
        sur = sgrpo_surrogate(group, cfg);
    } else if (cfg.variant == "gspo") {
        sur = gspo_surrogate(group, cfg);
    } else {
        sur = cispo_surrogate(group, cfg);
    }

    RLObjective out;
    out.loss = sur.loss;
    out.diags = sur.diags;
    out.grad.assign(params.param_count(), 0.0);
    if (sur.diags.nan_flag) return out;  // gradient suppressed for the group

    bool all_zero = true;
    for (const auto& coeffs : sur.token_coeffs) {
        for (double c : coeffs) {
            if (c != 0.0) {
                all_zero = false;
                break;
            }
        }
        if (!all_zero) break;
    }
    if (all_zero) return out;  // degenerate groups contribute an exactly-zero gradient

    std::vector<SeqRef> items;
    std::vector<std::vector<double>> weights;
    for (std::size_t i = 0; i < group.completions.size(); ++i) {
        items.push_back({group.prompt, group.completions[i].tokens});
        weights.push_back(sur.token_coeffs[i]);
    }
    std::vector<std::vector<double>> grads(items.size());
    grad_batch(params, items, weights, grads);
    for (const auto& g : grads) kernels::axpy(1.0, g, out.grad);
    return out;
}

std::vector<RolloutGroup> rollout(const ModelParams& params, std::span<const Problem> problems,
                                  const RLConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    std::vector<RolloutGroup> groups(problems.size());
    SampleOptions opts;
    opts.temperature = cfg.temperature;
    opts.max_tokens = cfg.max_rollout_tokens;
    opts.stop_token = vocab::kEos;

    kernels::parallel_for(problems.size(), [&](std::size_t i) {
        const Problem& prob = problems[i];
        RolloutGroup g;
        g.problem_id = prob.id;
        g.prompt = prob.prompt;
        std::vector<double> rewards;
        for (int j = 0; j < cfg.group_size; ++j) {
            Rng rng(mix_seed(seed, prob.id, static_cast<std::uint64_t>(j)));
            Completion c;
            c.tokens = sample(params, prob.prompt, opts, rng);
            c.reward = verify_answer(c.tokens, prob) ? 1.0 : 0.0;
            c.old_logp = score_sequence(params, prob.prompt, c.tokens).per_token;
            c.new_logp = c.old_logp;
            rewards.push_back(c.reward);
            g.completions.push_back(std::move(c));
        }
        g.advantages = group_advantages(rewards, cfg.adv_epsilon);
        groups[i] = std::move(g);
    });
    return groups;
}

bool PathologyMonitor::record(double clip_fraction) {
    if (clip_fraction > threshold_) {
        if (++run_ >= consecutive_) fired_ = true;
    } else {
        run_ = 0;
    }
    return fired_;
}

}  // namespace ptbench
