#include "ptbench/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ptbench/kernels.hpp"

namespace ptbench {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Config serialization

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("config: bad boolean '" + v + "'");
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

}  // namespace

std::string config_to_text(const TrainConfig& cfg) {
    std::map<std::string, std::string> kv;
    kv["algorithm"] = cfg.algorithm;
    kv["loss.beta"] = fmt_double(cfg.loss.beta);
    kv["loss.gamma"] = fmt_double(cfg.loss.gamma);
    for (const auto& [k, v] : cfg.loss.params) kv["loss.param." + k] = fmt_double(v);
    for (const auto& [k, v] : cfg.loss.links) kv["loss.link." + k] = v;
    kv["rl.group_size"] = std::to_string(cfg.rl.group_size);
    kv["rl.kl_coeff"] = fmt_double(cfg.rl.kl_coeff);
    kv["rl.clip_low"] = fmt_double(cfg.rl.clip_low);
    kv["rl.clip_high"] = fmt_double(cfg.rl.clip_high);
    kv["rl.max_rollout_tokens"] = std::to_string(cfg.rl.max_rollout_tokens);
    kv["rl.temperature"] = fmt_double(cfg.rl.temperature);
    kv["peak_lr"] = fmt_double(cfg.peak_lr);
    kv["warmup_fraction"] = fmt_double(cfg.warmup_fraction);
    kv["epochs"] = std::to_string(cfg.epochs);
    kv["micro_batch"] = std::to_string(cfg.micro_batch);
    kv["grad_accum"] = std::to_string(cfg.grad_accum);
    kv["seed"] = std::to_string(cfg.seed);
    kv["propagate_seed_to_sampler"] = cfg.propagate_seed_to_sampler ? "true" : "false";
    kv["sampler_base_seed"] = std::to_string(cfg.sampler_base_seed);
    kv["adapter.enabled"] = cfg.adapter.enabled ? "true" : "false";
    kv["adapter.rank"] = std::to_string(cfg.adapter.rank);
    kv["adapter.alpha"] = fmt_double(cfg.adapter.alpha);
    kv["adamw.beta1"] = fmt_double(cfg.adamw.beta1);
    kv["adamw.beta2"] = fmt_double(cfg.adamw.beta2);
    kv["adamw.eps"] = fmt_double(cfg.adamw.eps);
    kv["adamw.weight_decay"] = fmt_double(cfg.adamw.weight_decay);
    kv["model.vocab_size"] = std::to_string(cfg.model.vocab_size);
    kv["model.context_len"] = std::to_string(cfg.model.context_len);
    kv["model.dims"] = std::to_string(cfg.model.dims);
    kv["model.hidden"] = std::to_string(cfg.model.hidden);
    kv["model.window"] = std::to_string(cfg.model.window);
    kv["train_problems"] = std::to_string(cfg.train_problems);
    kv["test_problems"] = std::to_string(cfg.test_problems);
    kv["difficulty"] = cfg.difficulty;
    kv["data_seed"] = std::to_string(cfg.data_seed);
    kv["samples_per_prompt"] = std::to_string(cfg.samples_per_prompt);
    kv["selfplay_temperature"] = fmt_double(cfg.selfplay_temperature);
    kv["rl_prompts_per_step"] = std::to_string(cfg.rl_prompts_per_step);
    kv["updates_per_batch"] = std::to_string(cfg.updates_per_batch);
    kv["init_checkpoint"] = cfg.init_checkpoint;
    kv["init_seed"] = std::to_string(cfg.init_seed);
    kv["max_skip_fraction"] = fmt_double(cfg.max_skip_fraction);

    std::ostringstream out;
    for (const auto& [k, v] : kv) out << k << ": " << v << '\n';
    return out.str();
}

void apply_override(TrainConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "algorithm") {
        cfg.algorithm = value;
        if (!cfg.is_rl()) cfg.loss.variant = value;
        if (cfg.is_rl()) cfg.rl.variant = value;
    } else if (key == "loss.beta") {
        cfg.loss.beta = std::stod(value);
    } else if (key == "loss.gamma") {
        cfg.loss.gamma = std::stod(value);
    } else if (key.starts_with("loss.param.")) {
        cfg.loss.params[key.substr(11)] = std::stod(value);
    } else if (key.starts_with("loss.link.")) {
        cfg.loss.links[key.substr(10)] = value;
    } else if (key == "rl.group_size") {
        cfg.rl.group_size = std::stoi(value);
    } else if (key == "rl.kl_coeff") {
        cfg.rl.kl_coeff = std::stod(value);
    } else if (key == "rl.clip_low") {
        cfg.rl.clip_low = std::stod(value);
    } else if (key == "rl.clip_high") {
        cfg.rl.clip_high = std::stod(value);
    } else if (key == "rl.max_rollout_tokens") {
        cfg.rl.max_rollout_tokens = std::stoi(value);
    } else if (key == "rl.temperature") {
        cfg.rl.temperature = std::stod(value);
    } else if (key == "peak_lr") {
        cfg.peak_lr = std::stod(value);
    } else if (key == "warmup_fraction") {
        cfg.warmup_fraction = std::stod(value);
    } else if (key == "epochs") {
        cfg.epochs = std::stoi(value);
    } else if (key == "micro_batch") {
        cfg.micro_batch = std::stoi(value);
    } else if (key == "grad_accum") {
        cfg.grad_accum = std::stoi(value);
    } else if (key == "seed") {
        cfg.seed = std::stoull(value);
    } else if (key == "propagate_seed_to_sampler") {
        cfg.propagate_seed_to_sampler = parse_bool(value);
    } else if (key == "sampler_base_seed") {
        cfg.sampler_base_seed = std::stoull(value);
    } else if (key == "adapter.enabled") {
        cfg.adapter.enabled = parse_bool(value);
    } else if (key == "adapter.rank") {
        cfg.adapter.rank = std::stoi(value);
    } else if (key == "adapter.alpha") {
        cfg.adapter.alpha = std::stod(value);
    } else if (key == "adamw.beta1") {
        cfg.adamw.beta1 = std::stod(value);
    } else if (key == "adamw.beta2") {
        cfg.adamw.beta2 = std::stod(value);
    } else if (key == "adamw.eps") {
        cfg.adamw.eps = std::stod(value);
    } else if (key == "adamw.weight_decay") {
        cfg.adamw.weight_decay = std::stod(value);
    } else if (key == "model.vocab_size") {
        cfg.model.vocab_size = std::stoi(value);
    } else if (key == "model.context_len") {
        cfg.model.context_len = std::stoi(value);
    } else if (key == "model.dims") {
        cfg.model.dims = std::stoi(value);
    } else if (key == "model.hidden") {
        cfg.model.hidden = std::stoi(value);
    } else if (key == "model.window") {
        cfg.model.window = std::stoi(value);
    } else if (key == "train_problems") {
        cfg.train_problems = std::stoi(value);
    } else if (key == "test_problems") {
        cfg.test_problems = std::stoi(value);
    } else if (key == "difficulty") {
        cfg.difficulty = value;
    } else if (key == "data_seed") {
        cfg.data_seed = std::stoull(value);
    } else if (key == "samples_per_prompt") {
        cfg.samples_per_prompt = std::stoi(value);
    } else if (key == "selfplay_temperature") {
        cfg.selfplay_temperature = std::stod(value);
    } else if (key == "rl_prompts_per_step") {
        cfg.rl_prompts_per_step = std::stoi(value);
    } else if (key == "updates_per_batch") {
        cfg.updates_per_batch = std::stoi(value);
    } else if (key == "init_checkpoint") {
        cfg.init_checkpoint = value;
    } else if (key == "init_seed") {
        cfg.init_seed = std::stoull(value);
    } else if (key == "max_skip_fraction") {
        cfg.max_skip_fraction = std::stod(value);
    } else {
        throw std::invalid_argument("config: unknown key '" + key + "'");
    }
}

TrainConfig config_from_text(const std::string& text) {
    TrainConfig cfg;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto colon = t.find(':');
        if (colon == std::string::npos) throw std::invalid_argument("config: bad line '" + t + "'");
        apply_override(cfg, trim(t.substr(0, colon)), trim(t.substr(colon + 1)));
    }
    return cfg;
}

std::uint64_t config_hash(const TrainConfig& cfg) {
    const std::string text = config_to_text(cfg);
    return fnv1a(text.data(), text.size());
}

// ---------------------------------------------------------------------------
// Schedule and optimizer

double lr_at(long step, long total_steps, const TrainConfig& cfg) {
    if (total_steps <= 0) throw std::domain_error("lr_at: total_steps must be positive");
    if (step < 0 || step > total_steps) throw std::domain_error("lr_at: step out of range");
    if (!(cfg.warmup_fraction >= 0.0 && cfg.warmup_fraction < 1.0)) {
        throw std::domain_error("lr_at: warmup_fraction must be in [0,1)");
    }
    const long warmup = std::lround(cfg.warmup_fraction * static_cast<double>(total_steps));
    if (step < warmup) {
        return cfg.peak_lr * static_cast<double>(step) / static_cast<double>(warmup);
    }
    const double progress =
        static_cast<double>(step - warmup) / static_cast<double>(total_steps - warmup);
    return cfg.peak_lr * 0.5 * (1.0 + std::cos(3.141592653589793 * progress));
}

bool adamw_step(std::span<double> params, std::span<const double> grads, AdamWState& state,
                double lr, const AdamWConfig& cfg, std::span<const std::uint8_t> trainable_mask) {
    if (params.size() != grads.size()) throw std::invalid_argument("adamw_step: size mismatch");
    if (!trainable_mask.empty() && trainable_mask.size() != params.size()) {
        throw std::invalid_argument("adamw_step: mask size mismatch");
    }
    for (double g : grads) {
        if (!std::isfinite(g)) return false;  // step skipped, caller records the incident
    }
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    const long t = ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!trainable_mask.empty() && trainable_mask[i] == 0) continue;
        const double g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * params[i]);
    }
    return true;
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t perm_hash(const std::vector<std::size_t>& perm) {
    return fnv1a(perm.data(), perm.size() * sizeof(std::size_t));
}

struct OfflineState {
    bool sft = false;
    const std::vector<Problem>* problems = nullptr;
    std::vector<PreferencePair> pairs;
    std::vector<double> ref_chosen, ref_rejected;

    std::size_t size() const { return sft ? problems->size() : pairs.size(); }
};

}  // namespace

Dataset build_dataset(const TrainConfig& cfg, const ModelParams& init) {
    Dataset data;
    data.train_problems = generate_problems(cfg.data_seed, cfg.train_problems,
                                            difficulty_from_name(cfg.difficulty), Split::train);
    if (!cfg.is_rl() && cfg.algorithm != "sft") {
        // pairs derive from the data seed, not the run seed: the data is shared
        // across runs and the seed-propagation semantics stay confined to the
        // training-time sampler
        Rng rng(mix_seed(cfg.data_seed, 0xba135ULL));
        data.pairs = build_pairs(data.train_problems, init, cfg.samples_per_prompt, rng,
                                 cfg.selfplay_temperature);
    }
    return data;
}

TrainResult train(const TrainConfig& cfg, const Dataset& data, const ModelParams& init,
                  const LossRegistry& registry) {
    const auto t_start = std::chrono::steady_clock::now();
    if (cfg.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (cfg.micro_batch < 1 || cfg.grad_accum < 1) {
        throw std::invalid_argument("train: bad batch configuration");
    }
    if (data.train_problems.empty()) throw std::invalid_argument("train: empty dataset");

    ModelParams params = init;
    RunManifest manifest;
    manifest.config_hash = config_hash(cfg);

    std::vector<std::uint8_t> mask;
    if (cfg.adapter.enabled) {
        mask.resize(params.param_count());
        for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = params.is_trainable(i) ? 1 : 0;
    }
    AdamWState opt;

    // training-time stochastic data flows (rollouts, online pair refresh) obey
    // the propagation flag so un-propagated runs are byte-identical across seeds
    const std::uint64_t stoch_seed =
        cfg.propagate_seed_to_sampler ? cfg.seed : cfg.sampler_base_seed;

    std::map<std::uint64_t, std::size_t> problem_by_id;
    for (std::size_t i = 0; i < data.train_problems.size(); ++i) {
        problem_by_id[data.train_problems[i].id] = i;
    }

    const std::size_t batch_size =
        static_cast<std::size_t>(cfg.micro_batch) * static_cast<std::size_t>(cfg.grad_accum);

    if (cfg.is_rl()) {
        RLConfig rlcfg = cfg.rl;
        rlcfg.variant = cfg.algorithm;
        rlcfg.validate();
        const std::size_t n = data.train_problems.size();
        const std::size_t prompts_per_step = std::max(1, cfg.rl_prompts_per_step);
        const long batches_per_epoch =
            static_cast<long>((n + prompts_per_step - 1) / prompts_per_step);
        const long total_steps = cfg.epochs * batches_per_epoch * std::max(1, cfg.updates_per_batch);
        manifest.total_steps = total_steps;

        PathologyMonitor monitor;
        long step = 0, rollout_counter = 0;
        const long max_skipped = static_cast<long>(cfg.max_skip_fraction * total_steps);
        bool aborted = false;

        for (int epoch = 0; epoch < cfg.epochs && !aborted; ++epoch) {
            SamplerState sampler{epoch, cfg.sampler_base_seed, cfg.propagate_seed_to_sampler};
            auto perm = epoch_order(n, sampler, cfg.seed);
            manifest.epoch_permutation_hashes.push_back(perm_hash(perm));
            manifest.epoch_permutations.push_back(perm);

            for (std::size_t b = 0; b < n && !aborted; b += prompts_per_step) {
                const std::size_t e = std::min(n, b + prompts_per_step);
                std::vector<Problem> batch;
                for (std::size_t k = b; k < e; ++k) batch.push_back(data.train_problems[perm[k]]);
                auto groups = rollout(params, batch, rlcfg,
                                      mix_seed(stoch_seed, 0x7011ULL,
                                               static_cast<std::uint64_t>(rollout_counter++)));

                for (int pass = 0; pass < std::max(1, cfg.updates_per_batch) && !aborted; ++pass) {
                    std::vector<RLObjective> objs(groups.size());
                    kernels::parallel_for(groups.size(), [&](std::size_t gi) {
                        objs[gi] = rl_objective(params, groups[gi], rlcfg);
                    });

                    StepRecord rec;
                    rec.step = step;
                    rec.epoch = epoch;
                    rec.lr = lr_at(step, total_steps, cfg);
                    double loss = 0.0, clip = 0.0, kl = 0.0, reward = 0.0;
                    std::size_t finite = 0;
                    std::vector<double> grad(params.param_count(), 0.0);
                    for (const auto& o : objs) {
                        rec.nan_flag = rec.nan_flag || o.diags.nan_flag;
                        if (!std::isfinite(o.loss)) continue;
                        ++finite;
                        loss += o.loss;
                        clip += o.diags.clip_fraction;
                        kl += o.diags.approx_kl;
                        reward += o.diags.mean_reward;
                        kernels::axpy(1.0, o.grad, grad);
                    }
                    if (finite == 0) {
                        rec.loss = kNaN;
                        rec.skipped = true;
                        ++manifest.skipped_steps;
                    } else {
                        const double inv = 1.0 / static_cast<double>(finite);
                        for (double& g : grad) g *= inv;
                        rec.loss = loss * inv;
                        rec.clip_fraction = clip * inv;
                        rec.approx_kl = kl * inv;
                        rec.mean_reward = reward * inv;
                        if (!adamw_step(params.flat(), grad, opt, rec.lr, cfg.adamw, mask)) {
                            rec.skipped = true;
                            ++manifest.skipped_steps;
                        }
                        if (monitor.record(rec.clip_fraction) && !manifest.pathological) {
                            manifest.pathological = true;
                            manifest.pathology_reason =
                                "sustained clip fraction above 0.7";
                        }
                    }
                    manifest.metrics.push_back(rec);
                    ++step;
                    if (manifest.skipped_steps > max_skipped) {
                        manifest.pathological = true;
                        manifest.pathology_reason = "non-finite loss in more than " +
                                                    std::to_string(100.0 * cfg.max_skip_fraction) +
                                                    "% of steps";
                        aborted = true;
                    }
                }
            }
        }
    } else {
        const auto& info = registry.get(cfg.algorithm);
        LossSpec spec = cfg.loss;
        spec.variant = cfg.algorithm;

        OfflineState st;
        st.sft = cfg.algorithm == "sft";
        st.problems = &data.train_problems;
        if (!st.sft) {
            st.pairs = data.pairs;
            if (st.pairs.empty()) throw std::invalid_argument("train: no preference pairs");
        }

        // frozen reference = the initial policy
        auto compute_refs = [&] {
            if (!info.requires_ref) return;
            st.ref_chosen.assign(st.pairs.size(), 0.0);
            st.ref_rejected.assign(st.pairs.size(), 0.0);
            std::vector<SeqRef> items;
            items.reserve(st.pairs.size() * 2);
            for (const auto& p : st.pairs) {
                const auto& prompt = data.train_problems[problem_by_id.at(p.problem_id)].prompt;
                items.push_back({prompt, p.chosen});
                items.push_back({prompt, p.rejected});
            }
            std::vector<SequenceLogProb> scores(items.size());
            score_batch(init, items, scores);
            for (std::size_t i = 0; i < st.pairs.size(); ++i) {
                st.ref_chosen[i] = scores[2 * i].total;
                st.ref_rejected[i] = scores[2 * i + 1].total;
            }
        };
        compute_refs();

        const std::size_t n = st.size();
        const long batches_per_epoch = static_cast<long>((n + batch_size - 1) / batch_size);
        const long total_steps = cfg.epochs * batches_per_epoch;
        manifest.total_steps = total_steps;
        const long max_skipped = static_cast<long>(cfg.max_skip_fraction * total_steps);

        long step = 0;
        bool aborted = false;
        for (int epoch = 0; epoch < cfg.epochs && !aborted; ++epoch) {
            if (info.online_data && epoch > 0) {
                // refresh pairs from the current policy, keeping the pair set
                // aligned per problem so the data-order pipeline is untouched
                const std::uint64_t regen_seed =
                    mix_seed(stoch_seed, 0x0d90ULL, static_cast<std::uint64_t>(epoch));
                std::vector<std::optional<PreferencePair>> fresh(st.pairs.size());
                kernels::parallel_for(st.pairs.size(), [&](std::size_t i) {
                    const auto& prob =
                        data.train_problems[problem_by_id.at(st.pairs[i].problem_id)];
                    fresh[i] = build_pair_for(prob, params, cfg.samples_per_prompt, regen_seed,
                                              cfg.selfplay_temperature);
                });
                for (std::size_t i = 0; i < st.pairs.size(); ++i) {
                    if (fresh[i]) st.pairs[i] = std::move(*fresh[i]);
                }
                compute_refs();
            }

            SamplerState sampler{epoch, cfg.sampler_base_seed, cfg.propagate_seed_to_sampler};
            auto perm = epoch_order(n, sampler, cfg.seed);
            manifest.epoch_permutation_hashes.push_back(perm_hash(perm));
            manifest.epoch_permutations.push_back(perm);

            for (std::size_t b = 0; b < n && !aborted; b += batch_size) {
                const std::size_t e = std::min(n, b + batch_size);
                const std::size_t bs = e - b;

                // score the whole effective batch under the current policy
                std::vector<SeqRef> items;
                items.reserve(bs * 2);
                for (std::size_t k = b; k < e; ++k) {
                    const std::size_t i = perm[k];
                    if (st.sft) {
                        const auto& prob = (*st.problems)[i];
                        items.push_back({prob.prompt, prob.gold_response});
                    } else {
                        const auto& prompt =
                            data.train_problems[problem_by_id.at(st.pairs[i].problem_id)].prompt;
                        items.push_back({prompt, st.pairs[i].chosen});
                        items.push_back({prompt, st.pairs[i].rejected});
                    }
                }
                std::vector<SequenceLogProb> scores(items.size());
                score_batch(params, items, scores);

                PreferenceBatch batch;
                batch.has_ref = info.requires_ref;
                for (std::size_t k = 0; k < bs; ++k) {
                    PreferenceExample ex;
                    if (st.sft) {
                        ex.policy_chosen = scores[k].total;
                        ex.len_chosen = scores[k].length;
                    } else {
                        const std::size_t i = perm[b + k];
                        ex.policy_chosen = scores[2 * k].total;
                        ex.policy_rejected = scores[2 * k + 1].total;
                        ex.len_chosen = scores[2 * k].length;
                        ex.len_rejected = scores[2 * k + 1].length;
                        if (info.requires_ref) {
                            ex.ref_chosen = st.ref_chosen[i];
                            ex.ref_rejected = st.ref_rejected[i];
                        }
                    }
                    batch.pairs.push_back(ex);
                }

                LossOutput loss = info.fn(batch, spec);

                StepRecord rec;
                rec.step = step;
                rec.epoch = epoch;
                rec.lr = lr_at(step, total_steps, cfg);
                rec.loss = loss.value;
                rec.mean_reward = kNaN;
                rec.clip_fraction = kNaN;
                rec.approx_kl = kNaN;

                if (!std::isfinite(loss.value)) {
                    rec.skipped = true;
                    rec.nan_flag = true;
                    ++manifest.skipped_steps;
                } else {
                    // chain loss coefficients into model gradients; micro_batch
                    // chunks the expensive per-sequence backprop only, so the
                    // accumulated sum is identical for any chunking
                    std::vector<double> grad(params.param_count(), 0.0);
                    std::vector<SeqRef> gitems;
                    std::vector<std::vector<double>> gweights;
                    auto flush = [&] {
                        if (gitems.empty()) return;
                        std::vector<std::vector<double>> grads(gitems.size());
                        grad_batch(params, gitems, gweights, grads);
                        for (const auto& g : grads) kernels::axpy(1.0, g, grad);
                        gitems.clear();
                        gweights.clear();
                    };
                    auto push = [&](const SeqRef& ref, double coeff, std::size_t len) {
                        if (coeff == 0.0) return;
                        gitems.push_back(ref);
                        gweights.emplace_back(len, coeff);
                        if (gitems.size() >= static_cast<std::size_t>(cfg.micro_batch) * 2) flush();
                    };
                    for (std::size_t k = 0; k < bs; ++k) {
                        if (st.sft) {
                            push(items[k], loss.d_policy_chosen[k],
                                 static_cast<std::size_t>(scores[k].length));
                        } else {
                            push(items[2 * k], loss.d_policy_chosen[k],
                                 static_cast<std::size_t>(scores[2 * k].length));
                            push(items[2 * k + 1], loss.d_policy_rejected[k],
                                 static_cast<std::size_t>(scores[2 * k + 1].length));
                        }
                    }
                    flush();
                    if (!adamw_step(params.flat(), grad, opt, rec.lr, cfg.adamw, mask)) {
                        rec.skipped = true;
                        rec.nan_flag = true;
                        ++manifest.skipped_steps;
                    }
                }
                manifest.metrics.push_back(rec);
                ++step;
                if (manifest.skipped_steps > max_skipped) {
                    manifest.pathological = true;
                    manifest.pathology_reason = "non-finite loss in more than " +
                                                std::to_string(100.0 * cfg.max_skip_fraction) +
                                                "% of steps";
                    aborted = true;
                }
            }
        }
    }

    manifest.param_hash = params.param_hash();
    manifest.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return {std::move(params), std::move(manifest)};
}

std::string manifest_to_json(const RunManifest& m) {
    json j;
    j["config_hash"] = m.config_hash;
    j["final_checkpoint"] = m.final_checkpoint;
    j["wall_clock_seconds"] = m.wall_clock_seconds;
    j["param_hash"] = m.param_hash;
    j["pathological"] = m.pathological;
    j["pathology_reason"] = m.pathology_reason;
    j["skipped_steps"] = m.skipped_steps;
    j["total_steps"] = m.total_steps;
    j["epoch_permutation_hashes"] = m.epoch_permutation_hashes;
    json metrics = json::array();
    for (const auto& r : m.metrics) {
        json rec = {{"step", r.step},     {"epoch", r.epoch},
                    {"lr", r.lr},         {"loss", std::isfinite(r.loss) ? json(r.loss) : json()},
                    {"skipped", r.skipped}, {"nan_flag", r.nan_flag}};
        if (std::isfinite(r.mean_reward)) rec["mean_reward"] = r.mean_reward;
        if (std::isfinite(r.clip_fraction)) rec["clip_fraction"] = r.clip_fraction;
        if (std::isfinite(r.approx_kl)) rec["approx_kl"] = r.approx_kl;
        metrics.push_back(rec);
    }
    j["metrics"] = metrics;
    return j.dump(2);
}

}  // namespace ptbench
