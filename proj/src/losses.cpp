#include "ptbench/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ptbench {

namespace {

double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

double softplus(double x) {  // log(1 + e^x), stable
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double neg_log_sigmoid(double x) { return softplus(-x); }

void check_batch(const PreferenceBatch& batch, const LossSpec& spec, bool needs_ref) {
    if (batch.pairs.empty()) throw std::domain_error(spec.variant + ": empty batch");
    if (needs_ref && !batch.has_ref) {
        throw std::invalid_argument(spec.variant + ": reference log-probs required but absent");
    }
    for (const auto& p : batch.pairs) {
        if (p.len_chosen < 1 || p.len_rejected < 1) {
            throw std::domain_error(spec.variant + ": response lengths must be >= 1");
        }
    }
}

void check_beta(const LossSpec& spec) {
    if (!(spec.beta > 0.0)) throw std::invalid_argument(spec.variant + ": beta must be positive");
}

LossOutput init_out(std::size_t n) {
    LossOutput out;
    out.d_policy_chosen.assign(n, 0.0);
    out.d_policy_rejected.assign(n, 0.0);
    out.margins.assign(n, 0.0);
    return out;
}

double ref_margin(const PreferenceExample& p) {
    return (p.policy_chosen - p.ref_chosen) - (p.policy_rejected - p.ref_rejected);
}

// Shared shape of margin-based losses: value_i = f(pair), with df/dm supplied.
template <class Fn>
LossOutput margin_loss(const PreferenceBatch& batch, const LossSpec& spec, Fn per_pair) {
    auto out = init_out(batch.pairs.size());
    const double inv_n = 1.0 / static_cast<double>(batch.pairs.size());
    for (std::size_t i = 0; i < batch.pairs.size(); ++i) {
        const double m = ref_margin(batch.pairs[i]);
        auto [value, dvalue_dm] = per_pair(batch.pairs[i], m);
        out.value += inv_n * value;
        out.d_policy_chosen[i] = inv_n * dvalue_dm;
        out.d_policy_rejected[i] = -inv_n * dvalue_dm;
        out.margins[i] = spec.beta * m;
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Named losses

LossOutput dpo_loss(const PreferenceBatch& batch, const LossSpec& spec) {
    check_batch(batch, spec, true);
    check_beta(spec);
    const double beta = spec.beta;
    return margin_loss(batch, spec, [beta](const PreferenceExample&, double m) {
        return std::pair{neg_log_sigmoid(beta * m), -beta * sigmoid(-beta * m)};
    });
}

LossOutput ipo_loss(const PreferenceBatch& batch, const LossSpec& spec) {
    check_batch(batch, spec, true);
    check_beta(spec);
    const double target = 1.0 / (2.0 * spec.beta);
    return margin_loss(batch, spec, [target](const PreferenceExample&, double m) {
        const double t = m - target;
        return std::pair{t * t, 2.0 * t};
    });
}

LossOutput simpo_loss(const PreferenceBatch& batch, const LossSpec& spec) {
    check_batch(batch, spec, false);
    check_beta(spec);
    if (spec.gamma < 0.0) throw std::invalid_argument("simpo: gamma must be >= 0");
    auto out = init_out(batch.pairs.size());
    const double inv_n = 1.0 / static_cast<double>(batch.pairs.size());
    for (std::size_t i = 0; i < batch.pairs.size(); ++i) {
        const auto& p = batch.pairs[i];
        const double cw = spec.beta / p.len_chosen, cl = spec.beta / p.len_rejected;
        const double s = cw * p.policy_chosen - cl * p.policy_rejected - spec.gamma;
        const double ds = -sigmoid(-s);
        out.value += inv_n * neg_log_sigmoid(s);
        out.d_policy_chosen[i] = inv_n * ds * cw;
        out.d_policy_rejected[i] = -inv_n * ds * cl;
        out.margins[i] = s;
    }
    return out;
}

KtoOutput kto_loss(const std::vector<KtoExample>& examples, const LossSpec& spec) {
    if (examples.empty()) throw std::domain_error("kto: empty batch");
    check_beta(spec);
    const double beta = spec.beta;
    const double lw = spec.param("lambda_desirable", 1.0);
    const double ll = spec.param("lambda_undesirable", 1.0);
    const std::size_t n = examples.size();
    const double inv_n = 1.0 / static_cast<double>(n);

    double z_raw = 0.0;
    for (const auto& e : examples) z_raw += (e.policy - e.ref) * inv_n;
    const double z = std::max(0.0, z_raw);
    const double dz_dlr = z_raw > 0.0 ? inv_n : 0.0;  // z's exact dependence on each input

    KtoOutput out;
    out.d_policy.assign(n, 0.0);
    double dvalue_dz = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double lr = examples[i].policy - examples[i].ref;
        if (examples[i].desirable) {
            const double s = sigmoid(beta * (lr - z));
            out.value += inv_n * lw * (1.0 - s);
            const double dsdarg = s * (1.0 - s);
            out.d_policy[i] += inv_n * lw * (-dsdarg * beta);
            dvalue_dz += inv_n * lw * (dsdarg * beta);
        } else {
            const double s = sigmoid(beta * (z - lr));
            out.value += inv_n * ll * (1.0 - s);
            const double dsdarg = s * (1.0 - s);
            out.d_policy[i] += inv_n * ll * (dsdarg * beta);
            dvalue_dz += inv_n * ll * (-dsdarg * beta);
        }
    }
    for (std::size_t i = 0; i < n; ++i) out.d_policy[i] += dvalue_dz * dz_dlr;
    return out;
}

SftOutput sft_loss(const std::vector<double>& per_token_logp) {
    if (per_token_logp.empty()) throw std::domain_error("sft: empty response");
    SftOutput out;
    const double inv_t = 1.0 / static_cast<double>(per_token_logp.size());
    out.d_per_token.assign(per_token_logp.size(), -inv_t);
    for (double lp : per_token_logp) out.value -= inv_t * lp;
    return out;
}

// ---------------------------------------------------------------------------
// Remaining zoo members (registered, reachable through variant_loss)

namespace {

LossOutput hinge_fn(const PreferenceBatch& batch, const LossSpec& spec) {
    check_batch(batch, spec, true);
    check_beta(spec);
    const double beta = spec.beta;
    return margin_loss(batch, spec, [beta](const PreferenceExample&, double m) {
        const double t = 1.0 - beta * m;
        return t > 0.0 ? std::pair{t, -beta} : std::pair{0.0, 0.0};
    });
}

LossOutput cpo_fn(const PreferenceBatch& batch, const LossSpec& spec) {
    check_batch(batch, spec, false);
    check_beta(spec);
    const double beta = spec.beta;
    const double lambda_sft = spec.param("lambda_sft", 1.0);
    auto out = init_out(batch.pairs.size());
    const double inv_n = 1.0 / static_cast<double>(batch.pairs.size());
    for (std::size_t i = 0; i < batch.pairs.size(); ++i) {
        const auto& p = batch.pairs[i];
        const double m = p.policy_chosen - p.policy_rejected;
        const double ds = -beta * sigmoid(-beta * m);
        out.value += inv_n * (neg_log_sigmoid(beta * m) - lambda_sft * p.policy_chosen / p.len_chosen);
        out.d_policy_chosen[i] = inv_n * (ds - lambda_sft / p.len_chosen);
        out.d_policy_rejected[i] = inv_n * (-ds);
        out.margins[i] = beta * m;
    }
    return out;
}

LossOutput orpo_fn(const PreferenceBatch& batch, const LossSpec& spec) {
    check_batch(batch, spec, false);
    const double lambda_or = spec.param("lambda_or", 0.25);
    auto out = init_out(batch.pairs.size());
    const double inv_n = 1.0 / static_cast<double>(batch.pairs.size());
    for (std::size_t i = 0; i < batch.pairs.size(); ++i) {
        const auto& p = batch.pairs[i];
        const double qc = p.policy_chosen / p.len_chosen;   // length-normalized log-prob, <= 0
        const double qr = p.policy_rejected / p.len_rejected;
        // log-odds of q: q - log(1 - e^q); derivative wrt q is 1/(1 - e^q)
        auto log_odds = [](double q) { return q - std::log(-std::expm1(q)); };
        auto dlog_odds = [](double q) { return 1.0 / (-std::expm1(q)); };
        const double ratio = log_odds(qc) - log_odds(qr);
        const double ds = -sigmoid(-ratio);
        out.value += inv_n * (-qc + lambda_or * neg_log_sigmoid(ratio));
        out.d_policy_chosen[i] =
            inv_n * (-1.0 / p.len_chosen + lambda_or * ds * dlog_odds(qc) / p.len_chosen);
        out.d_policy_rejected[i] = inv_n * (lambda_or * -ds * dlog_odds(qr) / p.len_rejected);
        out.margins[i] = ratio;
    }
    return out;
}

LossOutput rdpo_fn(const PreferenceBatch& batch, const LossSpec& spec) {
    check_batch(batch, spec, true);
    check_beta(spec);
    const double beta = spec.beta;
    const double alpha_len = spec.param("alpha_len", 0.01);
    return margin_loss(batch, spec, [beta, alpha_len](const PreferenceExample& p, double m) {
        const double arg = beta * m - alpha_len * (p.len_chosen - p.len_rejected);
        return std::pair{neg_log_sigmoid(arg), -beta * sigmoid(-arg)};
    });
}

LossOutput cdpo_fn(const PreferenceBatch& batch, const LossSpec& spec) {
    check_batch(batch, spec, true);
    check_beta(spec);
    const double beta = spec.beta;
    const double eps = spec.param("epsilon", 0.1);
    return margin_loss(batch, spec, [beta, eps](const PreferenceExample&, double m) {
        const double value = (1.0 - eps) * neg_log_sigmoid(beta * m) + eps * neg_log_sigmoid(-beta * m);
        const double d = beta * (-(1.0 - eps) * sigmoid(-beta * m) + eps * sigmoid(beta * m));
        return std::pair{value, d};
    });
}

LossOutput betadpo_fn(const PreferenceBatch& batch, const LossSpec& spec) {
    check_batch(batch, spec, true);
    check_beta(spec);
    const double beta = spec.beta;
    return margin_loss(batch, spec, [beta](const PreferenceExample& p, double m) {
        const double m_ref = p.ref_chosen - p.ref_rejected;  // reference-model margin, constant
        const double bi = std::clamp(beta * (1.0 + std::tanh(m_ref)), beta / 2.0, 2.0 * beta);
        return std::pair{neg_log_sigmoid(bi * m), -bi * sigmoid(-bi * m)};
    });
}

LossOutput caldpo_fn(const PreferenceBatch& batch, const LossSpec& spec) {
    check_batch(batch, spec, true);
    check_beta(spec);
    const double beta = spec.beta;
    const double lambda_cal = spec.param("lambda_cal", 0.1);
    const double c = 1.0 / (2.0 * beta);
    auto out = init_out(batch.pairs.size());
    const double inv_n = 1.0 / static_cast<double>(batch.pairs.size());
    for (std::size_t i = 0; i < batch.pairs.size(); ++i) {
        const auto& p = batch.pairs[i];
        const double lrw = p.policy_chosen - p.ref_chosen;
        const double lrl = p.policy_rejected - p.ref_rejected;
        const double m = lrw - lrl;
        out.value += inv_n * (neg_log_sigmoid(beta * m) +
                              lambda_cal * ((lrw - c) * (lrw - c) + (lrl + c) * (lrl + c)));
        const double dm = -beta * sigmoid(-beta * m);
        out.d_policy_chosen[i] = inv_n * (dm + lambda_cal * 2.0 * (lrw - c));
        out.d_policy_rejected[i] = inv_n * (-dm + lambda_cal * 2.0 * (lrl + c));
        out.margins[i] = beta * m;
    }
    return out;
}

LossOutput dpop_fn(const PreferenceBatch& batch, const LossSpec& spec) {
    check_batch(batch, spec, true);
    check_beta(spec);
    const double beta = spec.beta;
    const double lambda_p = spec.param("lambda_p", 5.0);
    auto out = init_out(batch.pairs.size());
    const double inv_n = 1.0 / static_cast<double>(batch.pairs.size());
    for (std::size_t i = 0; i < batch.pairs.size(); ++i) {
        const auto& p = batch.pairs[i];
        const double m = ref_margin(p);
        const double anchor = std::max(0.0, p.ref_chosen - p.policy_chosen);
        out.value += inv_n * (neg_log_sigmoid(beta * m) + lambda_p * anchor);
        const double dm = -beta * sigmoid(-beta * m);
        out.d_policy_chosen[i] = inv_n * (dm - (anchor > 0.0 ? lambda_p : 0.0));
        out.d_policy_rejected[i] = inv_n * (-dm);
        out.margins[i] = beta * m;
    }
    return out;
}

LossOutput exo_fn(const PreferenceBatch& batch, const LossSpec& spec) {
    check_batch(batch, spec, true);
    check_beta(spec);
    const double beta = spec.beta;
    const double eps = spec.param("epsilon", 1e-3);
    auto out = init_out(batch.pairs.size());
    const double inv_n = 1.0 / static_cast<double>(batch.pairs.size());
    for (std::size_t i = 0; i < batch.pairs.size(); ++i) {
        const auto& p = batch.pairs[i];
        const double delta = beta * ref_margin(p);  // beta*lr_w - beta*lr_l
        const double pw = sigmoid(delta), pl = 1.0 - pw;
        // reverse KL between softmax(beta*logratios) and (1-eps, eps)
        const double value = pw * std::log(pw / (1.0 - eps)) + pl * std::log(pl / eps);
        const double dvalue_ddelta =
            pw * pl * (std::log(pw / (1.0 - eps)) - std::log(pl / eps));
        out.value += inv_n * value;
        out.d_policy_chosen[i] = inv_n * dvalue_ddelta * beta;
        out.d_policy_rejected[i] = -inv_n * dvalue_ddelta * beta;
        out.margins[i] = delta;
    }
    return out;
}

LossOutput alphapo_fn(const PreferenceBatch& batch, const LossSpec& spec) {
    check_batch(batch, spec, false);
    check_beta(spec);
    const double beta = spec.beta;
    const double alpha = spec.param("alpha", 0.5);
    if (alpha == 0.0) throw std::invalid_argument("alphapo: alpha must be nonzero");
    auto out = init_out(batch.pairs.size());
    const double inv_n = 1.0 / static_cast<double>(batch.pairs.size());
    for (std::size_t i = 0; i < batch.pairs.size(); ++i) {
        const auto& p = batch.pairs[i];
        const double qw = p.policy_chosen / p.len_chosen;
        const double ql = p.policy_rejected / p.len_rejected;
        // r(y) = (pi_hat^alpha - 1)/alpha with pi_hat = exp(q)
        const double rw = std::expm1(alpha * qw) / alpha;
        const double rl = std::expm1(alpha * ql) / alpha;
        const double s = beta * (rw - rl) - spec.gamma;
        const double ds = -sigmoid(-s);
        out.value += inv_n * neg_log_sigmoid(s);
        out.d_policy_chosen[i] = inv_n * ds * beta * std::exp(alpha * qw) / p.len_chosen;
        out.d_policy_rejected[i] = -inv_n * ds * beta * std::exp(alpha * ql) / p.len_rejected;
        out.margins[i] = s;
    }
    return out;
}

LossOutput apo_fn(const PreferenceBatch& batch, const LossSpec& spec) {
    check_batch(batch, spec, true);
    check_beta(spec);
    const double beta = spec.beta;
    auto out = init_out(batch.pairs.size());
    const double inv_n = 1.0 / static_cast<double>(batch.pairs.size());
    for (std::size_t i = 0; i < batch.pairs.size(); ++i) {
        const auto& p = batch.pairs[i];
        const double lrw = p.policy_chosen - p.ref_chosen;
        const double lrl = p.policy_rejected - p.ref_rejected;
        const double sw = sigmoid(beta * lrw), sl = sigmoid(beta * lrl);
        out.value += inv_n * ((1.0 - sw) + sl);
        out.d_policy_chosen[i] = inv_n * (-beta * sw * (1.0 - sw));
        out.d_policy_rejected[i] = inv_n * (beta * sl * (1.0 - sl));
        out.margins[i] = beta * (lrw - lrl);
    }
    return out;
}

LossOutput sppo_fn(const PreferenceBatch& batch, const LossSpec& spec) {
    check_batch(batch, spec, true);
    check_beta(spec);
    const double kappa = 1.0 / (2.0 * spec.beta);
    auto out = init_out(batch.pairs.size());
    const double inv_n = 1.0 / static_cast<double>(batch.pairs.size());
    for (std::size_t i = 0; i < batch.pairs.size(); ++i) {
        const auto& p = batch.pairs[i];
        const double lrw = p.policy_chosen - p.ref_chosen;
        const double lrl = p.policy_rejected - p.ref_rejected;
        out.value += inv_n * ((lrw - kappa) * (lrw - kappa) + (lrl + kappa) * (lrl + kappa));
        out.d_policy_chosen[i] = inv_n * 2.0 * (lrw - kappa);
        out.d_policy_rejected[i] = inv_n * 2.0 * (lrl + kappa);
        out.margins[i] = spec.beta * (lrw - lrl);
    }
    return out;
}

LossOutput robustdpo_fn(const PreferenceBatch& batch, const LossSpec& spec) {
    check_batch(batch, spec, true);
    check_beta(spec);
    const double beta = spec.beta;
    const double rho = spec.param("rho", 0.5);
    if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("robustdpo: rho must be in (0,1]");
    const std::size_t n = batch.pairs.size();
    const std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                       std::ceil(rho * static_cast<double>(n))));
    auto out = init_out(n);
    std::vector<double> losses(n), dls(n);
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double m = ref_margin(batch.pairs[i]);
        losses[i] = neg_log_sigmoid(beta * m);
        dls[i] = -beta * sigmoid(-beta * m);
        out.margins[i] = beta * m;
        idx[i] = i;
    }
    // CVaR: average the worst rho-fraction of per-pair losses; stable sort so
    // ties resolve deterministically by pair index.
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return losses[a] > losses[b]; });
    const double inv_k = 1.0 / static_cast<double>(k);
    for (std::size_t r = 0; r < k; ++r) {
        const std::size_t i = idx[r];
        out.value += inv_k * losses[i];
        out.d_policy_chosen[i] = inv_k * dls[i];
        out.d_policy_rejected[i] = -inv_k * dls[i];
    }
    return out;
}

LossOutput gpo_fn(const PreferenceBatch& batch, const LossSpec& spec) {
    check_batch(batch, spec, true);
    check_beta(spec);
    const double beta = spec.beta;
    const std::string link = spec.link("link", "logistic");
    if (link != "logistic" && link != "hinge" && link != "squared") {
        throw std::invalid_argument("gpo: unknown link " + link);
    }
    return margin_loss(batch, spec, [beta, &link](const PreferenceExample&, double m) {
        const double x = beta * m;
        if (link == "hinge") {
            const double t = 1.0 - x;
            return t > 0.0 ? std::pair{t, -beta} : std::pair{0.0, 0.0};
        }
        if (link == "squared") {
            const double t = x - 1.0;
            return std::pair{t * t, 2.0 * t * beta};
        }
        return std::pair{neg_log_sigmoid(x), -beta * sigmoid(-x)};
    });
}

LossOutput focalpo_fn(const PreferenceBatch& batch, const LossSpec& spec) {
    check_batch(batch, spec, true);
    check_beta(spec);
    const double beta = spec.beta;
    const double gamma_f = spec.param("gamma_f", 2.0);
    return margin_loss(batch, spec, [beta, gamma_f](const PreferenceExample&, double m) {
        const double p = sigmoid(beta * m);
        const double nls = neg_log_sigmoid(beta * m);  // -log p
        const double value = std::pow(p, gamma_f) * nls;
        // d/dm = beta * p^gamma * (1-p) * (gamma * (-log p) - 1)
        const double d = beta * std::pow(p, gamma_f) * (1.0 - p) * (gamma_f * nls - 1.0);
        return std::pair{value, d};
    });
}

LossOutput kto_pairwise_fn(const PreferenceBatch& batch, const LossSpec& spec) {
    check_batch(batch, spec, true);
    std::vector<KtoExample> examples;
    examples.reserve(batch.pairs.size() * 2);
    for (const auto& p : batch.pairs) {
        examples.push_back({p.policy_chosen, p.ref_chosen, true});
        examples.push_back({p.policy_rejected, p.ref_rejected, false});
    }
    auto kto = kto_loss(examples, spec);
    auto out = init_out(batch.pairs.size());
    out.value = kto.value;
    for (std::size_t i = 0; i < batch.pairs.size(); ++i) {
        out.d_policy_chosen[i] = kto.d_policy[2 * i];
        out.d_policy_rejected[i] = kto.d_policy[2 * i + 1];
        out.margins[i] = spec.beta * ref_margin(batch.pairs[i]);
    }
    return out;
}

LossOutput sft_pairwise_fn(const PreferenceBatch& batch, const LossSpec& spec) {
    check_batch(batch, spec, false);
    auto out = init_out(batch.pairs.size());
    const double inv_n = 1.0 / static_cast<double>(batch.pairs.size());
    for (std::size_t i = 0; i < batch.pairs.size(); ++i) {
        const auto& p = batch.pairs[i];
        out.value += inv_n * (-p.policy_chosen / p.len_chosen);
        out.d_policy_chosen[i] = -inv_n / p.len_chosen;
        out.margins[i] = 0.0;
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Registry

void LossRegistry::add(VariantInfo info) {
    if (variants_.count(info.name)) throw std::logic_error("registry: duplicate " + info.name);
    order_.push_back(info.name);
    variants_.emplace(info.name, std::move(info));
}

bool LossRegistry::contains(const std::string& name) const { return variants_.count(name) > 0; }

const VariantInfo& LossRegistry::get(const std::string& name) const {
    auto it = variants_.find(name);
    if (it == variants_.end()) {
        std::ostringstream msg;
        msg << "unknown loss variant '" << name << "'; registered:";
        for (const auto& n : order_) msg << ' ' << n;
        throw std::invalid_argument(msg.str());
    }
    return it->second;
}

std::vector<const VariantInfo*> LossRegistry::list() const {
    std::vector<const VariantInfo*> out;
    out.reserve(order_.size());
    for (const auto& n : order_) out.push_back(&variants_.at(n));
    return out;
}

LossSpec LossRegistry::default_spec(const std::string& name) const {
    const auto& info = get(name);
    LossSpec spec;
    spec.variant = name;
    for (const auto& [k, v] : info.defaults) {
        if (k == "beta") {
            spec.beta = v;
        } else if (k == "gamma") {
            spec.gamma = v;
        } else {
            spec.params[k] = v;
        }
    }
    spec.links = info.link_defaults;
    return spec;
}

LossRegistry LossRegistry::make_default() {
    LossRegistry r;
    auto add = [&](VariantInfo info) { r.add(std::move(info)); };

    add({"sft", "SFT", "Next-token prediction on gold responses", "SFT", false, false, false, true,
         false, {}, {}, sft_pairwise_fn});
    add({"dpo", "DPO", "Baseline logistic loss", "Vanilla", true, true, true, true, false,
         {{"beta", 0.1}}, {}, dpo_loss});
    add({"ipo", "IPO", "Squared loss regularization", "Alternative divergence", true, true, true,
         false, false, {{"beta", 0.1}}, {}, ipo_loss});
    add({"simpo", "SimPO", "Length-normalized, no ref", "Reference-free", false, true, false, true,
         false, {{"beta", 0.1}, {"gamma", 0.5}}, {}, simpo_loss});
    add({"kto", "KTO", "Unpaired binary feedback", "Unpaired", true, true, false, true, false,
         {{"beta", 0.1}, {"lambda_desirable", 1.0}, {"lambda_undesirable", 1.0}}, {},
         kto_pairwise_fn});
    add({"hinge", "Hinge", "Hinge loss replacement", "Alternative divergence", true, true, true,
         true, false, {{"beta", 0.1}}, {}, hinge_fn});
    add({"cpo", "CPO", "Contrastive preference", "Reference-free", false, true, false, true, false,
         {{"beta", 0.1}, {"lambda_sft", 1.0}}, {}, cpo_fn});
    add({"orpo", "ORPO", "SFT-integrated preference", "Reference-free", false, true, false, true,
         false, {{"lambda_or", 0.25}}, {}, orpo_fn});
    add({"rdpo", "RDPO", "Robust divergence penalty", "Alternative divergence", true, true, true,
         true, false, {{"beta", 0.1}, {"alpha_len", 0.01}}, {}, rdpo_fn});
    add({"cdpo", "CDPO", "Conservative DPO", "Robustness", true, true, true, true, false,
         {{"beta", 0.1}, {"epsilon", 0.1}}, {}, cdpo_fn});
    add({"betadpo", "BetaDPO", "Adaptive beta scheduling", "Weighting/calibration", true, true,
         true, true, false, {{"beta", 0.1}}, {}, betadpo_fn});
    add({"caldpo", "CalDPO", "Calibrated reward margin", "Weighting/calibration", true, true,
         false, false, false, {{"beta", 0.1}, {"lambda_cal", 0.1}}, {}, caldpo_fn});
    add({"dpop", "DPOP", "Pref.-weighted optimization", "Weighting/calibration", true, true, false,
         true, false, {{"beta", 0.1}, {"lambda_p", 5.0}}, {}, dpop_fn});
    add({"odpo", "ODPO", "Online DPO", "Data augmentation", true, true, true, true, true,
         {{"beta", 0.1}}, {}, dpo_loss});
    add({"exo", "EXO", "Exponentiated gradient", "Data augmentation", true, true, true, true,
         false, {{"beta", 0.1}, {"epsilon", 1e-3}}, {}, exo_fn});
    add({"alphapo", "AlphaPO", "Alpha-divergence pref.", "Reference-free", false, true, false,
         true, false, {{"beta", 0.1}, {"alpha", 0.5}, {"gamma", 0.5}}, {}, alphapo_fn});
    add({"apo", "APO", "Anchored preference", "Data augmentation", true, true, false, true, false,
         {{"beta", 0.1}}, {}, apo_fn});
    add({"sppo", "SPPO", "Self-play preference", "Data augmentation", true, true, false, false,
         false, {{"beta", 0.1}}, {}, sppo_fn});
    add({"robustdpo", "RobustDPO", "Dist. robust DPO", "Robustness", true, true, true, true, false,
         {{"beta", 0.1}, {"rho", 0.5}}, {}, robustdpo_fn});
    add({"gpo", "GPO", "Generalized pref. opt.", "Alternative divergence", true, true, true, true,
         false, {{"beta", 0.1}}, {{"link", "logistic"}}, gpo_fn});
    add({"focalpo", "FocalPO", "Focal loss preference", "Weighting/calibration", true, true, true,
         false, false, {{"beta", 0.1}, {"gamma_f", 2.0}}, {}, focalpo_fn});
    return r;
}

const LossRegistry& LossRegistry::global() {
    static const LossRegistry r = make_default();
    return r;
}

LossOutput variant_loss(const PreferenceBatch& batch, const LossSpec& spec) {
    return LossRegistry::global().get(spec.variant).fn(batch, spec);
}

}  // namespace ptbench
