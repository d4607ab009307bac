#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace ptbench {

// Per-pair sequence-sum log-probabilities. Reference fields are meaningful
// only when the batch carries a reference model (has_ref).
struct PreferenceExample {
    double policy_chosen = 0.0;
    double policy_rejected = 0.0;
    double ref_chosen = 0.0;
    double ref_rejected = 0.0;
    int len_chosen = 1;
    int len_rejected = 1;
};

struct PreferenceBatch {
    std::vector<PreferenceExample> pairs;
    bool has_ref = true;
};

struct LossSpec {
    std::string variant = "dpo";
    double beta = 0.1;
    double gamma = 0.5;  // SimPO-style target margin
    std::map<std::string, double> params;      // variant-specific knobs
    std::map<std::string, std::string> links;  // e.g. GPO link function

    double param(const std::string& key, double fallback) const {
        auto it = params.find(key);
        return it == params.end() ? fallback : it->second;
    }
    std::string link(const std::string& key, const std::string& fallback) const {
        auto it = links.find(key);
        return it == links.end() ? fallback : it->second;
    }
};

// Loss value plus exact partials w.r.t. the policy log-prob inputs (reference
// fields are frozen constants). margins holds the per-pair implicit reward
// margin diagnostic.
struct LossOutput {
    double value = 0.0;
    std::vector<double> d_policy_chosen;
    std::vector<double> d_policy_rejected;
    std::vector<double> margins;
};

// Core named losses.
LossOutput dpo_loss(const PreferenceBatch& batch, const LossSpec& spec);
LossOutput ipo_loss(const PreferenceBatch& batch, const LossSpec& spec);
LossOutput simpo_loss(const PreferenceBatch& batch, const LossSpec& spec);

// Unpaired binary-feedback loss. Examples carry a desirable tag; the batch
// reference point z = max(0, mean log-ratio) is differentiated exactly.
struct KtoExample {
    double policy = 0.0;
    double ref = 0.0;
    bool desirable = true;
};
struct KtoOutput {
    double value = 0.0;
    std::vector<double> d_policy;
};
KtoOutput kto_loss(const std::vector<KtoExample>& examples, const LossSpec& spec);

// Mean negative log-likelihood per token of a gold response.
struct SftOutput {
    double value = 0.0;
    std::vector<double> d_per_token;
};
SftOutput sft_loss(const std::vector<double>& per_token_logp);

// Dispatch over the full registry by spec.variant.
LossOutput variant_loss(const PreferenceBatch& batch, const LossSpec& spec);

using LossFn = std::function<LossOutput(const PreferenceBatch&, const LossSpec&)>;

struct VariantInfo {
    std::string name;          // registry id (lowercase)
    std::string display;       // canonical casing
    std::string modification;  // primary modification descriptor
    std::string family;        // grouped category
    bool requires_ref = true;
    bool pairwise = true;
    // Adding a constant to both policy log-probs leaves the loss unchanged.
    bool policy_shift_invariant = false;
    // Loss never increases in policy_logp_chosen on the standard grid
    // (|logp| <= 8). Calibration/targeting losses and FocalPO's
    // easy-pair upweighting are flagged false here on purpose.
    bool monotone_in_chosen = true;
    bool online_data = false;  // trainer regenerates pairs each epoch
    std::map<std::string, double> defaults;
    std::map<std::string, std::string> link_defaults;
    LossFn fn;
};

class LossRegistry {
public:
    // The default registry with exactly the 20 preference variants plus sft.
    static const LossRegistry& global();
    static LossRegistry make_default();

    void add(VariantInfo info);
    bool contains(const std::string& name) const;
    const VariantInfo& get(const std::string& name) const;  // throws listing known ids
    std::vector<const VariantInfo*> list() const;           // stable order
    std::size_t size() const { return variants_.size(); }

    // Spec with the variant's default hyperparameters filled in.
    LossSpec default_spec(const std::string& name) const;

private:
    std::map<std::string, VariantInfo> variants_;
    std::vector<std::string> order_;
};

}  // namespace ptbench
