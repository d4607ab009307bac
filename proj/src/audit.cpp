#include "ptbench/audit.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ptbench/evaluator.hpp"

namespace ptbench {

using json = nlohmann::json;

AuditReport audit_determinism(const TrainConfig& base, const std::vector<std::uint64_t>& seeds,
                              const LossRegistry& registry) {
    if (seeds.size() < 2) throw std::domain_error("audit_determinism: need at least 2 seeds");

    AuditReport report;
    report.propagate_seed = base.propagate_seed_to_sampler;

    ModelParams init = base.init_checkpoint.empty()
                           ? ModelParams::random_init(base.model, base.adapter, base.init_seed)
                           : load_checkpoint(base.init_checkpoint).params;
    // data is seed-independent by construction; build it once
    TrainConfig probe = base;
    Dataset data = build_dataset(probe, init);
    auto test_problems = generate_problems(base.data_seed, base.test_problems,
                                           difficulty_from_name(base.difficulty), Split::test);

    std::vector<std::vector<std::uint64_t>> perm_hashes;
    for (std::uint64_t seed : seeds) {
        TrainConfig cfg = base;
        cfg.seed = seed;
        try {
            TrainResult result = train(cfg, data, init, registry);
            AuditRow row;
            row.seed = seed;
            row.param_hash = result.manifest.param_hash;
            row.strict_accuracy = evaluate(result.params, test_problems).summary.strict_accuracy;
            row.final_loss = std::numeric_limits<double>::quiet_NaN();
            for (auto it = result.manifest.metrics.rbegin(); it != result.manifest.metrics.rend();
                 ++it) {
                if (!it->skipped) {
                    row.final_loss = it->loss;
                    break;
                }
            }
            perm_hashes.push_back(result.manifest.epoch_permutation_hashes);
            report.rows.push_back(row);
        } catch (const std::exception& e) {
            throw std::runtime_error("audit_determinism: training failed for seed " +
                                     std::to_string(seed) + ": " + e.what());
        }
    }

    report.param_hashes_identical = true;
    report.accuracies_identical = true;
    for (const auto& row : report.rows) {
        if (row.param_hash != report.rows[0].param_hash) report.param_hashes_identical = false;
        if (row.strict_accuracy != report.rows[0].strict_accuracy) {
            report.accuracies_identical = false;
        }
    }
    report.permutations_identical = true;
    for (const auto& hashes : perm_hashes) {
        if (hashes != perm_hashes[0]) report.permutations_identical = false;
    }
    report.verdict =
        report.param_hashes_identical ? "DETERMINISTIC-ACROSS-SEEDS" : "SEED-SENSITIVE";
    report.notes.push_back(
        "pair construction ties: problems with no incorrect sample are skipped; "
        "problems with no correct sample fall back to the gold response as chosen");
    return report;
}

std::string audit_to_text(const AuditReport& report) {
    std::ostringstream out;
    out << "determinism audit\n";
    out << "  propagate_seed_to_sampler: " << (report.propagate_seed ? "on" : "off") << '\n';
    out << "  verdict: " << report.verdict << '\n';
    out << "  param hashes identical:   " << (report.param_hashes_identical ? "yes" : "no") << '\n';
    out << "  accuracies identical:     " << (report.accuracies_identical ? "yes" : "no") << '\n';
    out << "  permutations identical:   " << (report.permutations_identical ? "yes" : "no") << '\n';
    out << "  seed        param_hash            strict_acc   final_loss\n";
    for (const auto& row : report.rows) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "  %-10llu  %016llx  %10.2f  %12.6f\n",
                      static_cast<unsigned long long>(row.seed),
                      static_cast<unsigned long long>(row.param_hash), row.strict_accuracy,
                      row.final_loss);
        out << buf;
    }
    for (const auto& note : report.notes) out << "  note: " << note << '\n';
    return out.str();
}

std::string audit_to_json(const AuditReport& report) {
    json rows = json::array();
    for (const auto& row : report.rows) {
        rows.push_back({{"seed", row.seed},
                        {"param_hash", row.param_hash},
                        {"strict_accuracy", row.strict_accuracy},
                        {"final_loss", std::isfinite(row.final_loss) ? json(row.final_loss) : json()}});
    }
    json j = {{"verdict", report.verdict},
              {"propagate_seed_to_sampler", report.propagate_seed},
              {"param_hashes_identical", report.param_hashes_identical},
              {"accuracies_identical", report.accuracies_identical},
              {"permutations_identical", report.permutations_identical},
              {"per_seed", rows},
              {"notes", report.notes}};
    return j.dump(2);
}

}  // namespace ptbench
