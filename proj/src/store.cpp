#include "ptbench/store.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ptbench/rng.hpp"

namespace ptbench {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string record_to_json(const RunRecord& r) {
    json j = {{"algorithm", r.algorithm},
              {"seed", r.seed},
              {"config_hash", r.config_hash},
              {"config_text", r.config_text},
              {"task", r.task},
              {"init_strict", r.init_strict},
              {"final_strict", r.final_strict},
              {"final_flexible", r.final_flexible},
              {"wall_clock_seconds", r.wall_clock_seconds},
              {"param_hash", r.param_hash},
              {"pathological", r.pathological},
              {"verdict", r.verdict},
              {"manifest_path", r.manifest_path},
              {"checkpoint_path", r.checkpoint_path}};
    return j.dump();
}

RunRecord record_from_json(const std::string& line) {
    json j = json::parse(line);
    RunRecord r;
    r.algorithm = j.at("algorithm");
    r.seed = j.at("seed");
    r.config_hash = j.at("config_hash");
    r.config_text = j.at("config_text");
    r.task = j.at("task");
    r.init_strict = j.at("init_strict");
    r.final_strict = j.at("final_strict");
    r.final_flexible = j.at("final_flexible");
    r.wall_clock_seconds = j.at("wall_clock_seconds");
    r.param_hash = j.at("param_hash");
    r.pathological = j.at("pathological");
    r.verdict = j.at("verdict");
    r.manifest_path = j.at("manifest_path");
    r.checkpoint_path = j.at("checkpoint_path");
    return r;
}

ResultsStore::ResultsStore(std::string dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
    std::ifstream in(results_path());
    std::string line;
    while (in && std::getline(in, line)) {
        if (!line.empty()) records_.push_back(record_from_json(line));
    }
}

std::string ResultsStore::results_path() const { return (fs::path(dir_) / "results.jsonl").string(); }

bool ResultsStore::contains(const std::string& algorithm, std::uint64_t seed) const {
    return find(algorithm, seed) != nullptr;
}

const RunRecord* ResultsStore::find(const std::string& algorithm, std::uint64_t seed) const {
    for (const auto& r : records_) {
        if (r.algorithm == algorithm && r.seed == seed) return &r;
    }
    return nullptr;
}

void ResultsStore::append(const RunRecord& record, bool overwrite) {
    if (const RunRecord* existing = find(record.algorithm, record.seed)) {
        if (!overwrite) {
            throw std::logic_error("store: (" + record.algorithm + ", seed " +
                                   std::to_string(record.seed) +
                                   ") already present; pass overwrite to replace");
        }
        for (auto& r : records_) {
            if (r.algorithm == record.algorithm && r.seed == record.seed) {
                r = record;
                break;
            }
        }
        (void)existing;
        rewrite();
        return;
    }
    records_.push_back(record);
    std::ofstream out(results_path(), std::ios::app);
    if (!out) throw std::runtime_error("store: cannot open " + results_path());
    out << record_to_json(record) << '\n';
}

void ResultsStore::rewrite() const {
    std::ofstream out(results_path(), std::ios::trunc);
    if (!out) throw std::runtime_error("store: cannot open " + results_path());
    for (const auto& r : records_) out << record_to_json(r) << '\n';
}

void ResultsStore::verify_integrity() const {
    for (const auto& r : records_) {
        const std::uint64_t h = fnv1a(r.config_text.data(), r.config_text.size());
        if (h != r.config_hash) {
            throw std::runtime_error("store integrity: config hash mismatch for (" + r.algorithm +
                                     ", seed " + std::to_string(r.seed) + ")");
        }
    }
}

}  // namespace ptbench
