#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ptbench {

// One completed (algorithm, seed) cell: evaluation summary plus enough
// metadata to re-derive the config hash for integrity checks.
struct RunRecord {
    std::string algorithm;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
    std::string config_text;
    std::string task = "arith";
    double init_strict = 0.0;
    double final_strict = 0.0;
    double final_flexible = 0.0;
    double wall_clock_seconds = 0.0;
    std::uint64_t param_hash = 0;
    bool pathological = false;
    std::string verdict = "ok";  // ok | pathological | failed
    std::string manifest_path;
    std::string checkpoint_path;
};

// Append-only JSONL store under <dir>/results.jsonl, indexed by
// (algorithm, seed). Rewriting an existing key requires overwrite=true.
// Writes go through a single writer (the sweep parent or the CLI process).
class ResultsStore {
public:
    explicit ResultsStore(std::string dir);

    const std::string& dir() const { return dir_; }
    std::string results_path() const;

    const std::vector<RunRecord>& records() const { return records_; }
    bool contains(const std::string& algorithm, std::uint64_t seed) const;
    const RunRecord* find(const std::string& algorithm, std::uint64_t seed) const;

    void append(const RunRecord& record, bool overwrite = false);

    // Every record's config hash must re-derive from its stored config text.
    // Throws on the first mismatch.
    void verify_integrity() const;

private:
    void rewrite() const;
    std::string dir_;
    std::vector<RunRecord> records_;
};

std::string record_to_json(const RunRecord& r);
RunRecord record_from_json(const std::string& line);

}  // namespace ptbench
