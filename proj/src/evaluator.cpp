#include "ptbench/evaluator.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ptbench/kernels.hpp"
#include "ptbench/vocab.hpp"

namespace ptbench {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Extraction

namespace {
std::optional<long long> parse_int_at(const std::string& s, std::size_t pos) {
    while (pos < s.size() && s[pos] == ' ') ++pos;
    std::size_t start = pos;
    if (pos < s.size() && s[pos] == '-') ++pos;
    if (pos >= s.size() || !std::isdigit(static_cast<unsigned char>(s[pos]))) return std::nullopt;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    try {
        return std::stoll(s.substr(start, pos - start));
    } catch (const std::out_of_range&) {
        return std::nullopt;
    }
}
}  // namespace

std::optional<long long> extract_strict(const std::string& text) {
    const std::size_t marker = text.rfind("####");
    if (marker == std::string::npos) return std::nullopt;
    return parse_int_at(text, marker + 4);
}

std::optional<long long> extract_flexible(const std::string& text) {
    std::optional<long long> last;
    std::size_t i = 0;
    while (i < text.size()) {
        if (std::isdigit(static_cast<unsigned char>(text[i]))) {
            std::size_t start = i;
            if (start > 0 && text[start - 1] == '-') --start;
            auto v = parse_int_at(text, start);
            while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
            if (v) last = v;
        } else {
            ++i;
        }
    }
    return last;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {
EvalRecord eval_one(const ModelParams& params, const Problem& prob, const EvalOptions& opts) {
    EvalRecord rec;
    rec.problem_id = prob.id;
    try {
        SampleOptions sopts;
        sopts.greedy = true;
        sopts.max_tokens = opts.max_tokens;
        sopts.stop_token = vocab::kEos;
        Rng rng(0);  // unused in greedy mode
        rec.tokens = sample(params, prob.prompt, sopts, rng);
        rec.text = vocab::detokenize(rec.tokens);
        rec.strict_extracted = extract_strict(rec.text);
        rec.flexible_extracted = extract_flexible(rec.text);
        rec.strict_correct = rec.strict_extracted && *rec.strict_extracted == prob.gold_answer;
        rec.flexible_correct = rec.flexible_extracted && *rec.flexible_extracted == prob.gold_answer;
    } catch (const std::exception&) {
        rec.generation_failed = true;  // counted incorrect
    }
    return rec;
}

EvalResult summarize(std::vector<EvalRecord> records) {
    EvalResult out;
    out.summary.n_problems = static_cast<int>(records.size());
    if (!records.empty()) {
        int strict = 0, flexible = 0;
        for (const auto& r : records) {
            strict += r.strict_correct ? 1 : 0;
            flexible += r.flexible_correct ? 1 : 0;
        }
        out.summary.strict_accuracy = 100.0 * strict / static_cast<double>(records.size());
        out.summary.flexible_accuracy = 100.0 * flexible / static_cast<double>(records.size());
        out.summary.format_gap = out.summary.strict_accuracy - out.summary.flexible_accuracy;
    }
    out.records = std::move(records);
    return out;
}
}  // namespace

EvalResult evaluate(const ModelParams& params, std::span<const Problem> problems,
                    const EvalOptions& opts) {
    std::vector<EvalRecord> records(problems.size());
    kernels::parallel_for(problems.size(),
                          [&](std::size_t i) { records[i] = eval_one(params, problems[i], opts); });
    return summarize(std::move(records));
}

EvalResult evaluate_serial(const ModelParams& params, std::span<const Problem> problems,
                           const EvalOptions& opts) {
    std::vector<EvalRecord> records(problems.size());
    for (std::size_t i = 0; i < problems.size(); ++i) {
        records[i] = eval_one(params, problems[i], opts);
    }
    return summarize(std::move(records));
}

std::vector<const EvalRecord*> extract_implication_violations(std::span<const EvalRecord> records) {
    std::vector<const EvalRecord*> out;
    for (const auto& r : records) {
        if (!r.strict_correct || !r.strict_extracted) continue;
        // when the marker integer is also the last number in the text,
        // flexible extraction must agree
        if (r.flexible_extracted && *r.flexible_extracted == *r.strict_extracted &&
            !r.flexible_correct) {
            out.push_back(&r);
        }
        if (!r.flexible_extracted) out.push_back(&r);
    }
    return out;
}

std::string records_to_jsonl(const std::vector<EvalRecord>& records) {
    std::ostringstream out;
    for (const auto& r : records) {
        json j = {{"problem_id", r.problem_id},
                  {"tokens", r.tokens},
                  {"text", r.text},
                  {"strict", r.strict_extracted ? json(*r.strict_extracted) : json()},
                  {"flexible", r.flexible_extracted ? json(*r.flexible_extracted) : json()},
                  {"strict_correct", r.strict_correct},
                  {"flexible_correct", r.flexible_correct},
                  {"generation_failed", r.generation_failed}};
        out << j.dump() << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Cross-task arithmetic

double spread(std::span<const double> values) {
    if (values.size() < 2) return 0.0;
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    return *mx - *mn;
}

namespace {
// average ranks for descending scores, ties share the mean rank
std::vector<double> ranks_desc(const std::vector<double>& scores) {
    const std::size_t n = scores.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
        i = j + 1;
    }
    return ranks;
}
}  // namespace

double rank_correlation(const std::map<std::string, double>& a,
                        const std::map<std::string, double>& b) {
    if (a.size() != b.size()) throw std::domain_error("rank_correlation: key sets differ");
    if (a.size() < 2) throw std::domain_error("rank_correlation: need at least 2 keys");
    std::vector<double> sa, sb;
    for (const auto& [k, v] : a) {
        auto it = b.find(k);
        if (it == b.end()) throw std::domain_error("rank_correlation: key sets differ");
        sa.push_back(v);
        sb.push_back(it->second);
    }
    const auto ra = ranks_desc(sa), rb = ranks_desc(sb);
    const double n = static_cast<double>(ra.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        ma += ra[i] / n;
        mb += rb[i] / n;
    }
    double num = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (va == 0.0 || vb == 0.0) throw std::domain_error("rank_correlation: constant ranking");
    return num / std::sqrt(va * vb);
}

}  // namespace ptbench
