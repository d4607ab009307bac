#include "ptbench/taskdata.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ptbench/extract.hpp"
#include "ptbench/kernels.hpp"
#include "ptbench/vocab.hpp"

namespace ptbench {

using json = nlohmann::json;
namespace v = vocab;

Difficulty difficulty_from_name(const std::string& name) {
    if (name == "1step") return {1, 1};
    if (name == "2step") return {2, 2};
    if (name == "3step") return {3, 3};
    if (name == "mix12") return {1, 2};
    throw std::invalid_argument("difficulty_from_name: unknown level " + name);
}

namespace {

int op_token(Op op) {
    switch (op) {
        case Op::add: return v::kAdd;
        case Op::sub: return v::kSub;
        case Op::mul: return v::kMul;
    }
    throw std::logic_error("op_token");
}

long long apply_op(long long value, Op op, int operand) {
    switch (op) {
        case Op::add: return value + operand;
        case Op::sub: return value - operand;
        case Op::mul: return value * operand;
    }
    throw std::logic_error("apply_op");
}

// Pick an op + single-digit operand that keeps the next value carry-free and
// two-digit. add/sub touch only the units digit; mul scales both digits.
ProblemStep sample_step(Rng& rng, int value) {
    const int tens = value / 10, units = value % 10;
    struct Choice {
        Op op;
        int lo, hi;
    };
    std::vector<Choice> choices;
    if (units <= 8) choices.push_back({Op::add, 1, 9 - units});
    if (units >= 1) choices.push_back({Op::sub, 1, units});
    {
        int hi = 9 / tens;
        if (units > 0) hi = std::min(hi, 9 / units);
        if (hi >= 2) choices.push_back({Op::mul, 2, hi});
    }
    const auto& c = choices[rng.below(choices.size())];
    return {c.op, rng.uniform_int(c.lo, c.hi)};
}

std::vector<int> render_prompt(int start_value, const std::vector<ProblemStep>& steps) {
    std::vector<int> p = {v::kYou, v::kHave};
    v::push_two_digits(p, start_value);
    p.push_back(v::kItems);
    for (const auto& s : steps) {
        p.push_back(v::kThen);
        p.push_back(op_token(s.op));
        p.push_back(s.operand);
    }
    p.insert(p.end(), {v::kWhat, v::kIs, v::kResult, v::kEquals});
    return p;
}

// Worked solution: restate the start value, then every intermediate, then the
// canonical "#### <answer>". The echo keeps each step's inputs at
// step-independent window offsets (prior value three tokens back, operator
// and operand at fixed distances into the prompt).
std::vector<int> render_response(int start_value, const std::vector<ProblemStep>& steps) {
    std::vector<int> r;
    v::push_two_digits(r, start_value);
    r.push_back(v::kSemi);
    long long value = start_value;
    for (const auto& s : steps) {
        value = apply_op(value, s.op, s.operand);
        v::push_two_digits(r, static_cast<int>(value));
        r.push_back(v::kSemi);
    }
    r.push_back(v::kMarker);
    v::push_two_digits(r, static_cast<int>(value));
    r.push_back(v::kEos);
    return r;
}

}  // namespace

std::vector<Problem> generate_problems(std::uint64_t seed, int count, Difficulty difficulty,
                                       Split split) {
    if (count < 1) throw std::invalid_argument("generate_problems: count must be >= 1");
    if (difficulty.min_steps < 1 || difficulty.max_steps < difficulty.min_steps) {
        throw std::invalid_argument("generate_problems: bad difficulty");
    }
    const int want_parity = split == Split::train ? 0 : 1;
    std::vector<Problem> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        Rng rng(mix_seed(seed, split == Split::train ? 0 : 1, static_cast<std::uint64_t>(i)));
        Problem p;
        p.id = mix_seed(seed, split == Split::train ? 0xA0 : 0xB0, static_cast<std::uint64_t>(i));
        p.split = split;
        const int tens = rng.uniform_int(1, 9);
        // digit-sum parity selects the split: units = 2k + ((parity + tens) mod 2)
        const int units = 2 * rng.uniform_int(0, 4) + ((want_parity + tens) % 2);
        p.start_value = tens * 10 + units;
        const int n_steps = rng.uniform_int(difficulty.min_steps, difficulty.max_steps);
        long long value = p.start_value;
        for (int s = 0; s < n_steps; ++s) {
            ProblemStep st = sample_step(rng, static_cast<int>(value));
            value = apply_op(value, st.op, st.operand);
            p.steps.push_back(st);
        }
        p.gold_answer = value;
        p.prompt = render_prompt(p.start_value, p.steps);
        p.gold_response = render_response(p.start_value, p.steps);
        out.push_back(std::move(p));
    }
    return out;
}

bool verify_answer(const std::vector<int>& completion, const Problem& problem) {
    auto extracted = extract_strict(vocab::detokenize(completion));
    return extracted.has_value() && *extracted == problem.gold_answer;
}

std::optional<PreferencePair> build_pair_for(const Problem& problem, const ModelParams& params,
                                             int samples_per_prompt, std::uint64_t seed_base,
                                             double temperature) {
    if (samples_per_prompt < 2) {
        throw std::invalid_argument("build_pair_for: samples_per_prompt must be >= 2");
    }
    SampleOptions opts;
    opts.temperature = temperature;
    opts.max_tokens = 24;
    opts.stop_token = v::kEos;
    std::optional<std::vector<int>> correct, incorrect;
    for (int j = 0; j < samples_per_prompt; ++j) {
        Rng sample_rng(mix_seed(seed_base, problem.id, static_cast<std::uint64_t>(j)));
        auto completion = sample(params, problem.prompt, opts, sample_rng);
        const bool ok = verify_answer(completion, problem);
        if (ok && !correct) {
            correct = std::move(completion);
        } else if (!ok && !incorrect) {
            incorrect = std::move(completion);
        }
        if (correct && incorrect) break;
    }
    if (!incorrect) return std::nullopt;  // nothing to reject against
    PreferencePair pair;
    pair.problem_id = problem.id;
    pair.rejected = std::move(*incorrect);
    pair.rejected_provenance = Provenance::self_play_incorrect;
    if (correct) {
        pair.chosen = std::move(*correct);
        pair.chosen_provenance = Provenance::self_play_correct;
    } else {
        pair.chosen = problem.gold_response;
        pair.chosen_provenance = Provenance::gold;
    }
    return pair;
}

std::vector<PreferencePair> build_pairs(const std::vector<Problem>& problems,
                                        const ModelParams& params, int samples_per_prompt,
                                        Rng& rng, double temperature) {
    if (samples_per_prompt < 2) {
        throw std::invalid_argument("build_pairs: samples_per_prompt must be >= 2");
    }
    const std::uint64_t base = rng.next_u64();
    std::vector<std::optional<PreferencePair>> cands(problems.size());
    kernels::parallel_for(problems.size(), [&](std::size_t i) {
        cands[i] = build_pair_for(problems[i], params, samples_per_prompt, base, temperature);
    });
    std::vector<PreferencePair> out;
    for (auto& c : cands) {
        if (c) out.push_back(std::move(*c));
    }
    return out;
}

std::vector<std::size_t> epoch_order(std::size_t n_items, const SamplerState& state,
                                     std::uint64_t run_seed) {
    if (n_items < 1) throw std::invalid_argument("epoch_order: n_items must be >= 1");
    const std::uint64_t seed =
        state.propagate_run_seed
            ? mix_seed(state.shuffle_seed, run_seed, static_cast<std::uint64_t>(state.epoch))
            : mix_seed(state.shuffle_seed, static_cast<std::uint64_t>(state.epoch));
    std::vector<std::size_t> perm(n_items);
    for (std::size_t i = 0; i < n_items; ++i) perm[i] = i;
    Rng rng(seed);
    rng.shuffle(perm);
    return perm;
}

// ---------------------------------------------------------------------------
// JSONL

namespace {
const char* provenance_name(Provenance p) {
    switch (p) {
        case Provenance::self_play_correct: return "self_play_correct";
        case Provenance::self_play_incorrect: return "self_play_incorrect";
        case Provenance::gold: return "gold";
    }
    throw std::logic_error("provenance_name");
}

Provenance provenance_from(const std::string& s) {
    if (s == "self_play_correct") return Provenance::self_play_correct;
    if (s == "self_play_incorrect") return Provenance::self_play_incorrect;
    if (s == "gold") return Provenance::gold;
    throw std::invalid_argument("unknown provenance " + s);
}

const char* op_name(Op op) {
    switch (op) {
        case Op::add: return "add";
        case Op::sub: return "sub";
        case Op::mul: return "mul";
    }
    throw std::logic_error("op_name");
}

Op op_from(const std::string& s) {
    if (s == "add") return Op::add;
    if (s == "sub") return Op::sub;
    if (s == "mul") return Op::mul;
    throw std::invalid_argument("unknown op " + s);
}
}  // namespace

std::string problems_to_jsonl(const std::vector<Problem>& problems) {
    std::ostringstream out;
    for (const auto& p : problems) {
        json steps = json::array();
        for (const auto& s : p.steps) steps.push_back({{"op", op_name(s.op)}, {"operand", s.operand}});
        json j = {{"id", p.id},
                  {"prompt", p.prompt},
                  {"gold_answer", p.gold_answer},
                  {"gold_response", p.gold_response},
                  {"start_value", p.start_value},
                  {"steps", steps},
                  {"split", p.split == Split::train ? "train" : "test"},
                  {"prompt_text", vocab::detokenize(p.prompt)},
                  {"response_text", vocab::detokenize(p.gold_response)}};
        out << j.dump() << '\n';
    }
    return out.str();
}

std::vector<Problem> problems_from_jsonl(const std::string& text) {
    std::vector<Problem> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        Problem p;
        p.id = j.at("id");
        p.prompt = j.at("prompt").get<std::vector<int>>();
        p.gold_answer = j.at("gold_answer");
        p.gold_response = j.at("gold_response").get<std::vector<int>>();
        p.start_value = j.at("start_value");
        for (const auto& s : j.at("steps")) {
            p.steps.push_back({op_from(s.at("op")), s.at("operand")});
        }
        p.split = j.at("split") == "train" ? Split::train : Split::test;
        out.push_back(std::move(p));
    }
    return out;
}

std::string pairs_to_jsonl(const std::vector<PreferencePair>& pairs) {
    std::ostringstream out;
    for (const auto& p : pairs) {
        json j = {{"problem_id", p.problem_id},
                  {"chosen", p.chosen},
                  {"rejected", p.rejected},
                  {"chosen_provenance", provenance_name(p.chosen_provenance)},
                  {"rejected_provenance", provenance_name(p.rejected_provenance)}};
        out << j.dump() << '\n';
    }
    return out.str();
}

std::vector<PreferencePair> pairs_from_jsonl(const std::string& text) {
    std::vector<PreferencePair> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        PreferencePair p;
        p.problem_id = j.at("problem_id");
        p.chosen = j.at("chosen").get<std::vector<int>>();
        p.rejected = j.at("rejected").get<std::vector<int>>();
        p.chosen_provenance = provenance_from(j.at("chosen_provenance"));
        p.rejected_provenance = provenance_from(j.at("rejected_provenance"));
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace ptbench
