#include "ptbench/model.hpp"

#include <algorithm>
#include <bit>
#include <cassert>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ptbench/kernels.hpp"

namespace ptbench {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Parameter layout

ModelParams::ModelParams(ModelConfig cfg, AdapterConfig adapter) : cfg_(cfg), adapter_(adapter) {
    if (cfg.vocab_size < 2 || cfg.dims < 1 || cfg.hidden < 1 || cfg.window < 1 ||
        cfg.context_len < 2) {
        throw std::invalid_argument("ModelParams: bad config");
    }
    const std::size_t V = cfg.vocab_size, D = cfg.dims, H = cfg.hidden, W = cfg.window;
    const std::size_t P = static_cast<std::size_t>(cfg.context_len) + 1;  // + bos slot
    std::size_t off = 0;
    auto add = [&](const char* name, std::size_t r, std::size_t c) {
        segments_.push_back({name, r, c, off});
        off += r * c;
    };
    add("tok_embed", V, D);
    add("pos_embed", P, D);
    add("mix", D, W * D);
    add("mix_b", D, 1);
    add("mlp1", H, D);
    add("mlp1_b", H, 1);
    add("mlp2", D, H);
    add("mlp2_b", D, 1);
    add("out_b", V, 1);
    adapter_begin_ = off;
    if (adapter.enabled) {
        if (adapter.rank < 1) throw std::invalid_argument("AdapterConfig: rank must be >= 1");
        const std::size_t R = adapter.rank;
        add("a_mix", D, R);
        add("b_mix", R, W * D);
        add("a_mlp1", H, R);
        add("b_mlp1", R, D);
        add("a_mlp2", D, R);
        add("b_mlp2", R, H);
        add("a_head", V, R);
        add("b_head", R, D);
    }
    flat_.assign(off, 0.0);
}

ModelParams ModelParams::zeros(ModelConfig cfg, AdapterConfig adapter) {
    return ModelParams(cfg, adapter);
}

ModelParams ModelParams::random_init(ModelConfig cfg, AdapterConfig adapter, std::uint64_t seed,
                                     double init_std) {
    ModelParams p(cfg, adapter);
    Rng rng(mix_seed(seed, 0x6d6f64656cULL));
    for (const auto& seg : p.segments_) {
        const bool bias = seg.name.ends_with("_b");
        const bool adapter_b = seg.name.starts_with("b_");  // LoRA B starts at zero
        if (bias || adapter_b) continue;
        auto s = p.segment(seg.name);
        for (double& v : s) v = rng.normal() * init_std;
    }
    return p;
}

void ModelParams::unflatten(std::span<const double> values) {
    if (values.size() != flat_.size()) throw std::invalid_argument("unflatten: size mismatch");
    std::copy(values.begin(), values.end(), flat_.begin());
}

bool ModelParams::is_trainable(std::size_t index) const {
    if (!adapter_.enabled) return true;
    return index >= adapter_begin_;
}

std::span<const double> ModelParams::segment(const std::string& name) const {
    for (const auto& seg : segments_) {
        if (seg.name == name) return {flat_.data() + seg.offset, seg.size()};
    }
    throw std::invalid_argument("segment: unknown name " + name);
}

std::span<double> ModelParams::segment(const std::string& name) {
    for (const auto& seg : segments_) {
        if (seg.name == name) return {flat_.data() + seg.offset, seg.size()};
    }
    throw std::invalid_argument("segment: unknown name " + name);
}

std::uint64_t ModelParams::param_hash() const {
    return fnv1a(flat_.data(), flat_.size() * sizeof(double));
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

constexpr int kBosOffset = 1;  // internal sequence is bos + prompt + response

struct EffWeights {
    std::vector<double> mix_store, mlp1_store, mlp2_store, head_store;
    std::span<const double> mix, mlp1, mlp2, head;
};

// delta = scale * A(rows x r) * B(r x cols) added onto dst(rows x cols)
void add_low_rank(std::span<double> dst, std::span<const double> a, std::span<const double> b,
                  std::size_t rows, std::size_t cols, std::size_t r, double scale) {
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t k = 0; k < r; ++k) {
            const double aik = scale * a[i * r + k];
            if (aik == 0.0) continue;
            const double* bk = b.data() + k * cols;
            double* d = dst.data() + i * cols;
            for (std::size_t j = 0; j < cols; ++j) d[j] += aik * bk[j];
        }
    }
}

EffWeights make_effective(const ModelParams& p) {
    EffWeights e;
    const auto& cfg = p.config();
    const std::size_t V = cfg.vocab_size, D = cfg.dims, H = cfg.hidden, W = cfg.window;
    if (!p.adapter().enabled) {
        e.mix = p.segment("mix");
        e.mlp1 = p.segment("mlp1");
        e.mlp2 = p.segment("mlp2");
        e.head = p.segment("tok_embed");
        return e;
    }
    const std::size_t R = p.adapter().rank;
    const double s = p.adapter().scale();
    auto materialize = [&](const char* base, const char* a, const char* b, std::size_t rows,
                           std::size_t cols, std::vector<double>& store) {
        auto bs = p.segment(base);
        store.assign(bs.begin(), bs.end());
        add_low_rank(store, p.segment(a), p.segment(b), rows, cols, R, s);
    };
    materialize("mix", "a_mix", "b_mix", D, W * D, e.mix_store);
    materialize("mlp1", "a_mlp1", "b_mlp1", H, D, e.mlp1_store);
    materialize("mlp2", "a_mlp2", "b_mlp2", D, H, e.mlp2_store);
    materialize("tok_embed", "a_head", "b_head", V, D, e.head_store);
    e.mix = e.mix_store;
    e.mlp1 = e.mlp1_store;
    e.mlp2 = e.mlp2_store;
    e.head = e.head_store;
    return e;
}

void check_tokens(const ModelParams& p, std::span<const int> prompt, std::span<const int> response) {
    const int V = p.config().vocab_size;
    const std::size_t total = prompt.size() + response.size();
    if (total > static_cast<std::size_t>(p.config().context_len)) {
        throw std::length_error("score_sequence: prompt+response exceeds context_len");
    }
    for (int t : prompt) {
        if (t < 0 || t >= V) throw std::domain_error("score_sequence: out-of-vocab token");
    }
    for (int t : response) {
        if (t < 0 || t >= V) throw std::domain_error("score_sequence: out-of-vocab token");
    }
}

// The last vocab id doubles as the begin-of-sequence token so every position,
// including the first prompt token, is conditioned on something.
std::vector<int> internal_sequence(const ModelParams& p, std::span<const int> prompt,
                                   std::span<const int> response) {
    std::vector<int> seq;
    seq.reserve(prompt.size() + response.size() + kBosOffset);
    seq.push_back(p.config().vocab_size - 1);
    seq.insert(seq.end(), prompt.begin(), prompt.end());
    seq.insert(seq.end(), response.begin(), response.end());
    return seq;
}

// Embeddings for internal positions [0, len): e[i] = tok_embed[s_i] + pos_embed[i].
std::vector<double> embed_all(const ModelParams& p, std::span<const int> seq) {
    const std::size_t D = p.config().dims;
    auto tok = p.segment("tok_embed");
    auto pos = p.segment("pos_embed");
    std::vector<double> e(seq.size() * D);
    for (std::size_t i = 0; i < seq.size(); ++i) {
        const double* te = tok.data() + static_cast<std::size_t>(seq[i]) * D;
        const double* pe = pos.data() + i * D;
        double* ei = e.data() + i * D;
        for (std::size_t d = 0; d < D; ++d) ei[d] = te[d] + pe[d];
    }
    return e;
}

struct PositionState {
    std::vector<double> wvec;   // W*D window input
    std::vector<double> act1;   // tanh(mix output), D
    std::vector<double> act2;   // tanh(mlp1 output), H
    std::vector<double> hidden; // residual output, D
    std::vector<double> probs;  // softmax over vocab
    double lse = 0.0;
};

// Forward at context position i; returns log-probs over the next token.
void forward_position(const ModelParams& p, const EffWeights& eff, const std::vector<double>& e,
                      std::size_t i, PositionState& st, std::vector<double>& logp_out) {
    const auto& cfg = p.config();
    const std::size_t V = cfg.vocab_size, D = cfg.dims, H = cfg.hidden, W = cfg.window;

    st.wvec.assign(W * D, 0.0);
    for (std::size_t k = 0; k < W; ++k) {
        if (i < k) break;
        const std::size_t src = i - k;
        std::copy_n(e.data() + src * D, D, st.wvec.data() + k * D);
    }
    st.act1.assign(D, 0.0);
    kernels::matvec(eff.mix, D, W * D, st.wvec, st.act1);
    {
        auto b = p.segment("mix_b");
        for (std::size_t d = 0; d < D; ++d) st.act1[d] = std::tanh(st.act1[d] + b[d]);
    }
    st.act2.assign(H, 0.0);
    kernels::matvec(eff.mlp1, H, D, st.act1, st.act2);
    {
        auto b = p.segment("mlp1_b");
        for (std::size_t h = 0; h < H; ++h) st.act2[h] = std::tanh(st.act2[h] + b[h]);
    }
    st.hidden.assign(D, 0.0);
    kernels::matvec(eff.mlp2, D, H, st.act2, st.hidden);
    {
        auto b = p.segment("mlp2_b");
        for (std::size_t d = 0; d < D; ++d) st.hidden[d] += b[d] + st.act1[d];  // residual
    }
    logp_out.assign(V, 0.0);
    kernels::matvec(eff.head, V, D, st.hidden, logp_out);
    {
        auto b = p.segment("out_b");
        for (std::size_t v = 0; v < V; ++v) logp_out[v] += b[v];
    }
    // stable log-softmax
    double mx = logp_out[0];
    for (double v : logp_out) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : logp_out) sum += std::exp(v - mx);
    st.lse = mx + std::log(sum);
    st.probs.assign(V, 0.0);
    for (std::size_t v = 0; v < V; ++v) {
        logp_out[v] -= st.lse;
        st.probs[v] = std::exp(logp_out[v]);
    }
}

}  // namespace

std::vector<double> next_logdist(const ModelParams& params, std::span<const int> context) {
    check_tokens(params, context, {});
    auto seq = internal_sequence(params, context, {});
    auto e = embed_all(params, seq);
    PositionState st;
    std::vector<double> logp;
    forward_position(params, make_effective(params), e, seq.size() - 1, st, logp);
    return logp;
}

SequenceLogProb score_sequence(const ModelParams& params, std::span<const int> prompt,
                               std::span<const int> response) {
    check_tokens(params, prompt, response);
    SequenceLogProb out;
    out.length = static_cast<int>(response.size());
    if (response.empty()) return out;

    auto seq = internal_sequence(params, prompt, response);
    auto e = embed_all(params, seq);
    auto eff = make_effective(params);
    PositionState st;
    std::vector<double> logp;
    const std::size_t first = prompt.size();  // context position predicting response[0]
    out.per_token.reserve(response.size());
    for (std::size_t k = 0; k < response.size(); ++k) {
        forward_position(params, eff, e, first + k, st, logp);
        const double lp = logp[static_cast<std::size_t>(seq[first + k + 1])];
        out.per_token.push_back(lp);
        out.total += lp;
    }
    return out;
}

std::vector<double> grad_logprob_weighted(const ModelParams& params, std::span<const int> prompt,
                                          std::span<const int> response,
                                          std::span<const double> weights) {
    check_tokens(params, prompt, response);
    if (!weights.empty() && weights.size() != response.size()) {
        throw std::invalid_argument("grad_logprob_weighted: weights/response size mismatch");
    }
    const auto& cfg = params.config();
    const std::size_t V = cfg.vocab_size, D = cfg.dims, H = cfg.hidden, W = cfg.window;
    const std::size_t R = params.adapter().enabled ? params.adapter().rank : 0;
    const double ascale = params.adapter().enabled ? params.adapter().scale() : 0.0;

    std::vector<double> grad(params.param_count(), 0.0);
    if (response.empty()) return grad;

    auto seq = internal_sequence(params, prompt, response);
    auto e = embed_all(params, seq);
    auto eff = make_effective(params);

    auto gseg = [&](const char* name) {
        for (const auto& s : params.segments()) {
            if (s.name == name) return std::span<double>(grad.data() + s.offset, s.size());
        }
        throw std::logic_error("missing segment");
    };
    auto g_tok = gseg("tok_embed");
    auto g_pos = gseg("pos_embed");
    auto g_mix = gseg("mix");
    auto g_mix_b = gseg("mix_b");
    auto g_mlp1 = gseg("mlp1");
    auto g_mlp1_b = gseg("mlp1_b");
    auto g_mlp2 = gseg("mlp2");
    auto g_mlp2_b = gseg("mlp2_b");
    auto g_out_b = gseg("out_b");

    // d(loss)/d(e[p]) accumulated across all scored windows
    std::vector<double> de(seq.size() * D, 0.0);

    PositionState st;
    std::vector<double> logp, dlogits(V), dh(D), dg(H), dz(H), da(D), du(D), dwvec(W * D);
    std::vector<double> tmp_r(std::max<std::size_t>(R, 1));

    const std::size_t first = prompt.size();
    for (std::size_t k = 0; k < response.size(); ++k) {
        const std::size_t i = first + k;
        forward_position(params, eff, e, i, st, logp);
        const int target = seq[i + 1];
        const double wk = weights.empty() ? 1.0 : weights[k];
        if (wk == 0.0) continue;

        // d logp[target] / d logits = onehot - softmax
        for (std::size_t v = 0; v < V; ++v) dlogits[v] = -wk * st.probs[v];
        dlogits[static_cast<std::size_t>(target)] += wk;

        for (std::size_t v = 0; v < V; ++v) g_out_b[v] += dlogits[v];

        // tied head: logits = head_eff * h + out_b
        std::fill(dh.begin(), dh.end(), 0.0);
        kernels::matvec_t_add(eff.head, V, D, dlogits, dh);
        kernels::outer_add(g_tok, V, D, dlogits, st.hidden);  // head role of tok_embed
        if (R > 0) {
            auto a_head = params.segment("a_head");
            auto b_head = params.segment("b_head");
            auto g_a = gseg("a_head");
            auto g_b = gseg("b_head");
            // dA += s * dlogits (x) (B h);  dB += s * (A^T dlogits) (x) h
            for (std::size_t r = 0; r < R; ++r) {
                double acc = 0.0;
                const double* br = b_head.data() + r * D;
                for (std::size_t d = 0; d < D; ++d) acc += br[d] * st.hidden[d];
                tmp_r[r] = acc;
            }
            for (std::size_t v = 0; v < V; ++v) {
                for (std::size_t r = 0; r < R; ++r) g_a[v * R + r] += ascale * dlogits[v] * tmp_r[r];
            }
            for (std::size_t r = 0; r < R; ++r) {
                double acc = 0.0;
                for (std::size_t v = 0; v < V; ++v) acc += a_head[v * R + r] * dlogits[v];
                const double c = ascale * acc;
                for (std::size_t d = 0; d < D; ++d) g_b[r * D + d] += c * st.hidden[d];
            }
        }

        // residual: h = act1 + mlp2(act2) + b
        std::fill(da.begin(), da.end(), 0.0);
        for (std::size_t d = 0; d < D; ++d) {
            da[d] = dh[d];  // residual branch
            g_mlp2_b[d] += dh[d];
        }
        std::fill(dg.begin(), dg.end(), 0.0);
        kernels::matvec_t_add(eff.mlp2, D, H, dh, dg);
        kernels::outer_add(g_mlp2, D, H, dh, st.act2);
        if (R > 0) {
            auto a2 = params.segment("a_mlp2");
            auto b2 = params.segment("b_mlp2");
            auto g_a = gseg("a_mlp2");
            auto g_b = gseg("b_mlp2");
            for (std::size_t r = 0; r < R; ++r) {
                double acc = 0.0;
                const double* br = b2.data() + r * H;
                for (std::size_t h = 0; h < H; ++h) acc += br[h] * st.act2[h];
                tmp_r[r] = acc;
            }
            for (std::size_t d = 0; d < D; ++d) {
                for (std::size_t r = 0; r < R; ++r) g_a[d * R + r] += ascale * dh[d] * tmp_r[r];
            }
            for (std::size_t r = 0; r < R; ++r) {
                double acc = 0.0;
                for (std::size_t d = 0; d < D; ++d) acc += a2[d * R + r] * dh[d];
                const double c = ascale * acc;
                for (std::size_t h = 0; h < H; ++h) g_b[r * H + h] += c * st.act2[h];
            }
        }

        for (std::size_t h = 0; h < H; ++h) dz[h] = dg[h] * (1.0 - st.act2[h] * st.act2[h]);
        for (std::size_t h = 0; h < H; ++h) g_mlp1_b[h] += dz[h];
        kernels::matvec_t_add(eff.mlp1, H, D, dz, da);
        kernels::outer_add(g_mlp1, H, D, dz, st.act1);
        if (R > 0) {
            auto a1 = params.segment("a_mlp1");
            auto b1 = params.segment("b_mlp1");
            auto g_a = gseg("a_mlp1");
            auto g_b = gseg("b_mlp1");
            for (std::size_t r = 0; r < R; ++r) {
                double acc = 0.0;
                const double* br = b1.data() + r * D;
                for (std::size_t d = 0; d < D; ++d) acc += br[d] * st.act1[d];
                tmp_r[r] = acc;
            }
            for (std::size_t h = 0; h < H; ++h) {
                for (std::size_t r = 0; r < R; ++r) g_a[h * R + r] += ascale * dz[h] * tmp_r[r];
            }
            for (std::size_t r = 0; r < R; ++r) {
                double acc = 0.0;
                for (std::size_t h = 0; h < H; ++h) acc += a1[h * R + r] * dz[h];
                const double c = ascale * acc;
                for (std::size_t d = 0; d < D; ++d) g_b[r * D + d] += c * st.act1[d];
            }
        }

        for (std::size_t d = 0; d < D; ++d) du[d] = da[d] * (1.0 - st.act1[d] * st.act1[d]);
        for (std::size_t d = 0; d < D; ++d) g_mix_b[d] += du[d];
        std::fill(dwvec.begin(), dwvec.end(), 0.0);
        kernels::matvec_t_add(eff.mix, D, W * D, du, dwvec);
        kernels::outer_add(g_mix, D, W * D, du, st.wvec);
        if (R > 0) {
            auto am = params.segment("a_mix");
            auto bm = params.segment("b_mix");
            auto g_a = gseg("a_mix");
            auto g_b = gseg("b_mix");
            const std::size_t WD = W * D;
            for (std::size_t r = 0; r < R; ++r) {
                double acc = 0.0;
                const double* br = bm.data() + r * WD;
                for (std::size_t j = 0; j < WD; ++j) acc += br[j] * st.wvec[j];
                tmp_r[r] = acc;
            }
            for (std::size_t d = 0; d < D; ++d) {
                for (std::size_t r = 0; r < R; ++r) g_a[d * R + r] += ascale * du[d] * tmp_r[r];
            }
            for (std::size_t r = 0; r < R; ++r) {
                double acc = 0.0;
                for (std::size_t d = 0; d < D; ++d) acc += am[d * R + r] * du[d];
                const double c = ascale * acc;
                for (std::size_t j = 0; j < WD; ++j) g_b[r * WD + j] += c * st.wvec[j];
            }
        }

        for (std::size_t k2 = 0; k2 < W; ++k2) {
            if (i < k2) break;
            const std::size_t src = i - k2;
            double* dst = de.data() + src * D;
            const double* s = dwvec.data() + k2 * D;
            for (std::size_t d = 0; d < D; ++d) dst[d] += s[d];
        }
    }

    // embedding role of tok_embed + positional table
    for (std::size_t p = 0; p < seq.size(); ++p) {
        const double* dep = de.data() + p * D;
        double* gt = g_tok.data() + static_cast<std::size_t>(seq[p]) * D;
        double* gp = g_pos.data() + p * D;
        for (std::size_t d = 0; d < D; ++d) {
            gt[d] += dep[d];
            gp[d] += dep[d];
        }
    }
    return grad;
}

std::vector<double> grad_logprob(const ModelParams& params, std::span<const int> prompt,
                                 std::span<const int> response) {
    return grad_logprob_weighted(params, prompt, response, {});
}

std::vector<int> sample(const ModelParams& params, std::span<const int> prompt,
                        const SampleOptions& opts, Rng& rng) {
    if (!opts.greedy && !(opts.temperature > 0.0)) {
        throw std::domain_error("sample: temperature must be positive unless greedy");
    }
    check_tokens(params, prompt, {});
    const std::size_t V = params.config().vocab_size;
    const std::size_t capacity = static_cast<std::size_t>(params.config().context_len);
    auto eff = make_effective(params);

    std::vector<int> context(prompt.begin(), prompt.end());
    std::vector<int> out;
    PositionState st;
    std::vector<double> logp, w(V);
    while (static_cast<int>(out.size()) < opts.max_tokens && context.size() < capacity) {
        auto seq = internal_sequence(params, context, {});
        auto e = embed_all(params, seq);
        forward_position(params, eff, e, seq.size() - 1, st, logp);
        int tok;
        if (opts.greedy) {
            tok = 0;
            for (std::size_t v = 1; v < V; ++v) {
                if (logp[v] > logp[static_cast<std::size_t>(tok)]) tok = static_cast<int>(v);
            }
        } else {
            double mx = logp[0] / opts.temperature;
            for (std::size_t v = 1; v < V; ++v) mx = std::max(mx, logp[v] / opts.temperature);
            for (std::size_t v = 0; v < V; ++v) w[v] = std::exp(logp[v] / opts.temperature - mx);
            tok = static_cast<int>(rng.categorical(w));
        }
        out.push_back(tok);
        context.push_back(tok);
        if (tok == opts.stop_token) break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Bigram oracle

BigramModel::BigramModel(int vocab_size) : vocab_(vocab_size) {
    if (vocab_size < 1) throw std::invalid_argument("BigramModel: bad vocab");
    counts_.assign(static_cast<std::size_t>(vocab_ + 1) * vocab_, 0.0);
}

std::size_t BigramModel::row(int prev) const {
    if (prev == -1) return static_cast<std::size_t>(vocab_);
    if (prev < 0 || prev >= vocab_) throw std::domain_error("BigramModel: out-of-vocab token");
    return static_cast<std::size_t>(prev);
}

BigramModel BigramModel::from_corpus(const std::vector<std::vector<int>>& sequences,
                                     int vocab_size) {
    BigramModel m(vocab_size);
    for (const auto& s : sequences) {
        int prev = -1;
        for (int t : s) {
            m.add_transition(prev, t);
            prev = t;
        }
    }
    return m;
}

void BigramModel::add_transition(int prev, int next, double count) {
    if (next < 0 || next >= vocab_) throw std::domain_error("BigramModel: out-of-vocab token");
    counts_[row(prev) * vocab_ + next] += count;
}

double BigramModel::logprob(int prev, int next) const {
    if (next < 0 || next >= vocab_) throw std::domain_error("BigramModel: out-of-vocab token");
    const double* r = counts_.data() + row(prev) * vocab_;
    double total = 0.0;
    for (int v = 0; v < vocab_; ++v) total += r[v];
    if (total == 0.0 || r[next] == 0.0) return -std::numeric_limits<double>::infinity();
    return std::log(r[next]) - std::log(total);
}

SequenceLogProb BigramModel::score_sequence(std::span<const int> prompt,
                                            std::span<const int> response) const {
    SequenceLogProb out;
    out.length = static_cast<int>(response.size());
    int prev = prompt.empty() ? -1 : prompt.back();
    for (int t : response) {
        const double lp = logprob(prev, t);
        out.per_token.push_back(lp);
        out.total += lp;
        prev = t;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Batch kernels

void score_batch(const ModelParams& params, std::span<const SeqRef> items,
                 std::span<SequenceLogProb> out) {
    assert(items.size() == out.size());
    kernels::parallel_for(items.size(), [&](std::size_t i) {
        out[i] = score_sequence(params, items[i].prompt, items[i].response);
    });
}

void score_batch_serial(const ModelParams& params, std::span<const SeqRef> items,
                        std::span<SequenceLogProb> out) {
    assert(items.size() == out.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        out[i] = score_sequence(params, items[i].prompt, items[i].response);
    }
}

void grad_batch(const ModelParams& params, std::span<const SeqRef> items,
                std::span<const std::vector<double>> token_weights,
                std::span<std::vector<double>> out) {
    assert(items.size() == out.size());
    assert(token_weights.empty() || token_weights.size() == items.size());
    kernels::parallel_for(items.size(), [&](std::size_t i) {
        std::span<const double> w =
            token_weights.empty() ? std::span<const double>{} : std::span<const double>(token_weights[i]);
        out[i] = grad_logprob_weighted(params, items[i].prompt, items[i].response, w);
    });
}

void grad_batch_serial(const ModelParams& params, std::span<const SeqRef> items,
                       std::span<const std::vector<double>> token_weights,
                       std::span<std::vector<double>> out) {
    assert(items.size() == out.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        std::span<const double> w =
            token_weights.empty() ? std::span<const double>{} : std::span<const double>(token_weights[i]);
        out[i] = grad_logprob_weighted(params, items[i].prompt, items[i].response, w);
    }
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const std::string& path, const ModelParams& params,
                     std::uint64_t config_hash) {
    json header;
    const auto& cfg = params.config();
    header["format"] = "ptbench-checkpoint-v1";
    header["vocab_size"] = cfg.vocab_size;
    header["context_len"] = cfg.context_len;
    header["dims"] = cfg.dims;
    header["hidden"] = cfg.hidden;
    header["window"] = cfg.window;
    header["adapter"] = {{"enabled", params.adapter().enabled},
                         {"rank", params.adapter().rank},
                         {"alpha", params.adapter().alpha}};
    header["config_hash"] = config_hash;
    header["param_count"] = params.param_count();
    json segs = json::array();
    for (const auto& s : params.segments()) {
        segs.push_back({{"name", s.name}, {"rows", s.rows}, {"cols", s.cols}, {"offset", s.offset}});
    }
    header["segments"] = segs;

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
    const std::string hs = header.dump();
    const char magic[8] = {'P', 'T', 'B', 'C', 'K', 'P', 'T', '1'};
    f.write(magic, 8);
    const std::uint32_t hlen = static_cast<std::uint32_t>(hs.size());
    f.write(reinterpret_cast<const char*>(&hlen), 4);
    f.write(hs.data(), hs.size());
    auto flat = params.flat();
    f.write(reinterpret_cast<const char*>(flat.data()),
            static_cast<std::streamsize>(flat.size() * sizeof(double)));
    if (!f) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, "PTBCKPT1", 8) != 0) {
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    }
    std::uint32_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), 4);
    std::string hs(hlen, '\0');
    f.read(hs.data(), hlen);
    json header = json::parse(hs);

    ModelConfig cfg;
    cfg.vocab_size = header.at("vocab_size");
    cfg.context_len = header.at("context_len");
    cfg.dims = header.at("dims");
    cfg.hidden = header.at("hidden");
    cfg.window = header.at("window");
    AdapterConfig ad;
    ad.enabled = header.at("adapter").at("enabled");
    ad.rank = header.at("adapter").at("rank");
    ad.alpha = header.at("adapter").at("alpha");

    ModelParams params(cfg, ad);
    if (params.param_count() != header.at("param_count").get<std::size_t>()) {
        throw std::runtime_error("load_checkpoint: parameter count mismatch in " + path);
    }
    std::vector<double> flat(params.param_count());
    f.read(reinterpret_cast<char*>(flat.data()),
           static_cast<std::streamsize>(flat.size() * sizeof(double)));
    if (!f) throw std::runtime_error("load_checkpoint: truncated file " + path);
    params.unflatten(flat);
    return {std::move(params), header.at("config_hash").get<std::uint64_t>()};
}

}  // namespace ptbench
