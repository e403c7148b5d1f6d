#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "codemt/bpe.hpp"
#include "codemt/rng.hpp"
#include "codemt/tensor.hpp"

#include <json.hpp>

namespace codemt {

// ----------------------------- configuration -----------------------------

struct ModelConfig {
    int n_layers = 2;
    int n_heads = 4;
    int d_model = 128;
    int d_ff = 512;
    int vocab_size = 0;
    int max_len = 128;
    float dropout = 0.1f;

    void validate(int num_reserved) const {
        if (d_model % n_heads != 0) throw ConfigError("d_model must be divisible by n_heads");
        if (vocab_size < num_reserved) throw ConfigError("vocab_size smaller than reserved ids");
        if (!(dropout >= 0.0f && dropout < 1.0f)) throw ConfigError("dropout must lie in [0,1)");
        if (n_layers < 1 || max_len < 2) throw ConfigError("degenerate model shape");
    }

    nlohmann::json to_json() const {
        return {{"n_layers", n_layers}, {"n_heads", n_heads}, {"d_model", d_model},
                {"d_ff", d_ff},         {"vocab_size", vocab_size}, {"max_len", max_len},
                {"dropout", dropout}};
    }
    static ModelConfig from_json(const nlohmann::json& j) {
        ModelConfig c;
        c.n_layers = j.at("n_layers").get<int>();
        c.n_heads = j.at("n_heads").get<int>();
        c.d_model = j.at("d_model").get<int>();
        c.d_ff = j.at("d_ff").get<int>();
        c.vocab_size = j.at("vocab_size").get<int>();
        c.max_len = j.at("max_len").get<int>();
        c.dropout = j.at("dropout").get<float>();
        return c;
    }
    bool operator==(const ModelConfig& o) const {
        return n_layers == o.n_layers && n_heads == o.n_heads && d_model == o.d_model &&
               d_ff == o.d_ff && vocab_size == o.vocab_size && max_len == o.max_len &&
               dropout == o.dropout;
    }
};

// ----------------------------- model state -----------------------------

// One shared model serves every language: a single embedding table backs the
// encoder input, the decoder input, and the output projection.
template <class S>
struct ModelState {
    ModelConfig cfg;
    std::string arch;  // "mlm" (encoder stack only) or "seq2seq"
    std::vector<std::string> names;
    std::vector<Mat<S>> params;
    std::vector<Mat<S>> adam_m, adam_v;
    std::unordered_map<std::string, std::size_t> index;
    std::int64_t step = 0;
    std::uint64_t rng_state = 0;  // training-time noise stream (corruption + dropout)

    std::size_t param_id(const std::string& name) const {
        auto it = index.find(name);
        if (it == index.end()) throw ShapeError("unknown parameter: " + name);
        return it->second;
    }
    Mat<S>& param(const std::string& name) { return params[param_id(name)]; }
    const Mat<S>& param(const std::string& name) const { return params[param_id(name)]; }
    bool has_param(const std::string& name) const { return index.count(name) > 0; }

    void add_param(const std::string& name, Eigen::Index rows, Eigen::Index cols, Rng& init,
                   const char* kind) {
        Mat<S> m(rows, cols);
        if (std::string(kind) == "glorot") {
            double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
            for (Eigen::Index r = 0; r < rows; ++r) {
                for (Eigen::Index c = 0; c < cols; ++c) {
                    m(r, c) = static_cast<S>((init.uniform() * 2.0 - 1.0) * limit);
                }
            }
        } else if (std::string(kind) == "ones") {
            m.setOnes();
        } else {
            m.setZero();
        }
        index.emplace(name, names.size());
        names.push_back(name);
        params.push_back(std::move(m));
        adam_m.push_back(Mat<S>::Zero(rows, cols));
        adam_v.push_back(Mat<S>::Zero(rows, cols));
    }
};

namespace detail {

template <class S>
void add_attn_params(ModelState<S>& st, const std::string& prefix, Rng& rng) {
    int d = st.cfg.d_model;
    for (const char* w : {"wq", "wk", "wv", "wo"}) st.add_param(prefix + "." + w, d, d, rng, "glorot");
    for (const char* b : {"bq", "bk", "bv", "bo"}) st.add_param(prefix + "." + b, 1, d, rng, "zeros");
}

template <class S>
void add_ln_params(ModelState<S>& st, const std::string& prefix, Rng& rng) {
    st.add_param(prefix + ".g", 1, st.cfg.d_model, rng, "ones");
    st.add_param(prefix + ".b", 1, st.cfg.d_model, rng, "zeros");
}

template <class S>
void add_ff_params(ModelState<S>& st, const std::string& prefix, Rng& rng) {
    st.add_param(prefix + ".w1", st.cfg.d_model, st.cfg.d_ff, rng, "glorot");
    st.add_param(prefix + ".b1", 1, st.cfg.d_ff, rng, "zeros");
    st.add_param(prefix + ".w2", st.cfg.d_ff, st.cfg.d_model, rng, "glorot");
    st.add_param(prefix + ".b2", 1, st.cfg.d_model, rng, "zeros");
}

}  // namespace detail

template <class S>
ModelState<S> make_model(const ModelConfig& cfg, const std::string& arch, std::uint64_t init_seed) {
    ModelState<S> st;
    st.cfg = cfg;
    st.arch = arch;
    Rng rng = Rng::substream(init_seed, "init");
    st.add_param("embed.tokens", cfg.vocab_size, cfg.d_model, rng, "glorot");
    st.add_param("out.bias", 1, cfg.vocab_size, rng, "zeros");
    for (int l = 0; l < cfg.n_layers; ++l) {
        std::string p = "enc.l" + std::to_string(l);
        detail::add_attn_params(st, p + ".attn", rng);
        detail::add_ln_params(st, p + ".ln1", rng);
        detail::add_ff_params(st, p + ".ff", rng);
        detail::add_ln_params(st, p + ".ln2", rng);
    }
    if (arch == "seq2seq") {
        for (int l = 0; l < cfg.n_layers; ++l) {
            std::string p = "dec.l" + std::to_string(l);
            detail::add_attn_params(st, p + ".self", rng);
            detail::add_ln_params(st, p + ".lnself", rng);
            detail::add_attn_params(st, p + ".cross", rng);
            detail::add_ln_params(st, p + ".lncross", rng);
            detail::add_ff_params(st, p + ".ff", rng);
            detail::add_ln_params(st, p + ".lnff", rng);
        }
    } else if (arch != "mlm") {
        throw ConfigError("unknown model arch: " + arch);
    }
    st.rng_state = Rng::substream(init_seed, "noise").state();
    return st;
}

// Cross-attention (and every other decoder-only) parameter stays freshly
// initialized; everything with an encoder-side counterpart is copied.
template <class S>
void init_decoder_from_encoder(ModelState<S>& st) {
    if (st.arch != "seq2seq") throw ConfigError("decoder init needs a seq2seq model");
    for (int l = 0; l < st.cfg.n_layers; ++l) {
        std::string e = "enc.l" + std::to_string(l);
        std::string d = "dec.l" + std::to_string(l);
        for (const char* w : {"wq", "wk", "wv", "wo", "bq", "bk", "bv", "bo"}) {
            st.param(d + ".self." + w) = st.param(e + ".attn." + w);
        }
        for (const char* g : {"g", "b"}) {
            st.param(d + ".lnself." + std::string(g)) = st.param(e + ".ln1." + g);
            st.param(d + ".lnff." + std::string(g)) = st.param(e + ".ln2." + g);
        }
        for (const char* w : {"w1", "b1", "w2", "b2"}) {
            st.param(d + ".ff." + w) = st.param(e + ".ff." + w);
        }
    }
}

// ----------------------------- positional table -----------------------------

template <class S>
const Mat<S>& positional_table(int max_len, int d_model) {
    static std::unordered_map<std::uint64_t, Mat<S>> cache;
    static std::mutex mu;
    std::uint64_t key = (static_cast<std::uint64_t>(max_len) << 32) | static_cast<std::uint32_t>(d_model);
    std::lock_guard<std::mutex> g(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    Mat<S> table(max_len, d_model);
    for (int pos = 0; pos < max_len; ++pos) {
        for (int i = 0; i < d_model; ++i) {
            double angle = pos / std::pow(10000.0, 2.0 * (i / 2) / d_model);
            table(pos, i) = static_cast<S>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
        }
    }
    return cache.emplace(key, std::move(table)).first->second;
}

// ----------------------------- padded batch view -----------------------------

struct PaddedView {
    std::vector<int> flat;       // row-major (batch, max_len)
    std::vector<int> lens;
    int batch = 0;
    int width = 0;
};

inline PaddedView pad_sequences(const std::vector<std::vector<int>>& seqs, int pad_id) {
    PaddedView v;
    v.batch = static_cast<int>(seqs.size());
    for (const auto& s : seqs) v.width = std::max(v.width, static_cast<int>(s.size()));
    v.flat.assign(static_cast<std::size_t>(v.batch) * v.width, pad_id);
    for (int b = 0; b < v.batch; ++b) {
        const auto& s = seqs[static_cast<std::size_t>(b)];
        v.lens.push_back(static_cast<int>(s.size()));
        for (std::size_t t = 0; t < s.size(); ++t) {
            v.flat[static_cast<std::size_t>(b) * v.width + t] = s[t];
        }
    }
    return v;
}

// ----------------------------- step graph -----------------------------

// Builds the computation for one forward/backward pass. Parameters enter as
// graph leaves exactly once; after backward() their gradients drive one Adam
// update.
template <class S>
class StepGraph {
  public:
    StepGraph(ModelState<S>& st, bool train_mode, Rng* noise_rng)
        : st_(st), train_(train_mode), noise_(noise_rng) {}

    Graph<S>& graph() { return g_; }

    int pnode(const std::string& name) {
        std::size_t idx = st_.param_id(name);
        auto it = pnodes_.find(idx);
        if (it != pnodes_.end()) return it->second;
        int node = g_.input(st_.params[idx], true);
        pnodes_.emplace(idx, node);
        return node;
    }

    // Encoder over padded ids; returns the (batch*width, d_model) hidden node.
    int encode(const PaddedView& src) {
        check_width(src.width);
        int x = embed_with_pos(src);
        for (int l = 0; l < st_.cfg.n_layers; ++l) {
            std::string p = "enc.l" + std::to_string(l);
            x = attn_block(x, x, p + ".attn", p + ".ln1",
                           AttnSpec{src.batch, src.width, src.width, st_.cfg.n_heads, false, src.lens});
            x = ff_block(x, p + ".ff", p + ".ln2");
        }
        return x;
    }

    // Decoder over padded target prefixes against encoded memory.
    int decode(int memory, const PaddedView& src, const PaddedView& tgt) {
        check_width(tgt.width);
        int x = embed_with_pos(tgt);
        for (int l = 0; l < st_.cfg.n_layers; ++l) {
            std::string p = "dec.l" + std::to_string(l);
            x = attn_block(x, x, p + ".self", p + ".lnself",
                           AttnSpec{tgt.batch, tgt.width, tgt.width, st_.cfg.n_heads, true, tgt.lens});
            x = attn_block(x, memory, p + ".cross", p + ".lncross",
                           AttnSpec{tgt.batch, tgt.width, src.width, st_.cfg.n_heads, false, src.lens});
            x = ff_block(x, p + ".ff", p + ".lnff");
        }
        return x;
    }

    // Tied projection restricted to the selected rows.
    int project_rows(int hidden, const std::vector<int>& rows) {
        int h = g_.gather_rows(hidden, rows);
        int logits = g_.matmul_nt(h, pnode("embed.tokens"));
        return g_.add_rowvec(logits, pnode("out.bias"));
    }

    double xent(int logits, const std::vector<int>& targets) { return g_.softmax_xent(logits, targets); }

    void backward() { g_.backward(); }

    // Standard Adam with bias correction; the step counter advances once per
    // call. Parameters without gradients in this graph stay untouched.
    void adam_step(S lr, S beta1 = S(0.9), S beta2 = S(0.999), S eps = S(1e-8)) {
        std::int64_t t = ++st_.step;
        S bc1 = S(1) - static_cast<S>(std::pow(static_cast<double>(beta1), static_cast<double>(t)));
        S bc2 = S(1) - static_cast<S>(std::pow(static_cast<double>(beta2), static_cast<double>(t)));
        for (std::size_t idx = 0; idx < st_.params.size(); ++idx) {
            auto it = pnodes_.find(idx);
            if (it == pnodes_.end()) continue;
            if (!g_.has_grad(it->second)) continue;
            const Mat<S>& grad = g_.grad(it->second);
            Mat<S>& m = st_.adam_m[idx];
            Mat<S>& v = st_.adam_v[idx];
            Mat<S>& p = st_.params[idx];
            m = beta1 * m + (S(1) - beta1) * grad;
            v = beta2 * v + (S(1) - beta2) * grad.cwiseProduct(grad);
            p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
        }
    }

    // Gradient access for verification, keyed by parameter name.
    Mat<S> grad_of(const std::string& name) {
        auto it = pnodes_.find(st_.param_id(name));
        if (it == pnodes_.end() || !g_.has_grad(it->second)) {
            return Mat<S>::Zero(st_.param(name).rows(), st_.param(name).cols());
        }
        return g_.grad(it->second);
    }

  private:
    void check_width(int width) {
        if (width > st_.cfg.max_len) throw ShapeError("sequence exceeds max_len");
        if (width < 1) throw ShapeError("empty batch");
    }

    int embed_with_pos(const PaddedView& view) {
        int x = g_.embed(pnode("embed.tokens"), view.flat);
        const Mat<S>& table = positional_table<S>(st_.cfg.max_len, st_.cfg.d_model);
        Mat<S> pos(static_cast<Eigen::Index>(view.batch) * view.width, st_.cfg.d_model);
        for (int b = 0; b < view.batch; ++b) {
            pos.middleRows(static_cast<Eigen::Index>(b) * view.width, view.width) =
                table.topRows(view.width);
        }
        return g_.add_const(x, std::move(pos));
    }

    int linear(int x, const std::string& w, const std::string& b) {
        return g_.add_rowvec(g_.matmul(x, pnode(w)), pnode(b));
    }

    int attn_block(int x, int kv_source, const std::string& attn, const std::string& ln,
                   AttnSpec spec) {
        int q = linear(x, attn + ".wq", attn + ".bq");
        int k = linear(kv_source, attn + ".wk", attn + ".bk");
        int v = linear(kv_source, attn + ".wv", attn + ".bv");
        int att = g_.attention(q, k, v, spec);
        att = linear(att, attn + ".wo", attn + ".bo");
        att = g_.dropout(att, static_cast<S>(st_.cfg.dropout), *noise_, train_);
        return g_.layer_norm(g_.add(x, att), pnode(ln + ".g"), pnode(ln + ".b"));
    }

    int ff_block(int x, const std::string& ff, const std::string& ln) {
        int h = g_.relu(linear(x, ff + ".w1", ff + ".b1"));
        h = linear(h, ff + ".w2", ff + ".b2");
        h = g_.dropout(h, static_cast<S>(st_.cfg.dropout), *noise_, train_);
        return g_.layer_norm(g_.add(x, h), pnode(ln + ".g"), pnode(ln + ".b"));
    }

    ModelState<S>& st_;
    bool train_;
    Rng* noise_;
    Graph<S> g_;
    std::unordered_map<std::size_t, int> pnodes_;
};

// ----------------------------- spec-level operations -----------------------------

inline double lr_schedule(std::int64_t step, std::int64_t warmup, double peak_lr) {
    if (step < 1 || warmup < 1) throw ConfigError("lr_schedule needs step >= 1, warmup >= 1");
    double s = static_cast<double>(step);
    double w = static_cast<double>(warmup);
    return peak_lr * std::min(s / w, std::sqrt(w / s));
}

// Inference-mode encoder pass; returns the hidden matrix.
template <class S>
Mat<S> encode(ModelState<S>& st, const std::vector<std::vector<int>>& seqs, int pad_id) {
    Rng dummy(0);
    StepGraph<S> sg(st, false, &dummy);
    PaddedView src = pad_sequences(seqs, pad_id);
    int node = sg.encode(src);
    return sg.graph().val(node);
}

// Next-token logits for each target prefix (inference mode, full re-run).
template <class S>
Mat<S> decode_step(ModelState<S>& st, const std::vector<std::vector<int>>& prefixes,
                   const std::vector<std::vector<int>>& src_seqs, int pad_id) {
    Rng dummy(0);
    StepGraph<S> sg(st, false, &dummy);
    PaddedView src = pad_sequences(src_seqs, pad_id);
    PaddedView tgt = pad_sequences(prefixes, pad_id);
    int memory = sg.encode(src);
    int hidden = sg.decode(memory, src, tgt);
    std::vector<int> last_rows;
    for (int b = 0; b < tgt.batch; ++b) {
        last_rows.push_back(b * tgt.width + tgt.lens[static_cast<std::size_t>(b)] - 1);
    }
    int logits = sg.project_rows(hidden, last_rows);
    return sg.graph().val(logits);
}

// ----------------------------- incremental decoding -----------------------------

// Batched autoregressive decoding with per-layer KV caches. Lanes are
// independent decode beams, each bound to one row of the encoded source
// batch; beam reordering passes a parent map.
template <class S>
class DecodeSession {
  public:
    DecodeSession(ModelState<S>& st, const Mat<S>& memory, std::vector<int> src_lens, int src_width)
        : st_(st), memory_(memory), src_lens_(std::move(src_lens)), src_width_(src_width) {
        if (st_.arch != "seq2seq") throw ConfigError("decode needs a seq2seq model");
        int L = st_.cfg.n_layers;
        cross_k_.resize(static_cast<std::size_t>(L));
        cross_v_.resize(static_cast<std::size_t>(L));
        for (int l = 0; l < L; ++l) {
            std::string p = "dec.l" + std::to_string(l) + ".cross";
            cross_k_[static_cast<std::size_t>(l)] = linear_const(memory_, p + ".wk", p + ".bk");
            cross_v_[static_cast<std::size_t>(l)] = linear_const(memory_, p + ".wv", p + ".bv");
        }
    }

    // lane_src[i]: source row the lane decodes from.
    void begin(std::vector<int> lane_src) {
        lane_src_ = std::move(lane_src);
        t_ = 0;
        int L = st_.cfg.n_layers;
        self_k_.assign(static_cast<std::size_t>(L), Mat<S>());
        self_v_.assign(static_cast<std::size_t>(L), Mat<S>());
        for (int l = 0; l < L; ++l) {
            self_k_[static_cast<std::size_t>(l)].resize(
                static_cast<Eigen::Index>(lane_src_.size()) * st_.cfg.max_len, st_.cfg.d_model);
            self_v_[static_cast<std::size_t>(l)].resize(
                static_cast<Eigen::Index>(lane_src_.size()) * st_.cfg.max_len, st_.cfg.d_model);
        }
    }

    int lanes() const { return static_cast<int>(lane_src_.size()); }
    int position() const { return t_; }

    // Advances one position. tokens[i] is the token fed to lane i (the start
    // tag on the first call). parents[i] names the lane each new lane
    // continues from (identity for greedy); lane count may shrink.
    Mat<S> step(const std::vector<int>& tokens, const std::vector<int>& parents) {
        if (t_ >= st_.cfg.max_len) throw ShapeError("decode past max_len");
        reorder(parents);
        const int n = lanes();
        if (static_cast<int>(tokens.size()) != n) throw ShapeError("token count != lanes");

        const Mat<S>& table = st_.param("embed.tokens");
        Mat<S> x(n, st_.cfg.d_model);
        for (int i = 0; i < n; ++i) x.row(i) = table.row(tokens[static_cast<std::size_t>(i)]);
        x.rowwise() += positional_table<S>(st_.cfg.max_len, st_.cfg.d_model).row(t_);

        int heads = st_.cfg.n_heads;
        int dh = st_.cfg.d_model / heads;
        S alpha = S(1) / std::sqrt(static_cast<S>(dh));

        for (int l = 0; l < st_.cfg.n_layers; ++l) {
            std::string p = "dec.l" + std::to_string(l);
            // self attention over the cache
            Mat<S> q = linear_const(x, p + ".self.wq", p + ".self.bq");
            Mat<S> k_new = linear_const(x, p + ".self.wk", p + ".self.bk");
            Mat<S> v_new = linear_const(x, p + ".self.wv", p + ".self.bv");
            Mat<S>& K = self_k_[static_cast<std::size_t>(l)];
            Mat<S>& V = self_v_[static_cast<std::size_t>(l)];
            for (int i = 0; i < n; ++i) {
                K.row(static_cast<Eigen::Index>(i) * st_.cfg.max_len + t_) = k_new.row(i);
                V.row(static_cast<Eigen::Index>(i) * st_.cfg.max_len + t_) = v_new.row(i);
            }
            Mat<S> att(n, st_.cfg.d_model);
            for (int i = 0; i < n; ++i) {
                auto Ki = K.middleRows(static_cast<Eigen::Index>(i) * st_.cfg.max_len, t_ + 1);
                auto Vi = V.middleRows(static_cast<Eigen::Index>(i) * st_.cfg.max_len, t_ + 1);
                attend_row(att, i, q, Ki, Vi, t_ + 1, heads, dh, alpha);
            }
            att = linear_const(att, p + ".self.wo", p + ".self.bo");
            x = norm_rows(x + att, p + ".lnself");

            // cross attention against the encoded source
            Mat<S> q2 = linear_const(x, p + ".cross.wq", p + ".cross.bq");
            Mat<S> att2(n, st_.cfg.d_model);
            for (int i = 0; i < n; ++i) {
                int srow = lane_src_[static_cast<std::size_t>(i)];
                auto Ki = cross_k_[static_cast<std::size_t>(l)].middleRows(
                    static_cast<Eigen::Index>(srow) * src_width_, src_lens_[static_cast<std::size_t>(srow)]);
                auto Vi = cross_v_[static_cast<std::size_t>(l)].middleRows(
                    static_cast<Eigen::Index>(srow) * src_width_, src_lens_[static_cast<std::size_t>(srow)]);
                attend_row(att2, i, q2, Ki, Vi, src_lens_[static_cast<std::size_t>(srow)], heads, dh, alpha);
            }
            att2 = linear_const(att2, p + ".cross.wo", p + ".cross.bo");
            x = norm_rows(x + att2, p + ".lncross");

            // feed-forward
            Mat<S> h = linear_const(x, p + ".ff.w1", p + ".ff.b1").cwiseMax(S(0));
            h = linear_const(h, p + ".ff.w2", p + ".ff.b2");
            x = norm_rows(x + h, p + ".lnff");
        }

        Mat<S> logits = x * st_.param("embed.tokens").transpose();
        logits.rowwise() += st_.param("out.bias").row(0);
        ++t_;
        return logits;
    }

  private:
    template <class M>
    Mat<S> linear_const(const M& x, const std::string& w, const std::string& b) {
        Mat<S> out = x * st_.param(w);
        out.rowwise() += st_.param(b).row(0);
        return out;
    }

    Mat<S> norm_rows(Mat<S> x, const std::string& ln) {
        const Mat<S>& g = st_.param(ln + ".g");
        const Mat<S>& b = st_.param(ln + ".b");
        S n = static_cast<S>(x.cols());
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            S mean = x.row(r).sum() / n;
            auto centered = x.row(r).array() - mean;
            S var = centered.square().sum() / n;
            S is = S(1) / std::sqrt(var + S(1e-5));
            x.row(r) = (centered * is) * g.row(0).array() + b.row(0).array();
        }
        return x;
    }

    template <class KM, class VM>
    void attend_row(Mat<S>& out, int row, const Mat<S>& q, const KM& K, const VM& V, int klen,
                    int heads, int dh, S alpha) {
        for (int h = 0; h < heads; ++h) {
            auto qh = q.block(row, h * dh, 1, dh);
            auto Kh = K.middleCols(h * dh, dh).topRows(klen);
            auto Vh = V.middleCols(h * dh, dh).topRows(klen);
            Eigen::Array<S, 1, Eigen::Dynamic> scores = (qh * Kh.transpose()).array() * alpha;
            S m = scores.maxCoeff();
            Eigen::Array<S, 1, Eigen::Dynamic> e = (scores - m).exp();
            S z = e.sum();
            out.block(row, h * dh, 1, dh).noalias() = (e / z).matrix() * Vh;
        }
    }

    void reorder(const std::vector<int>& parents) {
        bool identity = static_cast<int>(parents.size()) == lanes();
        if (identity) {
            for (std::size_t i = 0; i < parents.size(); ++i) {
                if (parents[i] != static_cast<int>(i)) {
                    identity = false;
                    break;
                }
            }
        }
        if (identity) return;
        std::vector<int> new_src(parents.size());
        for (std::size_t i = 0; i < parents.size(); ++i) {
            new_src[i] = lane_src_[static_cast<std::size_t>(parents[i])];
        }
        for (std::size_t l = 0; l < self_k_.size(); ++l) {
            Mat<S> nk(static_cast<Eigen::Index>(parents.size()) * st_.cfg.max_len, st_.cfg.d_model);
            Mat<S> nv(static_cast<Eigen::Index>(parents.size()) * st_.cfg.max_len, st_.cfg.d_model);
            for (std::size_t i = 0; i < parents.size(); ++i) {
                nk.middleRows(static_cast<Eigen::Index>(i) * st_.cfg.max_len, t_) =
                    self_k_[l].middleRows(static_cast<Eigen::Index>(parents[i]) * st_.cfg.max_len, t_);
                nv.middleRows(static_cast<Eigen::Index>(i) * st_.cfg.max_len, t_) =
                    self_v_[l].middleRows(static_cast<Eigen::Index>(parents[i]) * st_.cfg.max_len, t_);
            }
            self_k_[l] = std::move(nk);
            self_v_[l] = std::move(nv);
        }
        lane_src_ = std::move(new_src);
    }

    ModelState<S>& st_;
    Mat<S> memory_;
    std::vector<int> src_lens_;
    int src_width_;
    std::vector<Mat<S>> cross_k_, cross_v_;
    std::vector<Mat<S>> self_k_, self_v_;
    std::vector<int> lane_src_;
    int t_ = 0;
};

}  // namespace codemt
