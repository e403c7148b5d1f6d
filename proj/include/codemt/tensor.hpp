#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include "codemt/rng.hpp"
#include "codemt/threadpool.hpp"
#include "codemt/util.hpp"

namespace codemt {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {

// C = A * B with the row range of A/C split into fixed chunks. Chunk count
// depends only on the shape, so results are identical for any worker count.
template <class S>
void pmm(Mat<S>& C, const Mat<S>& A, const Mat<S>& B) {
    C.resize(A.rows(), B.cols());
    parallel_chunks(A.rows(), 64, [&](std::int64_t lo, std::int64_t hi) {
        C.middleRows(lo, hi - lo).noalias() = A.middleRows(lo, hi - lo) * B;
    });
}

template <class S>
void pmm_add(Mat<S>& C, const Mat<S>& A, const Mat<S>& B) {
    parallel_chunks(A.rows(), 64, [&](std::int64_t lo, std::int64_t hi) {
        C.middleRows(lo, hi - lo).noalias() += A.middleRows(lo, hi - lo) * B;
    });
}

// C += A^T * B, with the column range of C (and B) chunked.
template <class S>
void pmm_tn_add(Mat<S>& C, const Mat<S>& A, const Mat<S>& B) {
    parallel_chunks(B.cols(), 64, [&](std::int64_t lo, std::int64_t hi) {
        C.middleCols(lo, hi - lo).noalias() += A.transpose() * B.middleCols(lo, hi - lo);
    });
}

// C = A * B^T with row chunks.
template <class S>
void pmm_nt(Mat<S>& C, const Mat<S>& A, const Mat<S>& B) {
    C.resize(A.rows(), B.rows());
    parallel_chunks(A.rows(), 64, [&](std::int64_t lo, std::int64_t hi) {
        C.middleRows(lo, hi - lo).noalias() = A.middleRows(lo, hi - lo) * B.transpose();
    });
}

template <class S>
void pmm_nt_add(Mat<S>& C, const Mat<S>& A, const Mat<S>& B) {
    parallel_chunks(A.rows(), 64, [&](std::int64_t lo, std::int64_t hi) {
        C.middleRows(lo, hi - lo).noalias() += A.middleRows(lo, hi - lo) * B.transpose();
    });
}

}  // namespace detail

struct AttnSpec {
    int batch = 1;
    int q_len = 0;
    int k_len = 0;
    int heads = 1;
    bool causal = false;
    std::vector<int> key_lens;  // valid key positions per batch row; empty = all
};

// Dynamic reverse-mode tape over dense matrices. A fresh graph is built for
// every optimizer step; parameters enter as leaf nodes and their gradients
// are read back after backward().
template <class S>
class Graph {
  public:
    int input(Mat<S> v, bool needs_grad = false) {
        nodes_.push_back(Node{std::move(v), Mat<S>(), needs_grad});
        return static_cast<int>(nodes_.size()) - 1;
    }

    const Mat<S>& val(int id) const { return nodes_[static_cast<std::size_t>(id)].val; }
    Mat<S>& grad(int id) { return ensure_grad(id); }
    bool has_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad.size() > 0; }

    // ----------------------------- ops -----------------------------

    int matmul(int a, int b) {
        check_inner(val(a).cols(), val(b).rows(), "matmul");
        Mat<S> out;
        detail::pmm(out, val(a), val(b));
        int id = input(std::move(out), true);
        tape_.push_back([this, a, b, id] {
            const Mat<S>& d = ensure_grad(id);
            detail::pmm_nt_add(ensure_grad(a), d, val(b));      // dA += dC * B^T
            detail::pmm_tn_add(ensure_grad(b), val(a), d);      // dB += A^T * dC
        });
        return id;
    }

    // A * B^T; used for the tied output projection against the embedding table.
    int matmul_nt(int a, int b) {
        check_inner(val(a).cols(), val(b).cols(), "matmul_nt");
        Mat<S> out;
        detail::pmm_nt(out, val(a), val(b));
        int id = input(std::move(out), true);
        tape_.push_back([this, a, b, id] {
            const Mat<S>& d = ensure_grad(id);
            detail::pmm_add(ensure_grad(a), d, val(b));         // dA += dC * B
            detail::pmm_tn_add(ensure_grad(b), d, val(a));      // dB += dC^T * A
        });
        return id;
    }

    int add(int a, int b) {
        check_same_shape(a, b, "add");
        int id = input(val(a) + val(b), true);
        tape_.push_back([this, a, b, id] {
            const Mat<S>& d = ensure_grad(id);
            ensure_grad(a) += d;
            ensure_grad(b) += d;
        });
        return id;
    }

    int add_rowvec(int a, int bias) {
        if (val(bias).rows() != 1 || val(bias).cols() != val(a).cols()) {
            throw ShapeError("add_rowvec bias shape mismatch");
        }
        Mat<S> out = val(a);
        out.rowwise() += val(bias).row(0);
        int id = input(std::move(out), true);
        tape_.push_back([this, a, bias, id] {
            const Mat<S>& d = ensure_grad(id);
            ensure_grad(a) += d;
            ensure_grad(bias).row(0) += d.colwise().sum();
        });
        return id;
    }

    // Adds a fixed (non-learned) matrix, e.g. positional encodings.
    int add_const(int a, Mat<S> constant) {
        check_shape(a, constant.rows(), constant.cols(), "add_const");
        int id = input(val(a) + constant, true);
        tape_.push_back([this, a, id] { ensure_grad(a) += ensure_grad(id); });
        return id;
    }

    int relu(int a) {
        Mat<S> out = val(a).cwiseMax(S(0));
        int id = input(std::move(out), true);
        tape_.push_back([this, a, id] {
            const Mat<S>& d = ensure_grad(id);
            ensure_grad(a).array() += d.array() * (val(a).array() > S(0)).template cast<S>();
        });
        return id;
    }

    int scale(int a, S factor) {
        int id = input(val(a) * factor, true);
        tape_.push_back([this, a, id, factor] { ensure_grad(a) += ensure_grad(id) * factor; });
        return id;
    }

    int embed(int table, const std::vector<int>& ids) {
        const Mat<S>& t = val(table);
        Mat<S> out(static_cast<Eigen::Index>(ids.size()), t.cols());
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (ids[i] < 0 || ids[i] >= t.rows()) throw ShapeError("embedding id out of range");
            out.row(static_cast<Eigen::Index>(i)) = t.row(ids[i]);
        }
        int id = input(std::move(out), true);
        auto idx = std::make_shared<std::vector<int>>(ids);
        tape_.push_back([this, table, id, idx] {
            const Mat<S>& d = ensure_grad(id);
            Mat<S>& dt = ensure_grad(table);
            for (std::size_t i = 0; i < idx->size(); ++i) {
                dt.row((*idx)[i]) += d.row(static_cast<Eigen::Index>(i));
            }
        });
        return id;
    }

    int gather_rows(int a, const std::vector<int>& rows) {
        const Mat<S>& src = val(a);
        Mat<S> out(static_cast<Eigen::Index>(rows.size()), src.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            out.row(static_cast<Eigen::Index>(i)) = src.row(rows[i]);
        }
        int id = input(std::move(out), true);
        auto idx = std::make_shared<std::vector<int>>(rows);
        tape_.push_back([this, a, id, idx] {
            const Mat<S>& d = ensure_grad(id);
            Mat<S>& da = ensure_grad(a);
            for (std::size_t i = 0; i < idx->size(); ++i) {
                da.row((*idx)[i]) += d.row(static_cast<Eigen::Index>(i));
            }
        });
        return id;
    }

    int layer_norm(int a, int gain, int bias, S eps = S(1e-5)) {
        const Mat<S>& x = val(a);
        auto xhat = std::make_shared<Mat<S>>(x.rows(), x.cols());
        auto inv_std = std::make_shared<Mat<S>>(x.rows(), 1);
        Mat<S> out(x.rows(), x.cols());
        const Mat<S>& g = val(gain);
        const Mat<S>& b = val(bias);
        S n = static_cast<S>(x.cols());
        parallel_chunks(x.rows(), 256, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t r = lo; r < hi; ++r) {
                S mean = x.row(r).sum() / n;
                auto centered = x.row(r).array() - mean;
                S var = centered.square().sum() / n;
                S is = S(1) / std::sqrt(var + eps);
                (*inv_std)(r, 0) = is;
                xhat->row(r) = centered * is;
                out.row(r) = xhat->row(r).array() * g.row(0).array() + b.row(0).array();
            }
        });
        int id = input(std::move(out), true);
        tape_.push_back([this, a, gain, bias, id, xhat, inv_std] {
            const Mat<S>& d = ensure_grad(id);
            const Mat<S>& g = val(gain);
            Mat<S>& da = ensure_grad(a);
            S n = static_cast<S>(d.cols());
            parallel_chunks(d.rows(), 256, [&](std::int64_t lo, std::int64_t hi) {
                for (std::int64_t r = lo; r < hi; ++r) {
                    auto dxhat = d.row(r).array() * g.row(0).array();
                    S sum_dxhat = dxhat.sum();
                    S sum_dxhat_xhat = (dxhat * xhat->row(r).array()).sum();
                    da.row(r).array() += (*inv_std)(r, 0) / n *
                                         (n * dxhat - sum_dxhat - xhat->row(r).array() * sum_dxhat_xhat);
                }
            });
            Mat<S>& dg = ensure_grad(gain);
            Mat<S>& db = ensure_grad(bias);
            dg.row(0) += (d.array() * xhat->array()).colwise().sum().matrix();
            db.row(0) += d.colwise().sum();
        });
        return id;
    }

    int dropout(int a, S p, Rng& rng, bool enabled) {
        if (!enabled || p <= S(0)) return a;
        const Mat<S>& x = val(a);
        auto mask = std::make_shared<Mat<S>>(x.rows(), x.cols());
        S keep = S(1) - p;
        S scale_factor = S(1) / keep;
        // Sequential draws in row-major order keep the stream reproducible.
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            for (Eigen::Index c = 0; c < x.cols(); ++c) {
                (*mask)(r, c) = rng.uniform() < static_cast<double>(keep) ? scale_factor : S(0);
            }
        }
        int id = input(x.cwiseProduct(*mask), true);
        tape_.push_back([this, a, id, mask] {
            ensure_grad(a) += ensure_grad(id).cwiseProduct(*mask);
        });
        return id;
    }

    // Fused multi-head attention over flattened (batch*len, d) inputs.
    int attention(int q, int k, int v, const AttnSpec& spec) {
        const Mat<S>& Q = val(q);
        const Mat<S>& K = val(k);
        const Mat<S>& V = val(v);
        const int d = static_cast<int>(Q.cols());
        if (d % spec.heads != 0) throw ShapeError("d_model not divisible by heads");
        if (Q.rows() != static_cast<Eigen::Index>(spec.batch) * spec.q_len ||
            K.rows() != static_cast<Eigen::Index>(spec.batch) * spec.k_len || K.rows() != V.rows()) {
            throw ShapeError("attention input shape mismatch");
        }
        if (spec.causal && spec.q_len != spec.k_len) throw ShapeError("causal attention needs square shape");
        const int dh = d / spec.heads;
        const S alpha = S(1) / std::sqrt(static_cast<S>(dh));
        auto probs = std::make_shared<std::vector<Mat<S>>>(
            static_cast<std::size_t>(spec.batch) * spec.heads);
        Mat<S> out(Q.rows(), d);
        auto spec_copy = std::make_shared<AttnSpec>(spec);
        const S neg_inf = -std::numeric_limits<S>::infinity();

        ThreadPool::global().run(spec.batch * spec.heads, [&](int task) {
            int b = task / spec.heads;
            int h = task % spec.heads;
            auto Qb = Q.block(static_cast<Eigen::Index>(b) * spec.q_len, h * dh, spec.q_len, dh);
            auto Kb = K.block(static_cast<Eigen::Index>(b) * spec.k_len, h * dh, spec.k_len, dh);
            auto Vb = V.block(static_cast<Eigen::Index>(b) * spec.k_len, h * dh, spec.k_len, dh);
            Mat<S> scores = (Qb * Kb.transpose()) * alpha;
            int valid = spec.key_lens.empty() ? spec.k_len : spec.key_lens[static_cast<std::size_t>(b)];
            for (int i = 0; i < spec.q_len; ++i) {
                for (int j = 0; j < spec.k_len; ++j) {
                    bool masked = j >= valid || (spec.causal && j > i);
                    if (masked) scores(i, j) = neg_inf;
                }
            }
            // row softmax with max subtraction; masked entries become exactly 0
            for (int i = 0; i < spec.q_len; ++i) {
                S row_max = scores.row(i).maxCoeff();
                Eigen::Array<S, 1, Eigen::Dynamic> e =
                    (scores.row(i).array() - row_max).exp();
                for (int j = 0; j < spec.k_len; ++j) {
                    if (std::isinf(scores(i, j)) && scores(i, j) < 0) e(j) = S(0);
                }
                S z = e.sum();
                scores.row(i) = (e / z).matrix();
            }
            (*probs)[static_cast<std::size_t>(task)] = scores;
            out.block(static_cast<Eigen::Index>(b) * spec.q_len, h * dh, spec.q_len, dh).noalias() =
                scores * Vb;
        });

        int id = input(std::move(out), true);
        tape_.push_back([this, q, k, v, id, probs, spec_copy, alpha, dh] {
            const AttnSpec& sp = *spec_copy;
            const Mat<S>& dOut = ensure_grad(id);
            const Mat<S>& Q = val(q);
            const Mat<S>& K = val(k);
            const Mat<S>& V = val(v);
            Mat<S>& dQ = ensure_grad(q);
            Mat<S>& dK = ensure_grad(k);
            Mat<S>& dV = ensure_grad(v);
            ThreadPool::global().run(sp.batch * sp.heads, [&](int task) {
                int b = task / sp.heads;
                int h = task % sp.heads;
                const Mat<S>& P = (*probs)[static_cast<std::size_t>(task)];
                auto Qb = Q.block(static_cast<Eigen::Index>(b) * sp.q_len, h * dh, sp.q_len, dh);
                auto Kb = K.block(static_cast<Eigen::Index>(b) * sp.k_len, h * dh, sp.k_len, dh);
                auto Vb = V.block(static_cast<Eigen::Index>(b) * sp.k_len, h * dh, sp.k_len, dh);
                auto dOb = dOut.block(static_cast<Eigen::Index>(b) * sp.q_len, h * dh, sp.q_len, dh);
                Mat<S> dP = dOb * Vb.transpose();                     // (q_len, k_len)
                Mat<S> dS(sp.q_len, sp.k_len);
                for (int i = 0; i < sp.q_len; ++i) {
                    S dot = (dP.row(i).array() * P.row(i).array()).sum();
                    dS.row(i) = (P.row(i).array() * (dP.row(i).array() - dot)).matrix();
                }
                dQ.block(static_cast<Eigen::Index>(b) * sp.q_len, h * dh, sp.q_len, dh).noalias() +=
                    alpha * (dS * Kb);
                dK.block(static_cast<Eigen::Index>(b) * sp.k_len, h * dh, sp.k_len, dh).noalias() +=
                    alpha * (dS.transpose() * Qb);
                dV.block(static_cast<Eigen::Index>(b) * sp.k_len, h * dh, sp.k_len, dh).noalias() +=
                    P.transpose() * dOb;
            });
        });
        return id;
    }

    // Mean token-level NLL over the given rows; seeds the backward pass.
    // Returns the loss in double precision.
    double softmax_xent(int logits, const std::vector<int>& targets) {
        const Mat<S>& L = val(logits);
        if (L.rows() != static_cast<Eigen::Index>(targets.size())) {
            throw ShapeError("xent target count mismatch");
        }
        if (targets.empty()) throw ShapeError("loss over zero target tokens");
        auto P = std::make_shared<Mat<S>>(L.rows(), L.cols());
        std::vector<double> partial(static_cast<std::size_t>(L.rows()));
        parallel_chunks(L.rows(), 256, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t r = lo; r < hi; ++r) {
                S row_max = L.row(r).maxCoeff();
                Eigen::Array<S, 1, Eigen::Dynamic> e = (L.row(r).array() - row_max).exp();
                S z = e.sum();
                P->row(r) = (e / z).matrix();
                int t = targets[static_cast<std::size_t>(r)];
                double logp = static_cast<double>(L(r, t)) - static_cast<double>(row_max) -
                              std::log(static_cast<double>(z));
                partial[static_cast<std::size_t>(r)] = -logp;
            }
        });
        double loss = 0.0;
        for (double p : partial) loss += p;
        loss /= static_cast<double>(targets.size());

        auto tgt = std::make_shared<std::vector<int>>(targets);
        tape_.push_back([this, logits, P, tgt] {
            Mat<S>& dL = ensure_grad(logits);
            S inv_n = S(1) / static_cast<S>(tgt->size());
            parallel_chunks(dL.rows(), 256, [&](std::int64_t lo, std::int64_t hi) {
                for (std::int64_t r = lo; r < hi; ++r) {
                    dL.row(r) += P->row(r) * inv_n;
                    dL(r, (*tgt)[static_cast<std::size_t>(r)]) -= inv_n;
                }
            });
        });
        return loss;
    }

    void backward() {
        for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
    }

    std::size_t size() const { return nodes_.size(); }

  private:
    struct Node {
        Mat<S> val;
        Mat<S> grad;
        bool needs_grad;
    };

    Mat<S>& ensure_grad(int id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.grad.size() == 0) {
            n.grad = Mat<S>::Zero(n.val.rows(), n.val.cols());
        }
        return n.grad;
    }

    static void check_inner(Eigen::Index a, Eigen::Index b, const char* what) {
        if (a != b) throw ShapeError(std::string(what) + ": inner dimensions disagree");
    }
    void check_same_shape(int a, int b, const char* what) const {
        if (val(a).rows() != val(b).rows() || val(a).cols() != val(b).cols()) {
            throw ShapeError(std::string(what) + ": shape mismatch");
        }
    }
    void check_shape(int a, Eigen::Index r, Eigen::Index c, const char* what) const {
        if (val(a).rows() != r || val(a).cols() != c) {
            throw ShapeError(std::string(what) + ": shape mismatch");
        }
    }

    std::vector<Node> nodes_;
    std::vector<std::function<void()>> tape_;
};

}  // namespace codemt
