#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "codemt/transformer.hpp"

namespace codemt {

struct Hypothesis {
    std::vector<int> ids;  // generated tokens after the start tag, EOS excluded
    double logprob = 0.0;  // sum of token log-probabilities, EOS step included
    bool finished = false;
};

// Next-token distribution source for search. Lanes are independent decode
// states; parents re-wire lanes to the previous step's lanes (beam reorder).
class StepScorer {
  public:
    virtual ~StepScorer() = default;
    virtual int vocab_size() const = 0;
    virtual void begin(int lanes) = 0;
    // prev[i]: token consumed by lane i; parents[i]: lane continued from.
    // Returns per-lane log-probabilities, shape (lanes, vocab).
    virtual Mat<double> step(const std::vector<int>& prev, const std::vector<int>& parents) = 0;
};

// Scorer backed by the shared transformer: one encoded source row serves all
// lanes of one beam, or one row per lane for batched greedy decoding.
template <class S>
class TransformerScorer : public StepScorer {
  public:
    TransformerScorer(ModelState<S>& st, const std::vector<std::vector<int>>& src_seqs, int pad_id)
        : st_(st), pad_id_(pad_id) {
        PaddedView src = pad_sequences(src_seqs, pad_id);
        memory_ = encode(st, src_seqs, pad_id);
        src_lens_ = src.lens;
        src_width_ = src.width;
    }

    // lane i decodes from source row lane_src[i]
    void bind_lanes(std::vector<int> lane_src) { lane_src_ = std::move(lane_src); }

    int vocab_size() const override { return st_.cfg.vocab_size; }

    void begin(int lanes) override {
        session_ = std::make_unique<DecodeSession<S>>(st_, memory_, src_lens_, src_width_);
        std::vector<int> binding = lane_src_;
        if (binding.empty()) binding.assign(static_cast<std::size_t>(lanes), 0);
        if (static_cast<int>(binding.size()) != lanes) throw ShapeError("lane binding size mismatch");
        session_->begin(binding);
    }

    Mat<double> step(const std::vector<int>& prev, const std::vector<int>& parents) override {
        Mat<S> logits = session_->step(prev, parents);
        Mat<double> logprobs(logits.rows(), logits.cols());
        for (Eigen::Index r = 0; r < logits.rows(); ++r) {
            double row_max = static_cast<double>(logits.row(r).maxCoeff());
            double z = 0;
            for (Eigen::Index c = 0; c < logits.cols(); ++c) {
                z += std::exp(static_cast<double>(logits(r, c)) - row_max);
            }
            double logz = row_max + std::log(z);
            for (Eigen::Index c = 0; c < logits.cols(); ++c) {
                logprobs(r, c) = static_cast<double>(logits(r, c)) - logz;
            }
        }
        return logprobs;
    }

  private:
    ModelState<S>& st_;
    int pad_id_;
    Mat<S> memory_;
    std::vector<int> src_lens_;
    int src_width_;
    std::vector<int> lane_src_;
    std::unique_ptr<DecodeSession<S>> session_;
};

// ----------------------------- beam search -----------------------------

// Length-synchronous beam search. Finished hypotheses (EOS, or max_len cut)
// are frozen; search ends when the best unfinished score cannot beat the
// worst kept finished score, or at the length limit. Ranking is by raw
// log-probability sum unless a length penalty is requested.
inline std::vector<Hypothesis> beam_decode(StepScorer& scorer, int start_token, int eos_id,
                                           int width, int max_len, double length_penalty = 0.0) {
    if (width < 1) throw ConfigError("beam width must be >= 1");
    struct Live {
        std::vector<int> ids;
        double logprob;
    };
    auto ranked_score = [&](const Hypothesis& h) {
        if (length_penalty <= 0.0) return h.logprob;
        double len = static_cast<double>(h.ids.size()) + 1.0;
        return h.logprob / std::pow(len, length_penalty);
    };

    std::vector<Live> live;
    live.push_back({{}, 0.0});
    std::vector<Hypothesis> finished;
    scorer.begin(1);
    std::vector<int> prev = {start_token};
    std::vector<int> parents = {0};

    for (int t = 0; t < max_len && !live.empty(); ++t) {
        Mat<double> lp = scorer.step(prev, parents);
        struct Cand {
            int lane;
            int token;
            double score;
        };
        std::vector<Cand> cands;
        cands.reserve(live.size() * static_cast<std::size_t>(scorer.vocab_size()));
        for (std::size_t i = 0; i < live.size(); ++i) {
            for (int v = 0; v < scorer.vocab_size(); ++v) {
                cands.push_back({static_cast<int>(i), v, live[i].logprob + lp(static_cast<Eigen::Index>(i), v)});
            }
        }
        std::size_t take = std::min(cands.size(), static_cast<std::size_t>(2 * width));
        std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(take), cands.end(),
                          [](const Cand& a, const Cand& b) {
                              if (a.score != b.score) return a.score > b.score;
                              if (a.token != b.token) return a.token < b.token;
                              return a.lane < b.lane;
                          });

        std::vector<Live> next;
        std::vector<int> next_parents, next_prev;
        for (std::size_t c = 0; c < take; ++c) {
            const Cand& cand = cands[c];
            if (cand.token == eos_id) {
                Hypothesis h;
                h.ids = live[static_cast<std::size_t>(cand.lane)].ids;
                h.logprob = cand.score;
                h.finished = true;
                finished.push_back(std::move(h));
                continue;
            }
            if (static_cast<int>(next.size()) >= width) continue;
            Live l;
            l.ids = live[static_cast<std::size_t>(cand.lane)].ids;
            l.ids.push_back(cand.token);
            l.logprob = cand.score;
            next.push_back(std::move(l));
            next_parents.push_back(cand.lane);
            next_prev.push_back(cand.token);
        }

        live = std::move(next);
        parents = std::move(next_parents);
        prev = std::move(next_prev);

        if (static_cast<int>(finished.size()) >= width && !live.empty()) {
            double worst_kept;
            {
                std::vector<double> scores;
                for (const auto& h : finished) scores.push_back(ranked_score(h));
                std::sort(scores.rbegin(), scores.rend());
                worst_kept = scores[static_cast<std::size_t>(width) - 1];
            }
            double best_live = live[0].logprob;
            for (const auto& l : live) best_live = std::max(best_live, l.logprob);
            if (best_live <= worst_kept) break;
        }
        if (t + 1 >= max_len) {
            // length limit: surviving prefixes count as finished
            for (auto& l : live) {
                Hypothesis h;
                h.ids = std::move(l.ids);
                h.logprob = l.logprob;
                h.finished = true;
                finished.push_back(std::move(h));
            }
            live.clear();
        }
    }

    std::stable_sort(finished.begin(), finished.end(), [&](const Hypothesis& a, const Hypothesis& b) {
        double sa = ranked_score(a), sb = ranked_score(b);
        if (sa != sb) return sa > sb;
        return a.ids < b.ids;
    });
    if (static_cast<int>(finished.size()) > width) finished.resize(static_cast<std::size_t>(width));
    return finished;
}

inline Hypothesis greedy_decode(StepScorer& scorer, int start_token, int eos_id, int max_len) {
    auto hyps = beam_decode(scorer, start_token, eos_id, 1, max_len);
    if (hyps.empty()) throw Error("greedy decoding produced no hypothesis");
    return hyps[0];
}

// Batched greedy decoding: lane i decodes its own source row; all lanes run
// to completion (finished lanes keep feeding their last token; their output
// is frozen at the first EOS).
inline std::vector<Hypothesis> greedy_decode_batch(StepScorer& scorer, const std::vector<int>& start_tokens,
                                                   int eos_id, int max_len) {
    int lanes = static_cast<int>(start_tokens.size());
    scorer.begin(lanes);
    std::vector<Hypothesis> out(static_cast<std::size_t>(lanes));
    std::vector<int> prev = start_tokens;
    std::vector<int> parents(static_cast<std::size_t>(lanes));
    for (int i = 0; i < lanes; ++i) parents[static_cast<std::size_t>(i)] = i;
    std::vector<bool> done(static_cast<std::size_t>(lanes), false);

    for (int t = 0; t < max_len; ++t) {
        bool all_done = true;
        for (bool d : done) all_done &= d;
        if (all_done) break;
        Mat<double> lp = scorer.step(prev, parents);
        for (int i = 0; i < lanes; ++i) {
            if (done[static_cast<std::size_t>(i)]) continue;
            int best = 0;
            double best_score = lp(i, 0);
            for (int v = 1; v < scorer.vocab_size(); ++v) {
                if (lp(i, v) > best_score) {
                    best_score = lp(i, v);
                    best = v;
                }
            }
            out[static_cast<std::size_t>(i)].logprob += best_score;
            if (best == eos_id) {
                done[static_cast<std::size_t>(i)] = true;
                out[static_cast<std::size_t>(i)].finished = true;
            } else {
                out[static_cast<std::size_t>(i)].ids.push_back(best);
            }
            prev[static_cast<std::size_t>(i)] = best;
        }
    }
    for (auto& h : out) h.finished = true;  // length cut counts as finished
    return out;
}

}  // namespace codemt
