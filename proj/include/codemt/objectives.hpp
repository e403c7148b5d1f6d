#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "codemt/checkpoint.hpp"
#include "codemt/corpus.hpp"
#include "codemt/decoding.hpp"
#include "codemt/transformer.hpp"

#include <json.hpp>

namespace codemt {

// ----------------------------- corruption -----------------------------

struct MlmConfig {
    double select_prob = 0.15;
    double replace_mask = 0.8;
    double replace_random = 0.1;
    double keep = 0.1;

    void validate() const {
        double sum = replace_mask + replace_random + keep;
        if (std::fabs(sum - 1.0) > 1e-9) throw ConfigError("mlm replacement probabilities must sum to 1");
        if (select_prob < 0 || select_prob > 1) throw ConfigError("mlm select_prob out of range");
    }
};

struct NoiseConfig {
    double mask_prob = 0.1;
    double drop_prob = 0.1;
    int shuffle_k = 3;

    void validate() const {
        if (mask_prob < 0 || mask_prob > 1 || drop_prob < 0 || drop_prob > 1 || shuffle_k < 0) {
            throw ConfigError("noise config out of range");
        }
    }
};

struct MlmCorruption {
    std::vector<int> corrupted;
    std::vector<bool> predict;   // true exactly at selected positions
    std::vector<int> original;
};

// Positions holding learned subwords (never the reserved block) are eligible;
// each is selected independently and replaced by MASK, a random learned id,
// or kept, following the configured split.
inline MlmCorruption mlm_corrupt(const std::vector<int>& ids, const MlmConfig& cfg, Rng& rng,
                                 const BpeModel& bpe) {
    MlmCorruption out;
    out.corrupted = ids;
    out.original = ids;
    out.predict.assign(ids.size(), false);
    int first_learned = bpe.num_reserved();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < first_learned) continue;
        if (!rng.bernoulli(cfg.select_prob)) continue;
        out.predict[i] = true;
        double roll = rng.uniform();
        if (roll < cfg.replace_mask) {
            out.corrupted[i] = bpe.mask_id();
        } else if (roll < cfg.replace_mask + cfg.replace_random) {
            out.corrupted[i] = first_learned +
                               static_cast<int>(rng.uniform_int(0, bpe.vocab_size() - first_learned - 1));
        }  // else: keep
    }
    return out;
}

// Applies, in order: a local shuffle bounded by shuffle_k, token dropping,
// and token masking. BOS/EOS are never moved, dropped, or masked.
inline std::vector<int> dae_corrupt(const std::vector<int>& ids, const NoiseConfig& cfg, Rng& rng,
                                    int mask_id) {
    if (ids.size() <= 2) return ids;
    std::vector<int> interior(ids.begin() + 1, ids.end() - 1);

    if (cfg.shuffle_k > 0) {
        std::vector<std::pair<double, int>> keyed(interior.size());
        for (std::size_t i = 0; i < interior.size(); ++i) {
            keyed[i] = {static_cast<double>(i) + rng.uniform() * cfg.shuffle_k, interior[i]};
        }
        std::stable_sort(keyed.begin(), keyed.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        for (std::size_t i = 0; i < interior.size(); ++i) interior[i] = keyed[i].second;
    }

    std::vector<int> kept;
    kept.reserve(interior.size());
    for (int id : interior) {
        if (rng.bernoulli(cfg.drop_prob)) continue;
        kept.push_back(id);
    }

    for (int& id : kept) {
        if (rng.bernoulli(cfg.mask_prob)) id = mask_id;
    }

    std::vector<int> out;
    out.reserve(kept.size() + 2);
    out.push_back(ids.front());
    out.insert(out.end(), kept.begin(), kept.end());
    out.push_back(ids.back());
    return out;
}

// ----------------------------- objective steps -----------------------------

// Runs one optimizer step per call. Corruption and dropout draw from the
// model's own noise stream so checkpoints capture the exact training state.
template <class S>
class ObjectiveRunner {
  public:
    ObjectiveRunner(ModelState<S>& st, const BpeModel& bpe, MlmConfig mlm_cfg, NoiseConfig noise_cfg)
        : st_(st), bpe_(bpe), mlm_cfg_(mlm_cfg), noise_cfg_(noise_cfg) {
        mlm_cfg_.validate();
        noise_cfg_.validate();
    }

    std::int64_t bt_pairs_skipped() const { return bt_pairs_skipped_; }

    double mlm_step(const Batch& batch, double lr) {
        Rng rng(0);
        rng.set_state(st_.rng_state);
        std::vector<std::vector<int>> corrupted;
        std::vector<std::vector<int>> originals;
        std::vector<std::vector<bool>> predict;
        for (const auto& seq : batch.seqs) {
            auto c = mlm_corrupt(seq, mlm_cfg_, rng, bpe_);
            corrupted.push_back(std::move(c.corrupted));
            originals.push_back(std::move(c.original));
            predict.push_back(std::move(c.predict));
        }
        StepGraph<S> sg(st_, true, &rng);
        PaddedView view = pad_sequences(corrupted, bpe_.pad_id());
        int hidden = sg.encode(view);
        std::vector<int> rows, targets;
        for (int b = 0; b < view.batch; ++b) {
            for (std::size_t t = 0; t < predict[static_cast<std::size_t>(b)].size(); ++t) {
                if (!predict[static_cast<std::size_t>(b)][t]) continue;
                rows.push_back(b * view.width + static_cast<int>(t));
                targets.push_back(originals[static_cast<std::size_t>(b)][t]);
            }
        }
        if (rows.empty()) {
            // nothing selected in this batch; the step still counts so the
            // schedule and stream positions stay aligned
            ++st_.step;
            st_.rng_state = rng.state();
            return 0.0;
        }
        int logits = sg.project_rows(hidden, rows);
        double loss = sg.xent(logits, targets);
        finish_step(sg, loss, lr, rng);
        return loss;
    }

    double dae_step(const Batch& batch, double lr) {
        Rng rng(0);
        rng.set_state(st_.rng_state);
        std::vector<std::vector<int>> corrupted;
        for (const auto& seq : batch.seqs) {
            corrupted.push_back(dae_corrupt(seq, noise_cfg_, rng, bpe_.mask_id()));
        }
        StepGraph<S> sg(st_, true, &rng);
        double loss = seq2seq_loss(sg, corrupted, batch.seqs, bpe_.lang_tag_id(batch.lang));
        finish_step(sg, loss, lr, rng);
        return loss;
    }

    // Generates source-language inputs with gradients disabled, then trains
    // one step to reconstruct the original target batch from them.
    double bt_step(const Batch& batch, double lr) {
        auto generated = generate_translations(batch.seqs, batch.src_lang);
        std::vector<std::vector<int>> synthetic;
        std::vector<std::vector<int>> targets;
        for (std::size_t i = 0; i < generated.size(); ++i) {
            if (generated[i].ids.empty()) {
                ++bt_pairs_skipped_;
                continue;
            }
            std::vector<int> wrapped;
            wrapped.reserve(generated[i].ids.size() + 2);
            wrapped.push_back(bpe_.bos_id());
            wrapped.insert(wrapped.end(), generated[i].ids.begin(), generated[i].ids.end());
            wrapped.push_back(bpe_.eos_id());
            synthetic.push_back(std::move(wrapped));
            targets.push_back(batch.seqs[i]);
        }
        if (synthetic.empty()) {
            ++st_.step;  // degenerate batch skipped, schedule continues
            return 0.0;
        }
        Rng rng(0);
        rng.set_state(st_.rng_state);
        StepGraph<S> sg(st_, true, &rng);
        double loss = seq2seq_loss(sg, synthetic, targets, bpe_.lang_tag_id(batch.lang));
        finish_step(sg, loss, lr, rng);
        return loss;
    }

    // Evaluation-mode losses: no parameter updates, no noise-stream draws.
    double dae_eval_loss(const Batch& batch) {
        Rng dummy(0);
        StepGraph<S> sg(st_, false, &dummy);
        return seq2seq_loss(sg, batch.seqs, batch.seqs, bpe_.lang_tag_id(batch.lang));
    }

    double bt_eval_loss(const Batch& batch) {
        auto generated = generate_translations(batch.seqs, batch.src_lang);
        std::vector<std::vector<int>> synthetic, targets;
        for (std::size_t i = 0; i < generated.size(); ++i) {
            if (generated[i].ids.empty()) continue;
            std::vector<int> wrapped = {bpe_.bos_id()};
            wrapped.insert(wrapped.end(), generated[i].ids.begin(), generated[i].ids.end());
            wrapped.push_back(bpe_.eos_id());
            synthetic.push_back(std::move(wrapped));
            targets.push_back(batch.seqs[i]);
        }
        if (synthetic.empty()) return std::numeric_limits<double>::infinity();
        Rng dummy(0);
        StepGraph<S> sg(st_, false, &dummy);
        return seq2seq_loss(sg, synthetic, targets, bpe_.lang_tag_id(batch.lang));
    }

    // Exposed for tests: greedy tgt->src translations of whole sequences.
    std::vector<Hypothesis> generate_translations(const std::vector<std::vector<int>>& seqs,
                                                  const LanguageId& src_lang) {
        TransformerScorer<S> scorer(st_, seqs, bpe_.pad_id());
        std::vector<int> lanes(seqs.size());
        for (std::size_t i = 0; i < seqs.size(); ++i) lanes[i] = static_cast<int>(i);
        scorer.bind_lanes(lanes);
        std::vector<int> starts(seqs.size(), bpe_.lang_tag_id(src_lang));
        return greedy_decode_batch(scorer, starts, bpe_.eos_id(), st_.cfg.max_len - 2);
    }

  private:
    // Decoder input replaces BOS with the language tag and drops EOS; the
    // prediction target is the sequence shifted left, ending in EOS.
    double seq2seq_loss(StepGraph<S>& sg, const std::vector<std::vector<int>>& src_seqs,
                        const std::vector<std::vector<int>>& tgt_seqs, int tag_id) {
        std::vector<std::vector<int>> tgt_in;
        std::vector<std::vector<int>> tgt_out;
        for (const auto& seq : tgt_seqs) {
            if (seq.size() < 2) throw ShapeError("target sequence too short");
            std::vector<int> in = {tag_id};
            in.insert(in.end(), seq.begin() + 1, seq.end() - 1);
            std::vector<int> out(seq.begin() + 1, seq.end());
            tgt_in.push_back(std::move(in));
            tgt_out.push_back(std::move(out));
        }
        PaddedView src = pad_sequences(src_seqs, bpe_.pad_id());
        PaddedView tgt = pad_sequences(tgt_in, bpe_.pad_id());
        int memory = sg.encode(src);
        int hidden = sg.decode(memory, src, tgt);
        std::vector<int> rows, targets;
        for (int b = 0; b < tgt.batch; ++b) {
            const auto& out_b = tgt_out[static_cast<std::size_t>(b)];
            for (std::size_t t = 0; t < out_b.size(); ++t) {
                rows.push_back(b * tgt.width + static_cast<int>(t));
                targets.push_back(out_b[t]);
            }
        }
        int logits = sg.project_rows(hidden, rows);
        return sg.xent(logits, targets);
    }

    void finish_step(StepGraph<S>& sg, double loss, double lr, Rng& rng) {
        if (!std::isfinite(loss)) {
            throw NonFiniteLoss("training loss is not finite at step " + std::to_string(st_.step + 1));
        }
        sg.backward();
        sg.adam_step(static_cast<S>(lr));
        st_.rng_state = rng.state();
    }

    ModelState<S>& st_;
    const BpeModel& bpe_;
    MlmConfig mlm_cfg_;
    NoiseConfig noise_cfg_;
    std::int64_t bt_pairs_skipped_ = 0;
};

// ----------------------------- training loop -----------------------------

struct TrainOptions {
    std::int64_t steps = 0;
    std::int64_t warmup = 500;
    double peak_lr = 1e-4;
    int mlm_sequences = 16;
    int mlm_positions = 128;
    std::int64_t token_budget = 2048;
    MlmConfig mlm;
    NoiseConfig noise;
    std::int64_t log_every = 50;
    std::int64_t checkpoint_every = 1000;
    std::int64_t valid_every = 500;
    int valid_functions = 32;
    std::uint64_t seed = 1;
    std::string out_dir;
    nlohmann::json provenance;
};

class TrainLog {
  public:
    explicit TrainLog(const std::string& path) : path_(path) {
        if (!path.empty()) std::filesystem::create_directories(std::filesystem::path(path).parent_path());
    }
    void append(const nlohmann::json& entry) {
        if (path_.empty()) return;
        std::ofstream out(path_, std::ios::app);
        out << entry.dump() << "\n";
    }

  private:
    std::string path_;
};

namespace detail {

inline std::string ckpt_path(const std::string& dir, std::int64_t step) {
    return dir + "/step_" + std::to_string(step) + ".ckpt";
}

template <class S>
std::string save_step_checkpoint(const ModelState<S>& st, const TrainOptions& opts) {
    std::filesystem::create_directories(opts.out_dir);
    std::string path = ckpt_path(opts.out_dir, st.step);
    save_checkpoint(st, path, opts.provenance);
    return path;
}

// Deterministic per-language validation slices.
inline std::vector<Batch> valid_batches(const IndexedCorpus& corpus, int per_lang) {
    std::vector<Batch> out;
    for (const auto& lc : corpus.languages) {
        Batch b;
        b.lang = lc.lang;
        for (const auto& fn : lc.valid) {
            if (static_cast<int>(b.seqs.size()) >= per_lang) break;
            b.seqs.push_back(fn.ids);
            b.token_budget += static_cast<std::int64_t>(fn.ids.size());
        }
        if (!b.seqs.empty()) out.push_back(std::move(b));
    }
    return out;
}

}  // namespace detail

// Masked-token pretraining over language-alternating batches.
template <class S>
std::string run_mlm_pretrain(ModelState<S>& st, const IndexedCorpus& corpus, const BpeModel& bpe,
                             const TrainOptions& opts) {
    BatchStream stream(corpus, StreamMode::MLM, mlm_profile(opts.mlm_sequences, opts.mlm_positions),
                       opts.seed);
    for (std::int64_t i = 0; i < st.step; ++i) stream.next();  // resume fast-forward

    ObjectiveRunner<S> runner(st, bpe, opts.mlm, opts.noise);
    TrainLog log(opts.out_dir + "/train_log.jsonl");
    std::string last_ckpt;
    while (st.step < opts.steps) {
        std::int64_t step_index = st.step;
        Batch batch = stream.next();
        double lr = lr_schedule(step_index + 1, opts.warmup, opts.peak_lr);
        double loss = runner.mlm_step(batch, lr);
        if (step_index % opts.log_every == 0 || st.step == opts.steps) {
            log.append({{"step", step_index}, {"objective", "mlm"}, {"lang", batch.lang.name},
                        {"loss", loss}, {"lr", lr}});
        }
        if (st.step % opts.checkpoint_every == 0 || st.step == opts.steps) {
            last_ckpt = detail::save_step_checkpoint(st, opts);
        }
    }
    if (last_ckpt.empty()) last_ckpt = detail::save_step_checkpoint(st, opts);
    return last_ckpt;
}

struct TrainResult {
    std::string last_checkpoint;
    std::string best_checkpoint;
    double best_valid = std::numeric_limits<double>::infinity();
};

// Alternates denoising and back-translation batches, one optimizer step each,
// cycling languages and ordered pairs round-robin. Validation reconstructs
// held-out functions through greedy round-trip translation; the best scoring
// checkpoint is kept alongside the periodic ones.
template <class S>
TrainResult run_main_training(ModelState<S>& st, const IndexedCorpus& corpus, const BpeModel& bpe,
                              const TrainOptions& opts) {
    BatchStream dae_stream(corpus, StreamMode::DAE, budget_profile(opts.token_budget), opts.seed);
    BatchStream bt_stream(corpus, StreamMode::BT, budget_profile(opts.token_budget),
                          opts.seed ^ 0x9e3779b97f4a7c15ull);
    // resume: replay consumed batches so stream positions line up
    for (std::int64_t i = 0; i < (st.step + 1) / 2; ++i) dae_stream.next();
    for (std::int64_t i = 0; i < st.step / 2; ++i) bt_stream.next();

    ObjectiveRunner<S> runner(st, bpe, opts.mlm, opts.noise);
    TrainLog log(opts.out_dir + "/train_log.jsonl");
    auto valids = detail::valid_batches(corpus, opts.valid_functions);

    TrainResult result;
    auto run_validation = [&] {
        double total = 0;
        int n = 0;
        nlohmann::json detail_bt = nlohmann::json::object();
        nlohmann::json detail_dae = nlohmann::json::object();
        for (auto& vb : valids) {
            double dae_l = runner.dae_eval_loss(vb);
            detail_dae[vb.lang.name] = dae_l;
            for (const auto& other : valids) {
                if (other.lang == vb.lang) continue;
                Batch dir = vb;
                dir.src_lang = other.lang;
                double l = runner.bt_eval_loss(dir);
                detail_bt[other.lang.name + ">" + vb.lang.name] = l;
                total += l;
                ++n;
            }
        }
        double avg = n ? total / n : std::numeric_limits<double>::infinity();
        bool best = avg < result.best_valid;
        if (best) {
            result.best_valid = avg;
            std::filesystem::create_directories(opts.out_dir);
            result.best_checkpoint = opts.out_dir + "/best.ckpt";
            save_checkpoint(st, result.best_checkpoint, opts.provenance);
        }
        log.append({{"step", st.step}, {"valid_rt", detail_bt}, {"valid_dae", detail_dae},
                    {"valid_avg", avg}, {"best", best}});
    };

    while (st.step < opts.steps) {
        std::int64_t step_index = st.step;
        bool do_dae = step_index % 2 == 0;
        double lr = lr_schedule(step_index + 1, opts.warmup, opts.peak_lr);
        double loss;
        nlohmann::json entry;
        if (do_dae) {
            Batch batch = dae_stream.next();
            loss = runner.dae_step(batch, lr);
            entry = {{"step", step_index}, {"objective", "dae"}, {"lang", batch.lang.name},
                     {"loss", loss}, {"lr", lr}};
        } else {
            Batch batch = bt_stream.next();
            loss = runner.bt_step(batch, lr);
            entry = {{"step", step_index}, {"objective", "bt"},
                     {"pair", batch.src_lang.name + ">" + batch.lang.name}, {"loss", loss}, {"lr", lr}};
        }
        if (step_index % opts.log_every == 0 || st.step == opts.steps) log.append(entry);
        if (opts.valid_every > 0 && (st.step % opts.valid_every == 0 || st.step == opts.steps)) {
            run_validation();
        }
        if (st.step % opts.checkpoint_every == 0 || st.step == opts.steps) {
            result.last_checkpoint = detail::save_step_checkpoint(st, opts);
        }
    }
    if (result.last_checkpoint.empty()) {
        result.last_checkpoint = detail::save_step_checkpoint(st, opts);
    }
    if (result.best_checkpoint.empty()) result.best_checkpoint = result.last_checkpoint;
    return result;
}

}  // namespace codemt
