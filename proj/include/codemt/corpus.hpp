#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "codemt/bpe.hpp"
#include "codemt/lex.hpp"
#include "codemt/rng.hpp"
#include "codemt/util.hpp"

#include <json.hpp>

namespace codemt {

// ----------------------------- corpus files -----------------------------

struct CorpusEntry {
    LanguageId lang;
    std::string id;
    std::string code;
};

inline std::string corpus_line(const CorpusEntry& e) {
    nlohmann::json j;
    j["lang"] = e.lang.name;
    j["id"] = e.id;
    j["code"] = e.code;
    return j.dump();
}

inline std::vector<CorpusEntry> read_corpus_file(const std::string& path) {
    std::vector<CorpusEntry> out;
    std::size_t line_no = 0;
    for (const auto& line : read_lines(path)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(line_no, e.what());
        }
        if (!j.contains("lang") || !j.contains("id") || !j.contains("code")) {
            throw FormatError(line_no, "corpus record needs lang, id, code");
        }
        CorpusEntry e;
        e.lang = LanguageId(j["lang"].get<std::string>());
        e.id = j["id"].get<std::string>();
        e.code = j["code"].get<std::string>();
        out.push_back(std::move(e));
    }
    return out;
}

inline void write_corpus_file(const std::string& path, const std::vector<CorpusEntry>& entries) {
    std::string out;
    for (const auto& e : entries) {
        out += corpus_line(e);
        out += '\n';
    }
    write_file(path, out);
}

// ----------------------------- indexed corpus -----------------------------

enum class Split : std::uint8_t { Train, Valid, Test };

inline const char* split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Valid: return "valid";
        case Split::Test: return "test";
    }
    return "?";
}

// 90/5/5 assignment by id hash; stable across runs and machines.
inline Split split_of_id(const std::string& id) {
    std::uint64_t h = fnv1a64(id, 0x51ed270b7a03f24bull);
    std::uint64_t bucket = h % 100;
    if (bucket < 90) return Split::Train;
    if (bucket < 95) return Split::Valid;
    return Split::Test;
}

struct IndexedFunction {
    std::string id;
    std::vector<int> ids;  // BOS ... EOS
};

struct LanguageCorpus {
    LanguageId lang;
    std::vector<IndexedFunction> train, valid, test;
};

struct IndexedCorpus {
    std::vector<LanguageCorpus> languages;
    std::int64_t dropped_too_long = 0;

    const LanguageCorpus& of(const LanguageId& lang) const {
        for (const auto& lc : languages) {
            if (lc.lang == lang) return lc;
        }
        throw DataError("language not present in corpus: " + lang.name);
    }
};

// Tokenizes, applies BPE, wraps with BOS/EOS, drops over-length functions
// (counted), and splits 90/5/5 by id hash.
inline IndexedCorpus ingest(const std::vector<std::string>& corpus_files, const BpeModel& bpe,
                            int max_len, bool keep_comments = true) {
    if (max_len < 2) throw ConfigError("max_len must be >= 2");
    IndexedCorpus out;
    auto lang_corpus = [&](const LanguageId& lang) -> LanguageCorpus& {
        for (auto& lc : out.languages) {
            if (lc.lang == lang) return lc;
        }
        out.languages.push_back(LanguageCorpus{lang, {}, {}, {}});
        return out.languages.back();
    };
    for (const auto& path : corpus_files) {
        for (const auto& entry : read_corpus_file(path)) {
            auto tokens = tokenize(entry.lang, entry.code);
            if (!keep_comments) tokens = strip_comment_tokens(tokens);
            IndexedFunction fn;
            fn.id = entry.id;
            fn.ids.push_back(bpe.bos_id());
            auto sub = bpe.apply(tokens);
            fn.ids.insert(fn.ids.end(), sub.begin(), sub.end());
            fn.ids.push_back(bpe.eos_id());
            if (static_cast<int>(fn.ids.size()) > max_len) {
                ++out.dropped_too_long;
                continue;
            }
            auto& lc = lang_corpus(entry.lang);
            switch (split_of_id(fn.id)) {
                case Split::Train: lc.train.push_back(std::move(fn)); break;
                case Split::Valid: lc.valid.push_back(std::move(fn)); break;
                case Split::Test: lc.test.push_back(std::move(fn)); break;
            }
        }
    }
    return out;
}

inline std::string split_manifest(const IndexedCorpus& corpus) {
    std::string out;
    for (const auto& lc : corpus.languages) {
        auto emit = [&](const std::vector<IndexedFunction>& fns, Split s) {
            for (const auto& f : fns) {
                nlohmann::json j;
                j["id"] = f.id;
                j["lang"] = lc.lang.name;
                j["split"] = split_name(s);
                out += j.dump();
                out += '\n';
            }
        };
        emit(lc.train, Split::Train);
        emit(lc.valid, Split::Valid);
        emit(lc.test, Split::Test);
    }
    return out;
}

// ----------------------------- batches -----------------------------

enum class StreamMode : std::uint8_t { MLM, DAE, BT };

struct Batch {
    LanguageId lang;                      // data language (MLM/DAE: the batch language; BT: the target)
    LanguageId src_lang;                  // BT only: generation direction source
    std::vector<std::vector<int>> seqs;   // with BOS/EOS, each within max_len
    std::int64_t token_budget = 0;        // total non-pad tokens

    int rows() const { return static_cast<int>(seqs.size()); }
    int max_seq_len() const {
        std::size_t m = 0;
        for (const auto& s : seqs) m = std::max(m, s.size());
        return static_cast<int>(m);
    }
};

struct BatchProfile {
    int max_sequences = 16;        // MLM profile: fixed sequence count
    std::int64_t token_budget = 2048;  // DAE/BT profile: greedy fill bound
    bool by_sequence_count = true;
};

inline BatchProfile mlm_profile(int sequences, int positions) {
    BatchProfile p;
    p.max_sequences = sequences;
    p.token_budget = static_cast<std::int64_t>(sequences) * positions;
    p.by_sequence_count = true;
    return p;
}

inline BatchProfile budget_profile(std::int64_t token_budget) {
    BatchProfile p;
    p.by_sequence_count = false;
    p.token_budget = token_budget;
    return p;
}

namespace detail {

// One language's shuffled, packed epoch stream. Epoch e's order is a pure
// function of (seed, lang, e); greedy packing never splits a function.
class LanguageStream {
  public:
    LanguageStream(const std::vector<IndexedFunction>* pool, LanguageId lang, BatchProfile profile,
                   std::uint64_t seed)
        : pool_(pool), lang_(std::move(lang)), profile_(profile), seed_(seed) {
        if (pool_->empty()) throw EmptyCorpus("no training functions for language " + lang_.name);
    }

    Batch next() {
        if (cursor_ >= epoch_batches_.size()) build_epoch();
        Batch b;
        b.lang = lang_;
        for (int idx : epoch_batches_[cursor_]) {
            const auto& fn = (*pool_)[static_cast<std::size_t>(idx)];
            b.seqs.push_back(fn.ids);
            b.token_budget += static_cast<std::int64_t>(fn.ids.size());
        }
        ++cursor_;
        return b;
    }

  private:
    void build_epoch() {
        std::vector<int> order(pool_->size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        Rng rng(seed_ ^ fnv1a64(lang_.name) ^ (0x9e3779b97f4a7c15ull * (epoch_ + 1)));
        rng.shuffle(order);
        epoch_batches_.clear();
        cursor_ = 0;
        std::vector<int> current;
        std::int64_t tokens = 0;
        auto flush = [&] {
            if (!current.empty()) {
                epoch_batches_.push_back(current);
                current.clear();
                tokens = 0;
            }
        };
        for (int idx : order) {
            std::int64_t len = static_cast<std::int64_t>((*pool_)[static_cast<std::size_t>(idx)].ids.size());
            bool fits = profile_.by_sequence_count
                            ? static_cast<int>(current.size()) < profile_.max_sequences
                            : current.empty() || tokens + len <= profile_.token_budget;
            if (!fits) flush();
            current.push_back(idx);
            tokens += len;
        }
        flush();
        ++epoch_;
    }

    const std::vector<IndexedFunction>* pool_;
    LanguageId lang_;
    BatchProfile profile_;
    std::uint64_t seed_;
    std::uint64_t epoch_ = 0;
    std::vector<std::vector<int>> epoch_batches_;
    std::size_t cursor_ = 0;
};

}  // namespace detail

// Alternates languages round-robin (MLM/DAE) or ordered language pairs (BT).
// The stream is infinite and bit-reproducible from its seed.
class BatchStream {
  public:
    BatchStream(const IndexedCorpus& corpus, StreamMode mode, BatchProfile profile, std::uint64_t seed)
        : mode_(mode) {
        for (const auto& lc : corpus.languages) {
            streams_.emplace_back(&lc.train, lc.lang, profile, seed);
            stream_langs_.push_back(lc.lang);
        }
        if (mode == StreamMode::BT) {
            for (std::size_t s = 0; s < corpus.languages.size(); ++s) {
                for (std::size_t t = 0; t < corpus.languages.size(); ++t) {
                    if (s != t) pairs_.emplace_back(corpus.languages[s].lang, corpus.languages[t].lang);
                }
            }
            if (pairs_.empty()) throw ConfigError("back-translation needs at least two languages");
        }
    }

    Batch next() {
        if (mode_ == StreamMode::BT) {
            const auto& [src, tgt] = pairs_[pair_cursor_];
            pair_cursor_ = (pair_cursor_ + 1) % pairs_.size();
            Batch b = streams_[stream_index(tgt)].next();
            b.src_lang = src;
            return b;
        }
        Batch b = streams_[lang_cursor_].next();
        lang_cursor_ = (lang_cursor_ + 1) % streams_.size();
        return b;
    }

  private:
    std::size_t stream_index(const LanguageId& lang) const {
        for (std::size_t i = 0; i < stream_langs_.size(); ++i) {
            if (stream_langs_[i] == lang) return i;
        }
        throw DataError("no stream for language " + lang.name);
    }

    StreamMode mode_;
    std::vector<detail::LanguageStream> streams_;
    std::vector<LanguageId> stream_langs_;
    std::vector<std::pair<LanguageId, LanguageId>> pairs_;
    std::size_t lang_cursor_ = 0;
    std::size_t pair_cursor_ = 0;
};

}  // namespace codemt
