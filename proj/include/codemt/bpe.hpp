#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "codemt/lex.hpp"
#include "codemt/util.hpp"

namespace codemt {

inline constexpr const char* kEndOfToken = "</w>";

// Shared subword vocabulary: one merge table learned over the concatenated
// token dumps of every language, with reserved ids for control tokens and one
// start tag per language.
class BpeModel {
  public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kMask = 2;
    static constexpr int kBos = 3;
    static constexpr int kEos = 4;

    BpeModel() = default;

    static std::string lang_tag_text(const LanguageId& lang) { return "<lang:" + lang.name + ">"; }

    int pad_id() const { return kPad; }
    int unk_id() const { return kUnk; }
    int mask_id() const { return kMask; }
    int bos_id() const { return kBos; }
    int eos_id() const { return kEos; }

    int lang_tag_id(const LanguageId& lang) const {
        for (std::size_t i = 0; i < languages_.size(); ++i) {
            if (languages_[i] == lang.name) return 5 + static_cast<int>(i);
        }
        throw ConfigError("language has no tag in the vocabulary: " + lang.name);
    }

    int num_reserved() const { return 5 + static_cast<int>(languages_.size()); }
    int vocab_size() const { return static_cast<int>(id_to_subword_.size()); }
    bool is_special(int id) const { return id >= 0 && id < num_reserved(); }

    const std::vector<std::pair<std::string, std::string>>& merges() const { return merges_; }
    const std::vector<std::string>& languages() const { return languages_; }
    const std::string& subword(int id) const {
        if (id < 0 || id >= vocab_size()) throw DecodeError("unknown subword id " + std::to_string(id));
        return id_to_subword_[static_cast<std::size_t>(id)];
    }

    // ----------------------------- construction -----------------------------

    static BpeModel learn(const std::map<std::string, std::int64_t>& token_counts, int num_merges,
                          const std::vector<LanguageId>& languages) {
        if (token_counts.empty()) throw EmptyCorpus("BPE training corpus is empty");
        if (num_merges < 0) throw ConfigError("num_merges must be >= 0");

        BpeModel model;
        for (const auto& lang : languages) model.languages_.push_back(lang.name);

        // Symbol interning; id order is deterministic because token_counts is
        // an ordered map.
        std::vector<std::string> sym_text;
        std::unordered_map<std::string, int> sym_id;
        auto intern = [&](const std::string& s) {
            auto it = sym_id.find(s);
            if (it != sym_id.end()) return it->second;
            int id = static_cast<int>(sym_text.size());
            sym_text.push_back(s);
            sym_id.emplace(s, id);
            return id;
        };

        struct Word {
            std::vector<int> syms;
            std::int64_t count;
        };
        std::vector<Word> words;
        std::vector<int> initial_syms;
        for (const auto& [text, count] : token_counts) {
            Word w;
            w.count = count;
            for (const auto& cp : utf8_split(text)) w.syms.push_back(intern(cp));
            w.syms.push_back(intern(kEndOfToken));
            words.push_back(std::move(w));
        }
        for (int i = 0; i < static_cast<int>(sym_text.size()); ++i) initial_syms.push_back(i);

        using Pair = std::pair<int, int>;
        struct PairHash {
            std::size_t operator()(const Pair& p) const {
                return std::hash<std::uint64_t>()(
                    (static_cast<std::uint64_t>(static_cast<std::uint32_t>(p.first)) << 32) |
                    static_cast<std::uint32_t>(p.second));
            }
        };
        std::unordered_map<Pair, std::int64_t, PairHash> pair_count;
        std::unordered_map<Pair, std::vector<int>, PairHash> pair_words;

        auto add_word_pairs = [&](int widx, std::int64_t sign) {
            const Word& w = words[static_cast<std::size_t>(widx)];
            for (std::size_t i = 0; i + 1 < w.syms.size(); ++i) {
                Pair p{w.syms[i], w.syms[i + 1]};
                pair_count[p] += sign * w.count;
                if (sign > 0) pair_words[p].push_back(widx);
            }
        };
        for (int i = 0; i < static_cast<int>(words.size()); ++i) add_word_pairs(i, +1);

        std::vector<int> merged_syms;
        for (int m = 0; m < num_merges; ++m) {
            Pair best{-1, -1};
            std::int64_t best_count = 0;
            for (const auto& [p, c] : pair_count) {
                if (c <= 0) continue;
                if (c > best_count) {
                    best = p;
                    best_count = c;
                } else if (c == best_count) {
                    const std::string& bl = sym_text[static_cast<std::size_t>(best.first)];
                    const std::string& br = sym_text[static_cast<std::size_t>(best.second)];
                    const std::string& pl = sym_text[static_cast<std::size_t>(p.first)];
                    const std::string& pr = sym_text[static_cast<std::size_t>(p.second)];
                    if (pl < bl || (pl == bl && pr < br)) best = p;
                }
            }
            if (best_count <= 0) break;

            const std::string merged_text = sym_text[static_cast<std::size_t>(best.first)] +
                                            sym_text[static_cast<std::size_t>(best.second)];
            int merged = intern(merged_text);
            model.merges_.emplace_back(sym_text[static_cast<std::size_t>(best.first)],
                                       sym_text[static_cast<std::size_t>(best.second)]);
            merged_syms.push_back(merged);

            std::vector<int> affected = pair_words[best];
            pair_words.erase(best);
            for (int widx : affected) {
                Word& w = words[static_cast<std::size_t>(widx)];
                bool contains = false;
                for (std::size_t i = 0; i + 1 < w.syms.size(); ++i) {
                    if (w.syms[i] == best.first && w.syms[i + 1] == best.second) {
                        contains = true;
                        break;
                    }
                }
                if (!contains) continue;  // stale occurrence entry
                add_word_pairs(widx, -1);
                std::vector<int> out;
                out.reserve(w.syms.size());
                for (std::size_t i = 0; i < w.syms.size();) {
                    if (i + 1 < w.syms.size() && w.syms[i] == best.first && w.syms[i + 1] == best.second) {
                        out.push_back(merged);
                        i += 2;
                    } else {
                        out.push_back(w.syms[i]);
                        ++i;
                    }
                }
                w.syms = std::move(out);
                add_word_pairs(widx, +1);
            }
            pair_count.erase(best);
        }

        // Vocabulary: every initial symbol plus every merge result, ids dense
        // after the reserved block, in lexicographic order.
        std::map<std::string, bool> vocab_set;
        for (int s : initial_syms) vocab_set[sym_text[static_cast<std::size_t>(s)]] = true;
        for (int s : merged_syms) vocab_set[sym_text[static_cast<std::size_t>(s)]] = true;

        model.id_to_subword_.assign({"<pad>", "<unk>", "<mask>", "<bos>", "<eos>"});
        for (const auto& lang : languages) {
            model.id_to_subword_.push_back(lang_tag_text(lang));
        }
        for (const auto& [text, _] : vocab_set) model.id_to_subword_.push_back(text);
        model.rebuild_index();
        return model;
    }

    static BpeModel learn_from_files(const std::vector<std::string>& token_dump_paths, int num_merges,
                                     const std::vector<LanguageId>& languages) {
        std::map<std::string, std::int64_t> counts;
        for (const auto& path : token_dump_paths) {
            for (const auto& line : read_lines(path)) {
                for (const auto& t : split_ws(line)) counts[t] += 1;
            }
        }
        return learn(counts, num_merges, languages);
    }

    // ----------------------------- apply / decode -----------------------------

    std::vector<int> apply_token(const std::string& text) const {
        auto it = apply_cache_.find(text);
        if (it != apply_cache_.end()) return it->second;
        std::vector<std::string> syms = utf8_split(text);
        syms.push_back(kEndOfToken);
        // Replay merges in learned order: repeatedly fuse the lowest-ranked
        // adjacent pair, left to right.
        for (;;) {
            int best_rank = -1;
            for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
                auto r = merge_rank_.find(syms[i] + "\x01" + syms[i + 1]);
                if (r != merge_rank_.end() && (best_rank < 0 || r->second < best_rank)) {
                    best_rank = r->second;
                }
            }
            if (best_rank < 0) break;
            const auto& [l, r] = merges_[static_cast<std::size_t>(best_rank)];
            std::vector<std::string> out;
            out.reserve(syms.size());
            for (std::size_t i = 0; i < syms.size();) {
                if (i + 1 < syms.size() && syms[i] == l && syms[i + 1] == r) {
                    out.push_back(l + r);
                    i += 2;
                } else {
                    out.push_back(syms[i]);
                    ++i;
                }
            }
            syms = std::move(out);
        }
        std::vector<int> ids;
        ids.reserve(syms.size());
        for (const auto& s : syms) {
            auto v = subword_to_id_.find(s);
            ids.push_back(v == subword_to_id_.end() ? kUnk : v->second);
        }
        apply_cache_.emplace(text, ids);
        return ids;
    }

    std::vector<int> apply(const std::vector<Token>& tokens) const {
        std::vector<int> out;
        for (const auto& t : tokens) {
            auto ids = apply_token(t.text);
            out.insert(out.end(), ids.begin(), ids.end());
        }
        return out;
    }

    std::vector<Token> decode(const std::vector<int>& ids) const {
        std::vector<Token> out;
        std::string current;
        bool open = false;
        auto boundary = [&] {
            if (!current.empty()) out.push_back(tok(current, classify_token_text(current)));
            current.clear();
            open = false;
        };
        for (int id : ids) {
            if (id == kPad) throw DecodeError("PAD inside subword sequence");
            const std::string& s = subword(id);
            if (is_special(id)) {
                boundary();
                out.push_back(tok(s, TokenKind::Ident));
                continue;
            }
            if (s.size() >= 4 && s.compare(s.size() - 4, 4, kEndOfToken) == 0) {
                current += s.substr(0, s.size() - 4);
                boundary();
            } else {
                current += s;
                open = true;
            }
        }
        if (open) boundary();
        return out;
    }

    // ----------------------------- serialization -----------------------------

    std::string merges_text() const {
        std::string out;
        for (const auto& [l, r] : merges_) {
            out += l;
            out += ' ';
            out += r;
            out += '\n';
        }
        return out;
    }

    std::string vocab_text() const {
        std::string out;
        for (std::size_t i = 0; i < id_to_subword_.size(); ++i) {
            out += id_to_subword_[i];
            out += '\t';
            out += std::to_string(i);
            out += '\n';
        }
        return out;
    }

    void save(const std::string& merges_path, const std::string& vocab_path) const {
        write_file(merges_path, merges_text());
        write_file(vocab_path, vocab_text());
    }

    static BpeModel load(const std::string& merges_path, const std::string& vocab_path,
                         const std::vector<LanguageId>& languages) {
        BpeModel model;
        for (const auto& line : read_lines(merges_path)) {
            if (line.empty()) continue;
            std::size_t sp = line.find(' ');
            if (sp == std::string::npos) throw DataError("malformed merge line: " + line);
            model.merges_.emplace_back(line.substr(0, sp), line.substr(sp + 1));
        }
        for (const auto& line : read_lines(vocab_path)) {
            if (line.empty()) continue;
            std::size_t tab = line.find('\t');
            if (tab == std::string::npos) throw DataError("malformed vocab line: " + line);
            std::size_t id = std::stoul(line.substr(tab + 1));
            if (id != model.id_to_subword_.size()) throw DataError("vocab ids are not dense");
            model.id_to_subword_.push_back(line.substr(0, tab));
        }
        if (model.id_to_subword_.size() < 5) throw DataError("vocab missing reserved entries");
        for (const auto& lang : languages) {
            model.languages_.push_back(lang.name);
            std::size_t at = 5 + model.languages_.size() - 1;
            if (at >= model.id_to_subword_.size() || model.id_to_subword_[at] != lang_tag_text(lang)) {
                throw DataError("vocab does not carry a tag for language: " + lang.name);
            }
        }
        model.rebuild_index();
        return model;
    }

  private:
    void rebuild_index() {
        subword_to_id_.clear();
        for (std::size_t i = 0; i < id_to_subword_.size(); ++i) {
            subword_to_id_.emplace(id_to_subword_[i], static_cast<int>(i));
        }
        merge_rank_.clear();
        for (std::size_t i = 0; i < merges_.size(); ++i) {
            merge_rank_.emplace(merges_[i].first + "\x01" + merges_[i].second, static_cast<int>(i));
        }
        apply_cache_.clear();
    }

    std::vector<std::pair<std::string, std::string>> merges_;
    std::vector<std::string> id_to_subword_;
    std::unordered_map<std::string, int> subword_to_id_;
    std::unordered_map<std::string, int> merge_rank_;
    std::vector<std::string> languages_;
    mutable std::unordered_map<std::string, std::vector<int>> apply_cache_;
};

}  // namespace codemt
