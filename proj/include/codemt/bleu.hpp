#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "codemt/util.hpp"

namespace codemt {

// Corpus-level BLEU-4: geometric mean of modified n-gram precisions times the
// brevity penalty. Zero match counts for n >= 2 are add-one smoothed; the
// unigram precision is left raw, so disjoint token sets score 0.
class BleuAccumulator {
  public:
    void add(const std::vector<std::string>& hyp, const std::vector<std::string>& ref) {
        if (ref.empty()) throw EmptyReference("BLEU reference must be nonempty");
        hyp_len_ += static_cast<std::int64_t>(hyp.size());
        ref_len_ += static_cast<std::int64_t>(ref.size());
        for (int n = 1; n <= 4; ++n) {
            auto hyp_counts = ngram_counts(hyp, n);
            auto ref_counts = ngram_counts(ref, n);
            std::int64_t total = 0, matched = 0;
            for (const auto& [gram, count] : hyp_counts) {
                total += count;
                auto it = ref_counts.find(gram);
                if (it != ref_counts.end()) matched += std::min(count, it->second);
            }
            total_[static_cast<std::size_t>(n - 1)] += total;
            matched_[static_cast<std::size_t>(n - 1)] += matched;
        }
    }

    double score() const {
        if (hyp_len_ == 0) return 0.0;
        if (total_[0] == 0 || matched_[0] == 0) return 0.0;
        double log_sum = std::log(static_cast<double>(matched_[0]) / static_cast<double>(total_[0]));
        for (int n = 2; n <= 4; ++n) {
            std::int64_t m = matched_[static_cast<std::size_t>(n - 1)];
            std::int64_t t = total_[static_cast<std::size_t>(n - 1)];
            double p = m == 0 ? 1.0 / static_cast<double>(t + 1)
                              : static_cast<double>(m) / static_cast<double>(t);
            log_sum += std::log(p);
        }
        double geo = std::exp(log_sum / 4.0);
        double bp = hyp_len_ >= ref_len_
                        ? 1.0
                        : std::exp(1.0 - static_cast<double>(ref_len_) / static_cast<double>(hyp_len_));
        return 100.0 * bp * geo;
    }

    std::int64_t matched(int n) const { return matched_[static_cast<std::size_t>(n - 1)]; }
    std::int64_t total(int n) const { return total_[static_cast<std::size_t>(n - 1)]; }

  private:
    static std::map<std::string, std::int64_t> ngram_counts(const std::vector<std::string>& toks, int n) {
        std::map<std::string, std::int64_t> counts;
        if (static_cast<int>(toks.size()) < n) return counts;
        for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= toks.size(); ++i) {
            std::string key;
            for (int k = 0; k < n; ++k) {
                if (k) key += '\x1f';
                key += toks[i + static_cast<std::size_t>(k)];
            }
            counts[key] += 1;
        }
        return counts;
    }

    std::int64_t hyp_len_ = 0;
    std::int64_t ref_len_ = 0;
    std::array<std::int64_t, 4> matched_{0, 0, 0, 0};
    std::array<std::int64_t, 4> total_{0, 0, 0, 0};
};

inline double bleu(const std::vector<std::string>& hyp, const std::vector<std::string>& ref) {
    BleuAccumulator acc;
    acc.add(hyp, ref);
    return acc.score();
}

}  // namespace codemt
