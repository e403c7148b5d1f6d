#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "codemt/bpe.hpp"
#include "codemt/rng.hpp"

using namespace codemt;

namespace {

const std::vector<LanguageId> kLangs = {LanguageId::indent(), LanguageId::brace()};

std::map<std::string, std::int64_t> low_corpus() {
    return {{"low", 2}, {"lower", 1}};
}

std::vector<Token> word_tokens(const std::vector<std::string>& texts) {
    std::vector<Token> out;
    for (const auto& t : texts) out.push_back(tok(t, TokenKind::Ident));
    return out;
}

}  // namespace

TEST_CASE("first merge is the most frequent pair with lexicographic ties") {
    // Pair counts: (l,o)=3 and (o,w)=3 tie; (l,o) sorts first.
    auto model = BpeModel::learn(low_corpus(), 1, kLangs);
    REQUIRE(model.merges().size() == 1);
    CHECK(model.merges()[0] == std::make_pair(std::string("l"), std::string("o")));
}

TEST_CASE("zero merges splits tokens into characters") {
    auto model = BpeModel::learn(low_corpus(), 0, kLangs);
    auto ids = model.apply_token("low");
    REQUIRE(ids.size() == 4);  // l o w </w>
    CHECK(model.subword(ids[0]) == "l");
    CHECK(model.subword(ids[3]) == kEndOfToken);
}

TEST_CASE("applying to an unseen token replays learned merges") {
    auto model = BpeModel::learn(low_corpus(), 1, kLangs);
    auto ids = model.apply_token("lowest");
    REQUIRE(!ids.empty());
    CHECK(model.subword(ids[0]) == "lo");
}

TEST_CASE("out-of-alphabet characters map to UNK") {
    auto model = BpeModel::learn(low_corpus(), 2, kLangs);
    auto ids = model.apply_token("z");
    REQUIRE(ids.size() == 2);
    CHECK(ids[0] == model.unk_id());
}

TEST_CASE("whole-token vocab entries map to a single id") {
    auto model = BpeModel::learn(low_corpus(), 10, kLangs);
    auto ids = model.apply_token("low");
    REQUIRE(ids.size() == 1);
    CHECK(model.subword(ids[0]) == std::string("low") + kEndOfToken);
}

TEST_CASE("decode inverts apply on corpus tokens") {
    auto counts = std::map<std::string, std::int64_t>{
        {"def", 5}, {"return", 4}, {"(", 9}, {")", 9}, {"x", 3}, {"x1", 2}, {"NEWLINE", 7},
    };
    auto model = BpeModel::learn(counts, 30, kLangs);
    std::vector<std::string> texts;
    for (const auto& [t, _] : counts) texts.push_back(t);
    auto toks = word_tokens(texts);
    auto decoded = model.decode(model.apply(toks));
    REQUIRE(decoded.size() == toks.size());
    for (std::size_t i = 0; i < toks.size(); ++i) CHECK(decoded[i].text == toks[i].text);
}

TEST_CASE("unknown id raises DecodeError") {
    auto model = BpeModel::learn(low_corpus(), 1, kLangs);
    CHECK_THROWS_AS(model.decode({model.vocab_size() + 3}), DecodeError);
    CHECK_THROWS_AS(model.decode({model.pad_id()}), DecodeError);
}

TEST_CASE("permuted corpora learn identical merge lists") {
    std::map<std::string, std::int64_t> a = {{"alpha", 3}, {"beta", 2}, {"beam", 4}, {"able", 1}};
    auto m1 = BpeModel::learn(a, 8, kLangs);
    // std::map iteration already canonicalizes order; emulate a permuted load
    // by inserting in a different order.
    std::map<std::string, std::int64_t> b;
    b["beam"] = 4;
    b["able"] = 1;
    b["alpha"] = 3;
    b["beta"] = 2;
    auto m2 = BpeModel::learn(b, 8, kLangs);
    CHECK(m1.merges() == m2.merges());
    CHECK(m1.vocab_text() == m2.vocab_text());
}

TEST_CASE("vocabulary grows monotonically with merge count") {
    auto counts = std::map<std::string, std::int64_t>{{"loop", 4}, {"low", 2}, {"lower", 3}, {"pool", 1}};
    for (int k = 0; k < 6; ++k) {
        auto small = BpeModel::learn(counts, k, kLangs);
        auto big = BpeModel::learn(counts, k + 1, kLangs);
        for (int id = 0; id < small.vocab_size(); ++id) {
            const std::string& s = small.subword(id);
            bool found = false;
            for (int jd = 0; jd < big.vocab_size(); ++jd) {
                if (big.subword(jd) == s) {
                    found = true;
                    break;
                }
            }
            CHECK(found);
        }
        CHECK(big.vocab_size() - small.vocab_size() <= 1);
    }
}

TEST_CASE("empty corpus is rejected") {
    CHECK_THROWS_AS(BpeModel::learn({}, 5, kLangs), EmptyCorpus);
}

TEST_CASE("save and load round-trip bit-exactly") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "codemt_bpe_test";
    fs::create_directories(dir);
    auto counts = std::map<std::string, std::int64_t>{{"while", 6}, {"иx", 1}, {"x", 9}, {"==", 4}};
    auto model = BpeModel::learn(counts, 12, kLangs);
    auto merges_path = (dir / "merges.txt").string();
    auto vocab_path = (dir / "vocab.txt").string();
    model.save(merges_path, vocab_path);
    auto loaded = BpeModel::load(merges_path, vocab_path, kLangs);
    CHECK(loaded.merges_text() == model.merges_text());
    CHECK(loaded.vocab_text() == model.vocab_text());
    auto merges2 = (dir / "merges2.txt").string();
    auto vocab2 = (dir / "vocab2.txt").string();
    loaded.save(merges2, vocab2);
    CHECK(read_file(merges2) == read_file(merges_path));
    CHECK(read_file(vocab2) == read_file(vocab_path));
    fs::remove_all(dir);
}

TEST_CASE("language tags are reserved exactly once") {
    auto model = BpeModel::learn(low_corpus(), 1, kLangs);
    CHECK(model.lang_tag_id(LanguageId::indent()) == 5);
    CHECK(model.lang_tag_id(LanguageId::brace()) == 6);
    CHECK(model.num_reserved() == 7);
    int occurrences = 0;
    for (int id = 0; id < model.vocab_size(); ++id) {
        if (model.subword(id) == BpeModel::lang_tag_text(LanguageId::indent())) ++occurrences;
    }
    CHECK(occurrences == 1);
    CHECK_THROWS_AS(model.lang_tag_id(LanguageId("cobol")), ConfigError);
}

TEST_CASE("round-trip holds across a fuzzed token corpus") {
    Rng rng(11);
    std::map<std::string, std::int64_t> counts;
    std::vector<std::string> pool;
    const std::string alphabet = "abcdefgh01_";
    for (int i = 0; i < 200; ++i) {
        std::string t;
        int len = static_cast<int>(rng.uniform_int(1, 8));
        for (int j = 0; j < len; ++j) {
            t += alphabet[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(alphabet.size()) - 1))];
        }
        counts[t] += rng.uniform_int(1, 5);
        pool.push_back(t);
    }
    auto model = BpeModel::learn(counts, 150, kLangs);
    for (const auto& t : pool) {
        auto decoded = model.decode(model.apply_token(t));
        REQUIRE(decoded.size() == 1);
        CHECK(decoded[0].text == t);
    }
}
