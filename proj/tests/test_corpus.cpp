#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <set>

#include "codemt/corpus.hpp"
#include "codemt/progen.hpp"

using namespace codemt;

namespace {

const std::vector<LanguageId> kLangs = {LanguageId::indent(), LanguageId::brace()};

struct Fixture {
    std::string dir;
    std::string corpus_indent, corpus_brace;
    BpeModel bpe;

    Fixture() {
        namespace fs = std::filesystem;
        dir = (fs::temp_directory_path() / "codemt_corpus_test").string();
        fs::create_directories(dir);
        Rng rng(2024);
        std::vector<CorpusEntry> ei, eb;
        std::map<std::string, std::int64_t> counts;
        for (int i = 0; i < 120; ++i) {
            auto gen = generate_program(rng, 5);
            CorpusEntry a{LanguageId::indent(), "fi_" + std::to_string(i), gen.indent_src};
            auto gen2 = generate_program(rng, 5);
            CorpusEntry b{LanguageId::brace(), "fb_" + std::to_string(i), gen2.brace_src};
            for (const auto& t : tokenize(a.lang, a.code)) counts[t.text] += 1;
            for (const auto& t : tokenize(b.lang, b.code)) counts[t.text] += 1;
            ei.push_back(std::move(a));
            eb.push_back(std::move(b));
        }
        corpus_indent = dir + "/indent.jsonl";
        corpus_brace = dir + "/brace.jsonl";
        write_corpus_file(corpus_indent, ei);
        write_corpus_file(corpus_brace, eb);
        bpe = BpeModel::learn(counts, 400, kLangs);
    }
};

}  // namespace

TEST_CASE_METHOD(Fixture, "ingest keeps boundary lengths and drops over-length") {
    auto corpus = ingest({corpus_indent, corpus_brace}, bpe, 128);
    std::size_t total = 0;
    for (const auto& lc : corpus.languages) {
        total += lc.train.size() + lc.valid.size() + lc.test.size();
        for (const auto& split : {&lc.train, &lc.valid, &lc.test}) {
            for (const auto& fn : *split) {
                CHECK(fn.ids.size() <= 128);
                CHECK(fn.ids.front() == bpe.bos_id());
                CHECK(fn.ids.back() == bpe.eos_id());
            }
        }
    }
    CHECK(total + static_cast<std::size_t>(corpus.dropped_too_long) == 240);

    // Tight cap: every sequence longer than the cap is dropped and counted.
    auto tight = ingest({corpus_indent}, bpe, 12);
    std::size_t kept = 0;
    for (const auto& lc : tight.languages) kept += lc.train.size() + lc.valid.size() + lc.test.size();
    CHECK(kept + static_cast<std::size_t>(tight.dropped_too_long) == 120);
    CHECK(tight.dropped_too_long > 0);

    // Exact boundary: a function of exactly max_len ids is kept.
    auto full = ingest({corpus_indent}, bpe, 4096);
    std::size_t longest = 0;
    for (const auto& fn : full.of(LanguageId::indent()).train) longest = std::max(longest, fn.ids.size());
    auto boundary = ingest({corpus_indent}, bpe, static_cast<int>(longest));
    bool found_boundary = false;
    for (const auto& fn : boundary.of(LanguageId::indent()).train) {
        if (fn.ids.size() == longest) found_boundary = true;
    }
    CHECK(found_boundary);
}

TEST_CASE_METHOD(Fixture, "split assignment is deterministic") {
    auto a = ingest({corpus_indent, corpus_brace}, bpe, 128);
    auto b = ingest({corpus_indent, corpus_brace}, bpe, 128);
    CHECK(split_manifest(a) == split_manifest(b));
    for (const auto& lc : a.languages) {
        CHECK(!lc.train.empty());
        std::size_t n = lc.train.size() + lc.valid.size() + lc.test.size();
        CHECK(lc.train.size() > n / 2);
    }
}

TEST_CASE_METHOD(Fixture, "format errors carry the line number") {
    std::string bad = dir + "/bad.jsonl";
    write_file(bad, corpus_line({LanguageId::indent(), "x", "def f(a):\n    return a\n"}) +
                        "\n\nnot json at all\n");
    try {
        read_corpus_file(bad);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(e.line == 3);
    }
}

TEST_CASE_METHOD(Fixture, "comment toggle strips comment tokens at ingest") {
    std::string path = dir + "/commented.jsonl";
    write_corpus_file(path, {{LanguageId::indent(), "c1", "def f(a):  # note\n    return a + 1\n"}});
    auto with = ingest({path}, bpe, 256, true);
    auto without = ingest({path}, bpe, 256, false);
    CHECK(with.of(LanguageId::indent()).train.size() +
              with.of(LanguageId::indent()).valid.size() +
              with.of(LanguageId::indent()).test.size() ==
          1);
    auto total_ids = [](const IndexedCorpus& c) {
        std::size_t n = 0;
        for (const auto& lc : c.languages) {
            for (const auto& split : {&lc.train, &lc.valid, &lc.test}) {
                for (const auto& fn : *split) n += fn.ids.size();
            }
        }
        return n;
    };
    CHECK(total_ids(with) > total_ids(without));
}

TEST_CASE_METHOD(Fixture, "mlm profile bounds sequences per batch") {
    auto corpus = ingest({corpus_indent, corpus_brace}, bpe, 128);
    BatchStream stream(corpus, StreamMode::MLM, mlm_profile(16, 128), 7);
    for (int i = 0; i < 20; ++i) {
        Batch b = stream.next();
        CHECK(b.rows() <= 16);
        CHECK(b.rows() >= 1);
        CHECK(b.max_seq_len() <= 128);
    }
}

TEST_CASE_METHOD(Fixture, "languages alternate round-robin") {
    auto corpus = ingest({corpus_indent, corpus_brace}, bpe, 128);
    BatchStream stream(corpus, StreamMode::DAE, budget_profile(512), 7);
    std::vector<std::string> langs;
    for (int i = 0; i < 8; ++i) langs.push_back(stream.next().lang.name);
    for (int i = 2; i < 8; ++i) CHECK(langs[static_cast<std::size_t>(i)] == langs[static_cast<std::size_t>(i - 2)]);
    CHECK(langs[0] != langs[1]);
}

TEST_CASE_METHOD(Fixture, "bt stream cycles ordered pairs with target-language data") {
    auto corpus = ingest({corpus_indent, corpus_brace}, bpe, 128);
    BatchStream stream(corpus, StreamMode::BT, budget_profile(512), 7);
    Batch b1 = stream.next();
    Batch b2 = stream.next();
    CHECK(b1.src_lang != b1.lang);
    CHECK(b2.src_lang != b2.lang);
    CHECK(b1.lang != b2.lang);
}

TEST_CASE_METHOD(Fixture, "token budget packing is respected") {
    auto corpus = ingest({corpus_indent, corpus_brace}, bpe, 128);
    BatchStream stream(corpus, StreamMode::DAE, budget_profile(300), 9);
    for (int i = 0; i < 30; ++i) {
        Batch b = stream.next();
        if (b.rows() > 1) CHECK(b.token_budget <= 300);
    }
}

TEST_CASE_METHOD(Fixture, "equal seeds yield identical streams, distinct seeds differ") {
    auto corpus = ingest({corpus_indent, corpus_brace}, bpe, 128);
    BatchStream s1(corpus, StreamMode::DAE, budget_profile(512), 21);
    BatchStream s2(corpus, StreamMode::DAE, budget_profile(512), 21);
    BatchStream s3(corpus, StreamMode::DAE, budget_profile(512), 22);
    bool any_diff = false;
    for (int i = 0; i < 40; ++i) {
        Batch a = s1.next();
        Batch b = s2.next();
        Batch c = s3.next();
        REQUIRE(a.lang == b.lang);
        REQUIRE(a.seqs == b.seqs);
        if (a.seqs != c.seqs) any_diff = true;
    }
    CHECK(any_diff);
}

TEST_CASE_METHOD(Fixture, "every train function appears once per epoch") {
    auto corpus = ingest({corpus_indent}, bpe, 128);
    const auto& lc = corpus.of(LanguageId::indent());
    BatchStream stream(corpus, StreamMode::DAE, budget_profile(600), 3);
    std::multiset<std::size_t> seen;
    std::size_t epoch_tokens = 0;
    for (const auto& fn : lc.train) epoch_tokens += fn.ids.size();
    std::size_t collected = 0;
    while (collected < epoch_tokens) {
        Batch b = stream.next();
        for (const auto& s : b.seqs) {
            seen.insert(fnv1a64(std::string(reinterpret_cast<const char*>(s.data()),
                                            s.size() * sizeof(int))));
            collected += s.size();
        }
    }
    CHECK(seen.size() == lc.train.size());
}
