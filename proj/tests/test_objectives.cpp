#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <set>

#include "codemt/objectives.hpp"
#include "codemt/progen.hpp"

using namespace codemt;

namespace {

const std::vector<LanguageId> kLangs = {LanguageId::indent(), LanguageId::brace()};

struct TinyWorld {
    BpeModel bpe;
    IndexedCorpus corpus;
    ModelConfig cfg;

    explicit TinyWorld(int per_lang = 24, std::uint64_t seed = 2025) {
        Rng rng(seed);
        std::map<std::string, std::int64_t> counts;
        std::vector<std::pair<LanguageId, std::vector<Token>>> fns;
        for (int i = 0; i < per_lang; ++i) {
            auto g1 = generate_program(rng, 4);
            auto g2 = generate_program(rng, 4);
            fns.push_back({LanguageId::indent(), tokenize(LanguageId::indent(), g1.indent_src)});
            fns.push_back({LanguageId::brace(), tokenize(LanguageId::brace(), g2.brace_src)});
        }
        for (const auto& [lang, toks] : fns) {
            for (const auto& t : toks) counts[t.text] += 1;
        }
        bpe = BpeModel::learn(counts, 300, kLangs);

        corpus.languages.push_back(LanguageCorpus{LanguageId::indent(), {}, {}, {}});
        corpus.languages.push_back(LanguageCorpus{LanguageId::brace(), {}, {}, {}});
        int n = 0;
        for (const auto& [lang, toks] : fns) {
            IndexedFunction fn;
            fn.id = lang.name + "_" + std::to_string(n++);
            fn.ids.push_back(bpe.bos_id());
            auto sub = bpe.apply(toks);
            fn.ids.insert(fn.ids.end(), sub.begin(), sub.end());
            fn.ids.push_back(bpe.eos_id());
            if (fn.ids.size() > 128) continue;
            auto& lc = corpus.languages[lang.is_indent() ? 0 : 1];
            if (lc.valid.size() < 3) {
                lc.valid.push_back(std::move(fn));
            } else {
                lc.train.push_back(std::move(fn));
            }
        }

        cfg.n_layers = 1;
        cfg.n_heads = 2;
        cfg.d_model = 64;
        cfg.d_ff = 128;
        cfg.vocab_size = bpe.vocab_size();
        cfg.max_len = 128;
        cfg.dropout = 0.0f;
    }

    Batch lang_batch(const LanguageId& lang, std::size_t max_seqs = 10) const {
        Batch b;
        b.lang = lang;
        for (const auto& fn : corpus.of(lang).train) {
            if (b.seqs.size() >= max_seqs) break;
            b.seqs.push_back(fn.ids);
            b.token_budget += static_cast<std::int64_t>(fn.ids.size());
        }
        return b;
    }
};

std::vector<int> sample_sequence(const BpeModel& bpe, Rng& rng, int interior) {
    std::vector<int> ids = {bpe.bos_id()};
    for (int i = 0; i < interior; ++i) {
        ids.push_back(bpe.num_reserved() +
                      static_cast<int>(rng.uniform_int(0, bpe.vocab_size() - bpe.num_reserved() - 1)));
    }
    ids.push_back(bpe.eos_id());
    return ids;
}

}  // namespace

TEST_CASE("mlm corruption with zero probability is the identity") {
    TinyWorld world;
    Rng rng(5);
    auto ids = sample_sequence(world.bpe, rng, 40);
    MlmConfig cfg;
    cfg.select_prob = 0.0;
    auto c = mlm_corrupt(ids, cfg, rng, world.bpe);
    CHECK(c.corrupted == ids);
    CHECK(c.original == ids);
    CHECK(std::count(c.predict.begin(), c.predict.end(), true) == 0);
}

TEST_CASE("mlm selection count follows the binomial bound") {
    TinyWorld world;
    Rng rng(7);
    MlmConfig cfg;  // select_prob 0.15
    std::int64_t selected = 0;
    std::int64_t eligible = 0;
    while (eligible < 10000) {
        auto ids = sample_sequence(world.bpe, rng, 100);
        eligible += 100;
        auto c = mlm_corrupt(ids, cfg, rng, world.bpe);
        selected += std::count(c.predict.begin(), c.predict.end(), true);
    }
    double expectation = 0.15 * static_cast<double>(eligible);
    double sigma = std::sqrt(static_cast<double>(eligible) * 0.15 * 0.85);
    CHECK(std::fabs(static_cast<double>(selected) - expectation) <= 3 * sigma);
}

TEST_CASE("mlm replacement follows the 80/10/10 split and skips reserved ids") {
    TinyWorld world;
    Rng rng(11);
    MlmConfig cfg;
    cfg.select_prob = 1.0;
    std::int64_t masked = 0, changed = 0, kept = 0, total = 0;
    for (int iter = 0; iter < 200; ++iter) {
        auto ids = sample_sequence(world.bpe, rng, 50);
        auto c = mlm_corrupt(ids, cfg, rng, world.bpe);
        CHECK_FALSE(c.predict.front());
        CHECK_FALSE(c.predict.back());
        CHECK(c.corrupted.front() == world.bpe.bos_id());
        CHECK(c.corrupted.back() == world.bpe.eos_id());
        for (std::size_t i = 1; i + 1 < ids.size(); ++i) {
            REQUIRE(c.predict[i]);
            ++total;
            if (c.corrupted[i] == world.bpe.mask_id()) ++masked;
            else if (c.corrupted[i] == ids[i]) ++kept;
            else ++changed;
        }
    }
    double n = static_cast<double>(total);
    CHECK(std::fabs(masked / n - 0.8) < 0.03);
    CHECK(std::fabs(changed / n - 0.1) < 0.03);  // random draw may also hit the original id
    CHECK(std::fabs(kept / n - 0.1) < 0.03);
}

TEST_CASE("dae corruption with a zero config is the identity") {
    TinyWorld world;
    Rng rng(13);
    auto ids = sample_sequence(world.bpe, rng, 30);
    NoiseConfig zero;
    zero.mask_prob = 0;
    zero.drop_prob = 0;
    zero.shuffle_k = 0;
    CHECK(dae_corrupt(ids, zero, rng, world.bpe.mask_id()) == ids);
}

TEST_CASE("dae shuffle displaces every token by at most k") {
    TinyWorld world;
    Rng rng(17);
    NoiseConfig cfg;
    cfg.mask_prob = 0;
    cfg.drop_prob = 0;
    cfg.shuffle_k = 3;
    for (int trial = 0; trial < 1000; ++trial) {
        auto ids = sample_sequence(world.bpe, rng, 24);
        auto noisy = dae_corrupt(ids, cfg, rng, world.bpe.mask_id());
        REQUIRE(noisy.size() == ids.size());
        CHECK(noisy.front() == world.bpe.bos_id());
        CHECK(noisy.back() == world.bpe.eos_id());
        // permutation of the same multiset
        auto a = ids, b = noisy;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        REQUIRE(a == b);
        // displacement bound over interior positions; ids may repeat, so
        // match greedily position by position
        std::vector<bool> used(ids.size(), false);
        for (std::size_t i = 1; i + 1 < noisy.size(); ++i) {
            bool found = false;
            for (std::size_t j = i >= 3 ? i - 3 : 1; j <= i + 3 && j + 1 < ids.size(); ++j) {
                if (!used[j] && ids[j] == noisy[i]) {
                    used[j] = true;
                    found = true;
                    break;
                }
            }
            REQUIRE(found);
        }
    }
}

TEST_CASE("dropping everything leaves just BOS and EOS") {
    TinyWorld world;
    Rng rng(19);
    auto ids = sample_sequence(world.bpe, rng, 15);
    NoiseConfig cfg;
    cfg.mask_prob = 0;
    cfg.drop_prob = 1.0;
    cfg.shuffle_k = 0;
    auto noisy = dae_corrupt(ids, cfg, rng, world.bpe.mask_id());
    REQUIRE(noisy.size() == 2);
    CHECK(noisy[0] == world.bpe.bos_id());
    CHECK(noisy[1] == world.bpe.eos_id());
}

TEST_CASE("masking changes ids but never the length") {
    TinyWorld world;
    Rng rng(23);
    NoiseConfig cfg;
    cfg.mask_prob = 0.5;
    cfg.drop_prob = 0;
    cfg.shuffle_k = 0;
    auto ids = sample_sequence(world.bpe, rng, 40);
    auto noisy = dae_corrupt(ids, cfg, rng, world.bpe.mask_id());
    REQUIRE(noisy.size() == ids.size());
    int masked = 0;
    for (std::size_t i = 0; i < noisy.size(); ++i) {
        if (noisy[i] == world.bpe.mask_id()) ++masked;
    }
    CHECK(masked > 5);
}

TEST_CASE("a zero-noise model overfits a ten-function corpus") {
    TinyWorld world(14, 31);
    auto st = make_model<float>(world.cfg, "seq2seq", 99);
    NoiseConfig zero;
    zero.mask_prob = 0;
    zero.drop_prob = 0;
    zero.shuffle_k = 0;
    ObjectiveRunner<float> runner(st, world.bpe, MlmConfig{}, zero);
    Batch batch = world.lang_batch(LanguageId::indent(), 10);
    REQUIRE(batch.seqs.size() == 10);
    double loss = 1e9;
    for (int step = 0; step < 500 && loss >= 0.1; ++step) {
        double lr = lr_schedule(st.step + 1, 50, 2e-3);
        loss = runner.dae_step(batch, lr);
    }
    CHECK(loss < 0.1);
}

TEST_CASE("first dae step from random init is finite and advances state") {
    TinyWorld world;
    auto st = make_model<float>(world.cfg, "seq2seq", 1234);
    ObjectiveRunner<float> runner(st, world.bpe, MlmConfig{}, NoiseConfig{});
    auto before = st.param("embed.tokens");
    std::uint64_t rng_before = st.rng_state;
    double loss = runner.dae_step(world.lang_batch(LanguageId::brace()), 1e-4);
    CHECK(std::isfinite(loss));
    CHECK(loss > 0);
    CHECK(st.step == 1);
    CHECK(st.rng_state != rng_before);
    CHECK(st.param("embed.tokens") != before);
}

TEST_CASE("mlm step trains only on selected positions") {
    TinyWorld world;
    auto st = make_model<float>(world.cfg, "mlm", 555);
    ObjectiveRunner<float> runner(st, world.bpe, MlmConfig{}, NoiseConfig{});
    double loss = runner.mlm_step(world.lang_batch(LanguageId::indent()), 1e-4);
    CHECK(std::isfinite(loss));
    CHECK(loss > 0);
    CHECK(st.step == 1);

    // nothing eligible -> counted, loss-free step
    MlmConfig none;
    none.select_prob = 0.0;
    ObjectiveRunner<float> skip_runner(st, world.bpe, none, NoiseConfig{});
    CHECK(skip_runner.mlm_step(world.lang_batch(LanguageId::indent()), 1e-4) == 0.0);
    CHECK(st.step == 2);
}

TEST_CASE("bt step reconstructs the original batch from generated sources") {
    TinyWorld world;
    auto st = make_model<float>(world.cfg, "seq2seq", 777);
    ObjectiveRunner<float> runner(st, world.bpe, MlmConfig{}, NoiseConfig{});
    Batch batch = world.lang_batch(LanguageId::brace(), 6);
    batch.src_lang = LanguageId::indent();

    auto hyps = runner.generate_translations(batch.seqs, batch.src_lang);
    REQUIRE(hyps.size() == batch.seqs.size());
    for (const auto& h : hyps) {
        CHECK(h.finished);
        CHECK(static_cast<int>(h.ids.size()) <= world.cfg.max_len - 2);
        for (int id : h.ids) CHECK(id != world.bpe.pad_id());
    }

    auto before = st.param("dec.l0.cross.wq");
    double loss = runner.bt_step(batch, 1e-4);
    CHECK(std::isfinite(loss));
    CHECK(st.step == 1);
    CHECK(st.param("dec.l0.cross.wq") != before);
}

TEST_CASE("empty generations are skipped and counted") {
    TinyWorld world;
    auto st = make_model<float>(world.cfg, "seq2seq", 888);
    // rig the output bias so greedy decoding emits EOS immediately
    st.param("out.bias").setZero();
    st.param("out.bias")(0, world.bpe.eos_id()) = 1e4f;
    ObjectiveRunner<float> runner(st, world.bpe, MlmConfig{}, NoiseConfig{});
    Batch batch = world.lang_batch(LanguageId::brace(), 4);
    batch.src_lang = LanguageId::indent();
    double loss = runner.bt_step(batch, 1e-4);
    CHECK(loss == 0.0);
    CHECK(runner.bt_pairs_skipped() == 4);
    CHECK(st.step == 1);  // counted step, no update
}

TEST_CASE("training phases follow the documented schedule") {
    namespace fs = std::filesystem;
    TinyWorld world;
    auto dir = (fs::temp_directory_path() / "codemt_train_sched").string();
    fs::remove_all(dir);

    auto mlm_state = make_model<float>(world.cfg, "mlm", 42);
    TrainOptions opts;
    opts.steps = 4;
    opts.warmup = 10;
    opts.peak_lr = 1e-4;
    opts.mlm_sequences = 4;
    opts.mlm_positions = 128;
    opts.log_every = 1;
    opts.checkpoint_every = 100;
    opts.valid_every = 0;
    opts.out_dir = dir + "/pre";
    opts.seed = 9;
    run_mlm_pretrain(mlm_state, world.corpus, world.bpe, opts);

    auto full = make_model<float>(world.cfg, "seq2seq", 42);
    init_decoder_from_encoder(full);
    TrainOptions main_opts = opts;
    main_opts.steps = 6;
    main_opts.out_dir = dir + "/main";
    main_opts.valid_every = 3;
    main_opts.token_budget = 512;
    auto result = run_main_training(full, world.corpus, world.bpe, main_opts);
    CHECK(fs::exists(result.last_checkpoint));
    CHECK(fs::exists(result.best_checkpoint));

    std::vector<std::string> objectives;
    for (const auto& line : read_lines(main_opts.out_dir + "/train_log.jsonl")) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        if (j.contains("objective")) objectives.push_back(j["objective"].get<std::string>());
    }
    REQUIRE(objectives.size() == 6);
    for (std::size_t i = 0; i < objectives.size(); ++i) {
        CHECK(objectives[i] == (i % 2 == 0 ? "dae" : "bt"));
    }

    std::vector<std::string> pre_objectives;
    for (const auto& line : read_lines(dir + "/pre/train_log.jsonl")) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        if (j.contains("objective")) pre_objectives.push_back(j["objective"].get<std::string>());
    }
    REQUIRE(pre_objectives.size() == 4);
    for (const auto& o : pre_objectives) CHECK(o == "mlm");
    fs::remove_all(dir);
}

TEST_CASE("resuming mid-phase reproduces the uninterrupted run bit-exactly") {
    namespace fs = std::filesystem;
    TinyWorld world;
    auto dir = (fs::temp_directory_path() / "codemt_resume").string();
    fs::remove_all(dir);

    TrainOptions opts;
    opts.warmup = 10;
    opts.peak_lr = 3e-4;
    opts.log_every = 100;
    opts.valid_every = 0;
    opts.token_budget = 512;
    opts.seed = 77;

    // one-shot: 8 steps
    auto full1 = make_model<float>(world.cfg, "seq2seq", 7);
    opts.steps = 8;
    opts.checkpoint_every = 8;
    opts.out_dir = dir + "/oneshot";
    run_main_training(full1, world.corpus, world.bpe, opts);

    // interrupted: 4 steps, then resume from the checkpoint to 8
    auto full2 = make_model<float>(world.cfg, "seq2seq", 7);
    opts.steps = 4;
    opts.checkpoint_every = 4;
    opts.out_dir = dir + "/part1";
    run_main_training(full2, world.corpus, world.bpe, opts);

    auto resumed = load_checkpoint<float>(dir + "/part1/step_4.ckpt");
    opts.steps = 8;
    opts.checkpoint_every = 8;
    opts.out_dir = dir + "/part2";
    run_main_training(resumed, world.corpus, world.bpe, opts);

    CHECK(read_file(dir + "/oneshot/step_8.ckpt") == read_file(dir + "/part2/step_8.ckpt"));
    fs::remove_all(dir);
}

TEST_CASE("diverging training aborts with NonFiniteLoss and keeps the last checkpoint") {
    namespace fs = std::filesystem;
    TinyWorld world;
    auto dir = (fs::temp_directory_path() / "codemt_diverge").string();
    fs::remove_all(dir);
    auto st = make_model<float>(world.cfg, "seq2seq", 3);
    TrainOptions opts;
    opts.steps = 50;
    opts.warmup = 1;
    opts.peak_lr = 1e18;  // guaranteed blow-up
    opts.log_every = 1000;
    opts.checkpoint_every = 1;
    opts.valid_every = 0;
    opts.token_budget = 512;
    opts.out_dir = dir;
    opts.seed = 5;
    CHECK_THROWS_AS(run_main_training(st, world.corpus, world.bpe, opts), NonFiniteLoss);
    bool any_ckpt = false;
    for (const auto& e : fs::directory_iterator(dir)) {
        any_ckpt |= e.path().extension() == ".ckpt";
    }
    CHECK(any_ckpt);
    fs::remove_all(dir);
}
