#include "dsr/retrieve.hpp"

#include "dsr/canonicalize.hpp"
#include "dsr/errors.hpp"
#include "support/helpers.hpp"

#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

using namespace dsr;

TEST_CASE("span window follows the length-slack rule") {
    SUBCASE("interior statement") {
        LengthWindow w = span_window(5, 3, 20);
        CHECK(w.lo == 2);
        CHECK(w.hi == 8);
        CHECK(!w.empty());
    }
    SUBCASE("short statement clamps at one") {
        LengthWindow w = span_window(2, 3, 20);
        CHECK(w.lo == 1);
        CHECK(w.hi == 5);
    }
    SUBCASE("query caps the upper bound") {
        LengthWindow w = span_window(5, 3, 6);
        CHECK(w.lo == 2);
        CHECK(w.hi == 6);
    }
    SUBCASE("statement much longer than the query leaves no window") {
        LengthWindow w = span_window(10, 3, 5);
        CHECK(w.lo == 7);
        CHECK(w.hi == 5);
        CHECK(w.empty());
    }
    SUBCASE("zero slack pins the exact length") {
        LengthWindow w = span_window(4, 0, 9);
        CHECK(w.lo == 4);
        CHECK(w.hi == 4);
    }
}

TEST_CASE("enumerate_spans walks (start, length) lexicographically") {
    std::vector<std::string> tokens = {"a", "b", "c"};
    auto spans = enumerate_spans(tokens, 1, 2);
    REQUIRE(spans.size() == 5);
    CHECK(spans[0].i == 0); CHECK(spans[0].j == 0); CHECK(spans[0].text == "a");
    CHECK(spans[1].i == 0); CHECK(spans[1].j == 1); CHECK(spans[1].text == "a b");
    CHECK(spans[2].i == 1); CHECK(spans[2].j == 1); CHECK(spans[2].text == "b");
    CHECK(spans[3].i == 1); CHECK(spans[3].j == 2); CHECK(spans[3].text == "b c");
    CHECK(spans[4].i == 2); CHECK(spans[4].j == 2); CHECK(spans[4].text == "c");
    CHECK(count_spans(3, 1, 2) == 5);
}

TEST_CASE("span enumeration clamps bounds and respects empty windows") {
    std::vector<std::string> tokens = {"x", "y", "z"};
    CHECK(enumerate_spans(tokens, 0, 7).size() == 6); // clamped to [1, 3]
    CHECK(count_spans(3, 1, 3) == 6);
    CHECK(enumerate_spans(tokens, 4, 2).empty());
    CHECK(count_spans(3, 4, 2) == 0);
    CHECK(enumerate_spans({}, 1, 2).empty());
    CHECK(count_spans(0, 1, 2) == 0);
}

TEST_CASE("a fifteen-token query with window [1,10] yields 105 spans") {
    std::mt19937_64 gen(0x5eed0020);
    auto words = testsupport::random_words(gen, 15, "q");
    auto spans = enumerate_spans(words, 1, 10);
    CHECK(spans.size() == 105);
    CHECK(count_spans(15, 1, 10) == 105);
    // Spans are distinct (i, j) pairs.
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& s : spans) seen.emplace(s.i, s.j);
    CHECK(seen.size() == spans.size());
}

namespace {

Repository indexed_repo(const std::string& db_id, const std::vector<std::string>& texts,
                        EmbeddingProvider& provider, EmbeddingCache& cache) {
    Repository repo = testsupport::make_repo(db_id, texts);
    index_repository(repo, provider, &cache);
    return repo;
}

} // namespace

TEST_CASE("retrieval without an index is a contract violation") {
    DeterministicEmbeddingProvider provider(16);
    Repository repo = testsupport::make_repo("db", {"alpha beta"});
    RetrievalConfig cfg;
    CHECK_THROWS_WITH_AS(retrieve_sbr("alpha", repo, cfg, provider),
                         doctest::Contains("index_repository"), ContractError);
    // BM25 is index-free.
    CHECK_NOTHROW(retrieve_bm25("alpha", repo, cfg));
}

TEST_CASE("whole-repository retrieval agrees with per-statement scoring") {
    DeterministicEmbeddingProvider provider(16);
    EmbeddingCache cache;
    std::mt19937_64 gen(0x5eed0021);

    for (int iter = 0; iter < 10; ++iter) {
        std::vector<std::string> texts;
        std::size_t count = 1 + gen() % 8;
        for (std::size_t i = 0; i < count; ++i)
            texts.push_back(testsupport::join(testsupport::random_words(gen, 1 + gen() % 6)));
        Repository repo = indexed_repo("db", texts, provider, cache);

        std::string query = testsupport::join(testsupport::random_words(gen, 1 + gen() % 10));
        RetrievalConfig cfg;
        cfg.k = repo.size();
        cfg.n = gen() % 4;

        auto results = retrieve_sbr(query, repo, cfg, provider, &cache);
        CanonicalText canon = canonicalize(query);

        std::size_t admitted = 0;
        for (const auto& ds : repo.statements()) {
            ScoredDS single = score_sbr(canon, ds, cfg.n, provider, &cache);
            if (single.score == kNoWindowScore) continue;
            ++admitted;
            auto it = std::find_if(results.begin(), results.end(),
                                   [&](const ScoredDS& r) { return r.ds_id == ds.id; });
            REQUIRE(it != results.end());
            CHECK(it->score == single.score);
            REQUIRE(it->best_span.has_value());
            REQUIRE(single.best_span.has_value());
            CHECK(it->best_span->i == single.best_span->i);
            CHECK(it->best_span->j == single.best_span->j);
            CHECK(it->best_span->text == single.best_span->text);
        }
        CHECK(results.size() == admitted);
    }
}

TEST_CASE("results are sorted by score with insertion order breaking ties") {
    DeterministicEmbeddingProvider provider(16);
    EmbeddingCache cache;
    // Two statements with identical text parts score identically.
    Repository repo = indexed_repo("db", {"broken glass", "other words", "broken glass"},
                                   provider, cache);
    RetrievalConfig cfg;
    cfg.k = 3;
    auto results = retrieve_sbr("broken glass everywhere", repo, cfg, provider, &cache);
    REQUIRE(results.size() == 3);
    for (std::size_t i = 1; i < results.size(); ++i)
        CHECK(results[i - 1].score >= results[i].score);
    // The duplicates tie exactly; the earlier insertion must precede.
    std::size_t first = 0, third = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (results[i].source_id == "src0") first = i;
        if (results[i].source_id == "src2") third = i;
    }
    CHECK(results[first].score == results[third].score);
    CHECK(first < third);
}

TEST_CASE("best span prefers the smallest start and then the smallest length") {
    DeterministicEmbeddingProvider provider(16);
    EmbeddingCache cache;
    // Query repeats one token, so several spans share one embedding.
    Repository repo = indexed_repo("db", {"apple"}, provider, cache);
    RetrievalConfig cfg;
    cfg.n = 0; // window [1, 1]: candidate spans are "apple"@0 and "apple"@1
    auto results = retrieve_sbr("apple apple", repo, cfg, provider, &cache);
    REQUIRE(results.size() == 1);
    REQUIRE(results[0].best_span.has_value());
    CHECK(results[0].best_span->i == 0);
    CHECK(results[0].best_span->j == 0);
    CHECK(results[0].score == 1.0); // exact text match on a unit sign vector
}

TEST_CASE("an exactly matching span scores one even inside a longer query") {
    DeterministicEmbeddingProvider provider(64);
    EmbeddingCache cache;
    Repository repo =
        indexed_repo("db", {"normal level of complement 100"}, provider, cache);
    RetrievalConfig cfg;
    auto results = retrieve_sbr(
        "patients with a normal level of complement 3 in the blood", repo, cfg, provider,
        &cache);
    REQUIRE(results.size() == 1);
    CHECK(results[0].score == 1.0);
    REQUIRE(results[0].best_span.has_value());
    CHECK(results[0].best_span->text == "normal level of complement 100");
}

TEST_CASE("statements with no admissible window are omitted") {
    DeterministicEmbeddingProvider provider(16);
    EmbeddingCache cache;
    Repository repo = indexed_repo(
        "db", {"tiny", "one two three four five six seven eight"}, provider, cache);
    RetrievalConfig cfg;
    cfg.n = 3;
    cfg.k = 10;
    // Query of 2 tokens: the 8-word statement's window is [5, 2], empty.
    auto results = retrieve_sbr("small query", repo, cfg, provider, &cache);
    REQUIRE(results.size() == 1);
    CHECK(results[0].source_id == "src0");

    CanonicalText canon = canonicalize("small query");
    ScoredDS missing = score_sbr(canon, repo.at(std::size_t{1}), cfg.n, provider, &cache);
    CHECK(missing.score == kNoWindowScore);
    CHECK(!missing.best_span.has_value());
}

TEST_CASE("every reported span lies inside its statement's window") {
    DeterministicEmbeddingProvider provider(16);
    EmbeddingCache cache;
    std::mt19937_64 gen(0x5eed0022);
    std::vector<std::string> texts;
    for (int i = 0; i < 12; ++i)
        texts.push_back(testsupport::join(testsupport::random_words(gen, 1 + gen() % 7)));
    Repository repo = indexed_repo("db", texts, provider, cache);

    RetrievalConfig cfg;
    cfg.k = repo.size();
    cfg.n = 2;
    std::string query = testsupport::join(testsupport::random_words(gen, 9));
    auto results = retrieve_sbr(query, repo, cfg, provider, &cache);
    CanonicalText canon = canonicalize(query);
    for (const auto& r : results) {
        REQUIRE(r.best_span.has_value());
        const StructuredDS& ds = repo.at(r.ds_id);
        LengthWindow w = span_window(ds.word_length, cfg.n, canon.tokens.size());
        CHECK(r.best_span->length() >= w.lo);
        CHECK(r.best_span->length() <= w.hi);
    }
}

TEST_CASE("degenerate retrieval inputs give empty results") {
    DeterministicEmbeddingProvider provider(16);
    EmbeddingCache cache;
    Repository repo = indexed_repo("db", {"alpha beta"}, provider, cache);
    RetrievalConfig cfg;

    CHECK(retrieve_sbr("?!", repo, cfg, provider, &cache).empty());
    cfg.k = 0;
    CHECK(retrieve_sbr("alpha", repo, cfg, provider, &cache).empty());

    Repository empty("db2");
    index_repository(empty, provider, &cache);
    cfg.k = 5;
    CHECK(retrieve_sbr("alpha", empty, cfg, provider, &cache).empty());
}

TEST_CASE("k truncates after ranking") {
    DeterministicEmbeddingProvider provider(16);
    EmbeddingCache cache;
    std::mt19937_64 gen(0x5eed0023);
    std::vector<std::string> texts;
    for (int i = 0; i < 6; ++i)
        texts.push_back(testsupport::join(testsupport::random_words(gen, 2)));
    Repository repo = indexed_repo("db", texts, provider, cache);

    RetrievalConfig cfg;
    cfg.k = repo.size();
    std::string query = testsupport::join(testsupport::random_words(gen, 5));
    auto all = retrieve_sbr(query, repo, cfg, provider, &cache);
    cfg.k = 2;
    auto top = retrieve_sbr(query, repo, cfg, provider, &cache);
    REQUIRE(all.size() == 6);
    REQUIRE(top.size() == 2);
    CHECK(top[0].ds_id == all[0].ds_id);
    CHECK(top[1].ds_id == all[1].ds_id);
}

TEST_CASE("bm25 retrieval ranks by the okapi scores") {
    Repository repo = testsupport::make_repo(
        "db", {"red apple", "green apple pie", "red red wine"});
    RetrievalConfig cfg;
    cfg.method = RetrievalMethod::Bm25;
    cfg.k = 3;
    auto results = retrieve_bm25("red apple wine", repo, cfg);
    REQUIRE(results.size() == 3);
    // Reference ordering from the hand-computed okapi scores.
    CHECK(results[0].source_id == "src2");
    CHECK(results[1].source_id == "src0");
    CHECK(results[2].source_id == "src1");
    CHECK(std::fabs(results[0].score - 0.5187000467445304) < 1e-9);
    CHECK(std::fabs(results[1].score - 0.057557816762365155) < 1e-9);
    CHECK(std::fabs(results[2].score - 0.024181094616141572) < 1e-9);
    for (const auto& r : results) CHECK(!r.best_span.has_value());
}

TEST_CASE("bm25 keeps zero-scoring statements in insertion order") {
    Repository repo = testsupport::make_repo("db", {"alpha", "beta", "gamma"});
    RetrievalConfig cfg;
    cfg.method = RetrievalMethod::Bm25;
    cfg.k = 3;
    auto results = retrieve_bm25("unrelated words", repo, cfg);
    REQUIRE(results.size() == 3);
    CHECK(results[0].source_id == "src0");
    CHECK(results[1].source_id == "src1");
    CHECK(results[2].source_id == "src2");
    for (const auto& r : results) CHECK(r.score == 0.0);
}

TEST_CASE("whole-text dense retrieval scores the full query against each text") {
    DeterministicEmbeddingProvider provider(16);
    EmbeddingCache cache;
    std::vector<std::string> texts = {"red apple", "green pie", "red wine"};
    Repository repo = indexed_repo("db", texts, provider, cache);

    RetrievalConfig cfg;
    cfg.method = RetrievalMethod::DenseWhole;
    cfg.k = 3;
    std::string query = "Red  Apple";
    auto results = retrieve_dense_whole(query, repo, cfg, provider, &cache);
    REQUIRE(results.size() == 3);

    // Identical canonical text means cosine exactly one, putting it first.
    CHECK(results[0].source_id == "src0");
    CHECK(results[0].score == 1.0);

    auto qv = provider.embed({"red apple"})[0];
    for (const auto& r : results) {
        const StructuredDS& ds = repo.at(r.ds_id);
        auto dv = provider.embed({ds.canonical.text})[0];
        CHECK(r.score == dot(qv, dv));
        CHECK(!r.best_span.has_value());
    }
    for (std::size_t i = 1; i < results.size(); ++i)
        CHECK(results[i - 1].score >= results[i].score);
}

TEST_CASE("word-coverage retrieval yields non-increasing marginal gains") {
    DeterministicEmbeddingProvider provider(16);
    EmbeddingCache cache;
    std::mt19937_64 gen(0x5eed0024);
    std::vector<std::string> texts;
    for (int i = 0; i < 8; ++i)
        texts.push_back(testsupport::join(testsupport::random_words(gen, 1 + gen() % 5)));
    Repository repo = indexed_repo("db", texts, provider, cache);

    RetrievalConfig cfg;
    cfg.method = RetrievalMethod::Sbsr;
    cfg.k = 8;
    std::string query = testsupport::join(testsupport::random_words(gen, 6));
    auto results = retrieve_sbsr(query, repo, cfg, provider, &cache);
    REQUIRE(results.size() == 8);
    for (std::size_t i = 1; i < results.size(); ++i)
        CHECK(results[i - 1].score >= results[i].score);

    // The first pick maximizes total word coverage on its own.
    CanonicalText canon = canonicalize(query);
    auto qvs = provider.embed(canon.tokens);
    double best_cover = -1.0;
    std::string best_id;
    for (const auto& ds : repo.statements()) {
        auto wvs = provider.embed(ds.canonical.tokens);
        double cover = 0.0;
        for (const auto& qv : qvs) {
            double best = 0.0;
            for (const auto& wv : wvs) best = std::max(best, dot(qv, wv));
            cover += best;
        }
        if (cover > best_cover) {
            best_cover = cover;
            best_id = ds.id;
        }
    }
    CHECK(results[0].ds_id == best_id);
    CHECK(results[0].score == doctest::Approx(best_cover).epsilon(1e-12));
}

TEST_CASE("word-coverage retrieval falls back to insertion order once covered") {
    DeterministicEmbeddingProvider provider(16);
    EmbeddingCache cache;
    // Identical statements: after the first, every marginal gain is zero.
    Repository repo =
        indexed_repo("db", {"same words", "same words", "same words"}, provider, cache);
    RetrievalConfig cfg;
    cfg.method = RetrievalMethod::Sbsr;
    cfg.k = 3;
    auto results = retrieve_sbsr("same words again", repo, cfg, provider, &cache);
    REQUIRE(results.size() == 3);
    CHECK(results[0].source_id == "src0");
    CHECK(results[1].source_id == "src1");
    CHECK(results[2].source_id == "src2");
    CHECK(results[1].score == 0.0);
    CHECK(results[2].score == 0.0);
    CHECK(results[0].score > 0.0);
}

TEST_CASE("word-coverage retrieval selects at most min(k, size)") {
    DeterministicEmbeddingProvider provider(16);
    EmbeddingCache cache;
    Repository repo = indexed_repo("db", {"one", "two", "three"}, provider, cache);
    RetrievalConfig cfg;
    cfg.method = RetrievalMethod::Sbsr;
    cfg.k = 2;
    CHECK(retrieve_sbsr("one two three", repo, cfg, provider, &cache).size() == 2);
    cfg.k = 9;
    CHECK(retrieve_sbsr("one two three", repo, cfg, provider, &cache).size() == 3);
}

TEST_CASE("the dispatcher routes to the configured method") {
    DeterministicEmbeddingProvider provider(16);
    EmbeddingCache cache;
    Repository repo = indexed_repo("db", {"red apple", "red wine"}, provider, cache);
    std::string query = "red apple wine";

    RetrievalConfig cfg;
    cfg.k = 2;
    for (RetrievalMethod m : {RetrievalMethod::Sbr, RetrievalMethod::Bm25,
                              RetrievalMethod::DenseWhole, RetrievalMethod::Sbsr}) {
        cfg.method = m;
        auto via_dispatch = retrieve(query, repo, cfg, provider, &cache);
        std::vector<ScoredDS> direct;
        switch (m) {
        case RetrievalMethod::Sbr: direct = retrieve_sbr(query, repo, cfg, provider, &cache); break;
        case RetrievalMethod::Bm25: direct = retrieve_bm25(query, repo, cfg); break;
        case RetrievalMethod::DenseWhole:
            direct = retrieve_dense_whole(query, repo, cfg, provider, &cache);
            break;
        case RetrievalMethod::Sbsr:
            direct = retrieve_sbsr(query, repo, cfg, provider, &cache);
            break;
        }
        REQUIRE(via_dispatch.size() == direct.size());
        for (std::size_t i = 0; i < direct.size(); ++i) {
            CHECK(via_dispatch[i].ds_id == direct[i].ds_id);
            CHECK(via_dispatch[i].score == direct[i].score);
        }
    }
}

TEST_CASE("matching can target the raw NL statements instead of text parts") {
    DeterministicEmbeddingProvider provider(16);
    EmbeddingCache cache;

    NlRepository nl("db");
    std::string id_a = nl.add("the age of the patient at examination");
    std::string id_b = nl.add("unrelated commentary");
    std::string id_c = nl.add("completely different subject matter");

    Repository repo("db");
    repo.add(make_structured("db", id_a, "age", "t.AGE"));
    repo.add(make_structured("db", id_b, "other", "t.X"));
    repo.add(make_structured("db", id_c, "misc", "t.Y"));

    CHECK(ds_match_text(repo.at(std::size_t{0}), &nl, DsTextSource::RawNl) ==
          "the age of the patient at examination");
    CHECK(ds_match_text(repo.at(std::size_t{0}), nullptr, DsTextSource::TextPart) == "age");
    CHECK_THROWS_AS(ds_match_text(repo.at(std::size_t{0}), nullptr, DsTextSource::RawNl),
                    ConfigError);

    RetrievalConfig cfg;
    cfg.method = RetrievalMethod::Bm25;
    cfg.ds_text_source = DsTextSource::RawNl;
    cfg.k = 3;
    auto results = retrieve_bm25("age of the patient", repo, cfg, &nl);
    REQUIRE(results.size() == 3);
    CHECK(results[0].source_id == id_a);
    CHECK(results[0].score > results[1].score);

    // The span methods follow the same source selection.
    index_repository(repo, provider, &cache, {}, &nl, DsTextSource::RawNl);
    cfg.method = RetrievalMethod::Sbr;
    auto sbr = retrieve_sbr("the age of the patient at examination", repo, cfg, provider,
                            &cache, {}, &nl);
    REQUIRE(!sbr.empty());
    CHECK(sbr[0].source_id == id_a);
    CHECK(sbr[0].score == 1.0); // whole query equals the NL text exactly
}

TEST_CASE("tuning picks the best candidate and prefers smaller ties") {
    SUBCASE("single candidate") {
        std::vector<std::size_t> cand = {4};
        auto r = tune_n(cand, [](std::size_t) { return 0.5; });
        CHECK(r.best_n == 4);
        REQUIRE(r.scores.size() == 1);
        CHECK(r.scores[0] == std::pair<std::size_t, double>{4, 0.5});
    }
    SUBCASE("maximum wins") {
        std::vector<std::size_t> cand = {1, 2, 3, 4};
        auto r = tune_n(cand, [](std::size_t n) { return n == 3 ? 0.9 : 0.1; });
        CHECK(r.best_n == 3);
        REQUIRE(r.scores.size() == 4);
        for (std::size_t i = 0; i < cand.size(); ++i) CHECK(r.scores[i].first == cand[i]);
    }
    SUBCASE("ties go to the smaller candidate regardless of order") {
        std::vector<std::size_t> cand = {5, 2, 9};
        auto r = tune_n(cand, [](std::size_t) { return 0.7; });
        CHECK(r.best_n == 2);
    }
    SUBCASE("no candidates is a configuration error") {
        std::vector<std::size_t> cand;
        CHECK_THROWS_AS(tune_n(cand, [](std::size_t) { return 0.0; }), ConfigError);
    }
    SUBCASE("objective failures carry the candidate") {
        std::vector<std::size_t> cand = {1, 2};
        CHECK_THROWS_WITH_AS(tune_n(cand,
                                    [](std::size_t n) -> double {
                                        if (n == 2) throw std::runtime_error("boom");
                                        return 0.0;
                                    }),
                             doctest::Contains("n=2"), TuningError);
    }
}

TEST_CASE("tuning over retrieval quality lands on the planted slack") {
    DeterministicEmbeddingProvider provider(16);
    EmbeddingCache cache;
    // Statement of 5 words; queries of 9 tokens embed the statement text
    // verbatim, so any n >= 0 with window reaching length 5 scores 1.0.
    // A second, 2-word statement needs n >= 3 before its window admits
    // length >= ... the objective below just counts perfect scores.
    Repository repo =
        indexed_repo("db", {"alpha beta gamma delta epsilon", "zeta eta"}, provider, cache);

    auto objective = [&](std::size_t n) {
        RetrievalConfig cfg;
        cfg.n = n;
        cfg.k = repo.size();
        auto rs = retrieve_sbr("alpha beta gamma delta epsilon zeta eta pad pad", repo, cfg,
                               provider, &cache);
        double hits = 0;
        for (const auto& r : rs)
            if (r.score == 1.0) hits += 1;
        return hits;
    };
    std::vector<std::size_t> cand = {0, 1, 2, 3, 4};
    auto r = tune_n(cand, objective);
    // n=0: each statement only sees spans of its own length; "zeta eta"
    // appears verbatim at position 5, "alpha...epsilon" at 0, so both hit
    // already. The tie then falls to the smallest candidate.
    CHECK(r.best_n == 0);
    CHECK(r.scores[0].second == 2.0);
}
