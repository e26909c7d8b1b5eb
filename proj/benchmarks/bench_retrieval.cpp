#include "dsr/bm25.hpp"
#include "dsr/canonicalize.hpp"
#include "dsr/embedding.hpp"
#include "dsr/retrieve.hpp"

#include <benchmark/benchmark.h>

#include <cstddef>
#include <random>
#include <string>
#include <vector>

namespace {

std::vector<std::string> word_pool(std::size_t count, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::vector<std::string> words(count);
    for (auto& w : words) {
        const std::size_t len = 3 + gen() % 6;
        for (std::size_t c = 0; c < len; ++c)
            w += static_cast<char>('a' + gen() % 26);
    }
    return words;
}

std::string sentence(const std::vector<std::string>& pool, std::mt19937_64& gen,
                     std::size_t words) {
    std::string out;
    for (std::size_t i = 0; i < words; ++i) {
        if (i) out += ' ';
        out += pool[gen() % pool.size()];
    }
    return out;
}

dsr::Repository build_repo(std::size_t statements, const std::vector<std::string>& pool,
                           std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    dsr::Repository repo("bench");
    for (std::size_t s = 0; s < statements; ++s)
        repo.add(dsr::make_structured("bench", "s" + std::to_string(s),
                                      sentence(pool, gen, 2 + gen() % 6),
                                      "t.c = " + std::to_string(s)));
    return repo;
}

void BM_Canonicalize(benchmark::State& state) {
    const std::string text =
        "List the top 10 districts by unemployment ratio of year 1995, "
        "excluding accounts opened before 1993-01-05.";
    for (auto _ : state) {
        dsr::CanonicalText canonical = dsr::canonicalize(text);
        benchmark::DoNotOptimize(canonical);
    }
}
BENCHMARK(BM_Canonicalize);

void BM_SpanEnumeration(benchmark::State& state) {
    const auto pool = word_pool(64, 7);
    std::mt19937_64 gen(11);
    const dsr::CanonicalText query = dsr::canonicalize(sentence(pool, gen, 15));
    for (auto _ : state) {
        std::vector<dsr::Span> spans = dsr::enumerate_spans(query.tokens, 1, 10);
        benchmark::DoNotOptimize(spans);
    }
}
BENCHMARK(BM_SpanEnumeration);

// Warm-path span retrieval: every span and statement embedding is already
// cached, so this measures window enumeration, lookups, and ranking.
void BM_RetrieveSbrWarm(benchmark::State& state) {
    const auto pool = word_pool(64, 7);
    dsr::Repository repo = build_repo(static_cast<std::size_t>(state.range(0)), pool, 3);
    dsr::DeterministicEmbeddingProvider provider(64);
    dsr::EmbeddingCache cache;
    dsr::index_repository(repo, provider, &cache);

    std::mt19937_64 gen(11);
    const std::string query = sentence(pool, gen, 15);
    dsr::RetrievalConfig cfg;
    cfg.k = 10;
    cfg.n = 3;
    dsr::retrieve_sbr(query, repo, cfg, provider, &cache); // fill the span cache

    for (auto _ : state) {
        std::vector<dsr::ScoredDS> results =
            dsr::retrieve_sbr(query, repo, cfg, provider, &cache);
        benchmark::DoNotOptimize(results);
    }
}
BENCHMARK(BM_RetrieveSbrWarm)->Arg(32)->Arg(131)->Arg(512);

void BM_Bm25Scores(benchmark::State& state) {
    const auto pool = word_pool(64, 7);
    std::mt19937_64 gen(5);
    std::vector<std::vector<std::string>> corpus;
    for (std::size_t d = 0; d < static_cast<std::size_t>(state.range(0)); ++d)
        corpus.push_back(dsr::canonicalize(sentence(pool, gen, 2 + gen() % 6)).tokens);
    const dsr::Bm25Okapi bm25(corpus);
    const std::vector<std::string> query = dsr::canonicalize(sentence(pool, gen, 8)).tokens;

    for (auto _ : state) {
        std::vector<double> scores = bm25.scores(query);
        benchmark::DoNotOptimize(scores);
    }
}
BENCHMARK(BM_Bm25Scores)->Arg(131)->Arg(512);

} // namespace

int main(int argc, char** argv) {
    benchmark::Initialize(&argc, argv);
    if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
    benchmark::RunSpecifiedBenchmarks();
    return 0;
}
