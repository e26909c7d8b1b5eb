#include "dsr/retrieve.hpp"

#include "dsr/bm25.hpp"
#include "dsr/errors.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

namespace dsr {

std::string to_string(RetrievalMethod m) {
    switch (m) {
        case RetrievalMethod::Bm25: return "bm25";
        case RetrievalMethod::DenseWhole: return "dense-whole";
        case RetrievalMethod::Sbsr: return "sbsr";
        case RetrievalMethod::Sbr: break;
    }
    return "sbr";
}

RetrievalMethod retrieval_method_from_string(std::string_view s) {
    if (s == "sbr") return RetrievalMethod::Sbr;
    if (s == "bm25") return RetrievalMethod::Bm25;
    if (s == "dense-whole") return RetrievalMethod::DenseWhole;
    if (s == "sbsr") return RetrievalMethod::Sbsr;
    throw ConfigError("unknown retrieval method: " + std::string(s));
}

std::string to_string(DsTextSource s) {
    return s == DsTextSource::RawNl ? "nl" : "str";
}

DsTextSource ds_text_source_from_string(std::string_view s) {
    if (s == "str") return DsTextSource::TextPart;
    if (s == "nl") return DsTextSource::RawNl;
    throw ConfigError("unknown ds text source: " + std::string(s));
}

const std::string& ds_match_text(const StructuredDS& ds, const NlRepository* nl,
                                 DsTextSource source) {
    if (source == DsTextSource::TextPart) return ds.text_part;
    if (!nl)
        throw ConfigError("ds text source \"nl\" needs the NL repository");
    return nl->at(ds.source_id).text;
}

LengthWindow span_window(std::size_t dx_len, std::size_t n, std::size_t query_len) {
    LengthWindow w;
    w.lo = dx_len > n ? dx_len - n : 1;
    w.hi = std::min(query_len, dx_len + n);
    return w;
}

std::vector<Span> enumerate_spans(std::span<const std::string> tokens, std::size_t lo,
                                  std::size_t hi) {
    const std::size_t m = tokens.size();
    lo = std::max<std::size_t>(lo, 1);
    hi = std::min(hi, m);
    std::vector<Span> spans;
    if (lo > hi) return spans;
    spans.reserve(count_spans(m, lo, hi));
    for (std::size_t i = 0; i < m; ++i) {
        std::string text;
        std::size_t built = 0; // tokens already in text: i..i+built-1
        for (std::size_t len = lo; len <= hi && i + len <= m; ++len) {
            if (built == 0) {
                for (std::size_t t = i; t < i + len; ++t) {
                    if (t > i) text += ' ';
                    text += tokens[t];
                }
                built = len;
            } else {
                for (std::size_t t = i + built; t < i + len; ++t) {
                    text += ' ';
                    text += tokens[t];
                }
                built = len;
            }
            spans.push_back(Span{i, i + len - 1, text});
        }
    }
    return spans;
}

std::size_t count_spans(std::size_t token_count, std::size_t lo, std::size_t hi) {
    lo = std::max<std::size_t>(lo, 1);
    hi = std::min(hi, token_count);
    std::size_t total = 0;
    for (std::size_t len = lo; len <= hi; ++len) total += token_count - len + 1;
    return total;
}

namespace {

// Canonical form of every statement's match text. Index 0 pairs with
// statement 0, and so on.
std::vector<CanonicalText> match_canonicals(const Repository& repo,
                                            const NlRepository* nl, DsTextSource source) {
    std::vector<CanonicalText> out;
    out.reserve(repo.size());
    for (const auto& ds : repo.statements()) {
        if (source == DsTextSource::TextPart)
            out.push_back(ds.canonical);
        else
            out.push_back(canonicalize(ds_match_text(ds, nl, source)));
    }
    return out;
}

void require_indexed(const Repository& repo) {
    if (!repo.index_ready())
        throw ContractError("repository is not indexed; run index_repository first");
}

// Sorts scored rows by score descending, ties by insertion order, and
// keeps the first k.
std::vector<ScoredDS> rank_and_truncate(std::vector<ScoredDS> rows, std::size_t k) {
    std::stable_sort(rows.begin(), rows.end(),
                     [](const ScoredDS& a, const ScoredDS& b) { return a.score > b.score; });
    if (rows.size() > k) rows.resize(k);
    return rows;
}

// Best admissible span for one statement given pre-embedded spans in
// (start, length) order. Strict > keeps the first maximum, which is the
// smallest (start, length) by construction.
ScoredDS best_span_for(const StructuredDS& ds, const EmbeddingVector& text_vec,
                       std::span<const Span> spans,
                       std::span<const EmbeddingVector> span_vecs, LengthWindow window) {
    ScoredDS scored;
    scored.ds_id = ds.id;
    scored.source_id = ds.source_id;
    scored.score = kNoWindowScore;
    if (window.empty()) return scored;
    for (std::size_t s = 0; s < spans.size(); ++s) {
        const std::size_t len = spans[s].length();
        if (len < window.lo || len > window.hi) continue;
        double sim = dot(text_vec, span_vecs[s]);
        if (sim > scored.score) {
            scored.score = sim;
            scored.best_span = spans[s];
        }
    }
    return scored;
}

} // namespace

void index_repository(Repository& repo, EmbeddingProvider& provider, EmbeddingCache* cache,
                      const EmbedOptions& opts, const NlRepository* nl,
                      DsTextSource source) {
    std::vector<CanonicalText> canon = match_canonicals(repo, nl, source);
    std::vector<std::string> texts;
    std::unordered_set<std::string> seen;
    for (const auto& c : canon) {
        if (seen.insert(c.text).second) texts.push_back(c.text);
        for (const auto& w : c.tokens)
            if (seen.insert(w).second) texts.push_back(w);
    }
    if (!texts.empty()) embed_batch(texts, provider, cache, opts);
    repo.set_index_ready(true);
}

ScoredDS score_sbr(const CanonicalText& query, const StructuredDS& ds, std::size_t n,
                   EmbeddingProvider& provider, EmbeddingCache* cache) {
    LengthWindow window = span_window(ds.word_length, n, query.word_count());
    ScoredDS scored;
    scored.ds_id = ds.id;
    scored.source_id = ds.source_id;
    scored.score = kNoWindowScore;
    if (window.empty()) return scored;

    std::vector<Span> spans = enumerate_spans(query.tokens, window.lo, window.hi);
    std::vector<std::string> texts;
    texts.reserve(spans.size() + 1);
    for (const auto& s : spans) texts.push_back(s.text);
    texts.push_back(ds.canonical.text);
    std::vector<EmbeddingVector> vecs = embed_batch(texts, provider, cache);

    const EmbeddingVector& text_vec = vecs.back();
    return best_span_for(ds, text_vec, spans,
                         std::span(vecs.data(), spans.size()), window);
}

std::vector<ScoredDS> retrieve_sbr(std::string_view query, const Repository& repo,
                                   const RetrievalConfig& cfg, EmbeddingProvider& provider,
                                   EmbeddingCache* cache, const EmbedOptions& opts,
                                   const NlRepository* nl) {
    require_indexed(repo);
    CanonicalText canon = canonicalize(query);
    if (repo.empty() || canon.empty() || cfg.k == 0) return {};

    std::vector<CanonicalText> match = match_canonicals(repo, nl, cfg.ds_text_source);

    std::size_t min_len = match[0].word_count();
    std::size_t max_len = match[0].word_count();
    for (const auto& c : match) {
        min_len = std::min(min_len, c.word_count());
        max_len = std::max(max_len, c.word_count());
    }
    LengthWindow global = span_window(min_len, cfg.n, canon.word_count());
    global.hi = std::min(canon.word_count(), max_len + cfg.n);
    if (global.empty()) return {};

    std::vector<Span> spans = enumerate_spans(canon.tokens, global.lo, global.hi);

    std::vector<std::string> texts;
    texts.reserve(spans.size() + match.size());
    for (const auto& s : spans) texts.push_back(s.text);
    for (const auto& c : match) texts.push_back(c.text);
    std::vector<EmbeddingVector> vecs = embed_batch(texts, provider, cache, opts);
    std::span<const EmbeddingVector> span_vecs(vecs.data(), spans.size());

    std::vector<ScoredDS> rows;
    rows.reserve(repo.size());
    for (std::size_t d = 0; d < repo.size(); ++d) {
        LengthWindow window = span_window(match[d].word_count(), cfg.n, canon.word_count());
        ScoredDS scored = best_span_for(repo.at(d), vecs[spans.size() + d], spans,
                                        span_vecs, window);
        if (scored.score == kNoWindowScore) continue;
        rows.push_back(std::move(scored));
    }
    return rank_and_truncate(std::move(rows), cfg.k);
}

std::vector<ScoredDS> retrieve_bm25(std::string_view query, const Repository& repo,
                                    const RetrievalConfig& cfg, const NlRepository* nl) {
    CanonicalText canon = canonicalize(query);
    if (repo.empty() || canon.empty() || cfg.k == 0) return {};

    std::vector<CanonicalText> match = match_canonicals(repo, nl, cfg.ds_text_source);
    std::vector<std::vector<std::string>> corpus;
    corpus.reserve(match.size());
    for (auto& c : match) corpus.push_back(c.tokens);

    Bm25Okapi bm25(std::move(corpus));
    std::vector<double> scores = bm25.scores(canon.tokens);

    std::vector<ScoredDS> rows;
    rows.reserve(repo.size());
    for (std::size_t d = 0; d < repo.size(); ++d) {
        const auto& ds = repo.at(d);
        rows.push_back(ScoredDS{ds.id, ds.source_id, scores[d], std::nullopt});
    }
    return rank_and_truncate(std::move(rows), cfg.k);
}

std::vector<ScoredDS> retrieve_dense_whole(std::string_view query, const Repository& repo,
                                           const RetrievalConfig& cfg,
                                           EmbeddingProvider& provider,
                                           EmbeddingCache* cache, const EmbedOptions& opts,
                                           const NlRepository* nl) {
    require_indexed(repo);
    CanonicalText canon = canonicalize(query);
    if (repo.empty() || canon.empty() || cfg.k == 0) return {};

    std::vector<CanonicalText> match = match_canonicals(repo, nl, cfg.ds_text_source);
    std::vector<std::string> texts;
    texts.reserve(match.size() + 1);
    texts.push_back(canon.text);
    for (const auto& c : match) texts.push_back(c.text);
    std::vector<EmbeddingVector> vecs = embed_batch(texts, provider, cache, opts);

    std::vector<ScoredDS> rows;
    rows.reserve(repo.size());
    for (std::size_t d = 0; d < repo.size(); ++d) {
        const auto& ds = repo.at(d);
        rows.push_back(ScoredDS{ds.id, ds.source_id, dot(vecs[0], vecs[d + 1]), std::nullopt});
    }
    return rank_and_truncate(std::move(rows), cfg.k);
}

std::vector<ScoredDS> retrieve_sbsr(std::string_view query, const Repository& repo,
                                    const RetrievalConfig& cfg, EmbeddingProvider& provider,
                                    EmbeddingCache* cache, const EmbedOptions& opts,
                                    const NlRepository* nl) {
    require_indexed(repo);
    CanonicalText canon = canonicalize(query);
    if (repo.empty() || canon.empty() || cfg.k == 0) return {};

    std::vector<CanonicalText> match = match_canonicals(repo, nl, cfg.ds_text_source);

    std::vector<std::string> texts = canon.tokens;
    std::vector<std::pair<std::size_t, std::size_t>> word_range; // into texts
    for (const auto& c : match) {
        word_range.emplace_back(texts.size(), texts.size() + c.tokens.size());
        texts.insert(texts.end(), c.tokens.begin(), c.tokens.end());
    }
    std::vector<EmbeddingVector> vecs = embed_batch(texts, provider, cache, opts);

    const std::size_t m = canon.word_count();
    // sim[d][w]: best similarity of query word w to any word of statement d.
    std::vector<std::vector<double>> sim(repo.size(), std::vector<double>(m, 0.0));
    for (std::size_t d = 0; d < repo.size(); ++d) {
        auto [bw, ew] = word_range[d];
        for (std::size_t w = 0; w < m; ++w) {
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t t = bw; t < ew; ++t)
                best = std::max(best, dot(vecs[w], vecs[t]));
            sim[d][w] = best;
        }
    }

    std::vector<double> covered(m, 0.0);
    std::vector<char> taken(repo.size(), 0);
    std::vector<ScoredDS> rows;
    const std::size_t rounds = std::min(cfg.k, repo.size());
    for (std::size_t r = 0; r < rounds; ++r) {
        double best_gain = -1.0;
        std::size_t best_d = repo.size();
        for (std::size_t d = 0; d < repo.size(); ++d) {
            if (taken[d]) continue;
            double gain = 0.0;
            for (std::size_t w = 0; w < m; ++w)
                gain += std::max(0.0, sim[d][w] - covered[w]);
            if (gain > best_gain) {
                best_gain = gain;
                best_d = d;
            }
        }
        if (best_d == repo.size()) break;
        taken[best_d] = 1;
        for (std::size_t w = 0; w < m; ++w)
            covered[w] = std::max(covered[w], std::max(0.0, sim[best_d][w]));
        const auto& ds = repo.at(best_d);
        rows.push_back(ScoredDS{ds.id, ds.source_id, best_gain, std::nullopt});
    }
    return rows;
}

std::vector<ScoredDS> retrieve(std::string_view query, const Repository& repo,
                               const RetrievalConfig& cfg, EmbeddingProvider& provider,
                               EmbeddingCache* cache, const EmbedOptions& opts,
                               const NlRepository* nl) {
    switch (cfg.method) {
        case RetrievalMethod::Bm25: return retrieve_bm25(query, repo, cfg, nl);
        case RetrievalMethod::DenseWhole:
            return retrieve_dense_whole(query, repo, cfg, provider, cache, opts, nl);
        case RetrievalMethod::Sbsr:
            return retrieve_sbsr(query, repo, cfg, provider, cache, opts, nl);
        case RetrievalMethod::Sbr: break;
    }
    return retrieve_sbr(query, repo, cfg, provider, cache, opts, nl);
}

TuneResult tune_n(std::span<const std::size_t> candidates,
                  const std::function<double(std::size_t)>& objective) {
    if (candidates.empty()) throw ConfigError("tune_n needs at least one candidate");

    TuneResult result;
    bool have_best = false;
    double best_score = 0.0;
    for (std::size_t n : candidates) {
        double score = 0.0;
        try {
            score = objective(n);
        } catch (const std::exception& e) {
            throw TuningError("objective failed at n=" + std::to_string(n) + ": " +
                              e.what());
        }
        result.scores.emplace_back(n, score);
        if (!have_best || score > best_score ||
            (score == best_score && n < result.best_n)) {
            have_best = true;
            best_score = score;
            result.best_n = n;
        }
    }
    return result;
}

} // namespace dsr
