#pragma once

#include "dsr/embedding.hpp"
#include "dsr/repository.hpp"

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dsr {

/// Contiguous token range [i, j] of a canonical query, 0-based inclusive.
struct Span {
    std::size_t i = 0;
    std::size_t j = 0;
    std::string text; // tokens i..j joined with single spaces

    std::size_t length() const noexcept { return j - i + 1; }
};

/// Score assigned when a statement admits no window for the query; such
/// statements never appear in results.
inline constexpr double kNoWindowScore = -std::numeric_limits<double>::infinity();

struct ScoredDS {
    std::string ds_id;
    std::string source_id;
    double score = 0.0;
    std::optional<Span> best_span; // set by span-based methods only
};

enum class RetrievalMethod { Sbr, Bm25, DenseWhole, Sbsr };
std::string to_string(RetrievalMethod m);
RetrievalMethod retrieval_method_from_string(std::string_view s);

/// Which text represents a statement for matching: the structured text
/// part (d.x) or the raw NL statement it came from.
enum class DsTextSource { TextPart, RawNl };
std::string to_string(DsTextSource s);
DsTextSource ds_text_source_from_string(std::string_view s);

struct RetrievalConfig {
    RetrievalMethod method = RetrievalMethod::Sbr;
    std::size_t k = 10;
    std::size_t n = 3; // span length slack
    DsTextSource ds_text_source = DsTextSource::TextPart;
};

/// The text retrieval matches against for one statement.
const std::string& ds_match_text(const StructuredDS& ds, const NlRepository* nl,
                                 DsTextSource source);

/// Inclusive span-length window for a statement of word length dx_len
/// against a query of query_len tokens: [max(1, dx_len - n),
/// min(query_len, dx_len + n)]. Empty (lo > hi) when the query is shorter
/// than dx_len - n.
struct LengthWindow {
    std::size_t lo = 1;
    std::size_t hi = 0;

    bool empty() const noexcept { return lo > hi; }
};
LengthWindow span_window(std::size_t dx_len, std::size_t n, std::size_t query_len);

/// All spans with length in [lo, hi], ordered by (start index, length).
/// Bounds are clamped to [1, tokens.size()]; empty window -> empty list.
std::vector<Span> enumerate_spans(std::span<const std::string> tokens, std::size_t lo,
                                  std::size_t hi);

/// Number of spans enumerate_spans would produce.
std::size_t count_spans(std::size_t token_count, std::size_t lo, std::size_t hi);

/// Attaches embeddings for every statement's match text (and its
/// individual words, used by the word-coverage method) to the repository.
/// Must run before the embedding-based retrieval methods.
void index_repository(Repository& repo, EmbeddingProvider& provider,
                      EmbeddingCache* cache = nullptr, const EmbedOptions& opts = {},
                      const NlRepository* nl = nullptr,
                      DsTextSource source = DsTextSource::TextPart);

/// Single-statement scoring: the maximum similarity between the statement
/// text and any query span whose length falls in the statement's window.
/// Ties go to the smallest (start, length). No admissible span -> score
/// kNoWindowScore and no best_span.
ScoredDS score_sbr(const CanonicalText& query, const StructuredDS& ds, std::size_t n,
                   EmbeddingProvider& provider, EmbeddingCache* cache = nullptr);

/// Span-window retrieval over the whole repository. Canonicalizes the
/// query once, embeds all candidate spans in one batch, scores every
/// statement, and returns the top k ordered by score descending with ties
/// broken by repository insertion order. Statements with no admissible
/// span are omitted.
std::vector<ScoredDS> retrieve_sbr(std::string_view query, const Repository& repo,
                                   const RetrievalConfig& cfg, EmbeddingProvider& provider,
                                   EmbeddingCache* cache = nullptr,
                                   const EmbedOptions& opts = {},
                                   const NlRepository* nl = nullptr);

/// Okapi BM25 over canonical match texts; no embedding index required.
std::vector<ScoredDS> retrieve_bm25(std::string_view query, const Repository& repo,
                                    const RetrievalConfig& cfg,
                                    const NlRepository* nl = nullptr);

/// Cosine between the whole canonical query and each statement text.
std::vector<ScoredDS> retrieve_dense_whole(std::string_view query, const Repository& repo,
                                           const RetrievalConfig& cfg,
                                           EmbeddingProvider& provider,
                                           EmbeddingCache* cache = nullptr,
                                           const EmbedOptions& opts = {},
                                           const NlRepository* nl = nullptr);

/// Greedy word-coverage selection: repeatedly add the statement with the
/// largest marginal gain in sum over query words of the best word-level
/// similarity to any selected statement. Scores are the marginal gains,
/// non-increasing by construction. Empty-set coverage is zero; negative
/// word similarities never reduce coverage.
std::vector<ScoredDS> retrieve_sbsr(std::string_view query, const Repository& repo,
                                    const RetrievalConfig& cfg,
                                    EmbeddingProvider& provider,
                                    EmbeddingCache* cache = nullptr,
                                    const EmbedOptions& opts = {},
                                    const NlRepository* nl = nullptr);

/// Dispatch on cfg.method.
std::vector<ScoredDS> retrieve(std::string_view query, const Repository& repo,
                               const RetrievalConfig& cfg, EmbeddingProvider& provider,
                               EmbeddingCache* cache = nullptr,
                               const EmbedOptions& opts = {},
                               const NlRepository* nl = nullptr);

struct TuneResult {
    std::size_t best_n = 0;
    std::vector<std::pair<std::size_t, double>> scores; // candidate order preserved
};

/// Evaluates the objective for every candidate and picks the smallest n
/// among the maxima. Candidates must be non-empty. A throwing objective
/// becomes TuningError naming the candidate.
TuneResult tune_n(std::span<const std::size_t> candidates,
                  const std::function<double(std::size_t)>& objective);

} // namespace dsr
