#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace dsr {

/// Okapi BM25 over a fixed tokenized corpus.
///
/// IDF is ln((N - df + 0.5) / (df + 0.5)); terms whose raw IDF is negative
/// (present in more than half the corpus) are floored to epsilon times the
/// average raw IDF instead of being dropped. Query terms absent from the
/// corpus contribute zero.
class Bm25Okapi {
public:
    struct Params {
        double k1 = 1.5;
        double b = 0.75;
        double epsilon = 0.25;
    };

    explicit Bm25Okapi(std::vector<std::vector<std::string>> corpus);
    Bm25Okapi(std::vector<std::vector<std::string>> corpus, Params params);

    std::size_t size() const noexcept { return doc_len_.size(); }
    double avgdl() const noexcept { return avgdl_; }
    double idf(const std::string& term) const; // 0 for unknown terms

    double score(std::span<const std::string> query_tokens, std::size_t doc) const;
    std::vector<double> scores(std::span<const std::string> query_tokens) const;

private:
    Params params_;
    double avgdl_ = 0.0;
    std::vector<double> doc_len_;
    // term -> (doc -> frequency)
    std::unordered_map<std::string, std::unordered_map<std::size_t, double>> term_freq_;
    std::unordered_map<std::string, double> idf_;
};

} // namespace dsr
