#include "dsr/bm25.hpp"

#include "dsr/errors.hpp"

#include <cmath>

namespace dsr {

Bm25Okapi::Bm25Okapi(std::vector<std::vector<std::string>> corpus)
    : Bm25Okapi(std::move(corpus), Params{}) {}

Bm25Okapi::Bm25Okapi(std::vector<std::vector<std::string>> corpus, Params params)
    : params_(params) {
    doc_len_.reserve(corpus.size());
    double total_len = 0.0;
    for (std::size_t d = 0; d < corpus.size(); ++d) {
        doc_len_.push_back(static_cast<double>(corpus[d].size()));
        total_len += doc_len_.back();
        for (const std::string& term : corpus[d]) term_freq_[term][d] += 1.0;
    }
    avgdl_ = corpus.empty() ? 0.0 : total_len / static_cast<double>(corpus.size());

    const double n = static_cast<double>(corpus.size());
    double idf_sum = 0.0;
    std::vector<std::string> negative;
    for (const auto& [term, freq] : term_freq_) {
        double df = static_cast<double>(freq.size());
        double idf = std::log((n - df + 0.5) / (df + 0.5));
        idf_[term] = idf;
        idf_sum += idf;
        if (idf < 0.0) negative.push_back(term);
    }
    double avg_idf = idf_.empty() ? 0.0 : idf_sum / static_cast<double>(idf_.size());
    for (const std::string& term : negative) idf_[term] = params_.epsilon * avg_idf;
}

double Bm25Okapi::idf(const std::string& term) const {
    auto it = idf_.find(term);
    return it == idf_.end() ? 0.0 : it->second;
}

double Bm25Okapi::score(std::span<const std::string> query_tokens, std::size_t doc) const {
    if (doc >= doc_len_.size())
        throw ContractError("document index out of range: " + std::to_string(doc));
    double score = 0.0;
    for (const std::string& term : query_tokens) {
        auto tf_it = term_freq_.find(term);
        if (tf_it == term_freq_.end()) continue; // absent terms contribute zero
        auto doc_it = tf_it->second.find(doc);
        if (doc_it == tf_it->second.end()) continue;
        double tf = doc_it->second;
        double denom = tf + params_.k1 * (1.0 - params_.b +
                                          params_.b * doc_len_[doc] / avgdl_);
        score += idf_.at(term) * tf * (params_.k1 + 1.0) / denom;
    }
    return score;
}

std::vector<double> Bm25Okapi::scores(std::span<const std::string> query_tokens) const {
    std::vector<double> out(doc_len_.size(), 0.0);
    for (std::size_t d = 0; d < out.size(); ++d) out[d] = score(query_tokens, d);
    return out;
}

} // namespace dsr
