#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dsr {

/// Unit-length embedding. Stored as float32; similarity math accumulates
/// in double.
struct EmbeddingVector {
    std::vector<float> values;

    std::size_t dim() const noexcept { return values.size(); }
};

/// Inner product with double accumulation. Throws ContractError on
/// dimension mismatch.
double dot(const EmbeddingVector& a, const EmbeddingVector& b);

/// Cosine similarity. Inputs are unit vectors by provider contract, so
/// this is the same inner product; no renormalization is applied, which
/// keeps cosine(v, v) == 1.0 exactly for vectors whose self-product is
/// exact in float (see DeterministicEmbeddingProvider).
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

/// L2 norm with double accumulation.
double norm(const EmbeddingVector& v);

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    /// Stable identifier; part of every cache key.
    virtual const std::string& id() const = 0;

    /// One unit vector per input text, order preserved, equal dimensions.
    /// Must be deterministic for a given text and thread-safe.
    virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;
};

/// Offline provider: the vector for a text is a sign pattern seeded by the
/// text's hash, every component ±1/sqrt(dim). dim must be a power of 4 so
/// 1/sqrt(dim) is an exact float and the self-product is exactly 1.0.
class DeterministicEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit DeterministicEmbeddingProvider(std::size_t dim = 64);

    const std::string& id() const override { return id_; }
    std::size_t dim() const noexcept { return dim_; }
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;

private:
    std::size_t dim_;
    float magnitude_;
    std::string id_;
};

struct HttpEndpointConfig {
    std::string base_url;          // e.g. http://127.0.0.1:8080
    std::string provider_id;       // cache-key namespace for this endpoint
    double timeout_seconds = 60.0;
    int retries = 2;               // additional attempts after the first
    std::string auth_token_env;    // env var holding the bearer token, optional
};

/// Client for the embedding wire protocol:
///   POST /embed  {"texts":[...]}  ->  {"dim":D,"vectors":[[...],...]}
/// Vectors are re-verified on receipt: consistent dimension and unit norm
/// within 1e-4, else ContractError. Network failures after retries become
/// TransportError.
class HttpEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit HttpEmbeddingProvider(HttpEndpointConfig config);

    const std::string& id() const override { return config_.provider_id; }
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;

private:
    HttpEndpointConfig config_;
};

/// Thread-safe cache keyed by (provider id, text). Optionally persisted as
/// append-only JSONL; float32 components survive the JSON round trip
/// bit-for-bit, so a reloaded vector is identical to the fetched one.
class EmbeddingCache {
public:
    EmbeddingCache() = default;
    explicit EmbeddingCache(const std::filesystem::path& file);

    std::optional<EmbeddingVector> get(std::string_view provider_id,
                                       std::string_view text) const;
    void put(std::string_view provider_id, std::string_view text,
             const EmbeddingVector& v);

    std::size_t size() const;

private:
    static std::string key(std::string_view provider_id, std::string_view text);

    mutable std::mutex mu_;
    std::unordered_map<std::string, EmbeddingVector> entries_;
    std::filesystem::path file_;
    std::unique_ptr<std::ofstream> append_;
};

struct EmbedOptions {
    std::size_t batch_size = 64;
    std::size_t parallel = 1; // concurrent provider batches
};

/// Cache-first batch embedding. Duplicate texts are fetched once; results
/// keep input order; every fetched vector is verified (consistent
/// dimension, unit norm within 1e-4) before entering the cache.
std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts,
                                         EmbeddingProvider& provider,
                                         EmbeddingCache* cache = nullptr,
                                         const EmbedOptions& opts = {});

} // namespace dsr
