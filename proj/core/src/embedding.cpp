#include "dsr/embedding.hpp"

#include "dsr/errors.hpp"
#include "dsr/hash.hpp"

#include "json.hpp"
#include "httplib.h"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <future>
#include <thread>

namespace dsr {

using nlohmann::json;

double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim())
        throw ContractError("dimension mismatch: " + std::to_string(a.dim()) + " vs " +
                            std::to_string(b.dim()));
    double acc = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        acc += static_cast<double>(a.values[i]) * static_cast<double>(b.values[i]);
    return acc;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) { return dot(a, b); }

double norm(const EmbeddingVector& v) {
    double acc = 0.0;
    for (float x : v.values) acc += static_cast<double>(x) * static_cast<double>(x);
    return std::sqrt(acc);
}

namespace {

// splitmix64; each step yields 64 independent sign bits.
std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

bool is_power_of_four(std::size_t v) {
    return v != 0 && std::has_single_bit(v) && (std::countr_zero(v) % 2 == 0);
}

void verify_unit(const EmbeddingVector& v, std::string_view origin) {
    double n = norm(v);
    if (std::abs(n - 1.0) > 1e-4)
        throw ContractError(std::string(origin) + " returned a non-unit vector (norm " +
                            std::to_string(n) + ")");
}

} // namespace

DeterministicEmbeddingProvider::DeterministicEmbeddingProvider(std::size_t dim)
    : dim_(dim) {
    if (!is_power_of_four(dim) || dim < 4)
        throw ConfigError("deterministic provider dimension must be a power of 4, got " +
                          std::to_string(dim));
    // sqrt of a power of 4 is a power of 2, so the reciprocal is exact.
    magnitude_ = 1.0f / static_cast<float>(std::sqrt(static_cast<double>(dim)));
    id_ = "deterministic-" + std::to_string(dim);
}

std::vector<EmbeddingVector> DeterministicEmbeddingProvider::embed(
    const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        EmbeddingVector v;
        v.values.resize(dim_);
        std::uint64_t state = fnv1a64(text);
        std::uint64_t bits = 0;
        for (std::size_t i = 0; i < dim_; ++i) {
            if (i % 64 == 0) bits = splitmix64(state);
            bool negative = (bits >> (i % 64)) & 1u;
            v.values[i] = negative ? -magnitude_ : magnitude_;
        }
        out.push_back(std::move(v));
    }
    return out;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(HttpEndpointConfig config)
    : config_(std::move(config)) {
    if (config_.base_url.empty())
        throw ConfigError("embedding endpoint base_url is empty");
    if (config_.provider_id.empty())
        throw ConfigError("embedding provider_id is empty");
}

std::vector<EmbeddingVector> HttpEmbeddingProvider::embed(
    const std::vector<std::string>& texts) {
    json body;
    body["texts"] = texts;
    const std::string payload = body.dump();

    std::string last_error;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(100 * attempt));

        // One client per call: httplib clients are not thread-safe and
        // embed() may run from several worker threads.
        httplib::Client client(config_.base_url);
        client.set_connection_timeout(std::chrono::duration<double>(config_.timeout_seconds));
        client.set_read_timeout(std::chrono::duration<double>(config_.timeout_seconds));
        if (!config_.auth_token_env.empty()) {
            if (const char* token = std::getenv(config_.auth_token_env.c_str()))
                client.set_bearer_token_auth(token);
        }

        auto res = client.Post("/embed", payload, "application/json");
        if (!res) {
            last_error = "connection failure (" + httplib::to_string(res.error()) + ")";
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP " + std::to_string(res->status);
            if (res->status >= 400 && res->status < 500 && res->status != 429)
                break; // client errors do not heal on retry
            continue;
        }

        json reply = json::parse(res->body, nullptr, false);
        if (reply.is_discarded() || !reply.contains("dim") || !reply.contains("vectors"))
            throw ContractError("embedding endpoint returned malformed JSON");

        std::size_t dim = reply["dim"].get<std::size_t>();
        const json& vectors = reply["vectors"];
        if (!vectors.is_array() || vectors.size() != texts.size())
            throw ContractError("embedding endpoint returned " +
                                std::to_string(vectors.size()) + " vectors for " +
                                std::to_string(texts.size()) + " texts");

        std::vector<EmbeddingVector> out;
        out.reserve(vectors.size());
        for (const json& row : vectors) {
            EmbeddingVector v;
            v.values = row.get<std::vector<float>>();
            if (v.dim() != dim)
                throw ContractError("embedding vector dimension " + std::to_string(v.dim()) +
                                    " does not match advertised dim " + std::to_string(dim));
            verify_unit(v, "embedding endpoint");
            out.push_back(std::move(v));
        }
        return out;
    }
    throw TransportError("embedding endpoint " + config_.base_url +
                         " unreachable after retries: " + last_error);
}

std::string EmbeddingCache::key(std::string_view provider_id, std::string_view text) {
    return std::string(provider_id) + ":" + hex64(fnv1a64(text)) + ":" +
           std::to_string(text.size());
}

EmbeddingCache::EmbeddingCache(const std::filesystem::path& file) : file_(file) {
    if (std::filesystem::exists(file_)) {
        std::ifstream in(file_);
        if (!in) throw StorageError("cannot open cache " + file_.string());
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            json row = json::parse(line, nullptr, false);
            if (row.is_discarded() || !row.contains("key") || !row.contains("values"))
                throw ParseError(file_.string() + ":" + std::to_string(line_no) +
                                 ": malformed cache record");
            EmbeddingVector v;
            v.values = row["values"].get<std::vector<float>>();
            entries_[row["key"].get<std::string>()] = std::move(v);
        }
    } else if (file_.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(file_.parent_path(), ec);
    }
    append_ = std::make_unique<std::ofstream>(file_, std::ios::app);
    if (!*append_) throw StorageError("cannot append to cache " + file_.string());
}

std::optional<EmbeddingVector> EmbeddingCache::get(std::string_view provider_id,
                                                   std::string_view text) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find(key(provider_id, text));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void EmbeddingCache::put(std::string_view provider_id, std::string_view text,
                         const EmbeddingVector& v) {
    std::lock_guard lock(mu_);
    auto [it, inserted] = entries_.emplace(key(provider_id, text), v);
    if (!inserted || !append_) return;
    json row;
    row["key"] = it->first;
    row["values"] = v.values;
    *append_ << row.dump() << '\n';
    append_->flush();
}

std::size_t EmbeddingCache::size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
}

std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts,
                                         EmbeddingProvider& provider,
                                         EmbeddingCache* cache, const EmbedOptions& opts) {
    if (opts.batch_size == 0) throw ConfigError("batch_size must be positive");

    std::vector<EmbeddingVector> out(texts.size());
    std::vector<char> pending(texts.size(), 0);

    // Unique miss texts in first-seen order.
    std::vector<std::string> misses;
    std::unordered_map<std::string, std::size_t> miss_index;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (cache) {
            if (auto hit = cache->get(provider.id(), texts[i])) {
                out[i] = std::move(*hit);
                continue;
            }
        }
        pending[i] = 1;
        if (!miss_index.count(texts[i])) {
            miss_index.emplace(texts[i], misses.size());
            misses.push_back(texts[i]);
        }
    }

    std::vector<EmbeddingVector> fetched(misses.size());
    if (!misses.empty()) {
        std::vector<std::pair<std::size_t, std::size_t>> chunks; // [begin, end)
        for (std::size_t b = 0; b < misses.size(); b += opts.batch_size)
            chunks.emplace_back(b, std::min(misses.size(), b + opts.batch_size));

        auto run_chunk = [&](std::size_t begin, std::size_t end) {
            std::vector<std::string> chunk(misses.begin() + begin, misses.begin() + end);
            std::vector<EmbeddingVector> vecs = provider.embed(chunk);
            if (vecs.size() != chunk.size())
                throw ContractError("provider returned " + std::to_string(vecs.size()) +
                                    " vectors for " + std::to_string(chunk.size()) +
                                    " texts");
            const std::size_t want = vecs.empty() ? 0 : vecs[0].dim();
            for (std::size_t i = 0; i < vecs.size(); ++i) {
                if (vecs[i].dim() != want)
                    throw ContractError("inconsistent embedding dimensions within a batch");
                verify_unit(vecs[i], "provider " + provider.id());
                fetched[begin + i] = std::move(vecs[i]);
            }
        };

        std::size_t workers = std::max<std::size_t>(1, opts.parallel);
        if (workers == 1 || chunks.size() == 1) {
            for (auto [b, e] : chunks) run_chunk(b, e);
        } else {
            for (std::size_t wave = 0; wave < chunks.size(); wave += workers) {
                std::vector<std::future<void>> futs;
                for (std::size_t c = wave; c < std::min(chunks.size(), wave + workers); ++c)
                    futs.push_back(std::async(std::launch::async, run_chunk,
                                              chunks[c].first, chunks[c].second));
                for (auto& f : futs) f.get();
            }
        }

        for (std::size_t i = 1; i < fetched.size(); ++i)
            if (fetched[i].dim() != fetched[0].dim())
                throw ContractError("inconsistent embedding dimensions across batches");

        if (cache)
            for (std::size_t i = 0; i < misses.size(); ++i)
                cache->put(provider.id(), misses[i], fetched[i]);
    }

    for (std::size_t i = 0; i < texts.size(); ++i)
        if (pending[i]) out[i] = fetched[miss_index.at(texts[i])];
    return out;
}

} // namespace dsr
