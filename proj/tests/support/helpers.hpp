#pragma once

#include "dsr/embedding.hpp"
#include "dsr/repository.hpp"
#include "dsr/types.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

namespace testsupport {

/// Unique directory under the system temp root, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<unsigned> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("dsr-" + tag + "-" + std::to_string(::getpid()) + "-" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path file(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

/// Wraps a provider and counts every text that reaches it.
class CountingProvider final : public dsr::EmbeddingProvider {
public:
    explicit CountingProvider(dsr::EmbeddingProvider& inner) : inner_(inner) {}

    const std::string& id() const override { return inner_.id(); }

    std::vector<dsr::EmbeddingVector> embed(const std::vector<std::string>& texts) override {
        {
            std::lock_guard lock(mu_);
            calls_ += 1;
            for (const auto& t : texts) seen_.push_back(t);
        }
        return inner_.embed(texts);
    }

    std::size_t calls() const {
        std::lock_guard lock(mu_);
        return calls_;
    }
    std::vector<std::string> seen() const {
        std::lock_guard lock(mu_);
        return seen_;
    }
    void reset() {
        std::lock_guard lock(mu_);
        calls_ = 0;
        seen_.clear();
    }

private:
    dsr::EmbeddingProvider& inner_;
    mutable std::mutex mu_;
    std::size_t calls_ = 0;
    std::vector<std::string> seen_;
};

/// Repository whose statements carry the given text parts; SQL parts are
/// synthesized. Source ids are "src<i>".
inline dsr::Repository make_repo(const std::string& db_id,
                                 const std::vector<std::string>& text_parts) {
    dsr::Repository repo(db_id);
    for (std::size_t i = 0; i < text_parts.size(); ++i)
        repo.add(dsr::make_structured(db_id, "src" + std::to_string(i), text_parts[i],
                                      "T.c = " + std::to_string(i)));
    return repo;
}

/// Deterministic word soup: lowercase pseudo-words from a seeded generator.
inline std::vector<std::string> random_words(std::mt19937_64& gen, std::size_t count,
                                             const std::string& prefix = "") {
    std::vector<std::string> words;
    words.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::string w = prefix;
        std::size_t len = 2 + gen() % 6;
        for (std::size_t c = 0; c < len; ++c) w += static_cast<char>('a' + gen() % 26);
        words.push_back(std::move(w));
    }
    return words;
}

inline std::string join(const std::vector<std::string>& words) {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) out += ' ';
        out += words[i];
    }
    return out;
}

} // namespace testsupport
