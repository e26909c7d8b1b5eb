#pragma once

#include "dsr/dataset.hpp"
#include "dsr/embedding.hpp"
#include "dsr/evaluate.hpp"
#include "dsr/generate.hpp"
#include "dsr/llm.hpp"
#include "dsr/retrieve.hpp"
#include "dsr/structure.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dsr {

struct EmbeddingConfig {
    std::string endpoint = "deterministic"; // "deterministic" or http(s) URL
    std::string provider_id;                // defaults to the endpoint's own id
    std::size_t dim = 64;                   // deterministic provider only
    std::size_t batch_size = 64;
    double timeout_seconds = 60.0;
    int retries = 2;
    std::string auth_token_env = "DSR_EMBED_TOKEN";
};

struct LlmConfig {
    std::string endpoint; // http(s) URL; required by structure/generate
    int max_tokens = 1024;
    double timeout_seconds = 120.0;
    int retries = 2;
    std::string auth_token_env = "DSR_LLM_TOKEN";
};

struct PipelineConfig {
    std::filesystem::path dataset;
    std::filesystem::path db_dir;
    std::filesystem::path out = "out";
    std::filesystem::path cache; // defaults to <out>/embeddings.jsonl
    std::filesystem::path shots; // few-shot exemplars for `structure`

    EmbeddingConfig embedding;
    LlmConfig llm;

    RetrievalMethod method = RetrievalMethod::Sbr;
    DsTextSource ds_source = DsTextSource::TextPart;
    std::size_t k_in = 4;
    std::size_t k_out = 10;
    std::optional<std::size_t> k_override; // --k forces both
    std::size_t n = 3;
    double in_fraction = 0.5;
    std::uint64_t seed = 13;
    std::size_t parallel = 1;
    std::vector<std::size_t> n_grid = {1, 2, 3, 4, 5, 6};
    std::optional<std::string> db_filter; // --db restricts per-DB stages

    std::filesystem::path cache_path() const {
        return cache.empty() ? out / "embeddings.jsonl" : cache;
    }
};

/// Reads a JSON config file. Unknown keys are rejected so typos surface.
PipelineConfig load_config(const std::filesystem::path& path);

/// Stage artifact paths under config.out.
struct ArtifactPaths {
    explicit ArtifactPaths(const std::filesystem::path& out);

    std::filesystem::path examples;    // ingest
    std::filesystem::path labeled;     // split
    std::filesystem::path dbs;         // per-database directory
    std::filesystem::path retrievals;  // retrieve
    std::filesystem::path generations; // generate
    std::filesystem::path report_json; // eval
    std::filesystem::path report_text; // eval
    std::filesystem::path tune;        // tune

    std::filesystem::path nl_repo(const std::string& db_id) const;
    std::filesystem::path repo(const std::string& db_id) const;
    std::filesystem::path index(const std::string& db_id) const;
};

/// Per-example retrieval artifact row.
struct RetrievalRecord {
    std::string example_id;
    std::string db_id;
    std::string method;
    std::size_t k = 0;
    std::vector<ScoredDS> results;
};

/// Per-example generation artifact row.
struct GenerationRecord {
    std::string example_id;
    std::string db_id;
    std::string sql;
    std::string raw;
    std::size_t prompt_bytes = 0;
    std::vector<std::string> ds_ids;
};

std::vector<EvalExample> load_examples_artifact(const std::filesystem::path& path);
void save_examples_artifact(std::span<const EvalExample> examples,
                            const std::filesystem::path& path);

std::vector<RetrievalRecord> load_retrievals_artifact(const std::filesystem::path& path);
std::vector<GenerationRecord> load_generations_artifact(const std::filesystem::path& path);

/// Factories honoring the embedding/llm config blocks.
std::unique_ptr<EmbeddingProvider> make_provider(const EmbeddingConfig& config);
std::unique_ptr<LlmClient> make_llm(const LlmConfig& config);

/// Options consumed only by the `review` subcommand.
struct ReviewOptions {
    bool list = false;
    std::vector<std::string> accept_ids;
    std::string edit_id;
    std::string edit_text_part;
    std::string edit_sql_part;
    std::filesystem::path edits_file; // JSONL {"id","text_part","sql_part"}
};

int run_ingest(const PipelineConfig& config);
int run_split(const PipelineConfig& config);
int run_structure(const PipelineConfig& config);
int run_review(const PipelineConfig& config, const ReviewOptions& options,
               std::string& listing_out);
int run_index(const PipelineConfig& config);
int run_retrieve(const PipelineConfig& config);
int run_generate(const PipelineConfig& config);
/// Exit 0 only when every evaluated example lands in {match, mismatch}.
int run_eval(const PipelineConfig& config);
int run_tune(const PipelineConfig& config);

} // namespace dsr
