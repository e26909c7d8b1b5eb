#pragma once

#include "dsr/llm.hpp"
#include "dsr/types.hpp"

#include <span>
#include <string>
#include <vector>

namespace dsr {

/// One CREATE TABLE block per table, columns in declaration order:
///   name TYPE [PRIMARY KEY], -- description; value_description
/// Names needing quoting are wrapped in backticks. Deterministic for a
/// fixed schema.
std::string serialize_schema(const SchemaDescriptor& schema);

/// A statement as it appears in the SQL prompt's knowledge block.
struct PromptStatement {
    std::string id;
    std::string text; // already rendered, e.g. "‘x’ refers to q"
};

/// Query + schema + knowledge-block prompt. The knowledge block is
/// omitted entirely when statements is empty; the query goes in verbatim
/// (not canonicalized).
Prompt build_sql_prompt(const std::string& schema_text, const std::string& db_id,
                        const std::string& query,
                        std::span<const PromptStatement> statements);

/// Strips code fences and a leading "SQL:" label, skips any leading prose
/// before the first SQL keyword, and cuts at the first semicolon outside
/// quotes. Throws EmptyGenerationError when nothing remains.
std::string extract_sql(const std::string& raw);

struct GenerationResult {
    std::string sql;
    std::string raw;
    std::size_t prompt_bytes = 0;
    std::vector<std::string> ds_ids_in_context; // prompt order
};

/// Builds the prompt, calls the model once at temperature 0, extracts the
/// SQL. Transport and extraction errors propagate.
GenerationResult generate(const std::string& schema_text, const std::string& db_id,
                          const std::string& query,
                          std::span<const PromptStatement> statements, LlmClient& llm,
                          int max_tokens = 1024);

} // namespace dsr
