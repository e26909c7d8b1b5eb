#pragma once

#include "dsr/embedding.hpp"
#include "dsr/llm.hpp"
#include "dsr/repository.hpp"
#include "dsr/types.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace dsr {

/// Delimiter between the text part and the SQL part of a structured
/// statement.
inline constexpr std::string_view kRefersTo = " refers to ";

/// One few-shot exemplar for the structuring prompt.
struct FewShotPair {
    std::string nl;
    std::string structured; // "‘text’ refers to SQL"
};

/// Loads exemplars from a JSON file: [{"nl":...,"structured":...},...].
std::vector<FewShotPair> load_shots(const std::filesystem::path& path);

/// "‘<text_part>’ refers to <sql_part>".
std::string render_structured(const StructuredDS& ds);
std::string render_structured(std::string_view text_part, std::string_view sql_part);

/// Few-shot prompt asking for the templatized form of one statement.
/// Throws ConfigError when shots is empty.
Prompt build_structuring_prompt(const SchemaDescriptor& schema,
                                std::span<const FewShotPair> shots,
                                const NLDomainStatement& d_nl);

/// Splits model output on the first " refers to "; the left side loses
/// surrounding quote characters, the right side is trimmed. Throws
/// UnparseableOutputError (no delimiter) or MalformedStatementError
/// (either side empty).
StructuredDS parse_structured(const std::string& llm_output,
                              const NLDomainStatement& source);

/// Full structuring step for one statement: prompt, model call at
/// temperature 0, parse.
StructuredDS structure_statement(const SchemaDescriptor& schema,
                                 std::span<const FewShotPair> shots,
                                 const NLDomainStatement& d_nl, LlmClient& llm,
                                 int max_tokens = 256);

/// Bag-of-words F1 between the case-folded token bags of a and b.
/// Both empty -> 1.0.
double lexical_overlap(std::string_view a, std::string_view b);

/// Cosine of the two embeddings.
double semantic_overlap(const std::string& a, const std::string& b,
                        EmbeddingProvider& provider, EmbeddingCache* cache = nullptr);

} // namespace dsr
