#pragma once

#include "dsr/canonicalize.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace dsr {

/// Failure-mode taxonomy for a domain statement.
enum class DsCategory {
    Unknown,
    CrypticSchemaName,
    CategoricalValue,
    FormatMismatch,
    Formula,
};

std::string to_string(DsCategory c);
DsCategory ds_category_from_string(std::string_view s);

/// Provenance of a structured statement's current content.
enum class ReviewStatus {
    Machine,  // as produced by the structuring model
    Accepted, // reviewed and kept verbatim
    Edited,   // reviewed and rewritten
};

std::string to_string(ReviewStatus s);
ReviewStatus review_status_from_string(std::string_view s);

/// A natural-language domain statement (d_NL) as collected from experts.
struct NLDomainStatement {
    std::string id;
    std::string db_id;
    std::string text;
    DsCategory category = DsCategory::Unknown;
};

/// A structured domain statement of the form "text_part refers to sql_part".
/// canonical_text/word_length are derived from text_part and never persisted.
struct StructuredDS {
    std::string id;
    std::string source_id;
    std::string text_part;
    std::string sql_part;
    CanonicalText canonical;
    std::size_t word_length = 0;
    ReviewStatus review_status = ReviewStatus::Machine;
};

/// Whitespace-collapsed copy of text; the identity used for NL dedup.
std::string normalized_statement_text(std::string_view text);

/// Content-derived id for an NL statement: hash of db_id and the
/// whitespace-normalized text, so re-ingest is idempotent.
std::string nl_statement_id(std::string_view db_id, std::string_view text);

/// Content-derived id for a structured statement. Includes the source id so
/// two NL statements that structure identically stay distinct.
std::string structured_id(std::string_view db_id, std::string_view source_id,
                          std::string_view text_part, std::string_view sql_part);

/// Builds a StructuredDS with derived fields filled in.
/// Throws MalformedStatementError when either part trims to empty.
StructuredDS make_structured(std::string db_id, std::string source_id,
                             std::string text_part, std::string sql_part,
                             ReviewStatus status = ReviewStatus::Machine);

/// One column of a table, with optional expert descriptions.
struct ColumnDescriptor {
    std::string name;
    std::string sql_type;
    std::string description;
    std::string value_description;
    bool is_primary_key = false;
    std::optional<std::string> foreign_key_target; // "table.column"
};

struct TableDescriptor {
    std::string name;
    std::vector<ColumnDescriptor> columns;
};

struct SchemaDescriptor {
    std::string db_id;
    std::vector<TableDescriptor> tables;
};

/// Throws IntegrityError on duplicate table/column names or a dangling
/// foreign_key_target.
void validate_schema(const SchemaDescriptor& schema);

} // namespace dsr
