#include "dsr/types.hpp"

#include "dsr/errors.hpp"
#include "dsr/hash.hpp"

#include <set>

namespace dsr {

std::string to_string(DsCategory c) {
    switch (c) {
        case DsCategory::CrypticSchemaName: return "cryptic-schema-name";
        case DsCategory::CategoricalValue: return "categorical-value";
        case DsCategory::FormatMismatch: return "format-mismatch";
        case DsCategory::Formula: return "formula";
        case DsCategory::Unknown: break;
    }
    return "unknown";
}

DsCategory ds_category_from_string(std::string_view s) {
    if (s == "cryptic-schema-name") return DsCategory::CrypticSchemaName;
    if (s == "categorical-value") return DsCategory::CategoricalValue;
    if (s == "format-mismatch") return DsCategory::FormatMismatch;
    if (s == "formula") return DsCategory::Formula;
    if (s == "unknown" || s.empty()) return DsCategory::Unknown;
    throw ParseError("unknown DS category: " + std::string(s));
}

std::string to_string(ReviewStatus s) {
    switch (s) {
        case ReviewStatus::Accepted: return "accepted";
        case ReviewStatus::Edited: return "edited";
        case ReviewStatus::Machine: break;
    }
    return "machine";
}

ReviewStatus review_status_from_string(std::string_view s) {
    if (s == "machine") return ReviewStatus::Machine;
    if (s == "accepted") return ReviewStatus::Accepted;
    if (s == "edited") return ReviewStatus::Edited;
    throw ParseError("unknown review status: " + std::string(s));
}

namespace {

std::string trim_copy(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

// Whitespace collapse only; punctuation stays significant for identity.
std::string collapse_ws(std::string_view s) {
    std::string out;
    bool in_gap = true;
    for (char ch : s) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            in_gap = true;
            continue;
        }
        if (in_gap && !out.empty()) out += ' ';
        in_gap = false;
        out += ch;
    }
    return out;
}

} // namespace

std::string normalized_statement_text(std::string_view text) { return collapse_ws(text); }

std::string nl_statement_id(std::string_view db_id, std::string_view text) {
    return content_id({db_id, collapse_ws(text)});
}

std::string structured_id(std::string_view db_id, std::string_view source_id,
                          std::string_view text_part, std::string_view sql_part) {
    return content_id({db_id, source_id, text_part, sql_part});
}

StructuredDS make_structured(std::string db_id, std::string source_id,
                             std::string text_part, std::string sql_part,
                             ReviewStatus status) {
    if (trim_copy(text_part).empty())
        throw MalformedStatementError("structured statement has empty text part");
    if (trim_copy(sql_part).empty())
        throw MalformedStatementError("structured statement has empty SQL part");

    StructuredDS ds;
    ds.source_id = std::move(source_id);
    ds.text_part = std::move(text_part);
    ds.sql_part = std::move(sql_part);
    ds.canonical = canonicalize(ds.text_part);
    ds.word_length = ds.canonical.word_count();
    if (ds.word_length == 0)
        throw MalformedStatementError(
            "text part canonicalizes to nothing: \"" + ds.text_part + "\"");
    ds.review_status = status;
    ds.id = structured_id(db_id, ds.source_id, ds.text_part, ds.sql_part);
    return ds;
}

void validate_schema(const SchemaDescriptor& schema) {
    std::set<std::string> qualified;
    std::set<std::string> table_names;
    for (const auto& t : schema.tables) {
        if (!table_names.insert(t.name).second)
            throw IntegrityError("duplicate table name: " + t.name);
        std::set<std::string> cols;
        for (const auto& c : t.columns) {
            if (!cols.insert(c.name).second)
                throw IntegrityError("duplicate column " + t.name + "." + c.name);
            qualified.insert(t.name + "." + c.name);
        }
    }
    for (const auto& t : schema.tables)
        for (const auto& c : t.columns)
            if (c.foreign_key_target && !qualified.count(*c.foreign_key_target))
                throw IntegrityError("foreign key target not in schema: " +
                                     *c.foreign_key_target);
}

} // namespace dsr
