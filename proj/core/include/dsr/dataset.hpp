#pragma once

#include "dsr/evaluate.hpp"
#include "dsr/repository.hpp"
#include "dsr/types.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace dsr {

/// One benchmark question with its oracle evidence statements.
struct EvalExample {
    std::string example_id;
    std::string db_id;
    std::string question;
    std::string gold_sql;
    std::vector<std::string> gold_evidence_texts;
    std::vector<std::string> gold_ds_ids; // filled by build_repository_from_in
    SplitLabel split = SplitLabel::Unset;
    bool out_no = false;
};

/// Reads a BirdSQL-style JSON array (question, evidence, SQL, db_id,
/// optional question_id). Evidence strings are split on newlines; an empty
/// evidence becomes an empty list. Missing fields raise ParseError with
/// the row index.
std::vector<EvalExample> load_bird(const std::filesystem::path& json_path);

/// Labels every example IN or OUT with a per-database seeded shuffle;
/// the first ceil(in_fraction * N) of each database's shuffle become IN.
/// The shuffle is Fisher-Yates over std::mt19937_64 seeded with
/// seed ^ fnv1a64(db_id), index j = gen() % (i + 1), so splits reproduce
/// across platforms. Throws ConfigError unless 0 < in_fraction < 1.
void build_splits(std::vector<EvalExample>& examples, double in_fraction,
                  std::uint64_t seed);

/// Union of the IN examples' evidence texts for one database, deduplicated
/// by whitespace-normalized text. Back-fills gold_ds_ids on EVERY example
/// of that database whose evidence text is present, IN or OUT.
NlRepository build_repository_from_in(std::span<EvalExample> examples,
                                      const std::string& db_id);

/// Sets out_no on OUT examples none of whose evidence texts resolve to a
/// repository statement. An OUT example with no evidences at all counts
/// as out_no.
void mark_out_no(std::span<EvalExample> examples, const NlRepository& repo);

/// Distinct db_ids in first-appearance order.
std::vector<std::string> db_ids(std::span<const EvalExample> examples);

/// Schema from the live SQLite file: tables, columns, types, primary
/// keys, foreign keys.
SchemaDescriptor load_schema_from_sqlite(const std::filesystem::path& db_file,
                                         const std::string& db_id);

/// Merges BirdSQL-style description CSVs (<dir>/<table>.csv with columns
/// original_column_name, column_description, value_description) into the
/// schema. Missing directory is fine; malformed CSV rows raise ParseError.
void apply_description_csvs(SchemaDescriptor& schema,
                            const std::filesystem::path& description_dir);

/// <db_dir>/<db_id>/<db_id>.sqlite plus optional
/// <db_dir>/<db_id>/database_description/.
SchemaDescriptor load_schema(const std::filesystem::path& db_dir,
                             const std::string& db_id);

/// Path of the SQLite file for db_id under the BirdSQL layout.
std::filesystem::path database_file(const std::filesystem::path& db_dir,
                                    const std::string& db_id);

} // namespace dsr
