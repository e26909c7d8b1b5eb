#include "dsr/dataset.hpp"

#include "dsr/errors.hpp"
#include "dsr/hash.hpp"

#include "json.hpp"
#include <sqlite3.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <unordered_map>

namespace dsr {

using nlohmann::json;

std::vector<EvalExample> load_bird(const std::filesystem::path& json_path) {
    std::ifstream in(json_path);
    if (!in) throw StorageError("cannot open dataset " + json_path.string());
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_array())
        throw ParseError("dataset " + json_path.string() + " is not a JSON array");

    auto field = [&](const json& row, const char* key, std::size_t idx) -> std::string {
        if (!row.contains(key) || !row[key].is_string())
            throw ParseError("dataset " + json_path.string() + ": row " +
                             std::to_string(idx) + " lacks string field \"" + key + "\"");
        return row[key].get<std::string>();
    };

    std::vector<EvalExample> examples;
    examples.reserve(doc.size());
    for (std::size_t idx = 0; idx < doc.size(); ++idx) {
        const json& row = doc[idx];
        if (!row.is_object())
            throw ParseError("dataset " + json_path.string() + ": row " +
                             std::to_string(idx) + " is not an object");
        EvalExample ex;
        ex.question = field(row, "question", idx);
        ex.gold_sql = field(row, "SQL", idx);
        ex.db_id = field(row, "db_id", idx);

        std::string evidence = field(row, "evidence", idx);
        std::size_t start = 0;
        while (start <= evidence.size()) {
            std::size_t nl = evidence.find('\n', start);
            std::string piece = nl == std::string::npos
                                    ? evidence.substr(start)
                                    : evidence.substr(start, nl - start);
            std::string normalized = normalized_statement_text(piece);
            if (!normalized.empty()) ex.gold_evidence_texts.push_back(std::move(normalized));
            if (nl == std::string::npos) break;
            start = nl + 1;
        }

        if (row.contains("question_id") && row["question_id"].is_number())
            ex.example_id = std::to_string(row["question_id"].get<long long>());
        else if (row.contains("question_id") && row["question_id"].is_string())
            ex.example_id = row["question_id"].get<std::string>();
        else
            ex.example_id = "q" + std::to_string(idx);

        examples.push_back(std::move(ex));
    }
    return examples;
}

void build_splits(std::vector<EvalExample>& examples, double in_fraction,
                  std::uint64_t seed) {
    if (!(in_fraction > 0.0 && in_fraction < 1.0))
        throw ConfigError("in_fraction must be in (0, 1), got " +
                          std::to_string(in_fraction));

    std::map<std::string, std::vector<std::size_t>> by_db;
    for (std::size_t i = 0; i < examples.size(); ++i)
        by_db[examples[i].db_id].push_back(i);

    for (auto& [db_id, indices] : by_db) {
        std::mt19937_64 gen(seed ^ fnv1a64(db_id));
        // Explicit Fisher-Yates: std::shuffle's sequence is not pinned by
        // the standard, and splits must reproduce everywhere.
        for (std::size_t i = indices.size(); i-- > 1;)
            std::swap(indices[i], indices[gen() % (i + 1)]);

        std::size_t n_in = static_cast<std::size_t>(
            std::ceil(in_fraction * static_cast<double>(indices.size())));
        n_in = std::min(n_in, indices.size());
        for (std::size_t pos = 0; pos < indices.size(); ++pos) {
            examples[indices[pos]].split = pos < n_in ? SplitLabel::In : SplitLabel::Out;
            examples[indices[pos]].out_no = false;
        }
    }
}

NlRepository build_repository_from_in(std::span<EvalExample> examples,
                                      const std::string& db_id) {
    NlRepository repo(db_id);
    for (const auto& ex : examples) {
        if (ex.db_id != db_id || ex.split != SplitLabel::In) continue;
        for (const auto& text : ex.gold_evidence_texts) repo.add(text);
    }
    for (auto& ex : examples) {
        if (ex.db_id != db_id) continue;
        ex.gold_ds_ids.clear();
        for (const auto& text : ex.gold_evidence_texts) {
            std::string id = nl_statement_id(db_id, text);
            if (repo.contains(id)) ex.gold_ds_ids.push_back(id);
        }
    }
    return repo;
}

void mark_out_no(std::span<EvalExample> examples, const NlRepository& repo) {
    for (auto& ex : examples) {
        if (ex.db_id != repo.db_id() || ex.split != SplitLabel::Out) continue;
        bool overlap = false;
        for (const auto& text : ex.gold_evidence_texts)
            if (repo.contains(nl_statement_id(repo.db_id(), text))) {
                overlap = true;
                break;
            }
        ex.out_no = !overlap;
    }
}

std::vector<std::string> db_ids(std::span<const EvalExample> examples) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& ex : examples)
        if (seen.insert(ex.db_id).second) out.push_back(ex.db_id);
    return out;
}

namespace {

struct Db {
    sqlite3* handle = nullptr;

    explicit Db(const std::filesystem::path& file) {
        if (!std::filesystem::exists(file))
            throw StorageError("database file does not exist: " + file.string());
        if (sqlite3_open_v2(file.string().c_str(), &handle, SQLITE_OPEN_READONLY,
                            nullptr) != SQLITE_OK) {
            std::string msg = handle ? sqlite3_errmsg(handle) : "open failed";
            sqlite3_close(handle);
            throw StorageError("cannot open database " + file.string() + ": " + msg);
        }
    }
    ~Db() { sqlite3_close(handle); }
    Db(const Db&) = delete;
    Db& operator=(const Db&) = delete;
};

std::vector<std::vector<std::string>> query_rows(sqlite3* db, const std::string& sql) {
    sqlite3_stmt* stmt = nullptr;
    if (sqlite3_prepare_v2(db, sql.c_str(), -1, &stmt, nullptr) != SQLITE_OK)
        throw StorageError(std::string("schema query failed: ") + sqlite3_errmsg(db));
    std::vector<std::vector<std::string>> rows;
    while (sqlite3_step(stmt) == SQLITE_ROW) {
        std::vector<std::string> row;
        for (int c = 0; c < sqlite3_column_count(stmt); ++c) {
            const unsigned char* t = sqlite3_column_text(stmt, c);
            row.emplace_back(t ? reinterpret_cast<const char*>(t) : "");
        }
        rows.push_back(std::move(row));
    }
    sqlite3_finalize(stmt);
    return rows;
}

std::string sql_quote(const std::string& name) {
    std::string out = "'";
    for (char c : name) {
        out += c;
        if (c == '\'') out += '\'';
    }
    out += "'";
    return out;
}

// Minimal RFC-4180 reader: quoted fields, doubled quotes, embedded
// newlines. Returns rows of cells.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StorageError("cannot open " + path.string());
    std::string data((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());

    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string cell;
    bool quoted = false;
    std::size_t i = 0;
    auto end_cell = [&]() {
        row.push_back(std::move(cell));
        cell.clear();
    };
    auto end_row = [&]() {
        end_cell();
        bool blank = row.size() == 1 && row[0].empty();
        if (!blank) rows.push_back(std::move(row));
        row.clear();
    };
    while (i < data.size()) {
        char c = data[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < data.size() && data[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell += c;
            }
        } else if (c == '"' && cell.empty()) {
            quoted = true;
        } else if (c == ',') {
            end_cell();
        } else if (c == '\n') {
            if (!cell.empty() && cell.back() == '\r') cell.pop_back();
            end_row();
        } else {
            cell += c;
        }
        ++i;
    }
    if (!cell.empty() || !row.empty()) {
        if (!cell.empty() && cell.back() == '\r') cell.pop_back();
        end_row();
    }
    return rows;
}

} // namespace

SchemaDescriptor load_schema_from_sqlite(const std::filesystem::path& db_file,
                                         const std::string& db_id) {
    Db db(db_file);
    SchemaDescriptor schema;
    schema.db_id = db_id;

    auto tables = query_rows(db.handle,
                             "SELECT name FROM sqlite_master WHERE type='table' "
                             "AND name NOT LIKE 'sqlite_%' ORDER BY rowid");
    for (const auto& trow : tables) {
        TableDescriptor table;
        table.name = trow[0];

        for (const auto& crow :
             query_rows(db.handle, "PRAGMA table_info(" + sql_quote(table.name) + ")")) {
            // cid, name, type, notnull, dflt_value, pk
            ColumnDescriptor col;
            col.name = crow[1];
            col.sql_type = crow[2];
            col.is_primary_key = crow[5] != "0";
            table.columns.push_back(std::move(col));
        }

        for (const auto& frow : query_rows(
                 db.handle, "PRAGMA foreign_key_list(" + sql_quote(table.name) + ")")) {
            // id, seq, table, from, to, ...
            const std::string& target_table = frow[2];
            const std::string& from = frow[3];
            const std::string& to = frow[4];
            for (auto& col : table.columns)
                if (col.name == from && !to.empty())
                    col.foreign_key_target = target_table + "." + to;
        }
        schema.tables.push_back(std::move(table));
    }
    return schema;
}

void apply_description_csvs(SchemaDescriptor& schema,
                            const std::filesystem::path& description_dir) {
    if (!std::filesystem::is_directory(description_dir)) return;

    std::unordered_map<std::string, TableDescriptor*> tables;
    for (auto& t : schema.tables) tables[t.name] = &t;

    for (const auto& entry : std::filesystem::directory_iterator(description_dir)) {
        if (entry.path().extension() != ".csv") continue;
        auto it = tables.find(entry.path().stem().string());
        if (it == tables.end()) continue;

        auto rows = read_csv(entry.path());
        if (rows.empty()) continue;

        const auto& header = rows[0];
        auto col_index = [&](std::string_view name) -> std::size_t {
            for (std::size_t c = 0; c < header.size(); ++c)
                if (header[c] == name) return c;
            return header.size();
        };
        std::size_t name_col = col_index("original_column_name");
        std::size_t desc_col = col_index("column_description");
        std::size_t value_col = col_index("value_description");
        if (name_col == header.size())
            throw ParseError(entry.path().string() +
                             ": missing original_column_name header");

        for (std::size_t r = 1; r < rows.size(); ++r) {
            const auto& row = rows[r];
            if (name_col >= row.size()) continue;
            std::string cname = normalized_statement_text(row[name_col]);
            for (auto& col : it->second->columns) {
                if (col.name != cname) continue;
                if (desc_col < row.size())
                    col.description = normalized_statement_text(row[desc_col]);
                if (value_col < row.size())
                    col.value_description = normalized_statement_text(row[value_col]);
            }
        }
    }
}

std::filesystem::path database_file(const std::filesystem::path& db_dir,
                                    const std::string& db_id) {
    return db_dir / db_id / (db_id + ".sqlite");
}

SchemaDescriptor load_schema(const std::filesystem::path& db_dir,
                             const std::string& db_id) {
    SchemaDescriptor schema = load_schema_from_sqlite(database_file(db_dir, db_id), db_id);
    apply_description_csvs(schema, db_dir / db_id / "database_description");
    return schema;
}

} // namespace dsr
