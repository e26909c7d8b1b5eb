#include "dsr/repository.hpp"

#include "dsr/errors.hpp"

#include "json.hpp"

#include <fstream>

namespace dsr {

using nlohmann::json;

bool Repository::contains(std::string_view id) const {
    return by_id_.count(std::string(id)) != 0;
}

const StructuredDS& Repository::at(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    if (it == by_id_.end())
        throw NotFoundError("no structured statement with id " + std::string(id));
    return statements_[it->second];
}

void Repository::add(StructuredDS ds) {
    if (index_ready_)
        throw ContractError("repository is indexed; mutation is not allowed");
    if (by_id_.count(ds.id))
        throw IntegrityError("duplicate statement id " + ds.id);
    by_id_.emplace(ds.id, statements_.size());
    statements_.push_back(std::move(ds));
    recompute_bounds();
}

void Repository::edit(std::string_view id, std::string text_part, std::string sql_part) {
    if (index_ready_)
        throw ContractError("repository is indexed; mutation is not allowed");
    auto it = by_id_.find(std::string(id));
    if (it == by_id_.end())
        throw NotFoundError("no structured statement with id " + std::string(id));

    StructuredDS& ds = statements_[it->second];
    // Validate and derive via make_structured, then keep the original id:
    // an edited statement stays addressable under the id the DBA saw.
    StructuredDS updated = make_structured(db_id_, ds.source_id, std::move(text_part),
                                           std::move(sql_part), ReviewStatus::Edited);
    updated.id = ds.id;
    ds = std::move(updated);
    recompute_bounds();
}

void Repository::accept(std::string_view id) {
    auto it = by_id_.find(std::string(id));
    if (it == by_id_.end())
        throw NotFoundError("no structured statement with id " + std::string(id));
    statements_[it->second].review_status = ReviewStatus::Accepted;
}

void Repository::recompute_bounds() {
    min_len_ = 0;
    max_len_ = 0;
    for (const auto& ds : statements_) {
        if (min_len_ == 0 || ds.word_length < min_len_) min_len_ = ds.word_length;
        if (ds.word_length > max_len_) max_len_ = ds.word_length;
    }
}

namespace {

json parse_line(const std::string& line, const std::filesystem::path& path,
                std::size_t line_no) {
    json row = json::parse(line, nullptr, false);
    if (row.is_discarded() || !row.is_object())
        throw ParseError(path.string() + ":" + std::to_string(line_no) +
                         ": malformed JSONL record");
    return row;
}

std::string require_string(const json& row, const char* key,
                           const std::filesystem::path& path, std::size_t line_no) {
    if (!row.contains(key) || !row[key].is_string())
        throw ParseError(path.string() + ":" + std::to_string(line_no) +
                         ": missing string field \"" + key + "\"");
    return row[key].get<std::string>();
}

std::ofstream open_for_write(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw StorageError("cannot open " + path.string() + " for writing");
    return out;
}

std::ifstream open_for_read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw StorageError("cannot open " + path.string() + " for reading");
    return in;
}

} // namespace

void save_repository(const Repository& repo, const std::filesystem::path& path) {
    std::ofstream out = open_for_write(path);
    out << json{{"record", "header"}, {"db_id", repo.db_id()}}.dump() << '\n';
    for (const auto& ds : repo.statements()) {
        out << json{{"record", "ds"},
                    {"id", ds.id},
                    {"source_id", ds.source_id},
                    {"text_part", ds.text_part},
                    {"sql_part", ds.sql_part},
                    {"review_status", to_string(ds.review_status)}}
                   .dump()
            << '\n';
    }
    if (!out.flush())
        throw StorageError("write failure on " + path.string());
}

Repository load_repository(const std::filesystem::path& path) {
    std::ifstream in = open_for_read(path);

    Repository repo;
    std::string line;
    std::size_t line_no = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json row = parse_line(line, path, line_no);
        std::string record = require_string(row, "record", path, line_no);
        if (record == "header") {
            if (saw_header)
                throw ParseError(path.string() + ":" + std::to_string(line_no) +
                                 ": repeated header record");
            saw_header = true;
            repo = Repository(require_string(row, "db_id", path, line_no));
        } else if (record == "ds") {
            if (!saw_header)
                throw ParseError(path.string() + ":" + std::to_string(line_no) +
                                 ": statement record before header");
            StructuredDS ds;
            try {
                ds = make_structured(repo.db_id(),
                                     require_string(row, "source_id", path, line_no),
                                     require_string(row, "text_part", path, line_no),
                                     require_string(row, "sql_part", path, line_no),
                                     review_status_from_string(
                                         require_string(row, "review_status", path, line_no)));
            } catch (const MalformedStatementError& e) {
                throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " +
                                 e.what());
            }
            ds.id = require_string(row, "id", path, line_no);
            repo.add(ds);
        } else {
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": unknown record type \"" + record + "\"");
        }
    }
    if (!saw_header)
        throw ParseError(path.string() + ": missing header record");
    return repo;
}

bool NlRepository::contains(std::string_view id) const {
    return by_id_.count(std::string(id)) != 0;
}

const NLDomainStatement& NlRepository::at(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    if (it == by_id_.end())
        throw NotFoundError("no NL statement with id " + std::string(id));
    return statements_[it->second];
}

std::string NlRepository::add(std::string text, DsCategory category) {
    std::string normalized = normalized_statement_text(text);
    if (normalized.empty())
        throw MalformedStatementError("NL statement is empty");

    std::string id = nl_statement_id(db_id_, normalized);
    auto it = by_id_.find(id);
    if (it != by_id_.end()) return id;

    NLDomainStatement st;
    st.id = id;
    st.db_id = db_id_;
    st.text = std::move(normalized);
    st.category = category;
    by_id_.emplace(id, statements_.size());
    statements_.push_back(std::move(st));
    return id;
}

void save_nl_repository(const NlRepository& repo, const std::filesystem::path& path) {
    std::ofstream out = open_for_write(path);
    out << json{{"record", "header"}, {"db_id", repo.db_id()}}.dump() << '\n';
    for (const auto& st : repo.statements()) {
        out << json{{"record", "nl"},
                    {"id", st.id},
                    {"text", st.text},
                    {"category", to_string(st.category)}}
                   .dump()
            << '\n';
    }
    if (!out.flush())
        throw StorageError("write failure on " + path.string());
}

NlRepository load_nl_repository(const std::filesystem::path& path) {
    std::ifstream in = open_for_read(path);

    NlRepository repo;
    std::string line;
    std::size_t line_no = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json row = parse_line(line, path, line_no);
        std::string record = require_string(row, "record", path, line_no);
        if (record == "header") {
            if (saw_header)
                throw ParseError(path.string() + ":" + std::to_string(line_no) +
                                 ": repeated header record");
            saw_header = true;
            repo = NlRepository(require_string(row, "db_id", path, line_no));
        } else if (record == "nl") {
            if (!saw_header)
                throw ParseError(path.string() + ":" + std::to_string(line_no) +
                                 ": statement record before header");
            std::string id = require_string(row, "id", path, line_no);
            std::string stored =
                repo.add(require_string(row, "text", path, line_no),
                         ds_category_from_string(require_string(row, "category", path, line_no)));
            if (stored != id)
                throw IntegrityError(path.string() + ":" + std::to_string(line_no) +
                                     ": id does not match content hash");
        } else {
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": unknown record type \"" + record + "\"");
        }
    }
    if (!saw_header)
        throw ParseError(path.string() + ": missing header record");
    return repo;
}

} // namespace dsr
