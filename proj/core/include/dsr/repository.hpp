#pragma once

#include "dsr/types.hpp"

#include <cstddef>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace dsr {

/// Ordered collection of the structured statements for one database.
/// Length bounds are maintained on every mutation. Immutable once an
/// embedding index has been attached; concurrent readers are then safe.
class Repository {
public:
    Repository() = default;
    explicit Repository(std::string db_id) : db_id_(std::move(db_id)) {}

    const std::string& db_id() const noexcept { return db_id_; }
    const std::vector<StructuredDS>& statements() const noexcept { return statements_; }
    std::size_t size() const noexcept { return statements_.size(); }
    bool empty() const noexcept { return statements_.empty(); }

    /// Minimum/maximum word_length over statements; both 0 when empty.
    std::size_t min_len() const noexcept { return min_len_; }
    std::size_t max_len() const noexcept { return max_len_; }

    bool index_ready() const noexcept { return index_ready_; }
    void set_index_ready(bool ready) noexcept { index_ready_ = ready; }

    bool contains(std::string_view id) const;
    const StructuredDS& at(std::string_view id) const; // NotFoundError
    const StructuredDS& at(std::size_t pos) const { return statements_.at(pos); }

    /// Appends a statement. Throws IntegrityError on duplicate id,
    /// ContractError when the repository is already indexed.
    void add(StructuredDS ds);

    /// Replaces text_part/sql_part of an existing statement, recomputing
    /// derived fields and setting review_status. Throws NotFoundError,
    /// MalformedStatementError, ContractError (indexed repository).
    void edit(std::string_view id, std::string text_part, std::string sql_part);

    /// Marks an existing machine statement as reviewed-and-kept.
    void accept(std::string_view id);

private:
    void recompute_bounds();

    std::string db_id_;
    std::vector<StructuredDS> statements_;
    std::unordered_map<std::string, std::size_t> by_id_;
    std::size_t min_len_ = 0;
    std::size_t max_len_ = 0;
    bool index_ready_ = false;
};

/// Writes one header record plus one record per statement as JSONL.
/// Derived fields are not stored. Throws StorageError with the path.
void save_repository(const Repository& repo, const std::filesystem::path& path);

/// Loads a repository saved by save_repository, recomputing derived
/// fields; index_ready starts false. Throws StorageError, ParseError
/// (with line number), IntegrityError (duplicate id).
Repository load_repository(const std::filesystem::path& path);

/// NL-statement store for one database, same JSONL idea with
/// {"record":"nl"} rows. Preserves insertion order, dedups by
/// whitespace-normalized text.
class NlRepository {
public:
    NlRepository() = default;
    explicit NlRepository(std::string db_id) : db_id_(std::move(db_id)) {}

    const std::string& db_id() const noexcept { return db_id_; }
    const std::vector<NLDomainStatement>& statements() const noexcept { return statements_; }
    std::size_t size() const noexcept { return statements_.size(); }

    bool contains(std::string_view id) const;
    const NLDomainStatement& at(std::string_view id) const;

    /// Returns the id actually stored: the existing one when the
    /// normalized text was already present.
    std::string add(std::string text, DsCategory category = DsCategory::Unknown);

private:
    std::string db_id_;
    std::vector<NLDomainStatement> statements_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

void save_nl_repository(const NlRepository& repo, const std::filesystem::path& path);
NlRepository load_nl_repository(const std::filesystem::path& path);

} // namespace dsr
