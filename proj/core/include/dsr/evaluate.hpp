#pragma once

#include "dsr/retrieve.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace dsr {

enum class ExecStatus { Match, Mismatch, PredError, GoldError, Timeout };
std::string to_string(ExecStatus s);
ExecStatus exec_status_from_string(std::string_view s);

struct ExecOutcome {
    ExecStatus status = ExecStatus::GoldError;
    std::vector<std::string> pred_rows; // sorted, deduped row digests
    std::vector<std::string> gold_rows;
    std::string error; // database message for the *Error/Timeout statuses
};

/// Runs both statements read-only against the database and compares the
/// result sets (order-insensitive across rows, order-sensitive within a
/// row, duplicates collapsed). Gold runs first; if it fails or times out
/// the outcome is gold_error regardless of pred. Throws StorageError when
/// the database file cannot be opened.
ExecOutcome execution_accuracy(const std::string& pred_sql, const std::string& gold_sql,
                               const std::filesystem::path& db_file,
                               double timeout_seconds = 30.0);

struct F1 {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool empty_gold = false; // (1,1,1) by convention, excluded from means
};

/// Truncates the ranked ids to K=|gold_ids| and counts distinct gold hits.
F1 evidence_f1(std::span<const std::string> ranked_ids,
               const std::set<std::string>& gold_ids);

/// Same metric over a retrieval result, matching by source identity
/// (source_id when present, else ds_id).
F1 evidence_f1(std::span<const ScoredDS> retrieved,
               const std::set<std::string>& gold_ids);

enum class SplitLabel { Unset, In, Out };
std::string to_string(SplitLabel s);
SplitLabel split_label_from_string(std::string_view s);

struct ExampleResult {
    std::string example_id;
    SplitLabel split = SplitLabel::Unset;
    bool out_no = false; // meaningful only for Out
    std::optional<ExecStatus> exec;
    std::optional<F1> f1;
};

struct SplitReport {
    std::size_t count = 0;
    std::map<std::string, std::size_t> status_counts;
    std::size_t exec_evaluated = 0;      // examples with an exec outcome
    std::optional<double> accuracy;      // match / (exec_evaluated - gold_error)
    std::optional<double> mean_f1;       // over non-empty-gold F1s
    std::size_t f1_counted = 0;
    std::size_t f1_empty_gold = 0;
};

struct Report {
    // Keys among {"IN", "OUT", "OUT-NO"}; OUT-NO rows also count in OUT.
    // Absent splits are absent, not zero.
    std::map<std::string, SplitReport> splits;
    SplitReport overall;
};

Report aggregate(std::span<const ExampleResult> results);

/// Aligned-column rendering for humans.
std::string report_to_text(const Report& report);

/// Stable-key JSON rendering for machines.
std::string report_to_json(const Report& report);

} // namespace dsr
