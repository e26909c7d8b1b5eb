#include "dsr/evaluate.hpp"

#include "dsr/errors.hpp"

#include "json.hpp"
#include <sqlite3.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <unordered_set>

namespace dsr {

using nlohmann::json;

std::string to_string(ExecStatus s) {
    switch (s) {
        case ExecStatus::Match: return "match";
        case ExecStatus::Mismatch: return "mismatch";
        case ExecStatus::PredError: return "pred_error";
        case ExecStatus::GoldError: return "gold_error";
        case ExecStatus::Timeout: return "timeout";
    }
    return "gold_error";
}

ExecStatus exec_status_from_string(std::string_view s) {
    if (s == "match") return ExecStatus::Match;
    if (s == "mismatch") return ExecStatus::Mismatch;
    if (s == "pred_error") return ExecStatus::PredError;
    if (s == "gold_error") return ExecStatus::GoldError;
    if (s == "timeout") return ExecStatus::Timeout;
    throw ParseError("unknown exec status: " + std::string(s));
}

std::string to_string(SplitLabel s) {
    switch (s) {
        case SplitLabel::In: return "IN";
        case SplitLabel::Out: return "OUT";
        case SplitLabel::Unset: break;
    }
    return "";
}

SplitLabel split_label_from_string(std::string_view s) {
    if (s == "IN") return SplitLabel::In;
    if (s == "OUT") return SplitLabel::Out;
    if (s.empty()) return SplitLabel::Unset;
    throw ParseError("unknown split label: " + std::string(s));
}

namespace {

struct Db {
    sqlite3* handle = nullptr;

    explicit Db(const std::filesystem::path& file) {
        if (!std::filesystem::exists(file))
            throw StorageError("database file does not exist: " + file.string());
        int rc = sqlite3_open_v2(file.string().c_str(), &handle, SQLITE_OPEN_READONLY,
                                 nullptr);
        if (rc != SQLITE_OK) {
            std::string msg = handle ? sqlite3_errmsg(handle) : "open failed";
            sqlite3_close(handle);
            throw StorageError("cannot open database " + file.string() + ": " + msg);
        }
    }
    ~Db() { sqlite3_close(handle); }
    Db(const Db&) = delete;
    Db& operator=(const Db&) = delete;
};

struct QueryRun {
    bool ok = false;
    bool timed_out = false;
    std::string error;
    std::vector<std::string> rows; // digests, sorted and deduped
};

// One value rendered into a row digest. Integral REALs and INTEGERs get
// the same digest so 1 and 1.0 compare equal, as database equality would.
void digest_value(sqlite3_stmt* stmt, int col, std::string& out) {
    switch (sqlite3_column_type(stmt, col)) {
        case SQLITE_NULL:
            out += "n:";
            break;
        case SQLITE_INTEGER:
            out += "i:";
            out += std::to_string(sqlite3_column_int64(stmt, col));
            break;
        case SQLITE_FLOAT: {
            double v = sqlite3_column_double(stmt, col);
            if (std::nearbyint(v) == v && std::abs(v) < 9007199254740992.0) {
                out += "i:";
                out += std::to_string(static_cast<long long>(v));
            } else {
                char buf[40];
                std::snprintf(buf, sizeof(buf), "f:%.17g", v);
                out += buf;
            }
            break;
        }
        case SQLITE_TEXT: {
            const unsigned char* t = sqlite3_column_text(stmt, col);
            int len = sqlite3_column_bytes(stmt, col);
            out += "t:";
            out.append(reinterpret_cast<const char*>(t), static_cast<std::size_t>(len));
            break;
        }
        case SQLITE_BLOB: {
            const void* b = sqlite3_column_blob(stmt, col);
            int len = sqlite3_column_bytes(stmt, col);
            out += "b:";
            const auto* bytes = static_cast<const unsigned char*>(b);
            char hex[3];
            for (int i = 0; i < len; ++i) {
                std::snprintf(hex, sizeof(hex), "%02x", bytes[i]);
                out += hex;
            }
            break;
        }
    }
    out += '\x1f';
}

QueryRun run_query(sqlite3* db, const std::string& sql, double timeout_seconds) {
    QueryRun run;

    using Clock = std::chrono::steady_clock;
    struct Deadline {
        Clock::time_point at;
        bool hit = false;
    } deadline{Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                  std::chrono::duration<double>(timeout_seconds))};

    sqlite3_progress_handler(
        db, 1000,
        [](void* p) -> int {
            auto* d = static_cast<Deadline*>(p);
            if (Clock::now() >= d->at) {
                d->hit = true;
                return 1; // interrupt
            }
            return 0;
        },
        &deadline);

    sqlite3_stmt* stmt = nullptr;
    int rc = sqlite3_prepare_v2(db, sql.c_str(), -1, &stmt, nullptr);
    if (rc != SQLITE_OK) {
        run.error = sqlite3_errmsg(db);
        sqlite3_progress_handler(db, 0, nullptr, nullptr);
        return run;
    }
    if (!stmt) { // input was only whitespace/comments
        run.error = "no SQL statement";
        sqlite3_progress_handler(db, 0, nullptr, nullptr);
        return run;
    }

    std::unordered_set<std::string> seen;
    while (true) {
        rc = sqlite3_step(stmt);
        if (rc == SQLITE_ROW) {
            std::string digest;
            int cols = sqlite3_column_count(stmt);
            for (int c = 0; c < cols; ++c) digest_value(stmt, c, digest);
            if (seen.insert(digest).second) run.rows.push_back(std::move(digest));
            continue;
        }
        if (rc == SQLITE_DONE) {
            run.ok = true;
        } else if (rc == SQLITE_INTERRUPT || deadline.hit) {
            run.timed_out = true;
            run.error = "statement timeout";
        } else {
            run.error = sqlite3_errmsg(db);
        }
        break;
    }
    sqlite3_finalize(stmt);
    sqlite3_progress_handler(db, 0, nullptr, nullptr);
    if (deadline.hit && !run.ok) {
        run.timed_out = true;
        if (run.error.empty()) run.error = "statement timeout";
    }
    std::sort(run.rows.begin(), run.rows.end());
    return run;
}

} // namespace

ExecOutcome execution_accuracy(const std::string& pred_sql, const std::string& gold_sql,
                               const std::filesystem::path& db_file,
                               double timeout_seconds) {
    Db db(db_file);

    ExecOutcome outcome;

    QueryRun gold = run_query(db.handle, gold_sql, timeout_seconds);
    if (!gold.ok) {
        outcome.status = ExecStatus::GoldError;
        outcome.error = gold.error;
        return outcome;
    }
    outcome.gold_rows = std::move(gold.rows);

    QueryRun pred = run_query(db.handle, pred_sql, timeout_seconds);
    if (!pred.ok) {
        outcome.status = pred.timed_out ? ExecStatus::Timeout : ExecStatus::PredError;
        outcome.error = pred.error;
        return outcome;
    }
    outcome.pred_rows = std::move(pred.rows);

    outcome.status = outcome.pred_rows == outcome.gold_rows ? ExecStatus::Match
                                                            : ExecStatus::Mismatch;
    return outcome;
}

F1 evidence_f1(std::span<const std::string> ranked_ids,
               const std::set<std::string>& gold_ids) {
    F1 out;
    if (gold_ids.empty()) {
        out.precision = out.recall = out.f1 = 1.0;
        out.empty_gold = true;
        return out;
    }
    const std::size_t k = gold_ids.size();
    std::set<std::string> hits;
    for (std::size_t i = 0; i < ranked_ids.size() && i < k; ++i)
        if (gold_ids.count(ranked_ids[i])) hits.insert(ranked_ids[i]);

    const std::size_t considered = std::min(ranked_ids.size(), k);
    out.precision = considered == 0
                        ? 0.0
                        : static_cast<double>(hits.size()) / static_cast<double>(considered);
    out.recall = static_cast<double>(hits.size()) / static_cast<double>(k);
    out.f1 = (out.precision + out.recall == 0.0)
                 ? 0.0
                 : 2.0 * out.precision * out.recall / (out.precision + out.recall);
    return out;
}

F1 evidence_f1(std::span<const ScoredDS> retrieved, const std::set<std::string>& gold_ids) {
    std::vector<std::string> ids;
    ids.reserve(retrieved.size());
    for (const auto& r : retrieved)
        ids.push_back(r.source_id.empty() ? r.ds_id : r.source_id);
    return evidence_f1(ids, gold_ids);
}

namespace {

void fold_into(SplitReport& report, const ExampleResult& r) {
    ++report.count;
    if (r.exec) {
        ++report.exec_evaluated;
        ++report.status_counts[to_string(*r.exec)];
    }
    if (r.f1) {
        if (r.f1->empty_gold)
            ++report.f1_empty_gold;
        else
            ++report.f1_counted;
    }
}

void finish(SplitReport& report, double f1_sum, std::size_t matches,
            std::size_t gold_errors) {
    if (report.f1_counted > 0)
        report.mean_f1 = f1_sum / static_cast<double>(report.f1_counted);
    std::size_t denom = report.exec_evaluated - gold_errors;
    if (denom > 0)
        report.accuracy = static_cast<double>(matches) / static_cast<double>(denom);
}

} // namespace

Report aggregate(std::span<const ExampleResult> results) {
    Report report;
    std::map<std::string, double> f1_sum;
    std::map<std::string, std::size_t> matches, gold_errors;

    auto tally = [&](const std::string& key, const ExampleResult& r) {
        fold_into(report.splits[key], r);
        if (r.f1 && !r.f1->empty_gold) f1_sum[key] += r.f1->f1;
        if (r.exec && *r.exec == ExecStatus::Match) ++matches[key];
        if (r.exec && *r.exec == ExecStatus::GoldError) ++gold_errors[key];
    };

    for (const auto& r : results) {
        fold_into(report.overall, r);
        if (r.f1 && !r.f1->empty_gold) f1_sum["*"] += r.f1->f1;
        if (r.exec && *r.exec == ExecStatus::Match) ++matches["*"];
        if (r.exec && *r.exec == ExecStatus::GoldError) ++gold_errors["*"];

        if (r.split == SplitLabel::In) tally("IN", r);
        if (r.split == SplitLabel::Out) {
            tally("OUT", r);
            if (r.out_no) tally("OUT-NO", r);
        }
    }

    finish(report.overall, f1_sum["*"], matches["*"], gold_errors["*"]);
    for (auto& [key, split] : report.splits)
        finish(split, f1_sum[key], matches[key], gold_errors[key]);
    return report;
}

namespace {

json split_to_json(const SplitReport& s) {
    json out;
    out["count"] = s.count;
    out["exec_evaluated"] = s.exec_evaluated;
    out["status_counts"] = s.status_counts;
    if (s.accuracy)
        out["accuracy"] = *s.accuracy;
    else
        out["accuracy"] = nullptr;
    if (s.mean_f1)
        out["mean_f1"] = *s.mean_f1;
    else
        out["mean_f1"] = nullptr;
    out["f1_counted"] = s.f1_counted;
    out["f1_empty_gold"] = s.f1_empty_gold;
    return out;
}

std::string fmt_opt(const std::optional<double>& v) {
    if (!v) return "-";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", *v);
    return buf;
}

} // namespace

std::string report_to_json(const Report& report) {
    json out;
    out["overall"] = split_to_json(report.overall);
    json splits = json::object();
    for (const auto& [key, split] : report.splits) splits[key] = split_to_json(split);
    out["splits"] = splits;
    return out.dump(2) + "\n";
}

std::string report_to_text(const Report& report) {
    std::string out;
    char line[160];
    std::snprintf(line, sizeof(line), "%-8s %7s %9s %9s %7s %9s %7s %9s %8s\n", "split",
                  "count", "accuracy", "mean_f1", "match", "mismatch", "error",
                  "gold_err", "timeout");
    out += line;

    auto emit = [&](const std::string& name, const SplitReport& s) {
        auto count_of = [&](const char* key) {
            auto it = s.status_counts.find(key);
            return it == s.status_counts.end() ? std::size_t{0} : it->second;
        };
        std::snprintf(line, sizeof(line), "%-8s %7zu %9s %9s %7zu %9zu %7zu %9zu %8zu\n",
                      name.c_str(), s.count, fmt_opt(s.accuracy).c_str(),
                      fmt_opt(s.mean_f1).c_str(), count_of("match"), count_of("mismatch"),
                      count_of("pred_error"), count_of("gold_error"), count_of("timeout"));
        out += line;
    };

    for (const auto& [key, split] : report.splits) emit(key, split);
    emit("overall", report.overall);
    return out;
}

} // namespace dsr
