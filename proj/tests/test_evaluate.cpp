#include "dsr/evaluate.hpp"

#include "dsr/errors.hpp"
#include "support/helpers.hpp"

#include "doctest.h"
#include "json.hpp"
#include <sqlite3.h>

#include <random>
#include <set>
#include <string>
#include <vector>

using namespace dsr;

namespace {

void exec_or_die(sqlite3* db, const char* sql) {
    char* err = nullptr;
    int rc = sqlite3_exec(db, sql, nullptr, nullptr, &err);
    if (rc != SQLITE_OK) {
        std::string msg = err ? err : "unknown";
        sqlite3_free(err);
        FAIL("fixture SQL failed: ", msg);
    }
}

std::filesystem::path make_fixture_db(const testsupport::TempDir& tmp) {
    std::filesystem::path file = tmp.file("people.sqlite");
    sqlite3* db = nullptr;
    REQUIRE(sqlite3_open(file.string().c_str(), &db) == SQLITE_OK);
    exec_or_die(db, "CREATE TABLE people (id INTEGER PRIMARY KEY, name TEXT, score REAL)");
    exec_or_die(db, "INSERT INTO people VALUES (1, 'alice', 10.0)");
    exec_or_die(db, "INSERT INTO people VALUES (2, 'bob', 12.5)");
    exec_or_die(db, "INSERT INTO people VALUES (3, 'carol', 10.0)");
    sqlite3_close(db);
    return file;
}

const char* kInfiniteQuery =
    "WITH RECURSIVE c(x) AS (SELECT 1 UNION ALL SELECT x + 1 FROM c) "
    "SELECT count(*) FROM c";

} // namespace

TEST_CASE("execution comparison is order-insensitive across rows") {
    testsupport::TempDir tmp("exec");
    auto db = make_fixture_db(tmp);

    SUBCASE("identical statements match") {
        auto out = execution_accuracy("SELECT id, name FROM people",
                                      "SELECT id, name FROM people", db);
        CHECK(out.status == ExecStatus::Match);
        CHECK(out.pred_rows.size() == 3);
        CHECK(out.pred_rows == out.gold_rows);
    }

    SUBCASE("row order never matters") {
        auto out = execution_accuracy("SELECT id, name FROM people ORDER BY id DESC",
                                      "SELECT id, name FROM people ORDER BY id ASC", db);
        CHECK(out.status == ExecStatus::Match);
    }

    SUBCASE("column order within a row matters") {
        auto out = execution_accuracy("SELECT name, id FROM people",
                                      "SELECT id, name FROM people", db);
        CHECK(out.status == ExecStatus::Mismatch);
    }

    SUBCASE("different result sets mismatch") {
        auto out = execution_accuracy("SELECT id FROM people WHERE id < 3",
                                      "SELECT id FROM people", db);
        CHECK(out.status == ExecStatus::Mismatch);
    }
}

TEST_CASE("duplicate rows collapse before comparison") {
    testsupport::TempDir tmp("execdup");
    auto db = make_fixture_db(tmp);
    // Two rows carry score 10.0; DISTINCT on the gold side must not matter.
    auto out = execution_accuracy("SELECT score FROM people WHERE score = 10.0",
                                  "SELECT DISTINCT score FROM people WHERE score = 10.0",
                                  db);
    CHECK(out.status == ExecStatus::Match);
    CHECK(out.pred_rows.size() == 1);
}

TEST_CASE("integral reals compare equal to integers") {
    testsupport::TempDir tmp("execnum");
    auto db = make_fixture_db(tmp);

    CHECK(execution_accuracy("SELECT 1", "SELECT 1.0", db).status == ExecStatus::Match);
    CHECK(execution_accuracy("SELECT 2.5", "SELECT 5.0 / 2", db).status ==
          ExecStatus::Match);
    CHECK(execution_accuracy("SELECT 1", "SELECT 1.5", db).status == ExecStatus::Mismatch);
    CHECK(execution_accuracy("SELECT NULL", "SELECT NULL", db).status == ExecStatus::Match);
    CHECK(execution_accuracy("SELECT '1'", "SELECT 1", db).status == ExecStatus::Mismatch);
}

TEST_CASE("prediction failures are pred_error; gold failures are gold_error") {
    testsupport::TempDir tmp("execerr");
    auto db = make_fixture_db(tmp);

    SUBCASE("broken prediction") {
        auto out = execution_accuracy("SELECT nonexistent FROM people",
                                      "SELECT id FROM people", db);
        CHECK(out.status == ExecStatus::PredError);
        CHECK(!out.error.empty());
        CHECK(!out.gold_rows.empty()); // gold ran first and succeeded
    }

    SUBCASE("broken gold wins over broken prediction") {
        auto out = execution_accuracy("SELECT nonexistent FROM people",
                                      "SELECT also_missing FROM people", db);
        CHECK(out.status == ExecStatus::GoldError);
    }

    SUBCASE("broken gold wins over valid prediction") {
        auto out = execution_accuracy("SELECT id FROM people",
                                      "SELECT also_missing FROM people", db);
        CHECK(out.status == ExecStatus::GoldError);
        CHECK(out.pred_rows.empty()); // pred never ran
    }

    SUBCASE("comment-only prediction is an error") {
        auto out = execution_accuracy("-- nothing here", "SELECT id FROM people", db);
        CHECK(out.status == ExecStatus::PredError);
        CHECK(out.error == "no SQL statement");
    }

    SUBCASE("writes are rejected by the read-only connection") {
        auto out = execution_accuracy("INSERT INTO people VALUES (9, 'x', 0)",
                                      "SELECT id FROM people", db);
        CHECK(out.status == ExecStatus::PredError);
    }

    SUBCASE("missing database file") {
        CHECK_THROWS_AS(
            execution_accuracy("SELECT 1", "SELECT 1", tmp.file("absent.sqlite")),
            StorageError);
    }
}

TEST_CASE("runaway statements hit the timeout") {
    testsupport::TempDir tmp("exectime");
    auto db = make_fixture_db(tmp);

    SUBCASE("prediction timeout") {
        auto out = execution_accuracy(kInfiniteQuery, "SELECT id FROM people", db, 0.2);
        CHECK(out.status == ExecStatus::Timeout);
        CHECK(!out.error.empty());
    }

    SUBCASE("gold timeout is a gold error") {
        auto out = execution_accuracy("SELECT id FROM people", kInfiniteQuery, db, 0.2);
        CHECK(out.status == ExecStatus::GoldError);
    }
}

TEST_CASE("evidence f1 truncates to the gold count and counts distinct hits") {
    std::set<std::string> gold = {"a", "c"};

    SUBCASE("half right") {
        std::vector<std::string> ranked = {"a", "b", "c"};
        F1 r = evidence_f1(ranked, gold);
        CHECK(r.precision == 0.5);
        CHECK(r.recall == 0.5);
        CHECK(r.f1 == 0.5);
        CHECK(!r.empty_gold);
    }

    SUBCASE("perfect head") {
        std::vector<std::string> ranked = {"c", "a", "b"};
        F1 r = evidence_f1(ranked, gold);
        CHECK(r.precision == 1.0);
        CHECK(r.recall == 1.0);
        CHECK(r.f1 == 1.0);
    }

    SUBCASE("duplicates in the ranking count once") {
        std::vector<std::string> ranked = {"a", "a", "c"};
        F1 r = evidence_f1(ranked, gold);
        CHECK(r.precision == 0.5);
        CHECK(r.recall == 0.5);
    }

    SUBCASE("ranking shorter than gold") {
        std::set<std::string> gold3 = {"a", "b", "c"};
        std::vector<std::string> ranked = {"a"};
        F1 r = evidence_f1(ranked, gold3);
        CHECK(r.precision == 1.0);
        CHECK(r.recall == doctest::Approx(1.0 / 3.0));
        CHECK(r.f1 == doctest::Approx(0.5));
    }

    SUBCASE("empty ranking") {
        std::vector<std::string> ranked;
        F1 r = evidence_f1(ranked, gold);
        CHECK(r.precision == 0.0);
        CHECK(r.recall == 0.0);
        CHECK(r.f1 == 0.0);
    }

    SUBCASE("empty gold is flagged") {
        std::vector<std::string> ranked = {"a"};
        F1 r = evidence_f1(ranked, std::set<std::string>{});
        CHECK(r.precision == 1.0);
        CHECK(r.recall == 1.0);
        CHECK(r.f1 == 1.0);
        CHECK(r.empty_gold);
    }
}

TEST_CASE("evidence f1 matches a counting oracle on random inputs") {
    std::mt19937_64 gen(0x5eed0040);
    for (int iter = 0; iter < 300; ++iter) {
        std::set<std::string> gold;
        std::size_t gold_n = gen() % 6;
        while (gold.size() < gold_n) gold.insert("g" + std::to_string(gen() % 12));

        std::vector<std::string> ranked;
        std::size_t ranked_n = gen() % 10;
        for (std::size_t i = 0; i < ranked_n; ++i)
            ranked.push_back("g" + std::to_string(gen() % 12));

        F1 r = evidence_f1(ranked, gold);
        if (gold.empty()) {
            CHECK(r.empty_gold);
            continue;
        }
        std::size_t k = gold.size();
        std::set<std::string> hits;
        for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i)
            if (gold.count(ranked[i])) hits.insert(ranked[i]);
        std::size_t considered = std::min(k, ranked.size());
        double p = considered ? double(hits.size()) / double(considered) : 0.0;
        double rec = double(hits.size()) / double(k);
        CHECK(r.precision == p);
        CHECK(r.recall == rec);
        double f1 = (p + rec == 0.0) ? 0.0 : 2 * p * rec / (p + rec);
        CHECK(r.f1 == f1);
    }
}

TEST_CASE("retrieval results fall back to ds_id when source_id is empty") {
    std::set<std::string> gold = {"src1", "id2"};
    std::vector<ScoredDS> retrieved(2);
    retrieved[0].ds_id = "id1";
    retrieved[0].source_id = "src1";
    retrieved[1].ds_id = "id2";
    retrieved[1].source_id = "";
    F1 r = evidence_f1(retrieved, gold);
    CHECK(r.precision == 1.0);
    CHECK(r.recall == 1.0);
}

namespace {

ExampleResult result(std::string id, SplitLabel split, bool out_no,
                     std::optional<ExecStatus> exec, std::optional<double> f1,
                     bool empty_gold = false) {
    ExampleResult r;
    r.example_id = std::move(id);
    r.split = split;
    r.out_no = out_no;
    r.exec = exec;
    if (f1) {
        F1 v;
        v.f1 = *f1;
        v.precision = v.recall = *f1;
        v.empty_gold = empty_gold;
        r.f1 = v;
    }
    return r;
}

} // namespace

TEST_CASE("aggregation matches a hand tally") {
    std::vector<ExampleResult> results = {
        result("e1", SplitLabel::In, false, ExecStatus::Match, 1.0),
        result("e2", SplitLabel::In, false, ExecStatus::Match, 0.5),
        result("e3", SplitLabel::In, false, ExecStatus::Mismatch, 1.0, true),
        result("e4", SplitLabel::In, false, ExecStatus::GoldError, std::nullopt),
        result("e5", SplitLabel::Out, false, ExecStatus::Mismatch, 0.25),
        result("e6", SplitLabel::Out, true, ExecStatus::Match, 0.0),
        result("e7", SplitLabel::Out, true, ExecStatus::Timeout, 0.75),
    };

    Report report = aggregate(results);

    REQUIRE(report.splits.count("IN"));
    REQUIRE(report.splits.count("OUT"));
    REQUIRE(report.splits.count("OUT-NO"));

    const SplitReport& in = report.splits["IN"];
    CHECK(in.count == 4);
    CHECK(in.exec_evaluated == 4);
    // accuracy = matches / (evaluated - gold errors) = 2 / 3
    CHECK(in.accuracy == doctest::Approx(2.0 / 3.0));
    CHECK(in.status_counts.at("match") == 2);
    CHECK(in.status_counts.at("mismatch") == 1);
    CHECK(in.status_counts.at("gold_error") == 1);
    // e3's F1 is empty-gold: excluded from the mean.
    CHECK(in.f1_counted == 2);
    CHECK(in.f1_empty_gold == 1);
    CHECK(in.mean_f1 == doctest::Approx(0.75));

    const SplitReport& out = report.splits["OUT"];
    CHECK(out.count == 3);
    CHECK(out.accuracy == doctest::Approx(1.0 / 3.0));
    CHECK(out.mean_f1 == doctest::Approx((0.25 + 0.0 + 0.75) / 3.0));

    const SplitReport& outno = report.splits["OUT-NO"];
    CHECK(outno.count == 2);
    CHECK(outno.accuracy == doctest::Approx(0.5));
    CHECK(outno.mean_f1 == doctest::Approx((0.0 + 0.75) / 2.0));

    const SplitReport& overall = report.overall;
    CHECK(overall.count == 7);
    CHECK(overall.exec_evaluated == 7);
    CHECK(overall.accuracy == doctest::Approx(3.0 / 6.0));
    CHECK(overall.f1_counted == 5);
    CHECK(overall.mean_f1 == doctest::Approx((1.0 + 0.5 + 0.25 + 0.0 + 0.75) / 5.0));
}

TEST_CASE("absent splits stay absent and empty denominators yield no numbers") {
    std::vector<ExampleResult> results = {
        result("e1", SplitLabel::In, false, ExecStatus::GoldError, std::nullopt),
        result("e2", SplitLabel::Unset, false, std::nullopt, std::nullopt),
    };
    Report report = aggregate(results);
    CHECK(report.splits.count("IN") == 1);
    CHECK(report.splits.count("OUT") == 0);
    CHECK(report.splits.count("OUT-NO") == 0);

    const SplitReport& in = report.splits["IN"];
    CHECK(in.count == 1);
    CHECK(!in.accuracy.has_value()); // only gold errors: denominator is zero
    CHECK(!in.mean_f1.has_value());

    // The unset example counts only toward overall.
    CHECK(report.overall.count == 2);
    CHECK(report.overall.exec_evaluated == 1);
}

TEST_CASE("report renderings carry the aggregate numbers") {
    std::vector<ExampleResult> results = {
        result("e1", SplitLabel::In, false, ExecStatus::Match, 1.0),
        result("e2", SplitLabel::Out, true, ExecStatus::Mismatch, 0.5),
    };
    Report report = aggregate(results);

    std::string text = report_to_text(report);
    CHECK(text.find("split") != std::string::npos);
    CHECK(text.find("IN") != std::string::npos);
    CHECK(text.find("OUT-NO") != std::string::npos);
    CHECK(text.find("overall") != std::string::npos);
    CHECK(text.find("1.0000") != std::string::npos);

    nlohmann::json doc = nlohmann::json::parse(report_to_json(report));
    CHECK(doc["overall"]["count"] == 2);
    CHECK(doc["splits"]["IN"]["accuracy"] == 1.0);
    CHECK(doc["splits"]["OUT"]["accuracy"] == 0.0);
    CHECK(doc["splits"]["OUT"]["status_counts"]["mismatch"] == 1);
    CHECK(doc["overall"]["mean_f1"] == doctest::Approx(0.75));

    // A split with no exec outcomes renders null metrics.
    std::vector<ExampleResult> none = {
        result("e1", SplitLabel::In, false, std::nullopt, std::nullopt)};
    nlohmann::json doc2 = nlohmann::json::parse(report_to_json(aggregate(none)));
    CHECK(doc2["splits"]["IN"]["accuracy"].is_null());
    CHECK(doc2["splits"]["IN"]["mean_f1"].is_null());
}
