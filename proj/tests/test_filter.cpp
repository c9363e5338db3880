#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "clubench/filter.hpp"

using namespace clubench;

namespace {

JobView job(const std::string& name, const std::string& state, const std::string& task = "",
            std::optional<double> tstart = std::nullopt,
            std::optional<double> duration = std::nullopt,
            std::optional<double> rss = std::nullopt, int attempts = 0) {
    JobView v;
    v.name = name;
    v.state = state;
    v.task = task;
    v.tstart = tstart;
    v.duration = duration;
    v.rss = rss;
    v.attempts = attempts;
    return v;
}

std::vector<JobView> sample_jobs() {
    return {
        job("j1", "running", "bench/algo", 100.0, 5.0, 250.0, 1),
        job("j2", "pending", "bench/algo"),
        job("j3", "done", "bench/other", 50.0, 9.5, 120.0, 1),
        job("j4", "failed", "", 60.0, 1.0, 900.0, 3),
    };
}

} // namespace

TEST_CASE("field table names every filterable attribute once") {
    const auto& fields = filter_fields();
    std::vector<std::string> names;
    for (const auto& f : fields) {
        names.push_back(f.name);
        CHECK_FALSE(f.describe.empty());
    }
    CHECK(names == std::vector<std::string>{"name", "task", "state", "tstart", "duration",
                                            "rss", "attempts"});

    CHECK_FALSE(find_field("state")->numeric);
    CHECK(find_field("rss")->numeric);
    CHECK(find_field("attempts")->numeric);
    CHECK(find_field("bogus") == nullptr);
}

TEST_CASE("parsing the clause grammar") {
    SUBCASE("empty expression matches everything") {
        FilterQuery q = parse_filter("");
        CHECK(q.clauses.empty());
        for (const auto& j : sample_jobs()) CHECK(matches(q, j));
    }

    SUBCASE("presence clause") {
        FilterQuery q = parse_filter("tstart");
        REQUIRE(q.clauses.size() == 1);
        CHECK(q.clauses[0].kind == FilterClause::Kind::Presence);
        CHECK(q.clauses[0].field == "tstart");
    }

    SUBCASE("exact text and exact number") {
        FilterQuery q = parse_filter("state:running,attempts:2");
        REQUIRE(q.clauses.size() == 2);
        CHECK(q.clauses[0].kind == FilterClause::Kind::Exact);
        CHECK(q.clauses[0].text == "running");
        CHECK(q.clauses[1].number == doctest::Approx(2.0));
    }

    SUBCASE("ranges with both, lower, or upper bound") {
        FilterQuery q = parse_filter("rss:100..500,duration:30..,tstart:..99");
        REQUIRE(q.clauses.size() == 3);
        CHECK(q.clauses[0].lo.value() == doctest::Approx(100));
        CHECK(q.clauses[0].hi.value() == doctest::Approx(500));
        CHECK(q.clauses[1].lo.value() == doctest::Approx(30));
        CHECK_FALSE(q.clauses[1].hi.has_value());
        CHECK_FALSE(q.clauses[2].lo.has_value());
        CHECK(q.clauses[2].hi.value() == doctest::Approx(99));
    }

    SUBCASE("surrounding whitespace is tolerated") {
        FilterQuery q = parse_filter(" state:done , attempts:1 ");
        CHECK(q.clauses.size() == 2);
    }
}

TEST_CASE("malformed clauses raise errors that carry the clause verbatim") {
    auto expect = [](const std::string& expr, const std::string& bad_clause,
                     const std::string& why_part) {
        try {
            parse_filter(expr);
            FAIL_CHECK("accepted: " << expr);
        } catch (const QueryError& e) {
            CHECK(e.clause() == bad_clause);
            CHECK(std::string(e.what()).find(why_part) != std::string::npos);
        }
    };

    expect("speed:5", "speed:5", "unknown field");
    expect("state:running,,rss:1..2", "", "empty clause");
    expect("state:", "state:", "missing value");
    expect("state:1..2", "state:1..2", "text");
    expect("rss:..", "rss:..", "at least one bound");
    expect("rss:abc..5", "rss:abc..5", "bad lower bound");
    expect("rss:5..xyz", "rss:5..xyz", "bad upper bound");
    expect("rss:9..2", "rss:9..2", "empty range");
    expect("attempts:two", "attempts:two", "not a number");
}

TEST_CASE("matching semantics per clause kind") {
    auto jobs = sample_jobs();

    SUBCASE("presence keeps only jobs with the attribute") {
        auto out = apply_filter(parse_filter("tstart"), jobs);
        REQUIRE(out.size() == 3);
        CHECK(out[0].name == "j1");
        CHECK(out[1].name == "j3");
        CHECK(out[2].name == "j4");
    }

    SUBCASE("taskless jobs lack the task attribute") {
        auto out = apply_filter(parse_filter("task"), jobs);
        CHECK(out.size() == 3);
        out = apply_filter(parse_filter("task:bench/other"), jobs);
        REQUIRE(out.size() == 1);
        CHECK(out[0].name == "j3");
    }

    SUBCASE("state matches case-insensitively") {
        CHECK(apply_filter(parse_filter("state:running"), jobs).size() == 1);
        CHECK(apply_filter(parse_filter("state:Running"), jobs).size() == 1);
        CHECK(apply_filter(parse_filter("state:RUNNING"), jobs).size() == 1);
        CHECK(apply_filter(parse_filter("state:runnin"), jobs).empty());
    }

    SUBCASE("names stay case-exact") {
        CHECK(apply_filter(parse_filter("name:j1"), jobs).size() == 1);
        CHECK(apply_filter(parse_filter("name:J1"), jobs).empty());
    }

    SUBCASE("numeric exact and ranges, inclusive bounds") {
        CHECK(apply_filter(parse_filter("attempts:3"), jobs).size() == 1);
        CHECK(apply_filter(parse_filter("rss:120..250"), jobs).size() == 2);
        CHECK(apply_filter(parse_filter("rss:120.."), jobs).size() == 3);
        CHECK(apply_filter(parse_filter("rss:..120"), jobs).size() == 1);
        CHECK(apply_filter(parse_filter("duration:5"), jobs).size() == 1);
    }

    SUBCASE("clauses conjoin") {
        auto out = apply_filter(parse_filter("tstart,rss:200..,state:failed"), jobs);
        REQUIRE(out.size() == 1);
        CHECK(out[0].name == "j4");
        CHECK(apply_filter(parse_filter("state:running,attempts:3"), jobs).empty());
    }
}

TEST_CASE("field accessors expose exactly the table's attributes") {
    JobView j = job("x", "done", "t/p", 10.0, 2.0, 64.0, 2);
    CHECK(string_field(j, "name") == "x");
    CHECK(string_field(j, "task") == "t/p");
    CHECK(string_field(j, "state") == "done");
    CHECK_FALSE(string_field(j, "rss").has_value());
    CHECK(numeric_field(j, "tstart").value() == doctest::Approx(10.0));
    CHECK(numeric_field(j, "duration").value() == doctest::Approx(2.0));
    CHECK(numeric_field(j, "rss").value() == doctest::Approx(64.0));
    CHECK(numeric_field(j, "attempts").value() == doctest::Approx(2.0));
    CHECK_FALSE(numeric_field(j, "name").has_value());

    JobView bare = job("y", "pending");
    CHECK_FALSE(numeric_field(bare, "tstart").has_value());
    CHECK_FALSE(numeric_field(bare, "duration").has_value());
    CHECK_FALSE(numeric_field(bare, "rss").has_value());
    CHECK_FALSE(string_field(bare, "task").has_value());
}
