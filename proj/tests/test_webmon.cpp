#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "clubench/filter.hpp"
#include "clubench/webmon.hpp"

using namespace clubench;
using nlohmann::json;

namespace {

using Params = std::map<std::string, std::string>;

JobView job(std::string name, std::string task, std::string state, std::optional<double> tstart,
            std::optional<double> duration, std::optional<double> rss, int attempts) {
    JobView j;
    j.name = std::move(name);
    j.task = std::move(task);
    j.state = std::move(state);
    j.tstart = tstart;
    j.duration = duration;
    j.rss = rss;
    j.attempts = attempts;
    return j;
}

/// Five jobs over a two-branch task forest, one failure, one taskless
/// pending job and one name that needs HTML escaping.
StateSnapshot fixture() {
    StateSnapshot s;
    s.timestamp = "2025-11-07T12:00:00.000Z";
    s.system.ram_total_mib = 8000;
    s.system.ram_used_mib = 1234;
    s.system.load1 = 0.5;
    s.system.load5 = 0.25;
    s.system.load15 = 0.12;
    s.system.workers_running = 2;
    s.system.jobs_pending = 3;

    s.jobs = {
        job("alpha", "bench/web", "running", 1700000000.0, 12.5, 321.25, 1),
        job("beta", "bench/web", "done", 1700000100.0, 2.25, 64.0, 1),
        job("gamma", "bench/grid", "failed", 1700000200.0, 0.125, 900.5, 2),
        job("waiting", "", "pending", std::nullopt, std::nullopt, std::nullopt, 0),
        job("esc&<b>", "", "pending", std::nullopt, std::nullopt, std::nullopt, 0),
    };

    TaskView web;
    web.name = "web";
    web.state = "done";
    web.jobs = {s.jobs[0], s.jobs[1]};
    TaskView grid;
    grid.name = "grid";
    grid.state = "failed";
    grid.jobs = {s.jobs[2]};
    TaskView bench;
    bench.name = "bench";
    bench.state = "failed";
    bench.subtasks = {web, grid};
    s.tasks = {bench};

    TaskView grid_f = grid;
    TaskView bench_f;
    bench_f.name = "bench";
    bench_f.state = "failed";
    bench_f.subtasks = {grid_f};
    s.failures = {bench_f};
    return s;
}

bool contains(const std::string& hay, const std::string& needle) {
    return hay.find(needle) != std::string::npos;
}

/// Case-insensitive scan for a script element opener.
bool has_script(const std::string& page) {
    std::string low;
    low.reserve(page.size());
    for (char c : page) low += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return contains(low, "<script");
}

size_t count_of(const std::string& hay, const std::string& needle) {
    size_t n = 0;
    for (size_t p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
    return n;
}

/// All <td> cell texts of a page, in order. Meant for single-column tables.
std::vector<std::string> td_cells(const std::string& page) {
    std::vector<std::string> out;
    size_t p = 0;
    while ((p = page.find("<td>", p)) != std::string::npos) {
        p += 4;
        const size_t e = page.find("</td>", p);
        REQUIRE(e != std::string::npos);
        out.push_back(page.substr(p, e - p));
        p = e;
    }
    return out;
}

ViewRequest request(const std::string& flt = "", const std::string& fmt = "html",
                    std::vector<std::string> cols = {}, int refresh = 0) {
    ViewRequest r;
    if (!flt.empty()) r.filter = parse_filter(flt);
    r.fmt = fmt;
    r.cols = std::move(cols);
    r.refresh = refresh;
    return r;
}

std::vector<std::string> names_of(const std::vector<JobView>& jobs) {
    std::vector<std::string> v;
    for (const auto& j : jobs) v.push_back(j.name);
    std::sort(v.begin(), v.end());
    return v;
}

} // namespace

TEST_CASE("view request parsing: defaults and accepted parameters") {
    const ViewRequest d = parse_view_request({});
    CHECK(d.fmt == "html");
    CHECK(d.refresh == 0);
    CHECK(d.cols.empty());
    CHECK(d.filter.clauses.empty());

    const ViewRequest r = parse_view_request(
        {{"flt", "state:running,rss:100..500"},
         {"fmt", "json"},
         {"cols", "name, rss ,state"},
         {"refresh", "30"},
         {"utm_source", "budget-cut"}}); // unknown params pass through silently
    CHECK(r.filter.clauses.size() == 2);
    CHECK(r.fmt == "json");
    CHECK(r.cols == std::vector<std::string>{"name", "rss", "state"});
    CHECK(r.refresh == 30);
}

TEST_CASE("view request parsing: malformed parameters carry the offending piece") {
    auto expect_error = [](const Params& p, const std::string& clause, const std::string& why) {
        try {
            parse_view_request(p);
            FAIL_CHECK("accepted: " << clause);
        } catch (const QueryError& e) {
            CHECK(e.clause() == clause);
            CHECK(contains(e.what(), why));
        }
    };
    expect_error({{"fmt", "xml"}}, "fmt=xml", "html or json");
    expect_error({{"cols", "name,bogus"}}, "cols=name,bogus", "unknown column 'bogus'");
    expect_error({{"cols", ""}}, "cols=", "no columns");
    expect_error({{"refresh", "0"}}, "refresh=0", "1..86400");
    expect_error({{"refresh", "-5"}}, "refresh=-5", "1..86400");
    expect_error({{"refresh", "soon"}}, "refresh=soon", "1..86400");
    expect_error({{"refresh", "86401"}}, "refresh=86401", "1..86400");

    // filter errors surface unchanged
    try {
        parse_view_request({{"flt", "rss:a..b"}});
        FAIL_CHECK("bad range accepted");
    } catch (const QueryError& e) {
        CHECK(e.clause() == "rss:a..b");
    }
}

TEST_CASE("jobs page: html structure, escaping and column control") {
    const StateSnapshot snap = fixture();

    SUBCASE("default page shows every job and every field") {
        const std::string page = render_jobs(snap, request());
        CHECK(page.rfind("<!DOCTYPE html>", 0) == 0);
        CHECK_FALSE(has_script(page));
        CHECK_FALSE(contains(page, "http-equiv=\"refresh\""));
        CHECK(contains(page, "<h1>jobs</h1>"));
        CHECK(contains(page, "5 of 5 jobs shown"));
        for (const auto& f : filter_fields()) CHECK(contains(page, "<th>" + f.name + "</th>"));
        // row styling by state and nav links
        CHECK(contains(page, "<tr class=\"state-running\">"));
        CHECK(contains(page, "<a href=\"/failures\">failures</a>"));
        // system line
        CHECK(contains(page, "ram 1234 / 8000 MiB"));
        CHECK(contains(page, "running 2 | pending 3"));
        // hostile names are escaped, never emitted raw
        CHECK(contains(page, "esc&amp;&lt;b&gt;"));
        CHECK_FALSE(contains(page, "esc&<b>"));
        // cell formats: timestamps as UTC, floats to 3 decimals, counts plain
        CHECK(contains(page, "<td>2023-11-14T22:13:20.000Z</td>"));
        CHECK(contains(page, "<td>12.500</td>"));
        CHECK(contains(page, "<td>321.250</td>"));
        CHECK(contains(page, "<td>2</td>"));
    }

    SUBCASE("meta refresh appears exactly when requested") {
        const std::string page = render_jobs(snap, request("", "html", {}, 45));
        CHECK(contains(page, "<meta http-equiv=\"refresh\" content=\"45\">"));
        CHECK_FALSE(has_script(page));
    }

    SUBCASE("column subset renders only those columns") {
        const std::string page = render_jobs(snap, request("", "html", {"name", "rss"}));
        CHECK(contains(page, "<tr><th>name</th><th>rss</th></tr>"));
        CHECK_FALSE(contains(page, "<th>task</th>"));
        CHECK_FALSE(contains(page, "<th>state</th>"));
    }

    SUBCASE("absent values render as a dash") {
        const std::string page = render_jobs(snap, request("", "html", {"task"}));
        CHECK(count_of(page, "<td>-</td>") == 2); // the two taskless jobs
        CHECK(count_of(page, "<td>bench/web</td>") == 2);
    }

    SUBCASE("filter narrows the table") {
        const std::string page = render_jobs(snap, request("state:done", "html", {"name"}));
        CHECK(contains(page, "1 of 5 jobs shown"));
        const auto cells = td_cells(page);
        REQUIRE(cells.size() == 1);
        CHECK(cells[0] == "beta");
    }
}

TEST_CASE("jobs page: json body mirrors the snapshot") {
    const StateSnapshot snap = fixture();

    const json o = json::parse(render_jobs(snap, request("", "json")));
    CHECK(o["timestamp"] == "2025-11-07T12:00:00.000Z");
    CHECK(o["system"]["ram_total_mib"] == 8000.0);
    CHECK(o["system"]["workers_running"] == 2);
    REQUIRE(o["jobs"].size() == 5);
    CHECK(o["jobs"][0]["name"] == "alpha");
    CHECK(o["jobs"][0]["rss"] == 321.25);
    CHECK(o["jobs"][0]["attempts"].is_number_integer());
    CHECK(o["jobs"][3]["tstart"].is_null()); // never started
    CHECK(o["jobs"][3]["task"].is_null());   // taskless
    CHECK(o["jobs"][4]["name"] == "esc&<b>"); // json escaping is the library's job

    const json narrow =
        json::parse(render_jobs(snap, request("state:failed", "json", {"name", "attempts"})));
    REQUIRE(narrow["jobs"].size() == 1);
    CHECK(narrow["jobs"][0].size() == 2);
    CHECK(narrow["jobs"][0]["name"] == "gamma");
    CHECK(narrow["jobs"][0]["attempts"] == 2);
}

TEST_CASE("task pages: forest nesting, failure pruning and nested filtering") {
    const StateSnapshot snap = fixture();

    SUBCASE("html shows the nested forest") {
        const std::string page = render_tasks(snap, request(), false);
        CHECK(contains(page, "<h1>tasks</h1>"));
        CHECK(contains(page, "<b>bench</b>"));
        CHECK(contains(page, "<b>web</b>"));
        CHECK(contains(page, "[failed]"));
        CHECK(contains(page, "alpha"));
        CHECK_FALSE(has_script(page));
    }

    SUBCASE("failures view keeps only the failing branch") {
        const std::string page = render_tasks(snap, request(), true);
        CHECK(contains(page, "<h1>failures</h1>"));
        CHECK(contains(page, "gamma"));
        CHECK_FALSE(contains(page, "beta"));
        CHECK_FALSE(contains(page, "<b>web</b>"));
    }

    SUBCASE("an empty failure forest says so") {
        StateSnapshot clean = snap;
        clean.failures.clear();
        CHECK(contains(render_tasks(clean, request(), true), "no failures"));
    }

    SUBCASE("the job filter reaches nested tables but task headers stay") {
        const std::string page = render_tasks(snap, request("state:done", "html", {"name"}), false);
        CHECK(contains(page, "<b>grid</b>")); // branch still listed
        const auto cells = td_cells(page);    // but only done jobs tabled
        CHECK(cells == std::vector<std::string>{"beta"});
    }

    SUBCASE("json mirrors nesting and filtering") {
        const json o = json::parse(render_tasks(snap, request("", "json", {"name"}), false));
        REQUIRE(o["tasks"].size() == 1);
        const json& bench = o["tasks"][0];
        CHECK(bench["name"] == "bench");
        CHECK(bench["state"] == "failed");
        REQUIRE(bench["subtasks"].size() == 2);
        CHECK(bench["subtasks"][0]["jobs"].size() == 2);
        CHECK(bench["subtasks"][1]["jobs"][0]["name"] == "gamma");

        const json f = json::parse(render_tasks(snap, request("", "json"), true));
        REQUIRE(f["failures"].size() == 1);
        CHECK(f["failures"][0]["subtasks"][0]["name"] == "grid");
    }
}

TEST_CASE("apinfo describes exactly the filterable fields") {
    const std::string page = render_apinfo(request());
    CHECK_FALSE(has_script(page));
    for (const char* path : {"/jobs", "/tasks", "/failures", "/apinfo"})
        CHECK(contains(page, std::string("<td>") + path + "</td>"));
    for (const auto& f : filter_fields()) CHECK(contains(page, "<td>" + f.name + "</td>"));

    const json o = json::parse(render_apinfo(request("", "json")));
    CHECK(o["endpoints"].size() == 4);
    CHECK(o["parameters"].size() == 4);
    CHECK(o["states"].size() == 7);
    REQUIRE(o["fields"].size() == filter_fields().size());
    for (size_t i = 0; i < filter_fields().size(); ++i) {
        CHECK(o["fields"][i]["name"] == filter_fields()[i].name);
        CHECK(o["fields"][i]["type"] == (filter_fields()[i].numeric ? "number" : "string"));
    }
}

TEST_CASE("rendered rows agree with the in-memory filter on random snapshots") {
    std::mt19937_64 rng(20251107);
    const std::vector<std::string> states = {"pending",  "running", "postponed", "done",
                                             "failed",   "timedout", "killed"};
    const std::vector<std::string> tasks = {"", "t/a", "t/b", "solo"};

    auto u = [&](double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    };
    auto pick = [&](const std::vector<std::string>& v) -> const std::string& {
        return v[std::uniform_int_distribution<size_t>(0, v.size() - 1)(rng)];
    };
    auto maybe = [&](double v) -> std::optional<double> {
        if (std::uniform_real_distribution<double>(0, 1)(rng) < 0.3) return std::nullopt;
        return v;
    };

    auto gen_snapshot = [&]() {
        StateSnapshot s;
        s.timestamp = "2025-11-07T00:00:00.000Z";
        const int n = std::uniform_int_distribution<int>(1, 25)(rng);
        for (int i = 0; i < n; ++i) {
            JobView j = job("j" + std::to_string(i), pick(tasks), pick(states),
                            maybe(u(1.7e9, 1.7e9 + 1000)), maybe(u(0, 100)), maybe(u(0, 1024)),
                            std::uniform_int_distribution<int>(0, 3)(rng));
            s.jobs.push_back(std::move(j));
        }
        // one flat task per distinct non-empty path so the tasks view can be
        // checked against the same reference
        for (const auto& t : tasks) {
            if (t.empty()) continue;
            TaskView tv;
            tv.name = t;
            tv.state = "running";
            for (const auto& j : s.jobs)
                if (j.task == t) tv.jobs.push_back(j);
            s.tasks.push_back(std::move(tv));
        }
        return s;
    };

    auto gen_query = [&]() -> std::string {
        std::vector<std::string> clauses;
        const int n = std::uniform_int_distribution<int>(0, 2)(rng);
        for (int i = 0; i < n; ++i) {
            switch (std::uniform_int_distribution<int>(0, 5)(rng)) {
            case 0: clauses.push_back("tstart"); break;
            case 1: clauses.push_back("state:" + pick(states)); break;
            case 2: clauses.push_back("name:j" + std::to_string(
                        std::uniform_int_distribution<int>(0, 30)(rng))); break;
            case 3: clauses.push_back("attempts:" + std::to_string(
                        std::uniform_int_distribution<int>(0, 3)(rng))); break;
            case 4: clauses.push_back(strfmt("rss:%.1f..%.1f", u(0, 500), u(500, 1100))); break;
            default: clauses.push_back(strfmt("duration:%.1f..", u(0, 80))); break;
            }
        }
        std::string q;
        for (size_t i = 0; i < clauses.size(); ++i) q += (i ? "," : "") + clauses[i];
        return q;
    };

    for (int iter = 0; iter < 50; ++iter) {
        const StateSnapshot snap = gen_snapshot();
        const std::string query = gen_query();
        const FilterQuery fq = parse_filter(query);
        const std::vector<std::string> expect = names_of(apply_filter(fq, snap.jobs));

        INFO("iteration ", iter, " query '", query, "' over ", snap.jobs.size(), " jobs");

        // json jobs view
        const json o = json::parse(render_jobs(snap, request(query, "json", {"name"})));
        std::vector<std::string> got_json;
        for (const auto& j : o["jobs"]) got_json.push_back(j["name"]);
        std::sort(got_json.begin(), got_json.end());
        CHECK(got_json == expect);

        // html jobs view: one column, so cells are exactly the names
        const std::string page = render_jobs(snap, request(query, "html", {"name"}));
        CHECK_FALSE(has_script(page));
        std::vector<std::string> got_html = td_cells(page);
        std::sort(got_html.begin(), got_html.end());
        CHECK(got_html == expect);
        CHECK(count_of(page, "<tr class=\"state-") == expect.size());

        // tasks view: the union over the forest equals the reference minus
        // taskless jobs
        std::vector<std::string> expect_tasked;
        for (const auto& j : apply_filter(fq, snap.jobs))
            if (!j.task.empty()) expect_tasked.push_back(j.name);
        std::sort(expect_tasked.begin(), expect_tasked.end());

        const json t = json::parse(render_tasks(snap, request(query, "json", {"name"}), false));
        std::vector<std::string> got_tasked;
        const std::function<void(const json&)> walk = [&](const json& task) {
            for (const auto& j : task["jobs"]) got_tasked.push_back(j["name"]);
            for (const auto& s : task["subtasks"]) walk(s);
        };
        for (const auto& task : t["tasks"]) walk(task);
        std::sort(got_tasked.begin(), got_tasked.end());
        CHECK(got_tasked == expect_tasked);
    }
}

TEST_CASE("http monitor serves the four views read-only") {
    WebMonitor mon([] { return fixture(); });
    const int port = mon.start(0);
    REQUIRE(port > 0);
    CHECK(mon.port() == port);

    httplib::Client cli("127.0.0.1", port);
    cli.set_connection_timeout(5);
    cli.set_read_timeout(5);

    SUBCASE("html by default") {
        auto res = cli.Get("/jobs");
        REQUIRE(res);
        CHECK(res->status == 200);
        CHECK(res->get_header_value("Content-Type").rfind("text/html", 0) == 0);
        CHECK(contains(res->body, "<h1>jobs</h1>"));
        CHECK_FALSE(has_script(res->body));
    }

    SUBCASE("json with a filter") {
        auto res = cli.Get("/jobs?fmt=json&flt=state:done");
        REQUIRE(res);
        CHECK(res->status == 200);
        CHECK(res->get_header_value("Content-Type").rfind("application/json", 0) == 0);
        const json o = json::parse(res->body);
        REQUIRE(o["jobs"].size() == 1);
        CHECK(o["jobs"][0]["name"] == "beta");
    }

    SUBCASE("malformed queries come back as 400 with the clause echoed") {
        auto res = cli.Get("/jobs?flt=rss:a..b");
        REQUIRE(res);
        CHECK(res->status == 400);
        CHECK(contains(res->body, "rss:a..b"));

        auto res2 = cli.Get("/tasks?refresh=never");
        REQUIRE(res2);
        CHECK(res2->status == 400);
        CHECK(contains(res2->body, "refresh=never"));
    }

    SUBCASE("remaining views and the root redirect") {
        auto tasks = cli.Get("/tasks");
        REQUIRE(tasks);
        CHECK(contains(tasks->body, "<b>bench</b>"));

        auto failures = cli.Get("/failures");
        REQUIRE(failures);
        CHECK(contains(failures->body, "gamma"));
        CHECK_FALSE(contains(failures->body, "beta"));

        auto apinfo = cli.Get("/apinfo?fmt=json");
        REQUIRE(apinfo);
        CHECK(json::parse(apinfo->body)["fields"].size() == filter_fields().size());

        auto root = cli.Get("/");
        REQUIRE(root);
        CHECK(root->status == 302);
        CHECK(root->get_header_value("Location") == "/jobs");

        auto missing = cli.Get("/nothere");
        REQUIRE(missing);
        CHECK(missing->status == 404);
    }

    SUBCASE("state mutation is not offered: POST finds no route") {
        auto res = cli.Post("/jobs", "x=1", "application/x-www-form-urlencoded");
        REQUIRE(res);
        CHECK(res->status == 404);
    }

    mon.stop();
    httplib::Client dead("127.0.0.1", port);
    dead.set_connection_timeout(1);
    CHECK_FALSE(dead.Get("/jobs"));
}
