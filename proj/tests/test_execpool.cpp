#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <map>
#include <set>

#include "clubench/execpool.hpp"
#include "clubench/util.hpp"
#include "test_support.hpp"

using namespace clubench;
using testsup::TempDir;

namespace {

std::string stub() { return testsup::sibling_exe("cb_stub").string(); }

PoolConfig quiet_config(int cpus, const TempDir& tmp) {
    PoolConfig cfg;
    cfg.topology = TopologyMap::flat(cpus);
    cfg.bind_cpus = false; // this box may have fewer cpus than the layout
    cfg.log_path = tmp / "pool.log";
    return cfg;
}

JobSpec sleeper(const std::string& name, double secs, const std::string& category = "measure") {
    JobSpec s;
    s.name = name;
    s.argv = {stub(), "--sleep-s", std::to_string(secs)};
    s.category = category;
    return s;
}

/// Events of one kind, in log order.
std::vector<EventLog::Entry> events_of(const ExecPool& pool, const std::string& event) {
    std::vector<EventLog::Entry> out;
    for (const auto& e : pool.log().entries())
        if (e.event == event) out.push_back(e);
    return out;
}

/// Maximum number of simultaneously running jobs, replayed from the
/// interleaving of start and exit events.
int max_concurrency(const ExecPool& pool) {
    int cur = 0, peak = 0;
    for (const auto& e : pool.log().entries()) {
        if (e.event == "start") peak = std::max(peak, ++cur);
        if (e.event == "exit") --cur;
    }
    return peak;
}

} // namespace

TEST_CASE("memory rule: hand-traced watchdog decisions") {
    SUBCASE("under the cap nothing happens") {
        auto d = memory_rule({100, 200, 100}, {5, 5, 5}, 1000);
        CHECK_FALSE(d.victim.has_value());
        CHECK(d.total_mib == doctest::Approx(400));
    }

    SUBCASE("shortest-running member of the heavy group is the victim") {
        // A 600 MB / 50 s, B 500 MB / 10 s, C 100 MB / 5 s, cap 1000:
        // total 1200, mean 400, heavy {A, B}, B ran shorter.
        auto d = memory_rule({600, 500, 100}, {50, 10, 5}, 1000);
        REQUIRE(d.victim.has_value());
        CHECK(*d.victim == 1);
        CHECK_FALSE(d.shrink_cap);
        CHECK(d.total_mib == doctest::Approx(1200));
        CHECK(d.mean_mib == doctest::Approx(400));
    }

    SUBCASE("single heavy worker: kill it and shrink the cap") {
        auto d = memory_rule({1200, 100, 50}, {10, 60, 60}, 1000);
        REQUIRE(d.victim.has_value());
        CHECK(*d.victim == 0);
        CHECK(d.shrink_cap);
    }

    SUBCASE("equal weights put everyone in the heavy group") {
        auto d = memory_rule({400, 400, 400}, {9, 2, 4}, 1000);
        REQUIRE(d.victim.has_value());
        CHECK(*d.victim == 1); // shortest elapsed of all three
        CHECK_FALSE(d.shrink_cap);
    }

    SUBCASE("no samples, no decision") {
        auto d = memory_rule({}, {}, 100);
        CHECK_FALSE(d.victim.has_value());
    }
}

TEST_CASE("submission validation") {
    TempDir tmp;
    ExecPool pool(quiet_config(2, tmp));

    pool.submit(sleeper("ok", 0.01));
    CHECK_THROWS_AS(pool.submit(sleeper("ok", 0.01)), InvalidArgument);   // duplicate
    CHECK_THROWS_AS(pool.submit(sleeper("has space", 0.01)), InvalidArgument);
    CHECK_THROWS_AS(pool.submit(sleeper("has/slash", 0.01)), InvalidArgument);
    CHECK_THROWS_AS(pool.submit(sleeper("", 0.01)), InvalidArgument);

    JobSpec no_cmd;
    no_cmd.name = "empty-argv";
    CHECK_THROWS_AS(pool.submit(no_cmd), InvalidArgument);

    try {
        pool.submit(sleeper("nocat", 0.01, "warp"));
        FAIL_CHECK("unknown category accepted");
    } catch (const InvalidArgument& e) {
        CHECK(std::string(e.what()).find("warp") != std::string::npos);
    }

    pool.shutdown();
    CHECK_THROWS_AS(pool.submit(sleeper("late", 0.01)), InvalidArgument);

    pool.run(); // drain the one accepted job
}

TEST_CASE("slots bound concurrency and keep fifo order") {
    TempDir tmp;
    ExecPool pool(quiet_config(2, tmp)); // 2 logical cpus -> 2 measure slots
    CHECK(pool.slot_count("measure") == 2);
    CHECK(pool.slot_count("algorithm") == 2);

    for (int i = 0; i < 5; ++i)
        pool.submit(sleeper("job" + std::to_string(i), 0.15));

    RunSummary sum = pool.run();
    CHECK(sum.submitted == 5);
    CHECK(sum.done == 5);
    CHECK(sum.ok());

    CHECK(max_concurrency(pool) == 2); // never above the slot count, both used

    // FIFO: start order equals submission order.
    std::vector<std::string> started;
    for (const auto& e : events_of(pool, "start")) started.push_back(e.job);
    REQUIRE(started.size() == 5);
    CHECK(std::is_sorted(started.begin(), started.end()));

    // No zombie children survive the run.
    int status = 0;
    CHECK(waitpid(-1, &status, WNOHANG) == -1);
    CHECK(errno == ECHILD);
}

TEST_CASE("exit codes decide done versus failed; callbacks fire") {
    TempDir tmp;
    ExecPool pool(quiet_config(2, tmp));

    std::atomic<int> started{0};
    std::vector<std::pair<std::string, std::string>> finished; // name, state

    JobSpec good = sleeper("good", 0.01);
    good.onstart = [&](const Job&) { ++started; };
    good.ondone = [&](const Job& j) { finished.emplace_back(j.name, to_string(j.state)); };
    pool.submit(good);

    JobSpec bad;
    bad.name = "bad";
    bad.argv = {stub(), "--exit-code", "2"};
    bad.category = "measure";
    bad.onstart = [&](const Job&) { ++started; };
    bad.ondone = [&](const Job& j) { finished.emplace_back(j.name, to_string(j.state)); };
    pool.submit(bad);

    RunSummary sum = pool.run();
    CHECK(sum.done == 1);
    CHECK(sum.failed == 1);
    CHECK_FALSE(sum.ok());
    CHECK(started.load() == 2);

    REQUIRE(finished.size() == 2);
    std::map<std::string, std::string> by_name(finished.begin(), finished.end());
    CHECK(by_name["good"] == "done");
    CHECK(by_name["bad"] == "failed");

    // The failure carries its exit code in the outcome note.
    StateSnapshot snap = pool.snapshot();
    for (const auto& j : snap.jobs)
        if (j.name == "bad") CHECK(j.state == "failed");
    REQUIRE(snap.failures.size() == 1);
    REQUIRE(snap.failures[0].jobs.size() == 1);
    CHECK(snap.failures[0].jobs[0].name == "bad");
}

TEST_CASE("per-job timeout with one restart gives exactly two attempts") {
    TempDir tmp;
    PoolConfig cfg = quiet_config(2, tmp);
    cfg.kill_grace_s = 1.0;
    ExecPool pool(cfg);

    JobSpec spec = sleeper("stuck", 30.0);
    spec.timeout_s = 0.3;
    spec.restarts_on_timeout = 1;
    pool.submit(spec);

    RunSummary sum = pool.run();
    CHECK(sum.timedout == 1);
    CHECK_FALSE(sum.ok());

    StateSnapshot snap = pool.snapshot();
    REQUIRE(snap.jobs.size() == 1);
    CHECK(snap.jobs[0].state == "timedout");
    CHECK(snap.jobs[0].attempts == 2);

    CHECK(events_of(pool, "timeout_restart").size() == 1);
    CHECK(events_of(pool, "start").size() == 2);
}

TEST_CASE("watchdog postpones the shortest-running heavy worker") {
    TempDir tmp;
    PoolConfig cfg = quiet_config(4, tmp);
    cfg.watchdog_period_s = 0.1;
    cfg.mem_limit_mib = 1000.0;
    cfg.postpone_limit = 10;
    cfg.kill_grace_s = 1.0;
    ExecPool pool(cfg);

    // B (500) and C (50) allocate right away and sit below the cap; A (600)
    // allocates after half a second. C holds long enough to stay resident
    // through every decision, keeping the mean down. Whenever the sampled
    // total a + b + 50 exceeds the 1000 cap, a <= 600 forces b > 350, so
    // 2b > 700 >= a + 50, i.e. b >= (a + b + 50) / 3: B is in the heavy
    // group at every over-cap sample, first allocation and re-allocations
    // alike. A, submitted and started first, always has the longer elapsed
    // time, so every postponement names B.
    auto alloc_job = [&](const std::string& name, int mib, double presleep, double hold) {
        JobSpec s;
        s.name = name;
        s.argv = {stub(), "--presleep-s", std::to_string(presleep), "--alloc-mib",
                  std::to_string(mib), "--hold-s", std::to_string(hold)};
        s.category = "measure";
        return s;
    };
    pool.submit(alloc_job("jobA", 600, 0.5, 0.5));
    pool.submit(alloc_job("jobB", 500, 0.1, 2.5));
    pool.submit(alloc_job("jobC", 50, 0.0, 2.5));

    RunSummary sum = pool.run();

    // Nothing is lost: every job reaches exactly one terminal state.
    CHECK(sum.submitted == 3);
    CHECK(sum.done + sum.failed + sum.timedout + sum.killed == 3);

    auto postponed = events_of(pool, "postponed");
    REQUIRE_FALSE(postponed.empty());
    CHECK(postponed.front().job == "jobB");

    // The bystanders were never touched.
    StateSnapshot snap = pool.snapshot();
    for (const auto& j : snap.jobs) {
        if (j.name == "jobA" || j.name == "jobC") CHECK(j.state == "done");
        if (j.name == "jobB") CHECK(j.attempts >= 2); // postponed and retried
    }
    for (const auto& e : postponed) CHECK(e.job == "jobB");
}

TEST_CASE("a single oversized worker shrinks the cap and fails at the postpone limit") {
    TempDir tmp;
    PoolConfig cfg = quiet_config(2, tmp);
    cfg.watchdog_period_s = 0.1;
    cfg.mem_limit_mib = 300.0;
    cfg.postpone_limit = 1;
    cfg.kill_grace_s = 1.0;
    ExecPool pool(cfg);

    JobSpec fat;
    fat.name = "fat";
    fat.argv = {stub(), "--alloc-mib", "500", "--hold-s", "5"};
    fat.category = "measure";
    pool.submit(fat);

    RunSummary sum = pool.run();
    CHECK(sum.failed == 1);
    CHECK(pool.worker_cap() == 1);

    StateSnapshot snap = pool.snapshot();
    REQUIRE(snap.jobs.size() == 1);
    CHECK(snap.jobs[0].state == "failed");
    CHECK(snap.jobs[0].attempts == 2); // original + one retry

    CHECK_FALSE(events_of(pool, "cap_shrunk").empty());
    CHECK(events_of(pool, "postponed").size() == 1);
    CHECK(events_of(pool, "requeued").size() == 1);
}

TEST_CASE("global timeout kills the queue and terminates runners") {
    TempDir tmp;
    PoolConfig cfg = quiet_config(1, tmp); // one slot: second job stays pending
    cfg.global_timeout_s = 0.4;
    cfg.kill_grace_s = 1.0;
    ExecPool pool(cfg);

    pool.submit(sleeper("runner", 30.0));
    pool.submit(sleeper("queued", 30.0));

    RunSummary sum = pool.run();
    CHECK(sum.timedout == 1);
    CHECK(sum.killed == 1);

    StateSnapshot snap = pool.snapshot();
    for (const auto& j : snap.jobs) {
        if (j.name == "runner") CHECK(j.state == "timedout");
        if (j.name == "queued") {
            CHECK(j.state == "killed");
            CHECK(j.attempts == 0); // never started
        }
    }
}

TEST_CASE("task forest completion and failure projection") {
    TempDir tmp;
    ExecPool pool(quiet_config(2, tmp));

    std::vector<std::string> done_tasks;
    Task* root = pool.add_task("bench");
    Task* sub_ok = pool.add_task("good", root,
                                 [&](const Task& t) { done_tasks.push_back(t.path()); });
    Task* sub_bad = pool.add_task("flaky", root,
                                  [&](const Task& t) { done_tasks.push_back(t.path()); });
    pool.add_task("unused", nullptr); // empty task: completes trivially, no jobs

    CHECK(sub_ok->path() == "bench/good");
    CHECK_THROWS_AS(pool.add_task("bad name", root), InvalidArgument);

    JobSpec a = sleeper("a1", 0.05);
    a.task = sub_ok;
    pool.submit(a);
    JobSpec b = sleeper("a2", 0.15);
    b.task = sub_ok;
    pool.submit(b);

    JobSpec fail;
    fail.name = "boom";
    fail.argv = {stub(), "--exit-code", "1"};
    fail.category = "measure";
    fail.task = sub_bad;
    pool.submit(fail);

    RunSummary sum = pool.run();
    CHECK(sum.done == 2);
    CHECK(sum.failed == 1);

    // Each task completed exactly once, children before parents is not
    // required across siblings, but both subtasks must be present.
    CHECK(std::count(done_tasks.begin(), done_tasks.end(), "bench/good") == 1);
    CHECK(std::count(done_tasks.begin(), done_tasks.end(), "bench/flaky") == 1);

    StateSnapshot snap = pool.snapshot();
    REQUIRE(snap.tasks.size() == 2); // "bench" and "unused" roots
    const TaskView* bench = nullptr;
    for (const auto& t : snap.tasks)
        if (t.name == "bench") bench = &t;
    REQUIRE(bench != nullptr);
    CHECK(bench->state == "failed"); // one failed child poisons the root
    REQUIRE(bench->subtasks.size() == 2);

    // The failure view prunes to the failed path only.
    REQUIRE(snap.failures.size() == 1);
    CHECK(snap.failures[0].name == "bench");
    REQUIRE(snap.failures[0].subtasks.size() == 1);
    CHECK(snap.failures[0].subtasks[0].name == "flaky");
    REQUIRE(snap.failures[0].subtasks[0].jobs.size() == 1);
    CHECK(snap.failures[0].subtasks[0].jobs[0].name == "boom");
}

TEST_CASE("a throwing callback is contained and logged") {
    TempDir tmp;
    ExecPool pool(quiet_config(2, tmp));

    JobSpec s = sleeper("trip", 0.01);
    s.ondone = [](const Job&) { throw std::runtime_error("callback exploded"); };
    pool.submit(s);

    JobSpec t = sleeper("after", 0.01);
    pool.submit(t);

    RunSummary sum = pool.run();
    CHECK(sum.done == 2); // the pool survived and finished both jobs

    bool logged = false;
    for (const auto& e : pool.log().entries())
        if (e.event == "callback_error" && e.detail.find("callback exploded") != std::string::npos)
            logged = true;
    CHECK(logged);
}

TEST_CASE("callbacks may submit follow-up work re-entrantly") {
    TempDir tmp;
    ExecPool pool(quiet_config(2, tmp));

    JobSpec first = sleeper("first", 0.01);
    first.ondone = [&](const Job&) {
        JobSpec next = sleeper("second", 0.01);
        next.ondone = [&](const Job&) { pool.submit(sleeper("third", 0.01)); };
        pool.submit(next);
    };
    pool.submit(first);

    RunSummary sum = pool.run();
    CHECK(sum.submitted == 3);
    CHECK(sum.done == 3);
}

TEST_CASE("run can be called again after new submissions") {
    TempDir tmp;
    ExecPool pool(quiet_config(2, tmp));
    pool.submit(sleeper("one", 0.01));
    RunSummary s1 = pool.run();
    CHECK(s1.done == 1);

    pool.submit(sleeper("two", 0.01));
    RunSummary s2 = pool.run();
    CHECK(s2.submitted == 2);
    CHECK(s2.done == 2);
}

TEST_CASE("event journal lands on disk and parses back") {
    TempDir tmp;
    PoolConfig cfg = quiet_config(2, tmp);
    cfg.resources_csv = tmp / "resources.csv";
    {
        ExecPool pool(cfg);
        pool.submit(sleeper("logged", 0.02));
        pool.run();
    }

    auto entries = EventLog::parse(tmp / "pool.log");
    REQUIRE_FALSE(entries.empty());

    std::map<std::string, int> events;
    for (const auto& e : entries) ++events[e.event];
    CHECK(events["submitted"] == 1);
    CHECK(events["start"] == 1);
    CHECK(events["exit"] == 1);
    CHECK(events["done"] == 1);
    CHECK(events.count("pool_init") == 1);
    CHECK(events.count("run_done") == 1);

    for (const auto& e : entries) {
        if (e.event == "start") {
            CHECK(e.job == "logged");
            CHECK(e.detail.find("attempt=1") != std::string::npos);
            CHECK(e.detail.find("category=measure") != std::string::npos);
            CHECK(e.detail.find("slot=") != std::string::npos);
            CHECK(e.detail.find("pid=") != std::string::npos);
        }
        if (e.event == "exit") {
            CHECK(e.detail.find("exit=0") != std::string::npos);
            CHECK(e.detail.find("wall=") != std::string::npos);
        }
    }

    // The profiling CSV recorded the attempt as well.
    auto recs = read_records(tmp / "resources.csv");
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].job == "logged");
    CHECK(recs[0].attempt == 1);
    CHECK(recs[0].ok());
}

TEST_CASE("snapshot exposes live state during the run") {
    TempDir tmp;
    ExecPool pool(quiet_config(1, tmp));

    StateSnapshot before = pool.snapshot();
    CHECK(before.jobs.empty());
    CHECK(before.system.ram_total_mib > 0);

    JobSpec probe = sleeper("probe", 0.3);
    std::optional<StateSnapshot> during;
    probe.onstart = [&](const Job&) { during = pool.snapshot(); };
    pool.submit(probe);
    pool.submit(sleeper("waiting", 0.01));

    pool.run();

    REQUIRE(during.has_value());
    REQUIRE(during->jobs.size() == 2);
    CHECK(during->jobs[0].name == "probe");
    CHECK(during->jobs[0].state == "running");
    CHECK(during->jobs[0].attempts == 1);
    CHECK(during->jobs[0].tstart.has_value());
    CHECK(during->jobs[1].state == "pending");
    CHECK_FALSE(during->jobs[1].tstart.has_value());
    CHECK(during->system.workers_running == 1);
    CHECK(during->system.jobs_pending == 1);

    StateSnapshot after = pool.snapshot();
    CHECK(after.jobs[0].state == "done");
    CHECK(after.jobs[0].duration.has_value());
    CHECK(*after.jobs[0].duration >= 0.25);
}

TEST_CASE("binding failures to unavailable cpus are soft") {
    TempDir tmp;
    PoolConfig cfg = quiet_config(4, tmp);
    cfg.bind_cpus = true; // flat(4) names cpus this box may not have
    ExecPool pool(cfg);
    pool.submit(sleeper("pinned", 0.02));
    RunSummary sum = pool.run();
    CHECK(sum.done == 1); // job ran regardless of whether the pin applied
}
