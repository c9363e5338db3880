#include "clubench/execpool.hpp"

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <thread>

#include "clubench/util.hpp"

namespace clubench {

const char* to_string(JobState s) {
    switch (s) {
    case JobState::Pending: return "pending";
    case JobState::Running: return "running";
    case JobState::Postponed: return "postponed";
    case JobState::Done: return "done";
    case JobState::Failed: return "failed";
    case JobState::TimedOut: return "timedout";
    case JobState::Killed: return "killed";
    }
    return "?";
}

bool is_terminal(JobState s) {
    return s == JobState::Done || s == JobState::Failed || s == JobState::TimedOut ||
           s == JobState::Killed;
}

std::string Task::path() const {
    if (!parent) return name;
    return parent->path() + "/" + name;
}

std::map<std::string, CategoryPolicy> PoolConfig::default_policies() {
    return {
        {"algorithm", {AffinityUnit::PhysCore, std::nullopt}},
        {"measure", {AffinityUnit::LogicalCpu, std::nullopt}},
        {"utility", {AffinityUnit::LogicalCpu, std::nullopt}},
        {"multithreaded", {AffinityUnit::NumaNode, std::nullopt}},
    };
}

double PoolConfig::mem_cap_mib() const {
    if (mem_limit_mib) return *mem_limit_mib;
    return mem_limit_fraction * system_ram_mib();
}

WatchdogDecision memory_rule(const std::vector<double>& rss_mib,
                             const std::vector<double>& elapsed_s, double cap_mib) {
    WatchdogDecision d;
    for (double r : rss_mib) d.total_mib += r;
    if (rss_mib.empty() || d.total_mib <= cap_mib) return d;
    d.mean_mib = d.total_mib / static_cast<double>(rss_mib.size());

    // heavy group: at or above the mean (tiny slack so that the maximum
    // cannot fall out of the group through rounding)
    std::vector<size_t> heavy;
    for (size_t i = 0; i < rss_mib.size(); ++i)
        if (rss_mib[i] >= d.mean_mib * (1 - 1e-12)) heavy.push_back(i);
    if (heavy.empty()) return d; // all zero samples; nothing sensible to do

    if (heavy.size() >= 2) {
        size_t best = heavy[0];
        for (size_t i : heavy)
            if (elapsed_s[i] < elapsed_s[best]) best = i;
        d.victim = best;
    } else {
        d.victim = heavy[0];
        d.shrink_cap = true;
    }
    return d;
}

namespace {

bool valid_component(const std::string& s, bool allow_colon) {
    if (s.empty()) return false;
    for (char c : s) {
        if (isspace(static_cast<unsigned char>(c)) || c == '/' || c == ',') return false;
        if (!allow_colon && c == ':') return false;
    }
    return true;
}

} // namespace

ExecPool::ExecPool(PoolConfig cfg) : cfg_(std::move(cfg)), log_(cfg_.log_path) {
    if (cfg_.topology.node_count() == 0) cfg_.topology = TopologyMap::detect();
    for (const auto& [name, pol] : cfg_.policies) {
        CategoryState cat;
        auto sets = cfg_.topology.slots_for(pol.unit);
        if (pol.max_slots && static_cast<int>(sets.size()) > *pol.max_slots)
            sets.resize(static_cast<size_t>(*pol.max_slots));
        for (auto& s : sets) cat.slots.push_back({std::move(s), nullptr});
        cats_.emplace(name, std::move(cat));
    }
    mem_cap_mib_ = cfg_.mem_cap_mib();
    worker_cap_ = 1 << 30; // effectively unbounded until a shrink
    log_.info("-", "pool_init",
              strfmt("cpus=%d cores=%d nodes=%d mem_cap_mib=%.0f", cfg_.topology.cpu_count(),
                     cfg_.topology.core_count(), cfg_.topology.node_count(), mem_cap_mib_));
}

ExecPool::~ExecPool() {
    std::lock_guard<std::recursive_mutex> lk(mu_);
    bool any = false;
    for (auto& j : jobs_) {
        if (j->state == JobState::Running || j->state == JobState::Postponed) {
            kill(j->pid, SIGKILL);
            any = true;
        }
    }
    if (any) {
        int status;
        while (waitpid(-1, &status, 0) > 0) {
        }
    }
}

Task* ExecPool::add_task(const std::string& name, Task* parent,
                         std::function<void(const Task&)> ondone) {
    if (!valid_component(name, true))
        throw InvalidArgument("task name must be non-empty without spaces, '/' or ',': '" + name +
                              "'");
    std::lock_guard<std::recursive_mutex> lk(mu_);
    auto t = std::make_unique<Task>();
    t->name = name;
    t->parent = parent;
    t->ondone = std::move(ondone);
    Task* raw = t.get();
    if (parent) parent->subtasks.push_back(raw);
    tasks_.push_back(std::move(t));
    return raw;
}

const Job* ExecPool::submit(JobSpec spec) {
    std::lock_guard<std::recursive_mutex> lk(mu_);
    if (!accepting_)
        throw InvalidArgument("pool is shut down; job '" + spec.name + "' rejected");
    if (!valid_component(spec.name, true))
        throw InvalidArgument("job name must be non-empty without spaces, '/' or ',': '" +
                              spec.name + "'");
    for (const auto& j : jobs_)
        if (j->name == spec.name)
            throw InvalidArgument("job name '" + spec.name + "' already submitted");
    if (spec.argv.empty()) throw InvalidArgument("job '" + spec.name + "' has an empty command");
    auto cat_it = cats_.find(spec.category);
    if (cat_it == cats_.end()) {
        std::string known;
        for (const auto& [k, v] : cats_) {
            (void)v;
            if (!known.empty()) known += ", ";
            known += k;
        }
        throw InvalidArgument("no scheduling policy for category '" + spec.category +
                              "' (known: " + known + ")");
    }

    auto job = std::make_unique<Job>();
    job->name = std::move(spec.name);
    job->category = std::move(spec.category);
    job->argv = std::move(spec.argv);
    job->workdir = std::move(spec.workdir);
    job->timeout_s = spec.timeout_s;
    job->restarts_on_timeout = spec.restarts_on_timeout;
    job->task = spec.task;
    job->onstart = std::move(spec.onstart);
    job->ondone = std::move(spec.ondone);
    Job* raw = job.get();
    if (raw->task) raw->task->jobs.push_back(raw);
    jobs_.push_back(std::move(job));
    cat_it->second.queue.push_back(raw);
    log_.info(raw->name, "submitted",
              strfmt("category=%s task=%s", raw->category.c_str(),
                     raw->task ? raw->task->path().c_str() : "-"));
    return raw;
}

void ExecPool::shutdown() {
    std::lock_guard<std::recursive_mutex> lk(mu_);
    accepting_ = false;
}

int ExecPool::running_count_locked() const {
    int n = 0;
    for (const auto& j : jobs_)
        if (j->state == JobState::Running || j->state == JobState::Postponed) ++n;
    return n;
}

int ExecPool::slot_count(const std::string& category) const {
    std::lock_guard<std::recursive_mutex> lk(mu_);
    int n = 0;
    for (const auto& [name, cat] : cats_)
        if (category.empty() || name == category) n += static_cast<int>(cat.slots.size());
    return n;
}

int ExecPool::worker_cap() const {
    std::lock_guard<std::recursive_mutex> lk(mu_);
    return worker_cap_;
}

void ExecPool::start_eligible_locked() {
    if (stopping_) return;
    for (auto& [name, cat] : cats_) {
        (void)name;
        while (!cat.queue.empty()) {
            if (running_count_locked() >= worker_cap_) return;
            size_t slot_idx = cat.slots.size();
            for (size_t i = 0; i < cat.slots.size(); ++i) {
                if (!cat.slots[i].occupant) {
                    slot_idx = i;
                    break;
                }
            }
            if (slot_idx == cat.slots.size()) break; // category saturated
            Job* job = cat.queue.front();
            cat.queue.erase(cat.queue.begin());
            start_job_locked(*job, slot_idx, cat);
        }
    }
}

void ExecPool::start_job_locked(Job& job, size_t slot_idx, CategoryState& cat) {
    SpawnOptions opt;
    opt.argv = job.argv;
    opt.workdir = job.workdir;
    if (!job.workdir.empty()) {
        opt.stdout_path = job.workdir / "logs" / (job.name + ".out");
        opt.stderr_path = job.workdir / "logs" / (job.name + ".err");
    }
    if (cfg_.bind_cpus) opt.cpus = &cat.slots[slot_idx].cpus;

    job.attempts += 1;
    job.started_mono = std::chrono::steady_clock::now();
    job.started_wall = std::chrono::system_clock::now();
    job.rss_mib = 0;

    try {
        job.pid = spawn_child(opt);
    } catch (const std::exception& e) {
        job.outcome_note = std::string("spawn failed: ") + e.what();
        log_.error(job.name, "spawn_error", e.what());
        finish_job_locked(job, JobState::Failed);
        return;
    }
    job.state = JobState::Running;
    cat.slots[slot_idx].occupant = &job;

    if (cfg_.bind_cpus) {
        std::string err;
        if (!bind_affinity(job.pid, cat.slots[slot_idx].cpus, &err))
            log_.warn(job.name, "bindfail",
                      strfmt("slot=%s err=%s", cat.slots[slot_idx].cpus.to_string().c_str(),
                             err.c_str()));
    }
    log_.info(job.name, "start",
              strfmt("attempt=%d category=%s slot=%s pid=%d t=%.6f", job.attempts,
                     job.category.c_str(), cat.slots[slot_idx].cpus.to_string().c_str(),
                     static_cast<int>(job.pid), epoch_seconds(job.started_wall)));
    if (job.onstart) {
        try {
            job.onstart(job);
        } catch (const std::exception& e) {
            log_.error(job.name, "callback_error", std::string("onstart: ") + e.what());
        }
    }
}

void ExecPool::reap_finished() {
    for (;;) {
        int status = 0;
        rusage ru{};
        const pid_t pid = wait4(-1, &status, WNOHANG, &ru);
        if (pid <= 0) break;
        std::lock_guard<std::recursive_mutex> lk(mu_);
        for (auto& j : jobs_) {
            if (j->pid == pid && !is_terminal(j->state) && j->state != JobState::Pending) {
                finalize_reaped_locked(*j, status, ru);
                break;
            }
        }
    }
}

void ExecPool::finalize_reaped_locked(Job& job, int status, const rusage& ru) {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - job.started_mono).count();
    job.last_wall_s = wall;
    RunRecord rec = make_record(job.name, job.attempts, status, ru, wall, job.started_wall);
    job.rss_mib = rec.peak_rss_mib;
    if (!cfg_.resources_csv.empty()) append_record(rec, cfg_.resources_csv);

    for (auto& [name, cat] : cats_) {
        (void)name;
        for (auto& slot : cat.slots)
            if (slot.occupant == &job) slot.occupant = nullptr;
    }
    job.pid = -1;
    term_sent_.erase(job.name);
    KillWhy why = KillWhy::None;
    if (auto it = kill_why_.find(job.name); it != kill_why_.end()) {
        why = it->second;
        kill_why_.erase(it);
    }

    log_.info(job.name, "exit",
              strfmt("attempt=%d exit=%s wall=%.3f cpu=%.3f rss=%.3f", job.attempts,
                     rec.exit_field().c_str(), rec.wall_s, rec.cpu_s, rec.peak_rss_mib));

    auto requeue = [this, &job](const char* event) {
        job.state = JobState::Pending;
        cats_[job.category].queue.push_back(&job);
        log_.info(job.name, event, strfmt("attempt=%d postponements=%d", job.attempts,
                                          job.postponements));
    };

    switch (why) {
    case KillWhy::Watchdog:
        if (stopping_)
            finish_job_locked(job, JobState::Killed);
        else
            requeue("requeued");
        break;
    case KillWhy::TimeoutRestart:
        if (stopping_) {
            finish_job_locked(job, JobState::TimedOut);
        } else {
            log_.info(job.name, "timeout_restart", strfmt("attempt=%d", job.attempts));
            requeue("requeued");
        }
        break;
    case KillWhy::Timeout:
    case KillWhy::GlobalStop:
        job.outcome_note = why == KillWhy::Timeout ? "per-job timeout" : "global timeout";
        finish_job_locked(job, JobState::TimedOut);
        break;
    case KillWhy::PostponeLimit:
        job.outcome_note = strfmt("postponed %d times; limit %d", job.postponements,
                                  cfg_.postpone_limit);
        finish_job_locked(job, JobState::Failed);
        break;
    case KillWhy::None:
        if (rec.ok()) {
            finish_job_locked(job, JobState::Done);
        } else {
            job.outcome_note = "exit " + rec.exit_field();
            finish_job_locked(job, JobState::Failed);
        }
        break;
    }
}

void ExecPool::finish_job_locked(Job& job, JobState final_state) {
    job.state = final_state;
    log_.info(job.name, to_string(final_state),
              job.outcome_note.empty() ? strfmt("attempts=%d", job.attempts)
                                       : strfmt("attempts=%d note=%s", job.attempts,
                                                job.outcome_note.c_str()));
    if (job.ondone) {
        try {
            job.ondone(job);
        } catch (const std::exception& e) {
            log_.error(job.name, "callback_error", std::string("ondone: ") + e.what());
        }
    }
    check_task_done_locked(job.task);
}

namespace {

bool task_complete(const Task& t) {
    for (const Job* j : t.jobs)
        if (!is_terminal(j->state)) return false;
    for (const Task* s : t.subtasks)
        if (!task_complete(*s)) return false;
    return true;
}

} // namespace

void ExecPool::check_task_done_locked(Task* task) {
    while (task) {
        if (task->done_fired || !task_complete(*task)) return;
        task->done_fired = true;
        log_.info("-", "task_done", "task=" + task->path());
        if (task->ondone) {
            try {
                task->ondone(*task);
            } catch (const std::exception& e) {
                log_.error("-", "callback_error",
                           "task " + task->path() + " ondone: " + e.what());
            }
        }
        task = task->parent;
    }
}

void ExecPool::send_term_locked(Job& job, KillWhy why, const std::string& detail) {
    if (job.pid < 0) return;
    if (kill_why_.count(job.name)) return; // a reason is already pending
    kill_why_[job.name] = why;
    term_sent_[job.name] = std::chrono::steady_clock::now();
    kill(job.pid, SIGTERM);
    log_.info(job.name, "killsent", detail);
}

void ExecPool::enforce_timeouts_locked() {
    const auto now = std::chrono::steady_clock::now();

    if (cfg_.global_timeout_s && !stopping_ &&
        std::chrono::duration<double>(now - run_started_).count() > *cfg_.global_timeout_s) {
        stopping_ = true;
        log_.warn("-", "global_timeout", strfmt("limit=%.3f", *cfg_.global_timeout_s));
    }

    if (stopping_) {
        // pending jobs die unstarted; running ones get the kill sequence
        for (auto& [name, cat] : cats_) {
            (void)name;
            cat.queue.clear();
        }
        for (auto& j : jobs_) {
            if (j->state == JobState::Pending) {
                j->outcome_note = "global timeout before start";
                finish_job_locked(*j, JobState::Killed);
            } else if (j->state == JobState::Running) {
                send_term_locked(*j, KillWhy::GlobalStop, "reason=global_timeout");
            }
        }
    } else {
        for (auto& j : jobs_) {
            if (j->state != JobState::Running || !j->timeout_s) continue;
            const double elapsed =
                std::chrono::duration<double>(now - j->started_mono).count();
            if (elapsed <= *j->timeout_s) continue;
            const KillWhy why = j->attempts <= j->restarts_on_timeout ? KillWhy::TimeoutRestart
                                                                      : KillWhy::Timeout;
            send_term_locked(*j, why,
                             strfmt("reason=timeout elapsed=%.3f limit=%.3f", elapsed,
                                    *j->timeout_s));
        }
    }

    // SIGTERM -> SIGKILL escalation
    for (auto it = term_sent_.begin(); it != term_sent_.end();) {
        if (std::chrono::duration<double>(now - it->second).count() > cfg_.kill_grace_s) {
            for (auto& j : jobs_) {
                if (j->name == it->first && j->pid > 0) {
                    kill(j->pid, SIGKILL);
                    log_.warn(j->name, "sigkill", "reason=kill_grace_expired");
                }
            }
            it = term_sent_.erase(it);
        } else {
            ++it;
        }
    }
}

void ExecPool::watchdog_tick_locked() {
    std::vector<Job*> workers;
    for (auto& j : jobs_)
        if (j->state == JobState::Running && !kill_why_.count(j->name)) workers.push_back(j.get());

    const auto now = std::chrono::steady_clock::now();
    std::vector<double> rss, elapsed;
    for (Job* j : workers) {
        if (auto r = sample_rss_mib(j->pid)) j->rss_mib = *r;
        rss.push_back(j->rss_mib);
        elapsed.push_back(std::chrono::duration<double>(now - j->started_mono).count());
    }

    const WatchdogDecision d = memory_rule(rss, elapsed, mem_cap_mib_);
    if (!d.victim) return;

    Job& victim = *workers[*d.victim];
    log_.warn("-", "watchdog",
              strfmt("total=%.1f mean=%.1f cap=%.1f victim=%s shrink=%d", d.total_mib, d.mean_mib,
                     mem_cap_mib_, victim.name.c_str(), d.shrink_cap ? 1 : 0));

    if (d.shrink_cap) {
        worker_cap_ = std::max(1, running_count_locked() - 1);
        log_.warn("-", "cap_shrunk", strfmt("worker_cap=%d", worker_cap_));
    }

    if (victim.postponements >= cfg_.postpone_limit) {
        send_term_locked(victim, KillWhy::PostponeLimit,
                         strfmt("reason=postpone_limit rss=%.1f", victim.rss_mib));
    } else {
        victim.postponements += 1;
        victim.state = JobState::Postponed;
        log_.info(victim.name, "postponed",
                  strfmt("count=%d rss=%.1f", victim.postponements, victim.rss_mib));
        send_term_locked(victim, KillWhy::Watchdog,
                         strfmt("reason=low_memory rss=%.1f", victim.rss_mib));
    }
}

RunSummary ExecPool::run() {
    {
        std::lock_guard<std::recursive_mutex> lk(mu_);
        run_started_ = std::chrono::steady_clock::now();
        next_watchdog_ = run_started_ + std::chrono::duration_cast<
                                            std::chrono::steady_clock::duration>(
                                            std::chrono::duration<double>(cfg_.watchdog_period_s));
        stopping_ = false;
    }
    for (;;) {
        {
            std::lock_guard<std::recursive_mutex> lk(mu_);
            start_eligible_locked();
        }
        reap_finished();
        bool active = false;
        {
            std::lock_guard<std::recursive_mutex> lk(mu_);
            enforce_timeouts_locked();
            const auto now = std::chrono::steady_clock::now();
            if (now >= next_watchdog_) {
                watchdog_tick_locked();
                while (next_watchdog_ <= now)
                    next_watchdog_ += std::chrono::duration_cast<
                        std::chrono::steady_clock::duration>(
                        std::chrono::duration<double>(cfg_.watchdog_period_s));
            }
            for (const auto& j : jobs_)
                if (!is_terminal(j->state)) {
                    active = true;
                    break;
                }
        }
        if (!active) break;
        std::this_thread::sleep_for(std::chrono::duration<double>(cfg_.poll_interval_s));
    }

    std::lock_guard<std::recursive_mutex> lk(mu_);
    RunSummary s;
    s.submitted = static_cast<int>(jobs_.size());
    for (const auto& j : jobs_) {
        switch (j->state) {
        case JobState::Done: ++s.done; break;
        case JobState::Failed: ++s.failed; break;
        case JobState::TimedOut: ++s.timedout; break;
        case JobState::Killed: ++s.killed; break;
        default: break;
        }
    }
    log_.info("-", "run_done",
              strfmt("submitted=%d done=%d failed=%d timedout=%d killed=%d", s.submitted, s.done,
                     s.failed, s.timedout, s.killed));
    return s;
}

JobView ExecPool::view_of_locked(const Job& job) const {
    JobView v;
    v.name = job.name;
    v.task = job.task ? job.task->path() : "";
    v.state = to_string(job.state);
    v.attempts = job.attempts;
    if (job.attempts > 0) {
        v.tstart = epoch_seconds(job.started_wall);
        if (job.state == JobState::Running || job.state == JobState::Postponed) {
            v.duration = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                       job.started_mono)
                             .count();
        } else {
            v.duration = job.last_wall_s;
        }
        v.rss = job.rss_mib;
    }
    return v;
}

namespace {

const char* derive_task_state(const TaskView& tv) {
    bool any_running = false, any_failed = false, any_nondone = false, any_started = false;
    std::function<void(const TaskView&)> walk = [&](const TaskView& t) {
        for (const auto& j : t.jobs) {
            if (j.state == "running" || j.state == "postponed") any_running = true;
            if (j.state == "failed" || j.state == "timedout" || j.state == "killed")
                any_failed = true;
            if (j.state != "done") any_nondone = true;
            if (j.state != "pending") any_started = true;
        }
        for (const auto& s : t.subtasks) walk(s);
    };
    walk(tv);
    if (any_running) return "running";
    if (any_failed) return "failed";
    if (!any_nondone) return "done";
    return any_started ? "running" : "pending";
}

} // namespace

StateSnapshot ExecPool::snapshot() const {
    std::lock_guard<std::recursive_mutex> lk(mu_);
    StateSnapshot snap;
    snap.timestamp = iso8601_utc(std::chrono::system_clock::now());
    snap.system = read_system_summary();
    snap.system.workers_running = running_count_locked();
    int pending = 0;
    for (const auto& j : jobs_)
        if (j->state == JobState::Pending) ++pending;
    snap.system.jobs_pending = pending;

    for (const auto& j : jobs_) snap.jobs.push_back(view_of_locked(*j));

    auto failed_state = [](const std::string& s) {
        return s == "failed" || s == "timedout" || s == "killed";
    };
    // full forest and its failed-only projection
    std::function<TaskView(const Task&, bool)> build = [&](const Task& t,
                                                           bool failed_only) -> TaskView {
        TaskView tv;
        tv.name = t.name;
        for (const Job* j : t.jobs) {
            JobView jv = view_of_locked(*j);
            if (!failed_only || failed_state(jv.state)) tv.jobs.push_back(std::move(jv));
        }
        for (const Task* s : t.subtasks) {
            TaskView sv = build(*s, failed_only);
            if (!failed_only || !sv.jobs.empty() || !sv.subtasks.empty())
                tv.subtasks.push_back(std::move(sv));
        }
        tv.state = derive_task_state(tv);
        return tv;
    };
    for (const auto& t : tasks_) {
        if (t->parent) continue;
        snap.tasks.push_back(build(*t, false));
        TaskView fv = build(*t, true);
        if (!fv.jobs.empty() || !fv.subtasks.empty()) snap.failures.push_back(std::move(fv));
    }
    // taskless failures get a synthetic root so the view stays a forest
    TaskView stray;
    stray.name = "(no-task)";
    for (const auto& j : jobs_) {
        if (j->task) continue;
        JobView jv = view_of_locked(*j);
        if (failed_state(jv.state)) stray.jobs.push_back(std::move(jv));
    }
    if (!stray.jobs.empty()) {
        stray.state = "failed";
        snap.failures.push_back(std::move(stray));
    }
    return snap;
}

} // namespace clubench
