#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "clubench/eventlog.hpp"
#include "clubench/profiler.hpp"
#include "clubench/snapshot.hpp"
#include "clubench/topology.hpp"

namespace clubench {

/// Job lifecycle. Pending -> Running -> {Done, Failed, TimedOut, Killed};
/// a watchdog victim takes Running -> Postponed -> Pending and runs again
/// from scratch. `attempts` counts entries into Running.
enum class JobState { Pending, Running, Postponed, Done, Failed, TimedOut, Killed };
const char* to_string(JobState s);
bool is_terminal(JobState s);

class ExecPool;
struct Task;

/// A scheduled external process. Owned by the pool; pointers stay valid
/// for the pool's lifetime.
struct Job {
    std::string name;
    std::string category = "algorithm";
    std::vector<std::string> argv;
    std::filesystem::path workdir; // logs land in <workdir>/logs/<name>.{out,err}
    std::optional<double> timeout_s;
    int restarts_on_timeout = 0;
    Task* task = nullptr;
    std::function<void(const Job&)> onstart;
    std::function<void(const Job&)> ondone; // terminal states only

    // runtime, owned by the pool
    JobState state = JobState::Pending;
    int attempts = 0;
    int postponements = 0;
    pid_t pid = -1;
    double rss_mib = 0; // last watchdog sample; peak RSS once finished
    std::chrono::steady_clock::time_point started_mono;
    std::chrono::system_clock::time_point started_wall;
    double last_wall_s = 0;
    std::string outcome_note; // one-liner: exit code, signal, reason
};

/// Grouping node for related jobs; tasks form a forest and complete when
/// every job and subtask below them is terminal.
struct Task {
    std::string name; // path component: no whitespace or '/'
    Task* parent = nullptr;
    std::vector<Task*> subtasks;
    std::vector<Job*> jobs;
    std::function<void(const Task&)> ondone;
    bool done_fired = false;

    std::string path() const; // "root/sub/leaf"
};

/// What a job asks of the machine: the slot granularity of its category
/// and an optional cap on simultaneous slots.
struct CategoryPolicy {
    AffinityUnit unit = AffinityUnit::PhysCore;
    std::optional<int> max_slots;
};

struct PoolConfig {
    TopologyMap topology;
    std::map<std::string, CategoryPolicy> policies = default_policies();

    /// Memory cap for the watchdog: a fraction of system RAM, or an
    /// absolute override when set.
    double mem_limit_fraction = 0.9;
    std::optional<double> mem_limit_mib;
    double watchdog_period_s = 1.0;
    int postpone_limit = 3;

    std::optional<double> global_timeout_s;
    double kill_grace_s = 2.0;   // SIGTERM -> SIGKILL
    double poll_interval_s = 0.02;

    std::filesystem::path log_path;      // event journal; empty keeps it in memory
    std::filesystem::path resources_csv; // per-attempt profiling; empty disables
    bool bind_cpus = true;               // pin children to their slot

    static std::map<std::string, CategoryPolicy> default_policies();

    double mem_cap_mib() const; // resolves fraction vs. absolute
};

/// Decision of one watchdog tick, split out as a pure function for direct
/// testing. Over the cap, the "heavy" group is every worker at or above
/// the mean RSS; with two or more heavy workers the shortest-running of
/// them is killed and postponed, with exactly one the single heavy worker
/// is killed and the worker cap shrinks by one.
struct WatchdogDecision {
    std::optional<size_t> victim; // index into the sampled arrays
    bool shrink_cap = false;
    double total_mib = 0;
    double mean_mib = 0;
};
WatchdogDecision memory_rule(const std::vector<double>& rss_mib,
                             const std::vector<double>& elapsed_s, double cap_mib);

struct JobSpec {
    std::string name;
    std::vector<std::string> argv;
    std::string category = "algorithm";
    std::filesystem::path workdir;
    std::optional<double> timeout_s;
    int restarts_on_timeout = 0;
    Task* task = nullptr;
    std::function<void(const Job&)> onstart;
    std::function<void(const Job&)> ondone;
};

struct RunSummary {
    int submitted = 0;
    int done = 0;
    int failed = 0;
    int timedout = 0;
    int killed = 0;
    bool ok() const { return failed == 0 && timedout == 0 && killed == 0; }
};

/// Multi-process scheduler: jobs queue FIFO per category, each start takes
/// a free CPU slot of that category's granularity, children are pinned to
/// their slot, profiled on exit, supervised for timeouts, and jointly kept
/// under a memory cap by the low-memory watchdog.
class ExecPool {
public:
    explicit ExecPool(PoolConfig cfg);
    ~ExecPool(); // kills and reaps any stragglers

    ExecPool(const ExecPool&) = delete;
    ExecPool& operator=(const ExecPool&) = delete;

    /// Nodes of the task forest; name is one path component.
    Task* add_task(const std::string& name, Task* parent = nullptr,
                   std::function<void(const Task&)> ondone = {});

    /// Queue a job. Throws InvalidArgument for empty/duplicate names, an
    /// unknown category (named in the message), an empty command, or
    /// submission after shutdown.
    const Job* submit(JobSpec spec);

    /// Drive everything to a terminal state; returns tallies. Callable
    /// repeatedly as long as new jobs were submitted in between.
    RunSummary run();

    /// Refuse further submissions.
    void shutdown();

    StateSnapshot snapshot() const;
    const EventLog& log() const { return log_; }
    const PoolConfig& config() const { return cfg_; }

    /// Slots the pool carved out for a category (empty name: all).
    int slot_count(const std::string& category) const;
    /// Current vacancy-aware worker cap (shrinks on single-heavy kills).
    int worker_cap() const;

private:
    enum class KillWhy { None, Timeout, TimeoutRestart, Watchdog, PostponeLimit, GlobalStop };

    struct Slot {
        CpuSet cpus;
        Job* occupant = nullptr;
    };
    struct CategoryState {
        std::vector<Slot> slots;
        std::vector<Job*> queue; // FIFO
    };

    void start_eligible_locked();
    void start_job_locked(Job& job, size_t slot_idx, CategoryState& cat);
    void reap_finished();
    void finalize_reaped_locked(Job& job, int status, const rusage& ru);
    void enforce_timeouts_locked();
    void watchdog_tick_locked();
    void send_term_locked(Job& job, KillWhy why, const std::string& detail);
    void finish_job_locked(Job& job, JobState final_state);
    void check_task_done_locked(Task* task);
    int running_count_locked() const;
    JobView view_of_locked(const Job& job) const;

    PoolConfig cfg_;
    EventLog log_;
    // recursive: onstart/ondone callbacks may submit follow-up jobs
    mutable std::recursive_mutex mu_;
    std::vector<std::unique_ptr<Job>> jobs_;
    std::vector<std::unique_ptr<Task>> tasks_;
    std::map<std::string, CategoryState> cats_;
    std::map<std::string, KillWhy> kill_why_; // job name -> pending kill reason
    std::map<std::string, std::chrono::steady_clock::time_point> term_sent_;
    double mem_cap_mib_ = 0;
    int worker_cap_ = 0; // max concurrent workers; shrinks on k=1 kills
    bool accepting_ = true;
    bool stopping_ = false; // global timeout fired
    std::chrono::steady_clock::time_point run_started_;
    std::chrono::steady_clock::time_point next_watchdog_;
};

} // namespace clubench
