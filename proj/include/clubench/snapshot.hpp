#pragma once

#include <optional>
#include <string>
#include <vector>

namespace clubench {

/// Read-only projection of one job for monitoring and filtering. Optional
/// fields are absent until the job has the data: tstart/duration need a
/// first start, rss needs a sample or a finished attempt.
struct JobView {
    std::string name;
    std::string task;  // full task path, "" for taskless jobs
    std::string state; // lowercase state name
    std::optional<double> tstart;   // epoch seconds of the last start
    std::optional<double> duration; // seconds: running -> so far, finished -> final
    std::optional<double> rss;      // MiB: running -> last sample, finished -> peak
    int attempts = 0;
};

struct TaskView {
    std::string name;  // path component
    std::string state; // pending | running | done | failed
    std::vector<TaskView> subtasks;
    std::vector<JobView> jobs;
};

struct SystemSummary {
    double ram_total_mib = 0;
    double ram_used_mib = 0;
    double load1 = 0, load5 = 0, load15 = 0;
    int workers_running = 0;
    int jobs_pending = 0;
};

/// Full monitoring state at one instant; what the web views render.
struct StateSnapshot {
    std::string timestamp; // ISO 8601 UTC
    SystemSummary system;
    std::vector<JobView> jobs;      // submission order
    std::vector<TaskView> tasks;    // the whole forest
    std::vector<TaskView> failures; // forest pruned to failed jobs
};

/// Current machine figures (RAM from /proc/meminfo, load averages).
SystemSummary read_system_summary();

} // namespace clubench
