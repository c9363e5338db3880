#pragma once

#include <sys/resource.h>
#include <sys/types.h>

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace clubench {

class CpuSet;

/// Resource footprint of one child-process attempt, as measured by the
/// parent via wait4(): wall clock, user+system CPU time, and the peak
/// resident set size the kernel reports for the child.
struct RunRecord {
    std::string job = "job";
    int attempt = 1;
    double wall_s = 0;
    double cpu_s = 0;
    double peak_rss_mib = 0;
    int exit_code = 0;       // valid when !signaled; 127 marks a failed exec
    bool signaled = false;
    int term_signal = 0;     // valid when signaled
    std::chrono::system_clock::time_point started;

    bool ok() const { return !signaled && exit_code == 0; }
    /// CSV exit column: decimal exit code, or "sig<N>" for a signal death.
    std::string exit_field() const;
};

/// How to launch a child: command, working directory, stdout/stderr
/// capture files (parents are created), and an optional CPU binding
/// applied in the child before exec.
struct SpawnOptions {
    std::vector<std::string> argv;
    std::filesystem::path workdir;     // empty: inherit
    std::filesystem::path stdout_path; // empty: inherit
    std::filesystem::path stderr_path;
    const CpuSet* cpus = nullptr;
};

/// fork + exec. Throws on fork failure; a failed exec surfaces as the
/// child exiting 127 (the usual shell convention), so a missing executable
/// produces an immediate failed RunRecord rather than an exception in the
/// parent.
pid_t spawn_child(const SpawnOptions& opt);

/// Non-blocking reap of a specific child; true when it finished, filling
/// status and rusage.
bool try_reap(pid_t pid, int& status, rusage& ru);

/// Assemble a record from a wait status + rusage (ru_maxrss arrives in KiB
/// on Linux).
RunRecord make_record(const std::string& job, int attempt, int status, const rusage& ru,
                      double wall_s, std::chrono::system_clock::time_point started);

/// Run a command to completion under profiling. Enforces the timeout with
/// SIGTERM, then SIGKILL after `kill_grace_s` if the process lingers.
RunRecord profile_run(const SpawnOptions& opt, std::optional<double> timeout_s = std::nullopt,
                      double kill_grace_s = 2.0, const std::string& jobname = "job",
                      int attempt = 1);

/// Header of the profiling CSV; append_record writes it when it creates
/// the file. Each record goes out as one O_APPEND write, so concurrent
/// appenders cannot interleave partial lines.
const char* resources_csv_header();
void append_record(const RunRecord& rec, const std::filesystem::path& csv);

/// Parsed-back profiling log, for post-mortem views and summaries.
std::vector<RunRecord> read_records(const std::filesystem::path& csv);

/// VmRSS of a live process in MiB; nullopt once it is gone.
std::optional<double> sample_rss_mib(pid_t pid);

/// MemTotal from /proc/meminfo, in MiB.
double system_ram_mib();

} // namespace clubench
