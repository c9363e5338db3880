#include "clubench/profiler.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <fstream>
#include <mutex>
#include <thread>

#include "clubench/snapshot.hpp"
#include "clubench/topology.hpp"
#include "clubench/util.hpp"

namespace clubench {

std::string RunRecord::exit_field() const {
    return signaled ? "sig" + std::to_string(term_signal) : std::to_string(exit_code);
}

pid_t spawn_child(const SpawnOptions& opt) {
    if (opt.argv.empty()) throw InvalidArgument("spawn: empty command");

    std::vector<char*> argv;
    argv.reserve(opt.argv.size() + 1);
    for (const auto& a : opt.argv) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);

    if (!opt.stdout_path.empty() && !opt.stdout_path.parent_path().empty())
        std::filesystem::create_directories(opt.stdout_path.parent_path());
    if (!opt.stderr_path.empty() && !opt.stderr_path.parent_path().empty())
        std::filesystem::create_directories(opt.stderr_path.parent_path());

    const pid_t pid = fork();
    if (pid < 0) throw std::runtime_error(std::string("fork: ") + std::strerror(errno));
    if (pid == 0) {
        // child: best effort on the plumbing, then exec or die with 127
        if (opt.cpus && !opt.cpus->empty()) {
            std::string err;
            bind_affinity(0, *opt.cpus, &err); // advisory; parent logs its own attempt
        }
        auto redirect = [](const std::filesystem::path& p, int target) {
            if (p.empty()) return true;
            const int fd = ::open(p.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
            if (fd < 0) return false;
            const bool ok = dup2(fd, target) >= 0;
            ::close(fd);
            return ok;
        };
        // capture files resolve against the parent's cwd (where they were
        // just created), so they must be opened before the chdir
        if (!redirect(opt.stdout_path, STDOUT_FILENO)) _exit(127);
        if (!redirect(opt.stderr_path, STDERR_FILENO)) _exit(127);
        if (!opt.workdir.empty() && chdir(opt.workdir.c_str()) != 0) _exit(127);
        execvp(argv[0], argv.data());
        _exit(127);
    }
    return pid;
}

bool try_reap(pid_t pid, int& status, rusage& ru) {
    std::memset(&ru, 0, sizeof(ru));
    const pid_t r = wait4(pid, &status, WNOHANG, &ru);
    return r == pid;
}

RunRecord make_record(const std::string& job, int attempt, int status, const rusage& ru,
                      double wall_s, std::chrono::system_clock::time_point started) {
    RunRecord rec;
    rec.job = job;
    rec.attempt = attempt;
    rec.wall_s = wall_s;
    rec.cpu_s = ru.ru_utime.tv_sec + ru.ru_utime.tv_usec * 1e-6 + ru.ru_stime.tv_sec +
                ru.ru_stime.tv_usec * 1e-6;
    rec.peak_rss_mib = static_cast<double>(ru.ru_maxrss) / 1024.0; // KiB on Linux
    rec.started = started;
    if (WIFSIGNALED(status)) {
        rec.signaled = true;
        rec.term_signal = WTERMSIG(status);
    } else {
        rec.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }
    return rec;
}

RunRecord profile_run(const SpawnOptions& opt, std::optional<double> timeout_s,
                      double kill_grace_s, const std::string& jobname, int attempt) {
    const auto started = std::chrono::system_clock::now();
    const auto t0 = std::chrono::steady_clock::now();
    const pid_t pid = spawn_child(opt);

    bool term_sent = false, kill_sent = false;
    std::chrono::steady_clock::time_point term_at;
    int status = 0;
    rusage ru;
    for (;;) {
        if (try_reap(pid, status, ru)) break;
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                                   .count();
        if (timeout_s && elapsed > *timeout_s && !term_sent) {
            kill(pid, SIGTERM);
            term_sent = true;
            term_at = std::chrono::steady_clock::now();
        }
        if (term_sent && !kill_sent &&
            std::chrono::duration<double>(std::chrono::steady_clock::now() - term_at).count() >
                kill_grace_s) {
            kill(pid, SIGKILL);
            kill_sent = true;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return make_record(jobname, attempt, status, ru, wall, started);
}

const char* resources_csv_header() { return "job,attempt,wall_s,cpu_s,peak_rss_mib,exit,started"; }

void append_record(const RunRecord& rec, const std::filesystem::path& csv) {
    static std::mutex mu; // serialize in-process appenders
    std::lock_guard<std::mutex> lk(mu);

    if (!csv.parent_path().empty()) std::filesystem::create_directories(csv.parent_path());
    std::string line = rec.job + ',' + std::to_string(rec.attempt) + ',' +
                       strfmt("%.3f,%.3f,%.3f", rec.wall_s, rec.cpu_s, rec.peak_rss_mib) + ',' +
                       rec.exit_field() + ',' + iso8601_utc(rec.started) + '\n';

    // First writer creates the file together with the header.
    int fd = ::open(csv.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_APPEND, 0644);
    if (fd >= 0) {
        line = std::string(resources_csv_header()) + '\n' + line;
    } else {
        fd = ::open(csv.c_str(), O_WRONLY | O_APPEND);
        if (fd < 0)
            throw ParseError(csv.string() + ": cannot append: " + std::strerror(errno));
    }
    ssize_t rc = ::write(fd, line.data(), line.size());
    (void)rc;
    ::close(fd);
}

std::vector<RunRecord> read_records(const std::filesystem::path& csv) {
    std::ifstream in(csv);
    if (!in) throw ParseError(csv.string() + ": cannot open");
    std::vector<RunRecord> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view s = trim(line);
        if (s.empty() || s.substr(0, 4) == "job,") continue;
        auto f = split_char(s, ',');
        if (f.size() != 7)
            throw ParseError(csv.string(), lineno,
                             "expected 7 fields, got " + std::to_string(f.size()));
        RunRecord r;
        r.job = std::string(f[0]);
        long long attempt = 0;
        if (!parse_int(f[1], attempt) || !parse_double(f[2], r.wall_s) ||
            !parse_double(f[3], r.cpu_s) || !parse_double(f[4], r.peak_rss_mib))
            throw ParseError(csv.string(), lineno, "malformed record");
        r.attempt = static_cast<int>(attempt);
        if (f[5].substr(0, 3) == "sig") {
            r.signaled = true;
            long long sig = 0;
            if (!parse_int(f[5].substr(3), sig))
                throw ParseError(csv.string(), lineno, "bad exit field");
            r.term_signal = static_cast<int>(sig);
        } else {
            long long code = 0;
            if (!parse_int(f[5], code))
                throw ParseError(csv.string(), lineno, "bad exit field");
            r.exit_code = static_cast<int>(code);
        }
        // "2023-11-14T22:13:20.000Z": calendar part via strptime, then the
        // millisecond fraction by hand.
        const std::string ts(f[6]);
        std::tm tm{};
        const char* rest = strptime(ts.c_str(), "%Y-%m-%dT%H:%M:%S", &tm);
        long long ms = 0;
        if (!rest || *rest != '.' || !parse_int(std::string_view(rest + 1, 3), ms) ||
            std::string_view(rest).size() != 5 || rest[4] != 'Z')
            throw ParseError(csv.string(), lineno, "bad started field");
        r.started = std::chrono::system_clock::from_time_t(timegm(&tm)) +
                    std::chrono::milliseconds(ms);
        out.push_back(std::move(r));
    }
    return out;
}

std::optional<double> sample_rss_mib(pid_t pid) {
    std::ifstream in("/proc/" + std::to_string(pid) + "/status");
    if (!in) return std::nullopt;
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("VmRSS:", 0) != 0) continue;
        auto tok = split_ws(std::string_view(line).substr(6));
        long long kib = 0;
        if (!tok.empty() && parse_int(tok[0], kib)) return static_cast<double>(kib) / 1024.0;
        return std::nullopt;
    }
    return std::nullopt;
}

double system_ram_mib() {
    std::ifstream in("/proc/meminfo");
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("MemTotal:", 0) != 0) continue;
        auto tok = split_ws(std::string_view(line).substr(9));
        long long kib = 0;
        if (!tok.empty() && parse_int(tok[0], kib)) return static_cast<double>(kib) / 1024.0;
    }
    return 0;
}

SystemSummary read_system_summary() {
    SystemSummary s;
    std::ifstream in("/proc/meminfo");
    std::string line;
    long long total_kib = 0, avail_kib = 0;
    while (std::getline(in, line)) {
        auto grab = [&line](const char* key, long long& out) {
            const size_t klen = std::strlen(key);
            if (line.rfind(key, 0) != 0) return;
            auto tok = split_ws(std::string_view(line).substr(klen));
            if (!tok.empty()) parse_int(tok[0], out);
        };
        grab("MemTotal:", total_kib);
        grab("MemAvailable:", avail_kib);
    }
    s.ram_total_mib = static_cast<double>(total_kib) / 1024.0;
    s.ram_used_mib = static_cast<double>(total_kib - avail_kib) / 1024.0;
    double loads[3] = {0, 0, 0};
    if (getloadavg(loads, 3) == 3) {
        s.load1 = loads[0];
        s.load5 = loads[1];
        s.load15 = loads[2];
    }
    return s;
}

} // namespace clubench
