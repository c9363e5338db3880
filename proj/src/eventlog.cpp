#include "clubench/eventlog.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cstring>
#include <fstream>

#include "clubench/util.hpp"

namespace clubench {

EventLog::EventLog(std::filesystem::path file) : path_(std::move(file)) {
    if (path_.empty()) return;
    if (!path_.parent_path().empty()) std::filesystem::create_directories(path_.parent_path());
    fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd_ < 0)
        throw ParseError(path_.string() + ": cannot open event log: " + std::strerror(errno));
}

EventLog::~EventLog() {
    if (fd_ >= 0) ::close(fd_);
}

const char* EventLog::level_name(Level l) {
    switch (l) {
    case Level::Info: return "INFO";
    case Level::Warn: return "WARN";
    case Level::Error: return "ERROR";
    }
    return "?";
}

void EventLog::info(const std::string& job, const std::string& event, const std::string& detail) {
    append(Level::Info, job, event, detail);
}
void EventLog::warn(const std::string& job, const std::string& event, const std::string& detail) {
    append(Level::Warn, job, event, detail);
}
void EventLog::error(const std::string& job, const std::string& event, const std::string& detail) {
    append(Level::Error, job, event, detail);
}

void EventLog::append(Level l, const std::string& job, const std::string& event,
                      const std::string& detail) {
    Entry e{std::chrono::system_clock::now(), l, job, event, detail};
    std::string line = iso8601_utc(e.time);
    line += ' ';
    line += level_name(l);
    line += ' ';
    line += job.empty() ? "-" : job;
    line += ' ';
    line += event;
    if (!detail.empty()) {
        line += ' ';
        line += detail;
    }
    line += '\n';

    std::lock_guard<std::mutex> lk(mu_);
    entries_.push_back(std::move(e));
    if (fd_ >= 0) {
        ssize_t rc = ::write(fd_, line.data(), line.size()); // single write: no torn lines
        (void)rc;
    }
}

std::vector<EventLog::Entry> EventLog::entries() const {
    std::lock_guard<std::mutex> lk(mu_);
    return entries_;
}

std::vector<EventLog::Entry> EventLog::parse(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ParseError(file.string() + ": cannot open");
    std::vector<Entry> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view s = trim(line);
        if (s.empty()) continue;
        auto tok = split_ws(s);
        if (tok.size() < 4) throw ParseError(file.string(), lineno, "expected at least 4 fields");
        Entry e;

        // "2026-08-22T10:00:00.123Z"
        std::tm tm{};
        int ms = 0;
        const std::string ts(tok[0]);
        if (sscanf(ts.c_str(), "%d-%d-%dT%d:%d:%d.%dZ", &tm.tm_year, &tm.tm_mon, &tm.tm_mday,
                   &tm.tm_hour, &tm.tm_min, &tm.tm_sec, &ms) < 6)
            throw ParseError(file.string(), lineno, "bad timestamp '" + ts + "'");
        tm.tm_year -= 1900;
        tm.tm_mon -= 1;
        const time_t t = timegm(&tm);
        e.time = std::chrono::system_clock::from_time_t(t) + std::chrono::milliseconds(ms);

        if (tok[1] == "INFO")
            e.level = Level::Info;
        else if (tok[1] == "WARN")
            e.level = Level::Warn;
        else if (tok[1] == "ERROR")
            e.level = Level::Error;
        else
            throw ParseError(file.string(), lineno, "bad level '" + std::string(tok[1]) + "'");

        e.job = std::string(tok[2]);
        e.event = std::string(tok[3]);
        if (tok.size() > 4) {
            const char* base = s.data();
            const size_t off = static_cast<size_t>(tok[4].data() - base);
            e.detail = std::string(s.substr(off));
        }
        out.push_back(std::move(e));
    }
    return out;
}

} // namespace clubench
