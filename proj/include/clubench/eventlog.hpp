#pragma once

#include <chrono>
#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

namespace clubench {

/// Append-only, line-oriented run journal:
///   <iso8601> <LEVEL> <job> <event> <detail>
/// One line per event; `job` and `event` are single tokens, `detail`
/// runs to end of line (conventionally "key=value" pairs). Entries are
/// kept in memory and, when a path is given, appended to the file with
/// one write() each so concurrent readers never see torn lines.
class EventLog {
public:
    enum class Level { Info, Warn, Error };

    struct Entry {
        std::chrono::system_clock::time_point time;
        Level level = Level::Info;
        std::string job;
        std::string event;
        std::string detail;
    };

    EventLog() = default;
    explicit EventLog(std::filesystem::path file);
    ~EventLog();

    EventLog(const EventLog&) = delete;
    EventLog& operator=(const EventLog&) = delete;

    void info(const std::string& job, const std::string& event, const std::string& detail = "");
    void warn(const std::string& job, const std::string& event, const std::string& detail = "");
    void error(const std::string& job, const std::string& event, const std::string& detail = "");

    std::vector<Entry> entries() const;
    const std::filesystem::path& path() const { return path_; }

    /// Reads a journal back; malformed lines raise ParseError.
    static std::vector<Entry> parse(const std::filesystem::path& file);

    static const char* level_name(Level l);

private:
    void append(Level l, const std::string& job, const std::string& event,
                const std::string& detail);

    mutable std::mutex mu_;
    std::vector<Entry> entries_;
    std::filesystem::path path_;
    int fd_ = -1;
};

} // namespace clubench
