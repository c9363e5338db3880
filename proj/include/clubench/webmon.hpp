#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>

#include "clubench/filter.hpp"
#include "clubench/snapshot.hpp"

namespace clubench {

/// Parsed query parameters shared by all monitor views:
///   flt=<field>[:<value|lo..hi>][,<clause>...]   conjunction filter
///   fmt=html|json                                 response body format
///   cols=<field>[,<field>...]                     job-table columns
///   refresh=<seconds>                             html meta-refresh
/// Anything malformed raises QueryError naming the offending piece.
struct ViewRequest {
    FilterQuery filter;
    std::vector<std::string> cols; // empty: every field
    std::string fmt = "html";
    int refresh = 0; // 0: no auto-reload
};
ViewRequest parse_view_request(const std::map<std::string, std::string>& params);

/// Pure renderers; the HTTP layer only routes to them. HTML output carries
/// no scripts — reload is driven by the meta-refresh tag alone.
std::string render_jobs(const StateSnapshot& snap, const ViewRequest& req);
std::string render_tasks(const StateSnapshot& snap, const ViewRequest& req, bool failures_only);
std::string render_apinfo(const ViewRequest& req);

/// Read-only monitor: serves /jobs, /tasks, /failures and /apinfo off a
/// snapshot callback. GET only; any state mutation is out of scope.
class WebMonitor {
public:
    using SnapshotFn = std::function<StateSnapshot()>;

    explicit WebMonitor(SnapshotFn snapshot);
    ~WebMonitor();

    WebMonitor(const WebMonitor&) = delete;
    WebMonitor& operator=(const WebMonitor&) = delete;

    /// Binds and serves on a background thread. port 0 picks a free
    /// ephemeral port; the bound port is returned. Throws on bind failure.
    int start(int port);
    void stop();
    int port() const { return port_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    SnapshotFn snapshot_;
    int port_ = 0;
};

} // namespace clubench
