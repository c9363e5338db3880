#include "clubench/webmon.hpp"

#include <httplib.h>
#include <json.hpp>

#include <thread>

#include "clubench/util.hpp"

namespace clubench {

using nlohmann::json;

ViewRequest parse_view_request(const std::map<std::string, std::string>& params) {
    ViewRequest req;
    for (const auto& [key, value] : params) {
        if (key == "flt") {
            req.filter = parse_filter(value);
        } else if (key == "fmt") {
            if (value != "html" && value != "json")
                throw QueryError("fmt=" + value, "format must be html or json");
            req.fmt = value;
        } else if (key == "cols") {
            for (auto col : split_char(value, ',')) {
                const std::string name(trim(col));
                if (name.empty()) continue; // "cols=" and stray commas
                if (!find_field(name))
                    throw QueryError("cols=" + value, "unknown column '" + name + "'");
                req.cols.push_back(name);
            }
            if (req.cols.empty()) throw QueryError("cols=", "no columns selected");
        } else if (key == "refresh") {
            long long secs = 0;
            if (!parse_int(value, secs) || secs < 1 || secs > 86400)
                throw QueryError("refresh=" + value, "refresh must be 1..86400 seconds");
            req.refresh = static_cast<int>(secs);
        }
        // unknown parameters are ignored, as proxies tend to add their own
    }
    return req;
}

namespace {

std::string html_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

const std::vector<std::string>& all_columns() {
    static const std::vector<std::string> cols = [] {
        std::vector<std::string> v;
        for (const auto& f : filter_fields()) v.push_back(f.name);
        return v;
    }();
    return cols;
}

std::string cell_text(const JobView& j, const std::string& col) {
    if (const auto s = string_field(j, col)) return *s;
    const auto v = numeric_field(j, col);
    if (!v) return "-";
    if (col == "tstart") {
        const auto tp = std::chrono::system_clock::time_point(
            std::chrono::duration_cast<std::chrono::system_clock::duration>(
                std::chrono::duration<double>(*v)));
        return iso8601_utc(tp);
    }
    if (col == "attempts") return std::to_string(static_cast<long long>(*v));
    return strfmt("%.3f", *v);
}

json job_json(const JobView& j, const std::vector<std::string>& cols) {
    json o = json::object();
    for (const auto& col : cols) {
        if (const auto s = string_field(j, col)) {
            o[col] = *s;
        } else if (const auto v = numeric_field(j, col)) {
            if (col == "attempts")
                o[col] = static_cast<long long>(*v);
            else
                o[col] = *v;
        } else {
            o[col] = nullptr;
        }
    }
    return o;
}

json system_json(const SystemSummary& s) {
    return json{{"ram_total_mib", s.ram_total_mib},
                {"ram_used_mib", s.ram_used_mib},
                {"load1", s.load1},
                {"load5", s.load5},
                {"load15", s.load15},
                {"workers_running", s.workers_running},
                {"jobs_pending", s.jobs_pending}};
}

// shared page chrome: no <script> anywhere, refresh via <meta> only
std::string page_head(const std::string& title, int refresh) {
    std::string h = "<!DOCTYPE html><html><head><meta charset=\"utf-8\"><title>" +
                    html_escape(title) + "</title>";
    if (refresh > 0)
        h += "<meta http-equiv=\"refresh\" content=\"" + std::to_string(refresh) + "\">";
    h += "<style>"
         "body{font-family:sans-serif;margin:1.2em;background:#fff;color:#222}"
         "table{border-collapse:collapse;margin-top:.6em}"
         "th,td{border:1px solid #bbb;padding:.25em .6em;font-size:.92em;text-align:left}"
         "th{background:#eee}"
         "tr.state-failed td,tr.state-timedout td,tr.state-killed td{background:#fde8e8}"
         "tr.state-running td{background:#e8f4e8}"
         ".sys{color:#555;font-size:.9em}"
         ".nav a{margin-right:1em}"
         "ul.task{list-style:none;padding-left:1.2em}"
         "li.task{margin:.3em 0}"
         ".tstate{font-size:.85em;color:#666;margin-left:.5em}"
         "</style></head><body>";
    return h;
}

std::string nav_and_sys(const StateSnapshot& snap) {
    std::string s = "<p class=\"nav\"><a href=\"/jobs\">jobs</a><a href=\"/tasks\">tasks</a>"
                    "<a href=\"/failures\">failures</a><a href=\"/apinfo\">apinfo</a></p>";
    s += "<p class=\"sys\">" + html_escape(snap.timestamp) +
         strfmt(" | ram %.0f / %.0f MiB | load %.2f %.2f %.2f | running %d | pending %d</p>",
                snap.system.ram_used_mib, snap.system.ram_total_mib, snap.system.load1,
                snap.system.load5, snap.system.load15, snap.system.workers_running,
                snap.system.jobs_pending);
    return s;
}

std::string jobs_table(const std::vector<JobView>& jobs, const std::vector<std::string>& cols) {
    std::string t = "<table><tr>";
    for (const auto& c : cols) t += "<th>" + html_escape(c) + "</th>";
    t += "</tr>";
    for (const auto& j : jobs) {
        t += "<tr class=\"state-" + html_escape(j.state) + "\">";
        for (const auto& c : cols) t += "<td>" + html_escape(cell_text(j, c)) + "</td>";
        t += "</tr>";
    }
    t += "</table>";
    return t;
}

json task_json(const TaskView& t, const ViewRequest& req, const std::vector<std::string>& cols) {
    json o = json::object();
    o["name"] = t.name;
    o["state"] = t.state;
    o["jobs"] = json::array();
    for (const auto& j : t.jobs)
        if (matches(req.filter, j)) o["jobs"].push_back(job_json(j, cols));
    o["subtasks"] = json::array();
    for (const auto& s : t.subtasks) o["subtasks"].push_back(task_json(s, req, cols));
    return o;
}

std::string task_html(const TaskView& t, const ViewRequest& req,
                      const std::vector<std::string>& cols) {
    std::string s = "<li class=\"task\"><b>" + html_escape(t.name) + "</b><span class=\"tstate\">[" +
                    html_escape(t.state) + "]</span>";
    std::vector<JobView> jobs;
    for (const auto& j : t.jobs)
        if (matches(req.filter, j)) jobs.push_back(j);
    if (!jobs.empty()) s += jobs_table(jobs, cols);
    if (!t.subtasks.empty()) {
        s += "<ul class=\"task\">";
        for (const auto& sub : t.subtasks) s += task_html(sub, req, cols);
        s += "</ul>";
    }
    s += "</li>";
    return s;
}

} // namespace

std::string render_jobs(const StateSnapshot& snap, const ViewRequest& req) {
    const auto& cols = req.cols.empty() ? all_columns() : req.cols;
    std::vector<JobView> jobs = apply_filter(req.filter, snap.jobs);

    if (req.fmt == "json") {
        json o;
        o["timestamp"] = snap.timestamp;
        o["system"] = system_json(snap.system);
        o["jobs"] = json::array();
        for (const auto& j : jobs) o["jobs"].push_back(job_json(j, cols));
        return o.dump(2);
    }
    std::string page = page_head("jobs", req.refresh) + "<h1>jobs</h1>" + nav_and_sys(snap);
    page += strfmt("<p class=\"sys\">%zu of %zu jobs shown</p>", jobs.size(), snap.jobs.size());
    page += jobs_table(jobs, cols);
    return page + "</body></html>";
}

std::string render_tasks(const StateSnapshot& snap, const ViewRequest& req, bool failures_only) {
    const auto& cols = req.cols.empty() ? all_columns() : req.cols;
    const auto& forest = failures_only ? snap.failures : snap.tasks;
    const char* title = failures_only ? "failures" : "tasks";

    if (req.fmt == "json") {
        json o;
        o["timestamp"] = snap.timestamp;
        o["system"] = system_json(snap.system);
        o[title] = json::array();
        for (const auto& t : forest) o[title].push_back(task_json(t, req, cols));
        return o.dump(2);
    }
    std::string page = page_head(title, req.refresh) + "<h1>" + std::string(title) + "</h1>" +
                       nav_and_sys(snap);
    if (forest.empty())
        page += failures_only ? "<p>no failures</p>" : "<p>no tasks</p>";
    else {
        page += "<ul class=\"task\">";
        for (const auto& t : forest) page += task_html(t, req, cols);
        page += "</ul>";
    }
    return page + "</body></html>";
}

std::string render_apinfo(const ViewRequest& req) {
    struct Endpoint {
        const char* path;
        const char* what;
    };
    static const Endpoint endpoints[] = {
        {"/jobs", "flat job table"},
        {"/tasks", "task forest with nested jobs"},
        {"/failures", "task forest pruned to failed jobs"},
        {"/apinfo", "this description"},
    };
    static const char* params[][2] = {
        {"flt", "conjunction of clauses: <field>[:<value|lo..hi>], comma-separated; "
                "bare field tests presence; ranges apply to numeric fields only"},
        {"fmt", "html (default) or json"},
        {"cols", "comma-separated field subset for job tables"},
        {"refresh", "html auto-reload period in seconds (1..86400)"},
    };
    static const char* states[] = {"pending", "running",  "postponed", "done",
                                   "failed",  "timedout", "killed"};

    if (req.fmt == "json") {
        json o;
        o["endpoints"] = json::array();
        for (const auto& e : endpoints) o["endpoints"].push_back({{"path", e.path}, {"what", e.what}});
        o["parameters"] = json::object();
        for (const auto& p : params) o["parameters"][p[0]] = p[1];
        o["fields"] = json::array();
        for (const auto& f : filter_fields())
            o["fields"].push_back({{"name", f.name},
                                   {"type", f.numeric ? "number" : "string"},
                                   {"describe", f.describe}});
        o["states"] = json::array();
        for (const auto* s : states) o["states"].push_back(s);
        return o.dump(2);
    }

    std::string page = page_head("apinfo", req.refresh) + "<h1>apinfo</h1>";
    page += "<p class=\"nav\"><a href=\"/jobs\">jobs</a><a href=\"/tasks\">tasks</a>"
            "<a href=\"/failures\">failures</a><a href=\"/apinfo\">apinfo</a></p>";
    page += "<h2>endpoints</h2><table><tr><th>path</th><th>returns</th></tr>";
    for (const auto& e : endpoints)
        page += "<tr><td>" + std::string(e.path) + "</td><td>" + e.what + "</td></tr>";
    page += "</table><h2>query parameters</h2><table><tr><th>name</th><th>meaning</th></tr>";
    for (const auto& p : params)
        page += "<tr><td>" + std::string(p[0]) + "</td><td>" + html_escape(p[1]) + "</td></tr>";
    page += "</table><h2>job fields</h2><table><tr><th>field</th><th>type</th><th>meaning</th></tr>";
    for (const auto& f : filter_fields())
        page += "<tr><td>" + f.name + "</td><td>" + (f.numeric ? "number" : "string") +
                "</td><td>" + html_escape(f.describe) + "</td></tr>";
    page += "</table><h2>job states</h2><p>";
    for (const auto* s : states) page += std::string(s) + " ";
    page += "</p>";
    return page + "</body></html>";
}

struct WebMonitor::Impl {
    httplib::Server svr;
    std::thread th;
};

WebMonitor::WebMonitor(SnapshotFn snapshot)
    : impl_(std::make_unique<Impl>()), snapshot_(std::move(snapshot)) {
    auto handle = [this](const httplib::Request& req, httplib::Response& res,
                         const std::function<std::string(const ViewRequest&)>& render) {
        std::map<std::string, std::string> params;
        for (const auto& [k, v] : req.params) params[k] = v;
        try {
            const ViewRequest vr = parse_view_request(params);
            res.set_content(render(vr),
                            vr.fmt == "json" ? "application/json" : "text/html; charset=utf-8");
        } catch (const QueryError& e) {
            res.status = 400;
            res.set_content(std::string(e.what()) + "\n", "text/plain");
        } catch (const std::exception& e) {
            res.status = 500;
            res.set_content(std::string(e.what()) + "\n", "text/plain");
        }
    };

    impl_->svr.Get("/jobs", [this, handle](const httplib::Request& rq, httplib::Response& rs) {
        handle(rq, rs, [this](const ViewRequest& vr) { return render_jobs(snapshot_(), vr); });
    });
    impl_->svr.Get("/tasks", [this, handle](const httplib::Request& rq, httplib::Response& rs) {
        handle(rq, rs,
               [this](const ViewRequest& vr) { return render_tasks(snapshot_(), vr, false); });
    });
    impl_->svr.Get("/failures", [this, handle](const httplib::Request& rq, httplib::Response& rs) {
        handle(rq, rs,
               [this](const ViewRequest& vr) { return render_tasks(snapshot_(), vr, true); });
    });
    impl_->svr.Get("/apinfo", [handle](const httplib::Request& rq, httplib::Response& rs) {
        handle(rq, rs, [](const ViewRequest& vr) { return render_apinfo(vr); });
    });
    impl_->svr.Get("/", [](const httplib::Request&, httplib::Response& res) {
        res.set_redirect("/jobs");
    });
}

WebMonitor::~WebMonitor() { stop(); }

int WebMonitor::start(int port) {
    auto& svr = impl_->svr;
    if (port == 0) {
        port_ = svr.bind_to_any_port("0.0.0.0");
        if (port_ <= 0) throw std::runtime_error("web monitor: cannot bind an ephemeral port");
    } else {
        if (!svr.bind_to_port("0.0.0.0", port))
            throw std::runtime_error("web monitor: cannot bind port " + std::to_string(port));
        port_ = port;
    }
    impl_->th = std::thread([this] { impl_->svr.listen_after_bind(); });
    svr.wait_until_ready();
    return port_;
}

void WebMonitor::stop() {
    if (impl_->th.joinable()) {
        impl_->svr.stop();
        impl_->th.join();
    }
}

} // namespace clubench
